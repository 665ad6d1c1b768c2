#pragma once

// TCP transport for the two-round protocol. Frames are a 4-byte big-endian
// length followed by a UTF-8 JSON envelope {version, kind, client_id, payload};
// tensors travel base64-encoded inside the payload.

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"

#include "fedcdh/discovery.hpp"
#include "fedcdh/error.hpp"
#include "fedcdh/federation.hpp"
#include "fedcdh/summary.hpp"

namespace fedcdh {

namespace wire {

using clock = std::chrono::steady_clock;

inline constexpr std::uint32_t kMaxFrame = 1u << 30;

enum class Kind { Hello, ScalarMoments, FeatureSpecBroadcast, LocalMomentsUpload, Ack, Error };

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::Hello: return "Hello";
    case Kind::ScalarMoments: return "ScalarMoments";
    case Kind::FeatureSpecBroadcast: return "FeatureSpecBroadcast";
    case Kind::LocalMomentsUpload: return "LocalMomentsUpload";
    case Kind::Ack: return "Ack";
    case Kind::Error: return "Error";
  }
  return "?";
}

inline std::optional<Kind> kind_from_string(std::string_view s) {
  for (Kind k : {Kind::Hello, Kind::ScalarMoments, Kind::FeatureSpecBroadcast, Kind::LocalMomentsUpload, Kind::Ack,
                 Kind::Error})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

// --- base64 (RFC 4648, padded) ------------------------------------------------

inline std::string base64_encode(std::string_view in) {
  static constexpr char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  std::string out;
  out.reserve((in.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < in.size(); i += 3) {
    const std::uint32_t v = (std::uint8_t(in[i]) << 16) | (std::uint8_t(in[i + 1]) << 8) | std::uint8_t(in[i + 2]);
    out += {tbl[v >> 18], tbl[(v >> 12) & 63], tbl[(v >> 6) & 63], tbl[v & 63]};
  }
  if (const auto rest = in.size() - i; rest == 1) {
    const std::uint32_t v = std::uint8_t(in[i]) << 16;
    out += {tbl[v >> 18], tbl[(v >> 12) & 63], '=', '='};
  } else if (rest == 2) {
    const std::uint32_t v = (std::uint8_t(in[i]) << 16) | (std::uint8_t(in[i + 1]) << 8);
    out += {tbl[v >> 18], tbl[(v >> 12) & 63], tbl[(v >> 6) & 63], '='};
  }
  return out;
}

inline std::string base64_decode(std::string_view in) {
  auto val = [](char c) -> int {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
  };
  if (in.size() % 4 != 0) throw protocol_error("base64 length is not a multiple of 4");
  std::string out;
  out.reserve(in.size() / 4 * 3);
  for (std::size_t i = 0; i < in.size(); i += 4) {
    const bool last = i + 4 == in.size();
    const int pad = last ? (in[i + 3] == '=') + (in[i + 2] == '=') : 0;
    std::uint32_t v = 0;
    for (int j = 0; j < 4; ++j) {
      const int x = j >= 4 - pad ? 0 : val(in[i + j]);
      if (x < 0) throw protocol_error("invalid base64 character");
      v = (v << 6) | static_cast<std::uint32_t>(x);
    }
    out.push_back(static_cast<char>(v >> 16));
    if (pad < 2) out.push_back(static_cast<char>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

// --- envelopes ----------------------------------------------------------------

struct Message {
  int version = kProtocolVersion;
  std::string kind;  // kept as text so unknown kinds survive decoding
  std::string client_id;
  nlohmann::json payload = nlohmann::json::object();
};

inline std::string encode(const Message& m) {
  return nlohmann::json{{"version", m.version}, {"kind", m.kind}, {"client_id", m.client_id}, {"payload", m.payload}}
      .dump();
}

inline Message decode(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    Message m;
    m.version = j.at("version").get<int>();
    m.kind = j.at("kind").get<std::string>();
    m.client_id = j.value("client_id", "");
    m.payload = j.value("payload", nlohmann::json::object());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw protocol_error(std::string("malformed envelope: ") + e.what());
  }
}

inline Message make(Kind k, std::string client_id, nlohmann::json payload = nlohmann::json::object()) {
  return {kProtocolVersion, to_string(k), std::move(client_id), std::move(payload)};
}

inline Message error_message(const std::string& code, const std::string& text) {
  return make(Kind::Error, "", {{"code", code}, {"message", text}});
}

// --- sockets ------------------------------------------------------------------

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  ~Socket() { close(); }

  int fd() const noexcept { return fd_; }
  bool valid() const noexcept { return fd_ >= 0; }
  void close() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_ = -1;
};

inline void wait_fd(int fd, short events, clock::time_point deadline, const char* what) {
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now()).count();
    if (left <= 0) throw protocol_error(std::string("timed out waiting to ") + what);
    pollfd p{fd, events, 0};
    const int r = ::poll(&p, 1, static_cast<int>(std::min<long long>(left, 1 << 30)));
    if (r > 0) return;
    if (r < 0 && errno != EINTR) throw io_error(std::string("poll: ") + std::strerror(errno));
  }
}

inline void send_all(int fd, std::string_view bytes, clock::time_point deadline) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    wait_fd(fd, POLLOUT, deadline, "send");
    const ssize_t r = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw io_error(std::string("send: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(r);
  }
}

/// false on orderly close before the first byte.
inline bool recv_exact(int fd, char* out, std::size_t n, clock::time_point deadline) {
  std::size_t got = 0;
  while (got < n) {
    wait_fd(fd, POLLIN, deadline, "receive");
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0) {
      if (got == 0) return false;
      throw protocol_error("connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw io_error(std::string("recv: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

inline void send_frame(int fd, const Message& m, clock::time_point deadline) {
  const std::string body = encode(m);
  if (body.size() > kMaxFrame) throw protocol_error("frame too large");
  const auto len = static_cast<std::uint32_t>(body.size());
  std::string frame{char(len >> 24), char((len >> 16) & 0xFF), char((len >> 8) & 0xFF), char(len & 0xFF)};
  frame += body;
  send_all(fd, frame, deadline);
}

inline std::optional<Message> recv_frame(int fd, clock::time_point deadline) {
  unsigned char hdr[4];
  if (!recv_exact(fd, reinterpret_cast<char*>(hdr), 4, deadline)) return std::nullopt;
  const std::uint32_t len = (std::uint32_t(hdr[0]) << 24) | (std::uint32_t(hdr[1]) << 16) |
                            (std::uint32_t(hdr[2]) << 8) | std::uint32_t(hdr[3]);
  if (len > kMaxFrame) throw protocol_error("frame length " + std::to_string(len) + " exceeds limit");
  std::string body(len, '\0');
  if (len > 0 && !recv_exact(fd, body.data(), len, deadline)) throw protocol_error("connection closed mid-frame");
  return decode(body);
}

struct Endpoint {
  std::string host = "127.0.0.1";
  int port = 0;
};

/// "host:port" or ":port" / "port" for the loopback address.
inline Endpoint parse_endpoint(const std::string& s) {
  Endpoint e;
  const auto colon = s.rfind(':');
  std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
  if (colon != std::string::npos && colon > 0) e.host = s.substr(0, colon);
  try {
    std::size_t used = 0;
    e.port = std::stoi(port, &used);
    if (used != port.size() || e.port < 0 || e.port > 65535) throw std::invalid_argument(port);
  } catch (const std::exception&) {
    throw config_error("bad address \"" + s + "\"; expected host:port");
  }
  return e;
}

inline sockaddr_in resolve(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (const int rc = ::getaddrinfo(e.host.c_str(), nullptr, &hints, &res); rc != 0 || !res)
    throw io_error("cannot resolve " + e.host + ": " + ::gai_strerror(rc));
  sockaddr_in addr = *reinterpret_cast<sockaddr_in*>(res->ai_addr);
  ::freeaddrinfo(res);
  addr.sin_port = htons(static_cast<std::uint16_t>(e.port));
  return addr;
}

inline Socket listen_on(const Endpoint& e, int& bound_port) {
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid()) throw io_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr = resolve(e);
  if (::bind(s.fd(), reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0)
    throw io_error("bind " + e.host + ":" + std::to_string(e.port) + ": " + std::strerror(errno));
  if (::listen(s.fd(), 64) != 0) throw io_error(std::string("listen: ") + std::strerror(errno));
  socklen_t len = sizeof addr;
  ::getsockname(s.fd(), reinterpret_cast<sockaddr*>(&addr), &len);
  bound_port = ntohs(addr.sin_port);
  return s;
}

/// Retries refused connections until the deadline, so clients may start first.
inline Socket connect_to(const Endpoint& e, clock::time_point deadline) {
  const sockaddr_in addr = resolve(e);
  while (true) {
    Socket s(::socket(AF_INET, SOCK_STREAM, 0));
    if (!s.valid()) throw io_error(std::string("socket: ") + std::strerror(errno));
    if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) == 0) {
      const int one = 1;
      ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
      return s;
    }
    if (errno != ECONNREFUSED && errno != EINTR)
      throw io_error("connect " + e.host + ":" + std::to_string(e.port) + ": " + std::strerror(errno));
    if (clock::now() >= deadline)
      throw protocol_error("timed out connecting to " + e.host + ":" + std::to_string(e.port));
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
}

}  // namespace wire

// --- server -------------------------------------------------------------------

struct ServeConfig {
  wire::Endpoint bind;
  /// Expected client ids in roster order. When empty, roster_size clients are
  /// admitted and ordered by id.
  std::vector<std::string> roster;
  int roster_size = 0;
  double timeout_s = 60.0;
  FederationConfig federation;
  DiscoveryConfig discovery;
  /// Called with the bound port once the socket listens.
  std::function<void(int)> on_listening;
};

struct ServeResult {
  Session session;
  DiscoveryResult discovery;
  std::vector<std::string> roster;
};

namespace detail {

struct ClientSlot {
  std::optional<int> declared_domain;
  std::vector<std::string> columns;
  std::optional<std::vector<ScalarMoments>> scalar;
  std::optional<std::string> tensor;  // raw bytes of the accepted upload
  std::optional<LocalMoments> moments;
};

/// Shared by connection handlers; every access happens under mu.
class ServerState {
 public:
  explicit ServerState(const ServeConfig& cfg)
      : cfg_(cfg), deadline_(wire::clock::now() + std::chrono::duration_cast<wire::clock::duration>(
                                                          std::chrono::duration<double>(cfg.timeout_s))) {}

  const ServeConfig& cfg() const { return cfg_; }
  wire::clock::time_point deadline() const { return deadline_; }
  int rounds() const { return cfg_.federation.single_round ? 1 : 2; }

  std::size_t expected() const {
    return cfg_.roster.empty() ? static_cast<std::size_t>(cfg_.roster_size) : cfg_.roster.size();
  }

  /// Registers a Hello; returns an error code or empty.
  std::string hello(const std::string& id, const nlohmann::json& payload) {
    std::lock_guard lk(mu_);
    if (id.empty()) return "client-id";
    if (!cfg_.roster.empty() && std::find(cfg_.roster.begin(), cfg_.roster.end(), id) == cfg_.roster.end())
      return "roster";
    auto it = slots_.find(id);
    if (it == slots_.end()) {
      if (slots_.size() >= expected()) return "roster";
      it = slots_.emplace(id, ClientSlot{}).first;
    }
    if (payload.contains("domain") && !payload["domain"].is_null())
      it->second.declared_domain = payload["domain"].get<int>();
    if (payload.contains("columns")) it->second.columns = payload["columns"].get<std::vector<std::string>>();
    cv_.notify_all();
    return {};
  }

  void scalar(const std::string& id, std::vector<ScalarMoments> m) {
    std::lock_guard lk(mu_);
    auto& slot = slots_.at(id);
    if (!slot.scalar) slot.scalar = std::move(m);
    cv_.notify_all();
  }

  /// Blocks until the spec can be built (all clients checked in for the
  /// required round) and returns it with this client's domain.
  std::pair<FeatureSpec, int> wait_spec(const std::string& id) {
    std::unique_lock lk(mu_);
    const bool ready = cv_.wait_until(lk, deadline_, [&] { return !failure_.empty() || spec_ready_locked(); });
    if (!failure_.empty()) throw protocol_error(failure_);
    if (!ready) throw protocol_error(missing_locked("feature spec round"));
    if (!spec_) build_spec_or_fail_locked();
    const auto pos = std::find(order_.begin(), order_.end(), id) - order_.begin();
    return {*spec_, domains_.at(static_cast<std::size_t>(pos))};
  }

  /// Returns "" for a fresh or identical upload, "conflict" otherwise.
  std::string upload(const std::string& id, std::string bytes, LocalMoments m) {
    std::lock_guard lk(mu_);
    auto& slot = slots_.at(id);
    if (slot.tensor) return *slot.tensor == bytes ? "" : "conflict";
    const int dprime = spec_ ? static_cast<int>(spec_->variables.size()) : -1;
    if (m.dprime != dprime || m.h != spec_->h) return "shape";
    slot.tensor = std::move(bytes);
    slot.moments = std::move(m);
    cv_.notify_all();
    return {};
  }

  /// Blocks until every roster client has uploaded; returns parts in roster order.
  std::vector<LocalMoments> wait_uploads() {
    std::unique_lock lk(mu_);
    const bool ready = cv_.wait_until(lk, deadline_, [&] {
      if (!failure_.empty()) return true;
      if (slots_.size() < expected()) return false;
      return std::all_of(slots_.begin(), slots_.end(), [](const auto& kv) { return kv.second.moments.has_value(); });
    });
    if (!failure_.empty()) throw protocol_error(failure_);
    // Report the earliest phase that stalled: without a spec nobody can upload.
    if (!ready) throw protocol_error(missing_locked(spec_ready_locked() ? "upload round" : "feature spec round"));
    if (!spec_) build_spec_or_fail_locked();
    std::vector<LocalMoments> parts;
    for (const auto& id : order_) parts.push_back(*slots_.at(id).moments);
    return parts;
  }

  FeatureSpec spec() const {
    std::lock_guard lk(mu_);
    return *spec_;
  }
  std::vector<std::string> order() const {
    std::lock_guard lk(mu_);
    return order_;
  }
  std::vector<int> domains() const {
    std::lock_guard lk(mu_);
    return domains_;
  }
  void fail(const std::string& what) {
    std::lock_guard lk(mu_);
    if (failure_.empty()) failure_ = what;
    cv_.notify_all();
  }
  std::string failure() const {
    std::lock_guard lk(mu_);
    return failure_;
  }

 private:
  bool spec_ready_locked() const {
    if (spec_) return true;
    if (slots_.size() < expected()) return false;
    if (rounds() == 1) return true;
    return std::all_of(slots_.begin(), slots_.end(), [](const auto& kv) { return kv.second.scalar.has_value(); });
  }

  std::string missing_locked(const char* phase) const {
    std::vector<std::string> missing;
    if (!cfg_.roster.empty()) {
      for (const auto& id : cfg_.roster) {
        auto it = slots_.find(id);
        const bool done = it != slots_.end() &&
                          (std::string(phase) == "upload round" ? it->second.moments.has_value()
                                                                : rounds() == 1 || it->second.scalar.has_value());
        if (!done) missing.push_back(id);
      }
    } else {
      for (const auto& [id, slot] : slots_) {
        const bool done = std::string(phase) == "upload round" ? slot.moments.has_value()
                                                                : rounds() == 1 || slot.scalar.has_value();
        if (!done) missing.push_back(id);
      }
      for (std::size_t k = slots_.size(); k < expected(); ++k)
        missing.push_back("<unnamed " + std::to_string(k + 1) + ">");
    }
    std::string list;
    for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
    return std::string("partial roster: timed out in ") + phase + "; missing clients: " + list;
  }

  /// A bad roster (schema or domain clash) ends the session for everyone.
  void build_spec_or_fail_locked() {
    try {
      build_spec_locked();
    } catch (const Error& e) {
      failure_ = e.what();
      cv_.notify_all();
      throw;
    }
  }

  void build_spec_locked() {
    order_ = cfg_.roster;
    if (order_.empty())
      for (const auto& [id, slot] : slots_) order_.push_back(id);  // std::map: sorted by id
    std::vector<ClientDataset> stubs;
    for (const auto& id : order_) {
      const auto& slot = slots_.at(id);
      stubs.push_back({id, slot.columns, {}, slot.declared_domain.value_or(0)});
    }
    domains_ = assign_domains(stubs);
    const auto& ref = slots_.at(order_.front()).columns;
    for (const auto& id : order_)
      if (slots_.at(id).columns != ref) throw protocol_error("client " + id + " does not match the schema of client " + order_.front());
    const int d = static_cast<int>(ref.size());
    std::vector<ScalarMoments> global(d);
    if (rounds() == 2)
      for (const auto& id : order_) {
        const auto& m = *slots_.at(id).scalar;
        if (static_cast<int>(m.size()) != d) throw protocol_error("client " + id + " sent scalar moments of the wrong width");
        for (int j = 0; j < d; ++j) global[j] += m[j];
      }
    spec_ = build_feature_spec(global, d, static_cast<int>(order_.size()), cfg_.federation);
  }

  const ServeConfig& cfg_;
  wire::clock::time_point deadline_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::map<std::string, ClientSlot> slots_;
  std::optional<FeatureSpec> spec_;
  std::vector<std::string> order_;
  std::vector<int> domains_;
  std::string failure_;
};

inline void handle_connection(wire::Socket sock, ServerState& state) {
  using wire::Kind;
  const auto deadline = state.deadline();
  const int fd = sock.fd();
  std::string id;
  auto reply_error = [&](const std::string& code, const std::string& text) {
    wire::send_frame(fd, wire::error_message(code, text), deadline);
  };
  try {
    while (auto msg = wire::recv_frame(fd, deadline)) {
      if (msg->version != kProtocolVersion) {
        reply_error("version", "server speaks protocol version " + std::to_string(kProtocolVersion) + ", got " +
                                   std::to_string(msg->version));
        return;
      }
      const auto kind = wire::kind_from_string(msg->kind);
      if (!kind) {
        reply_error("unknown-kind", "unknown message kind \"" + msg->kind + "\"");
        continue;
      }
      switch (*kind) {
        case Kind::Hello: {
          if (auto code = state.hello(msg->client_id, msg->payload); !code.empty()) {
            reply_error(code, "client \"" + msg->client_id + "\" rejected");
            return;
          }
          id = msg->client_id;
          wire::send_frame(fd, wire::make(Kind::Ack, id, {{"rounds", state.rounds()}}), deadline);
          if (state.rounds() == 1) {
            auto [spec, domain] = state.wait_spec(id);
            wire::send_frame(fd, wire::make(Kind::FeatureSpecBroadcast, id, {{"spec", to_json(spec)}, {"domain", domain}}),
                             deadline);
          }
          break;
        }
        case Kind::ScalarMoments: {
          if (id.empty() || msg->client_id != id) {
            reply_error("order", "ScalarMoments before Hello");
            break;
          }
          state.scalar(id, scalar_moments_from_json(msg->payload.at("moments")));
          auto [spec, domain] = state.wait_spec(id);
          wire::send_frame(fd, wire::make(Kind::FeatureSpecBroadcast, id, {{"spec", to_json(spec)}, {"domain", domain}}),
                           deadline);
          break;
        }
        case Kind::LocalMomentsUpload: {
          if (id.empty() || msg->client_id != id) {
            reply_error("order", "upload before Hello");
            break;
          }
          // Uploads arriving before the spec exists cannot be checked; wait for it.
          state.wait_spec(id);
          std::string bytes = wire::base64_decode(msg->payload.at("tensor").get<std::string>());
          LocalMoments m = decode_local_moments(msg->payload.at("header"), bytes);
          if (auto code = state.upload(id, std::move(bytes), std::move(m)); !code.empty()) {
            reply_error(code, code == "conflict" ? "a different upload from " + id + " was already accepted"
                                                 : "upload shape does not match the broadcast spec");
            break;
          }
          wire::send_frame(fd, wire::make(Kind::Ack, id, {{"accepted", "LocalMomentsUpload"}}), deadline);
          break;
        }
        default:
          reply_error("unexpected", std::string("servers do not accept ") + msg->kind);
      }
    }
  } catch (const Error& e) {
    // Protocol errors are reported to the peer when possible; timeouts fall
    // through to the roster check in serve().
    try {
      reply_error(to_string(e.kind()), e.what());
    } catch (...) {
    }
  } catch (const std::exception& e) {
    try {
      reply_error("malformed", e.what());
    } catch (...) {
    }
  }
}

}  // namespace detail

/// Runs the server side of both rounds, then discovery on the aggregate.
inline ServeResult serve(const ServeConfig& cfg) {
  cfg.federation.validate();
  cfg.discovery.validate();
  if (cfg.roster.empty() && cfg.roster_size < 1) throw config_error("roster must name at least one client");
  if (!(cfg.timeout_s > 0.0)) throw config_error("timeout must be positive");
  detail::ServerState state(cfg);
  int port = 0;
  wire::Socket listener = wire::listen_on(cfg.bind, port);
  if (cfg.on_listening) cfg.on_listening(port);

  std::vector<std::jthread> workers;
  std::atomic<bool> done{false};
  std::jthread acceptor([&] {
    while (!done.load()) {
      pollfd p{listener.fd(), POLLIN, 0};
      if (::poll(&p, 1, 50) <= 0) continue;
      const int fd = ::accept(listener.fd(), nullptr, nullptr);
      if (fd < 0) continue;
      workers.emplace_back([&state, fd] { detail::handle_connection(wire::Socket(fd), state); });
    }
  });

  std::vector<LocalMoments> parts;
  try {
    parts = state.wait_uploads();
  } catch (...) {
    done = true;
    acceptor.join();
    throw;
  }
  done = true;
  acceptor.join();
  workers.clear();  // joins; every handler is bounded by the deadline

  ServeResult out;
  out.roster = state.order();
  out.session.spec = state.spec();
  out.session.domains = state.domains();
  for (const auto& p : parts) out.session.upload_bytes.push_back(encode_tensor(p).size());
  out.session.summary = aggregate(parts);
  out.discovery = run(out.session.summary, cfg.discovery);
  return out;
}

// --- client -------------------------------------------------------------------

struct ClientReport {
  FeatureSpec spec;
  int domain = 0;
  std::size_t upload_bytes = 0;
};

/// Client side of both rounds. Raw rows never leave this function.
inline ClientReport run_client(const wire::Endpoint& server, const ClientDataset& data, double timeout_s = 60.0) {
  using wire::Kind;
  if (data.id.empty()) throw config_error("client id must be nonempty");
  if (data.values.rows() < 1) throw protocol_error("client " + data.id + " has an empty dataset");
  const auto deadline =
      wire::clock::now() + std::chrono::duration_cast<wire::clock::duration>(std::chrono::duration<double>(timeout_s));
  wire::Socket sock = wire::connect_to(server, deadline);
  const int fd = sock.fd();

  auto expect = [&](Kind k) {
    auto m = wire::recv_frame(fd, deadline);
    if (!m) throw protocol_error("server closed the connection");
    if (m->kind == wire::to_string(Kind::Error))
      throw protocol_error("server error [" + m->payload.value("code", "?") + "]: " + m->payload.value("message", ""));
    if (m->version != kProtocolVersion) throw protocol_error("server speaks protocol version " + std::to_string(m->version));
    if (m->kind != wire::to_string(k)) throw protocol_error("expected " + std::string(wire::to_string(k)) + ", got " + m->kind);
    return *m;
  };

  std::vector<std::string> columns = data.columns;
  if (columns.empty())
    for (Eigen::Index j = 0; j < data.values.cols(); ++j) columns.push_back("V" + std::to_string(j));
  nlohmann::json hello{{"columns", columns}, {"n_k", data.values.rows()}};
  if (data.domain > 0) hello["domain"] = data.domain;
  wire::send_frame(fd, wire::make(Kind::Hello, data.id, hello), deadline);
  const int rounds = expect(Kind::Ack).payload.value("rounds", 2);

  if (rounds == 2) {
    const auto scalar = compute_scalar_moments(data.values, static_cast<int>(data.values.cols()));
    wire::send_frame(fd, wire::make(Kind::ScalarMoments, data.id, {{"moments", scalar_moments_to_json(scalar)}}),
                     deadline);
  }
  const auto bcast = expect(Kind::FeatureSpecBroadcast);
  ClientReport rep;
  rep.spec = feature_spec_from_json(bcast.payload.at("spec"));
  rep.domain = bcast.payload.at("domain").get<int>();
  if (static_cast<Eigen::Index>(rep.spec.variables.size()) != data.values.cols() + 1)
    throw protocol_error("broadcast spec covers " + std::to_string(rep.spec.variables.size()) + " variables, client has " +
                         std::to_string(data.values.cols()) + " plus the surrogate");

  const auto maps = draw_feature_maps(rep.spec);
  const LocalMoments m = compute_local_moments(with_domain_column(data.values, rep.domain), maps);
  const std::string bytes = encode_tensor(m);
  rep.upload_bytes = bytes.size();
  wire::send_frame(fd,
                   wire::make(Kind::LocalMomentsUpload, data.id,
                              {{"header", tensor_header(m)}, {"tensor", wire::base64_encode(bytes)}}),
                   deadline);
  expect(Kind::Ack);
  return rep;
}

}  // namespace fedcdh
