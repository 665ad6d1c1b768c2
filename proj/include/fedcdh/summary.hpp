#pragma once

// Client-side raw feature moments, server-side aggregation, and globally
// centered covariance blocks extracted from the aggregate.

#include <bit>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fedcdh/error.hpp"
#include "fedcdh/features.hpp"

namespace fedcdh {

inline constexpr int kTensorFormatVersion = 1;

/// count, sum and sum of squares of one raw continuous column.
struct ScalarMoments {
  double count = 0.0;
  double sum = 0.0;
  double sum_sq = 0.0;

  ScalarMoments& operator+=(const ScalarMoments& o) {
    count += o.count;
    sum += o.sum;
    sum_sq += o.sum_sq;
    return *this;
  }
  bool operator==(const ScalarMoments&) const = default;
};

/// Uncentered feature moments of one client. The second-moment tensor is
/// stored as one (d'h x d'h) matrix whose (a, b) block is sum_i phi_a phi_b^T.
struct LocalMoments {
  int dprime = 0;
  int h = 0;
  std::size_t n = 0;
  Eigen::VectorXd s1;  // d'h, block a is sum_i phi_a(x_i)
  Eigen::MatrixXd s2;
  std::vector<ScalarMoments> scalar;  // per observed continuous variable

  auto block(int a, int b) const { return s2.block(a * h, b * h, h, h); }
  bool operator==(const LocalMoments& o) const {
    return dprime == o.dprime && h == o.h && n == o.n && s1 == o.s1 && s2 == o.s2 && scalar == o.scalar;
  }
};

struct GlobalSummary {
  int dprime = 0;
  int h = 0;
  std::size_t n = 0;
  Eigen::VectorXd m1;
  Eigen::MatrixXd m2;

  int surrogate() const noexcept { return dprime - 1; }
  int observed() const noexcept { return dprime - 1; }
  auto block(int a, int b) const { return m2.block(a * h, b * h, h, h); }
  auto first(int a) const { return m1.segment(a * h, h); }

  bool operator==(const GlobalSummary& o) const {
    return dprime == o.dprime && h == o.h && n == o.n && m1 == o.m1 && m2 == o.m2;
  }
};

inline void check_finite(const Eigen::MatrixXd& data) {
  for (Eigen::Index r = 0; r < data.rows(); ++r)
    for (Eigen::Index c = 0; c < data.cols(); ++c)
      if (!std::isfinite(data(r, c)))
        throw input_error("non-finite value at row " + std::to_string(r) + ", column " + std::to_string(c));
}

/// Raw scalar moments of the observed columns (the first `columns` of data).
inline std::vector<ScalarMoments> compute_scalar_moments(const Eigen::MatrixXd& data, int columns) {
  check_finite(data);
  std::vector<ScalarMoments> out(columns);
  for (int j = 0; j < columns; ++j)
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const double x = data(i, j);
      out[j].count += 1.0;
      out[j].sum += x;
      out[j].sum_sq += x * x;
    }
  return out;
}

/// Feature matrix (n x d'h) of a client's data, samples in row order.
inline Eigen::MatrixXd feature_matrix(const Eigen::MatrixXd& data, std::span<const FeatureMap> maps, int h) {
  const int dprime = static_cast<int>(maps.size());
  if (data.cols() != dprime)
    throw input_error("data has " + std::to_string(data.cols()) + " columns, feature maps cover " +
                      std::to_string(dprime));
  Eigen::MatrixXd phi(data.rows(), static_cast<Eigen::Index>(dprime) * h);
  Eigen::VectorXd tmp(h);
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    for (int a = 0; a < dprime; ++a) {
      try {
        embed_into(data(i, a), maps[a], tmp);
      } catch (const Error& e) {
        throw input_error("row " + std::to_string(i) + ", column " + std::to_string(a) + ": " + e.what());
      }
      phi.row(i).segment(a * h, h) = tmp.transpose();
    }
  return phi;
}

/// data is n_k x d' with the surrogate column holding the client's domain index.
inline LocalMoments compute_local_moments(const Eigen::MatrixXd& data, std::span<const FeatureMap> maps) {
  if (data.rows() < 1) throw input_error("client dataset is empty");
  if (maps.empty()) throw input_error("no feature maps");
  check_finite(data);
  const int h = feature_count(maps.front());
  const Eigen::MatrixXd phi = feature_matrix(data, maps, h);

  LocalMoments lm;
  lm.dprime = static_cast<int>(maps.size());
  lm.h = h;
  lm.n = static_cast<std::size_t>(data.rows());
  lm.s1 = phi.colwise().sum().transpose();
  const Eigen::Index dim = phi.cols();
  lm.s2 = Eigen::MatrixXd::Zero(dim, dim);
  lm.s2.selfadjointView<Eigen::Lower>().rankUpdate(phi.transpose());
  lm.s2.triangularView<Eigen::StrictlyUpper>() = lm.s2.transpose();

  for (int a = 0; a < lm.dprime; ++a) {
    if (!std::holds_alternative<ContinuousFeatureMap>(maps[a])) continue;
    ScalarMoments m;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      m.count += 1.0;
      m.sum += data(i, a);
      m.sum_sq += data(i, a) * data(i, a);
    }
    lm.scalar.push_back(m);
  }
  return lm;
}

/// Element-wise sums in the given (client-index) order.
inline GlobalSummary aggregate(std::span<const LocalMoments> parts) {
  if (parts.empty()) throw protocol_error("nothing to aggregate");
  GlobalSummary g;
  g.dprime = parts.front().dprime;
  g.h = parts.front().h;
  const Eigen::Index dim = static_cast<Eigen::Index>(g.dprime) * g.h;
  g.m1 = Eigen::VectorXd::Zero(dim);
  g.m2 = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& p = parts[k];
    if (p.dprime != g.dprime || p.h != g.h || p.s1.size() != dim || p.s2.rows() != dim || p.s2.cols() != dim)
      throw protocol_error("part " + std::to_string(k) + " has shape (d'=" + std::to_string(p.dprime) +
                           ", h=" + std::to_string(p.h) + "), expected (d'=" + std::to_string(g.dprime) +
                           ", h=" + std::to_string(g.h) + ")");
    g.n += p.n;
    g.m1 += p.s1;
    g.m2 += p.s2;
  }
  return g;
}

namespace detail {

inline void check_set(const GlobalSummary& s, const VarSet& set) {
  if (set.empty()) throw input_error("variable set is empty");
  for (int v : set)
    if (v < 0 || v >= s.dprime) throw input_error("variable " + std::to_string(v) + " out of range");
}

}  // namespace detail

/// (1/n)(M2[A,B] - M1[A] M1[B]^T / n), where set arguments sum their member
/// blocks first. Equals (1/n) * centered features of A transposed times
/// centered features of B on the pooled data.
inline Eigen::MatrixXd centered_cov(const GlobalSummary& s, const VarSet& a, const VarSet& b) {
  detail::check_set(s, a);
  detail::check_set(s, b);
  if (s.n == 0) throw input_error("summary holds no samples");
  Eigen::MatrixXd raw = Eigen::MatrixXd::Zero(s.h, s.h);
  Eigen::VectorXd ma = Eigen::VectorXd::Zero(s.h);
  Eigen::VectorXd mb = Eigen::VectorXd::Zero(s.h);
  for (int i : a)
    for (int j : b) raw += s.block(i, j);
  for (int i : a) ma += s.first(i);
  for (int j : b) mb += s.first(j);
  const double n = static_cast<double>(s.n);
  return (raw - ma * mb.transpose() / n) / n;
}

// ---------------------------------------------------------------------------
// Tensor serialization: row-major little-endian float64, first moments
// (d' x h) followed by second moments (d' x d' x h x h).

namespace detail {

inline void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

inline double get_f64(std::string_view in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + i])) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace detail

inline std::size_t tensor_payload_bytes(int dprime, int h) {
  const auto dh = static_cast<std::size_t>(dprime) * h;
  return 8 * (dh + dh * dh);
}

inline std::string encode_tensor(int dprime, int h, const Eigen::VectorXd& first, const Eigen::MatrixXd& second) {
  std::string out;
  out.reserve(tensor_payload_bytes(dprime, h));
  for (Eigen::Index i = 0; i < first.size(); ++i) detail::put_f64(out, first[i]);
  for (int a = 0; a < dprime; ++a)
    for (int b = 0; b < dprime; ++b)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < h; ++c) detail::put_f64(out, second(a * h + r, b * h + c));
  return out;
}

inline void decode_tensor(std::string_view bytes, int dprime, int h, Eigen::VectorXd& first,
                          Eigen::MatrixXd& second) {
  if (dprime < 1 || h < 1) throw protocol_error("bad tensor shape");
  if (bytes.size() != tensor_payload_bytes(dprime, h))
    throw protocol_error("tensor payload has " + std::to_string(bytes.size()) + " bytes, expected " +
                         std::to_string(tensor_payload_bytes(dprime, h)));
  const Eigen::Index dh = static_cast<Eigen::Index>(dprime) * h;
  first.resize(dh);
  second.resize(dh, dh);
  std::size_t off = 0;
  for (Eigen::Index i = 0; i < dh; ++i, off += 8) first[i] = detail::get_f64(bytes, off);
  for (int a = 0; a < dprime; ++a)
    for (int b = 0; b < dprime; ++b)
      for (int r = 0; r < h; ++r)
        for (int c = 0; c < h; ++c, off += 8) second(a * h + r, b * h + c) = detail::get_f64(bytes, off);
}

inline nlohmann::json tensor_header(const LocalMoments& m) {
  return {{"version", kTensorFormatVersion}, {"dprime", m.dprime}, {"h", m.h}, {"n_k", m.n}};
}

inline nlohmann::json tensor_header(const GlobalSummary& s) {
  return {{"version", kTensorFormatVersion}, {"dprime", s.dprime}, {"h", s.h}, {"n_k", s.n}};
}

inline std::string encode_tensor(const LocalMoments& m) { return encode_tensor(m.dprime, m.h, m.s1, m.s2); }
inline std::string encode_tensor(const GlobalSummary& s) { return encode_tensor(s.dprime, s.h, s.m1, s.m2); }

inline nlohmann::json scalar_moments_to_json(const std::vector<ScalarMoments>& v) {
  auto arr = nlohmann::json::array();
  for (const auto& m : v) arr.push_back({m.count, m.sum, m.sum_sq});
  return arr;
}

inline std::vector<ScalarMoments> scalar_moments_from_json(const nlohmann::json& j) {
  std::vector<ScalarMoments> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 3) throw protocol_error("scalar moment entry must be [count, sum, sum_sq]");
    out.push_back({e[0].get<double>(), e[1].get<double>(), e[2].get<double>()});
  }
  return out;
}

/// header must carry version, dprime, h and n_k.
inline LocalMoments decode_local_moments(const nlohmann::json& header, std::string_view bytes) {
  try {
    if (header.at("version").get<int>() != kTensorFormatVersion) throw protocol_error("tensor format version");
    LocalMoments m;
    m.dprime = header.at("dprime").get<int>();
    m.h = header.at("h").get<int>();
    m.n = header.at("n_k").get<std::size_t>();
    decode_tensor(bytes, m.dprime, m.h, m.s1, m.s2);
    if (header.contains("scalar")) m.scalar = scalar_moments_from_json(header.at("scalar"));
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw protocol_error(std::string("malformed tensor header: ") + e.what());
  }
}

inline GlobalSummary decode_global_summary(const nlohmann::json& header, std::string_view bytes) {
  const LocalMoments m = decode_local_moments(header, bytes);
  return GlobalSummary{m.dprime, m.h, m.n, m.s1, m.s2};
}

/// Portable nested-array form for debugging.
inline nlohmann::json to_debug_json(const GlobalSummary& s) {
  nlohmann::json j = tensor_header(s);
  auto first = nlohmann::json::array();
  for (int a = 0; a < s.dprime; ++a) {
    auto row = nlohmann::json::array();
    for (int r = 0; r < s.h; ++r) row.push_back(s.m1[a * s.h + r]);
    first.push_back(row);
  }
  auto second = nlohmann::json::array();
  for (int a = 0; a < s.dprime; ++a) {
    auto ja = nlohmann::json::array();
    for (int b = 0; b < s.dprime; ++b) {
      auto jb = nlohmann::json::array();
      for (int r = 0; r < s.h; ++r) {
        auto jr = nlohmann::json::array();
        for (int c = 0; c < s.h; ++c) jr.push_back(s.m2(a * s.h + r, b * s.h + c));
        jb.push_back(jr);
      }
      ja.push_back(jb);
    }
    second.push_back(ja);
  }
  j["first"] = first;
  j["second"] = second;
  return j;
}

}  // namespace fedcdh
