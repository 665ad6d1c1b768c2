#pragma once

// Synthetic heterogeneous benchmarks: Erdos-Renyi DAGs, linear Gaussian and
// general functional SCMs whose selected modules change across clients, and
// the post-nonlinear generator used for test-power runs.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fedcdh/error.hpp"
#include "fedcdh/graph.hpp"
#include "fedcdh/rng.hpp"

namespace fedcdh {

enum class Family { LinearGaussian, GeneralFunctional, PostNonlinearPower };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::LinearGaussian: return "linear_gaussian";
    case Family::GeneralFunctional: return "general_functional";
    case Family::PostNonlinearPower: return "postnonlinear_power";
  }
  return "?";
}

inline Family family_from_string(const std::string& s) {
  if (s == "linear_gaussian" || s == "linear") return Family::LinearGaussian;
  if (s == "general_functional" || s == "functional") return Family::GeneralFunctional;
  if (s == "postnonlinear_power" || s == "power") return Family::PostNonlinearPower;
  throw config_error("unknown family \"" + s + "\"");
}

struct GenConfig {
  int d = 6;
  int K = 10;
  int n_k = 100;
  int edge_factor = 1;
  Family family = Family::LinearGaussian;
  int n_changing = 2;
  std::uint64_t seed = 0;
  /// "square" is x|x| unless disabled, in which case it is x^2.
  bool signed_square = true;

  void validate() const {
    if (d < 1) throw config_error("d must be at least 1");
    if (K < 1) throw config_error("K must be at least 1");
    if (n_k < 1) throw config_error("n_k must be at least 1");
    if (edge_factor < 1) throw config_error("edge factor must be at least 1");
    if (n_changing < 0 || n_changing > d) throw config_error("n_changing must lie in [0, d]");
  }
};

/// One matrix (n_k x d) per client; client k has domain index k + 1.
struct Benchmark {
  Dag truth;
  VarSet changing;
  std::vector<Eigen::MatrixXd> clients;
};

/// Exactly edge_factor * d edges drawn uniformly among all pairs, oriented by
/// a random topological order. d = 1 has no pairs and yields the empty DAG.
inline Dag gen_er_dag(int d, int edge_factor, std::uint64_t seed) {
  if (d < 1) throw config_error("d must be at least 1");
  Dag dag(d);
  if (d == 1) return dag;
  const long long pairs = static_cast<long long>(d) * (d - 1) / 2;
  const long long m = static_cast<long long>(edge_factor) * d;
  if (edge_factor < 1 || m > pairs)
    throw config_error(std::to_string(m) + " edges do not fit on " + std::to_string(d) + " nodes");
  Rng rng(derive_seed(seed, 10));
  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) all.emplace_back(i, j);
  rng.shuffle(all);
  const auto order = rng.permutation(d);
  std::vector<int> rank(d);
  for (int r = 0; r < d; ++r) rank[order[r]] = r;
  for (long long e = 0; e < m; ++e) {
    auto [a, b] = all[e];
    if (rank[a] < rank[b]) dag.add_edge(a, b);
    else dag.add_edge(b, a);
  }
  return dag;
}

namespace detail {

enum class Link { Linear, Square, Sinc, Tanh, Sin, Tan };

inline double apply_link(Link f, double x, bool signed_square) {
  switch (f) {
    case Link::Linear: return x;
    case Link::Square: return signed_square ? x * std::abs(x) : x * x;
    case Link::Sinc: {
      const double px = std::numbers::pi * x;
      return px == 0.0 ? 1.0 : std::sin(px) / px;
    }
    case Link::Tanh: return std::tanh(x);
    case Link::Sin: return std::sin(x);
    case Link::Tan: return std::tan(x);
  }
  return x;
}

inline VarSet choose_changing(int d, int count, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 11));
  auto perm = rng.permutation(d);
  VarSet out(perm.begin(), perm.begin() + count);
  std::sort(out.begin(), out.end());
  return out;
}

inline std::vector<VarSet> parent_lists(const Dag& dag) {
  std::vector<VarSet> pa(dag.d());
  for (auto [from, to] : dag.edges()) pa[to].push_back(from);
  return pa;
}

/// Noise draw: Gaussian with the given variance or U(-0.5, 0.5).
struct Noise {
  bool gaussian = true;
  double variance = 1.0;
  double draw(Rng& rng) const {
    return gaussian ? std::sqrt(variance) * rng.normal() : rng.uniform(-0.5, 0.5);
  }
};

inline Benchmark generate_scm(const Dag& dag, const GenConfig& cfg) {
  cfg.validate();
  if (dag.d() != cfg.d) throw config_error("DAG size does not match config d");
  const bool functional = cfg.family == Family::GeneralFunctional;
  const int d = cfg.d;
  const auto parents = parent_lists(dag);
  const auto order = dag.graph().topological_order();

  Benchmark out;
  out.truth = dag;
  out.changing = choose_changing(d, cfg.n_changing, cfg.seed);
  std::vector<char> is_changing(d, 0);
  for (int v : out.changing) is_changing[v] = 1;

  // Mechanisms shared by every client.
  Rng shared(derive_seed(cfg.seed, 20));
  std::vector<std::vector<double>> coef(d);
  std::vector<std::vector<Link>> link(d);
  std::vector<Noise> noise(d);
  const Link links[] = {Link::Linear, Link::Square, Link::Sinc, Link::Tanh};
  for (int i = 0; i < d; ++i) {
    for (std::size_t p = 0; p < parents[i].size(); ++p) {
      coef[i].push_back(shared.uniform(0.5, 2.5));
      link[i].push_back(functional ? links[shared.index(4)] : Link::Linear);
    }
    if (functional) noise[i] = Noise{shared.coin(), 1.0};
    else noise[i] = Noise{true, shared.uniform(1.0, 2.0)};
  }

  for (int k = 0; k < cfg.K; ++k) {
    // Changing modules redraw causal strengths and noise scale per client.
    Rng local(derive_seed(cfg.seed, 21, k));
    auto kcoef = coef;
    std::vector<double> scale(d, 1.0);
    for (int i : out.changing) {
      for (auto& c : kcoef[i]) c = local.uniform(0.5, 2.5);
      scale[i] = local.uniform(1.0, 3.0);
    }
    std::vector<Rng> streams;
    for (int i = 0; i < d; ++i) streams.emplace_back(derive_seed(cfg.seed, 22, k, i));

    Eigen::MatrixXd data(cfg.n_k, d);
    for (int r = 0; r < cfg.n_k; ++r)
      for (int i : order) {
        double v = 0.0;
        for (std::size_t p = 0; p < parents[i].size(); ++p)
          v += kcoef[i][p] * apply_link(link[i][p], data(r, parents[i][p]), cfg.signed_square);
        v += scale[i] * noise[i].draw(streams[i]);
        data(r, i) = v;
      }
    out.clients.push_back(std::move(data));
  }
  return out;
}

}  // namespace detail

/// Changing modules: V_i = sum s^k_ij V_j + g^k e_i with s^k ~ U(0.5, 2.5),
/// g^k ~ U(1, 3) per client. Fixed modules share s_ij ~ U(0.5, 2.5) and
/// e_i ~ N(0, v_i), v_i ~ U(1, 2).
inline Benchmark gen_linear_gaussian(const Dag& dag, GenConfig cfg) {
  cfg.family = Family::LinearGaussian;
  return detail::generate_scm(dag, cfg);
}

/// Per-edge link from {linear, square, sinc, tanh}; noise U(-0.5, 0.5) or N(0, 1).
inline Benchmark gen_general_functional(const Dag& dag, GenConfig cfg) {
  cfg.family = Family::GeneralFunctional;
  return detail::generate_scm(dag, cfg);
}

/// Columns (W, X, Y, Z): X = g(f(W) + eX), Y = g(f(W) + eY), Z independent.
/// f, g from {linear, square, sin, tan}; each of W, eX, eY, Z is U(-0.5, 0.5)
/// or N(0, 1). n samples split into K equal consecutive client blocks.
inline std::vector<Eigen::MatrixXd> gen_postnonlinear_power(int n, int K, std::uint64_t seed,
                                                            bool signed_square = true) {
  if (K < 1 || n < K || n % K != 0) throw config_error("n must be a positive multiple of K");
  using detail::Link;
  Rng choice(derive_seed(seed, 30));
  const Link links[] = {Link::Linear, Link::Square, Link::Sin, Link::Tan};
  const Link f = links[choice.index(4)];
  const Link g = links[choice.index(4)];
  detail::Noise src[4];
  for (auto& s : src) s = detail::Noise{choice.coin(), 1.0};

  Rng rw(derive_seed(seed, 31, 0)), rx(derive_seed(seed, 31, 1)), ry(derive_seed(seed, 31, 2)),
      rz(derive_seed(seed, 31, 3));
  const int per = n / K;
  std::vector<Eigen::MatrixXd> out(K, Eigen::MatrixXd(per, 4));
  for (int i = 0; i < n; ++i) {
    const double w = src[0].draw(rw);
    const double ex = src[1].draw(rx);
    const double ey = src[2].draw(ry);
    const double z = src[3].draw(rz);
    const double fw = detail::apply_link(f, w, signed_square);
    auto& m = out[i / per];
    const int r = i % per;
    m(r, 0) = w;
    m(r, 1) = detail::apply_link(g, fw + ex, signed_square);
    m(r, 2) = detail::apply_link(g, fw + ey, signed_square);
    m(r, 3) = z;
  }
  return out;
}

inline Benchmark generate(const GenConfig& cfg) {
  cfg.validate();
  if (cfg.family == Family::PostNonlinearPower) {
    Benchmark b;
    b.truth = Dag(4);
    b.truth.add_edge(0, 1);
    b.truth.add_edge(0, 2);
    b.clients = gen_postnonlinear_power(cfg.n_k * cfg.K, cfg.K, cfg.seed, cfg.signed_square);
    return b;
  }
  const Dag dag = gen_er_dag(cfg.d, cfg.edge_factor, cfg.seed);
  return detail::generate_scm(dag, cfg);
}

// ---------------------------------------------------------------------------
// CSV: header row of names, one row per sample, %.17g values.

struct Table {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
};

inline std::vector<std::string> default_names(int d) {
  std::vector<std::string> names;
  for (int i = 0; i < d; ++i) names.push_back("V" + std::to_string(i));
  return names;
}

inline void write_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                      const Eigen::MatrixXd& values) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw io_error("cannot write " + path.string());
  for (std::size_t j = 0; j < names.size(); ++j) os << (j ? "," : "") << names[j];
  os << '\n';
  char buf[40];
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", values(r, c));
      os << (c ? "," : "") << buf;
    }
    os << '\n';
  }
  if (!os) throw io_error("failed writing " + path.string());
}

inline Table read_csv(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw io_error("cannot open " + path.string());
  Table t;
  std::string line;
  if (!std::getline(is, line)) throw input_error(path.string() + ": missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  {
    std::istringstream hs(line);
    std::string name;
    while (std::getline(hs, name, ',')) t.names.push_back(name);
  }
  const auto cols = t.names.size();
  if (cols == 0) throw input_error(path.string() + ": empty header");
  std::vector<double> flat;
  std::size_t rows = 0;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::size_t fields = 0;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const auto comma = line.find(',', pos);
      const auto end = comma == std::string::npos ? line.size() : comma;
      const char* first = line.data() + pos;
      const char* last = line.data() + end;
      while (first < last && *first == ' ') ++first;
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(first, last, v);
      if (ec != std::errc() || ptr != last)
        throw input_error(path.string() + ": row " + std::to_string(lineno) + ", field " +
                          std::to_string(fields + 1) + " is not a number");
      if (!std::isfinite(v))
        throw input_error(path.string() + ": row " + std::to_string(lineno) + " has a non-finite value");
      flat.push_back(v);
      ++fields;
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (fields != cols)
      throw input_error(path.string() + ": row " + std::to_string(lineno) + " has " + std::to_string(fields) +
                        " fields, header has " + std::to_string(cols));
    ++rows;
  }
  t.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t.values(r, c) = flat[r * cols + c];
  return t;
}

}  // namespace fedcdh
