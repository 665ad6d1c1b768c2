#pragma once

// Server-side structure search over the augmented graph: changing-module
// detection, stable PC skeleton search, direction determination, extension.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedcdh/citest.hpp"
#include "fedcdh/error.hpp"
#include "fedcdh/graph.hpp"
#include "fedcdh/icp.hpp"
#include "fedcdh/summary.hpp"

namespace fedcdh {

struct DiscoveryConfig {
  double alpha = 0.05;
  double gamma = kDefaultRidge;
  int max_cond_size = 3;
  double tie_tol = kDefaultTieTolerance;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw config_error("alpha must lie in (0, 1)");
    if (!(gamma > 0.0)) throw config_error("gamma must be positive");
    if (max_cond_size < 0) throw config_error("max_cond_size must be nonnegative");
    if (!(tie_tol >= 0.0)) throw config_error("tie tolerance must be nonnegative");
  }
};

inline nlohmann::json to_json(const DiscoveryConfig& c) {
  return {{"alpha", c.alpha}, {"gamma", c.gamma}, {"max_cond_size", c.max_cond_size},
          {"tie_tol", c.tie_tol}, {"seed", c.seed}};
}

/// Runs tests against one summary and keeps the audit trail.
class TestLog {
 public:
  TestLog(const GlobalSummary& s, const DiscoveryConfig& cfg) : s_(s), cfg_(cfg) {}

  bool independent(const VarSet& x, const VarSet& y, const VarSet& z, const char* phase) {
    CITestResult r;
    try {
      r = test_ci(s_, x, y, z, cfg_.gamma, cfg_.alpha);
    } catch (const Error& e) {
      throw Error(e.kind(), std::string(phase) + ": test " + format_set(x) + " vs " + format_set(y) + " | " +
                                format_set(z) + ": " + e.what());
    }
    ++tests_;
    lines_.push_back(trace_line(x, y, z, r));
    return r.independent;
  }

  void note(std::string line) { lines_.push_back(std::move(line)); }

  std::size_t test_count() const noexcept { return tests_; }
  const std::vector<std::string>& lines() const noexcept { return lines_; }
  const GlobalSummary& summary() const noexcept { return s_; }
  const DiscoveryConfig& config() const noexcept { return cfg_; }

 private:
  const GlobalSummary& s_;
  const DiscoveryConfig& cfg_;
  std::size_t tests_ = 0;
  std::vector<std::string> lines_;
};

namespace detail {

/// Calls fn on every size-k subset of pool in lexicographic order until fn returns true.
inline bool for_each_subset(const VarSet& pool, int k, const std::function<bool(const VarSet&)>& fn) {
  const int n = static_cast<int>(pool.size());
  if (k > n) return false;
  std::vector<int> idx(k);
  for (int i = 0; i < k; ++i) idx[i] = i;
  VarSet subset(k);
  while (true) {
    for (int i = 0; i < k; ++i) subset[i] = pool[idx[i]];
    if (fn(subset)) return true;
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) return false;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

inline VarSet without(const VarSet& v, int a, int b = -1) {
  VarSet out;
  for (int x : v)
    if (x != a && x != b) out.push_back(x);
  return out;
}

}  // namespace detail

/// Drops surrogate--V_i when some subset of V_i's observed neighbours separates
/// them; surviving edges are oriented away from the surrogate.
inline AugmentedGraph detect_changing_modules(AugmentedGraph g, TestLog& log) {
  const auto& cfg = log.config();
  const int u = g.surrogate();
  for (int i = 0; i < g.d(); ++i) {
    if (!g.adjacent(u, i)) continue;
    const VarSet pool = detail::without(g.neighbors(i), u);
    const int top = std::min<int>(cfg.max_cond_size, static_cast<int>(pool.size()));
    for (int level = 0; level <= top; ++level) {
      VarSet sep;
      const bool removed = detail::for_each_subset(pool, level, [&](const VarSet& s) {
        if (!log.independent({u}, {i}, s, "changing-module detection")) return false;
        sep = s;
        return true;
      });
      if (removed) {
        g.remove_edge(u, i, sep);
        break;
      }
    }
    if (g.adjacent(u, i)) g.orient(u, i);
  }
  return g;
}

/// Stable PC over observed pairs. Conditioning candidates are the neighbours
/// (surrogate included) as of the start of each level; removals found during
/// a level are applied when it ends.
inline AugmentedGraph discover_skeleton(AugmentedGraph g, TestLog& log) {
  const auto& cfg = log.config();
  const int d = g.d();
  for (int level = 0; level <= cfg.max_cond_size; ++level) {
    std::vector<VarSet> adj(g.node_count());
    for (int v = 0; v < g.node_count(); ++v) adj[v] = g.neighbors(v);
    bool any_candidate = false;
    std::vector<std::pair<std::pair<int, int>, VarSet>> removals;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j) {
        if (!g.adjacent(i, j)) continue;
        const VarSet pool_i = detail::without(adj[i], j);
        const VarSet pool_j = detail::without(adj[j], i);
        if (static_cast<int>(pool_i.size()) >= level || static_cast<int>(pool_j.size()) >= level)
          any_candidate = true;
        std::vector<VarSet> tried;
        VarSet sep;
        auto check = [&](const VarSet& s) {
          if (std::find(tried.begin(), tried.end(), s) != tried.end()) return false;
          tried.push_back(s);
          if (!log.independent({i}, {j}, s, "skeleton discovery")) return false;
          sep = s;
          return true;
        };
        if (detail::for_each_subset(pool_i, level, check) || detail::for_each_subset(pool_j, level, check))
          removals.push_back({{i, j}, sep});
      }
    for (auto& [edge, sep] : removals) g.remove_edge(edge.first, edge.second, sep);
    if (!any_candidate) break;
  }
  return g;
}

/// Collider rules (including the one-changing-module triples through the
/// surrogate), then independent-change scores for undirected pairs whose
/// endpoints both change, then closure.
inline AugmentedGraph orient(AugmentedGraph g, TestLog& log) {
  const auto& cfg = log.config();
  g = apply_orientation_rules(std::move(g));
  const VarSet changing = g.changing_modules();
  for (std::size_t a = 0; a < changing.size(); ++a)
    for (std::size_t b = a + 1; b < changing.size(); ++b) {
      const int x = changing[a], y = changing[b];
      if (!g.undirected(x, y) || g.conflicted(x, y)) continue;
      try {
        const IcpScore sc = score_direction(log.summary(), x, y, cfg.gamma, cfg.tie_tol);
        log.note(trace_line(x, y, sc));
        if (sc.decision == Direction::Forward) detail::try_orient(g, x, y, "independent-change");
        else if (sc.decision == Direction::Backward) detail::try_orient(g, y, x, "independent-change");
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::Precondition) throw;
        log.note("ICP X=" + std::to_string(x) + " Y=" + std::to_string(y) + " skipped: " + e.what());
      }
    }
  return apply_orientation_rules(std::move(g));
}

struct PhaseTimings {
  double changing_modules_s = 0.0;
  double skeleton_s = 0.0;
  double orientation_s = 0.0;
  double extension_s = 0.0;
};

struct DiscoveryResult {
  AugmentedGraph augmented;
  PatternGraph pattern;
  Dag dag;
  std::vector<std::string> trace;
  std::size_t test_count = 0;
  PhaseTimings timings;
};

inline DiscoveryResult run(const GlobalSummary& s, const DiscoveryConfig& cfg) {
  cfg.validate();
  if (s.dprime < 2) throw input_error("summary must cover at least one observed variable and the surrogate");
  if (s.n < 2) throw input_error("summary needs at least two samples");
  TestLog log(s, cfg);
  using clock = std::chrono::steady_clock;
  auto seconds = [](clock::time_point a, clock::time_point b) { return std::chrono::duration<double>(b - a).count(); };

  DiscoveryResult r;
  auto t0 = clock::now();
  AugmentedGraph g = detect_changing_modules(complete_augmented(s.observed()), log);
  auto t1 = clock::now();
  g = discover_skeleton(std::move(g), log);
  auto t2 = clock::now();
  g = orient(std::move(g), log);
  auto t3 = clock::now();
  r.pattern = g.pattern();
  r.dag = cpdag_to_dag(r.pattern);
  auto t4 = clock::now();
  // The rules run twice, so the same conflict can be reported twice.
  std::vector<std::string> seen;
  for (const auto& line : g.diagnostics()) {
    if (std::find(seen.begin(), seen.end(), line) != seen.end()) continue;
    seen.push_back(line);
    log.note("NOTE " + line);
  }

  r.augmented = std::move(g);
  r.trace = log.lines();
  r.test_count = log.test_count();
  r.timings = {seconds(t0, t1), seconds(t1, t2), seconds(t2, t3), seconds(t3, t4)};
  return r;
}

}  // namespace fedcdh
