#pragma once

// Mixed graphs for the augmented causal graph (observed variables plus the
// domain-index surrogate node), orientation propagation, and CPDAG extension.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "fedcdh/error.hpp"

namespace fedcdh {

/// Sorted list of variable indices.
using VarSet = std::vector<int>;

/// Endpoint mark of an edge as seen from one of its nodes.
enum class Mark : std::uint8_t { None, Tail, Arrow, Undirected };

/// Adjacency-matrix graph whose cells use the on-disk encoding directly:
/// cell(i, j) == 1 means i -> j, cell(i, j) == cell(j, i) == 2 means i -- j.
class MixedGraph {
 public:
  MixedGraph() = default;
  explicit MixedGraph(int nodes) : n_(nodes), cells_(static_cast<std::size_t>(nodes) * nodes, 0) {}

  int size() const noexcept { return n_; }

  std::uint8_t cell(int i, int j) const { return cells_[idx(i, j)]; }

  bool adjacent(int i, int j) const { return cell(i, j) != 0 || cell(j, i) != 0; }
  bool directed(int i, int j) const { return cell(i, j) == 1; }
  bool undirected(int i, int j) const { return cell(i, j) == 2; }

  /// Mark at the j end of edge i -- j.
  Mark mark_at(int i, int j) const {
    if (!adjacent(i, j)) return Mark::None;
    if (undirected(i, j)) return Mark::Undirected;
    return directed(i, j) ? Mark::Arrow : Mark::Tail;
  }

  void add_undirected(int i, int j) {
    check_pair(i, j);
    cells_[idx(i, j)] = 2;
    cells_[idx(j, i)] = 2;
  }

  void add_directed(int from, int to) {
    check_pair(from, to);
    cells_[idx(from, to)] = 1;
    cells_[idx(to, from)] = 0;
  }

  void remove(int i, int j) {
    check_pair(i, j);
    cells_[idx(i, j)] = 0;
    cells_[idx(j, i)] = 0;
  }

  std::vector<int> neighbors(int i) const {
    std::vector<int> out;
    for (int j = 0; j < n_; ++j)
      if (j != i && adjacent(i, j)) out.push_back(j);
    return out;
  }

  int edge_count() const {
    int count = 0;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j)
        if (adjacent(i, j)) ++count;
    return count;
  }

  /// True if a path from -> ... -> to exists using directed edges only.
  bool has_directed_path(int from, int to) const {
    std::vector<char> seen(n_, 0);
    std::vector<int> stack{from};
    seen[from] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      if (u == to) return true;
      for (int v = 0; v < n_; ++v) {
        if (!seen[v] && directed(u, v)) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
    return false;
  }

  /// Kahn order over the directed edges, smallest ready index first.
  /// Returns an empty vector when the directed part has a cycle.
  std::vector<int> topological_order() const {
    std::vector<int> indegree(n_, 0);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (directed(i, j)) ++indegree[j];
    std::set<int> ready;
    for (int i = 0; i < n_; ++i)
      if (indegree[i] == 0) ready.insert(i);
    std::vector<int> order;
    while (!ready.empty()) {
      const int u = *ready.begin();
      ready.erase(ready.begin());
      order.push_back(u);
      for (int v = 0; v < n_; ++v)
        if (directed(u, v) && --indegree[v] == 0) ready.insert(v);
    }
    if (static_cast<int>(order.size()) != n_) return {};
    return order;
  }

  bool directed_part_acyclic() const { return n_ == 0 || !topological_order().empty(); }

  bool operator==(const MixedGraph&) const = default;

 private:
  std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * n_ + j; }

  void check_pair(int i, int j) const {
    if (i < 0 || j < 0 || i >= n_ || j >= n_ || i == j)
      throw input_error("invalid node pair (" + std::to_string(i) + ", " + std::to_string(j) + ")");
  }

  int n_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Partially directed graph over the observed variables (CPDAG-like output).
class PatternGraph : public MixedGraph {
 public:
  using MixedGraph::MixedGraph;
  explicit PatternGraph(MixedGraph g) : MixedGraph(std::move(g)) {}
  int d() const noexcept { return size(); }
};

/// Directed acyclic graph with at most one edge per unordered pair.
class Dag {
 public:
  Dag() = default;
  explicit Dag(int d) : g_(d) {}

  int d() const noexcept { return g_.size(); }

  void add_edge(int from, int to) {
    if (g_.adjacent(from, to)) throw input_error("duplicate edge in DAG");
    if (g_.has_directed_path(to, from)) throw input_error("edge would create a cycle");
    g_.add_directed(from, to);
  }

  bool has_edge(int from, int to) const { return g_.directed(from, to); }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> out;
    for (int i = 0; i < d(); ++i)
      for (int j = 0; j < d(); ++j)
        if (g_.directed(i, j)) out.emplace_back(i, j);
    return out;
  }

  int edge_count() const { return g_.edge_count(); }
  const MixedGraph& graph() const noexcept { return g_; }

  /// Set when no consistent extension existed and a tie-break order was used.
  bool forced = false;

  bool operator==(const Dag& o) const { return g_ == o.g_; }

 private:
  MixedGraph g_;
};

/// Observed variables 0..d-1 plus the surrogate node at index d.
class AugmentedGraph {
 public:
  AugmentedGraph() = default;
  explicit AugmentedGraph(int d) : d_(d), g_(d + 1) {}

  int d() const noexcept { return d_; }
  int surrogate() const noexcept { return d_; }
  int node_count() const noexcept { return d_ + 1; }

  const MixedGraph& graph() const noexcept { return g_; }

  bool adjacent(int i, int j) const { return g_.adjacent(i, j); }
  bool directed(int i, int j) const { return g_.directed(i, j); }
  bool undirected(int i, int j) const { return g_.undirected(i, j); }
  std::vector<int> neighbors(int i) const { return g_.neighbors(i); }

  /// Observed nodes adjacent to the surrogate, ascending. Always derived from
  /// the edge set, so it cannot drift from the adjacency.
  VarSet changing_modules() const {
    VarSet out;
    for (int i = 0; i < d_; ++i)
      if (g_.adjacent(surrogate(), i)) out.push_back(i);
    return out;
  }

  void remove_edge(int i, int j, VarSet sepset) {
    if (!g_.adjacent(i, j)) return;
    std::sort(sepset.begin(), sepset.end());
    g_.remove(i, j);
    sepsets_[key(i, j)] = std::move(sepset);
  }

  /// Orients an existing edge. Edges at the surrogate may only point away from it.
  void orient(int from, int to) {
    if (to == surrogate()) throw input_error("surrogate node cannot have parents");
    if (!g_.adjacent(from, to)) throw input_error("cannot orient an absent edge");
    g_.add_directed(from, to);
  }

  void set_undirected(int i, int j) {
    if (!g_.adjacent(i, j)) throw input_error("cannot unorient an absent edge");
    g_.add_undirected(i, j);
  }

  const VarSet* sepset(int i, int j) const {
    auto it = sepsets_.find(key(i, j));
    return it == sepsets_.end() ? nullptr : &it->second;
  }

  const std::map<std::pair<int, int>, VarSet>& sepsets() const noexcept { return sepsets_; }

  bool conflicted(int i, int j) const { return conflicts_.count(key(i, j)) != 0; }
  void mark_conflict(int i, int j) { conflicts_.insert(key(i, j)); }
  const std::set<std::pair<int, int>>& conflicts() const noexcept { return conflicts_; }

  std::vector<std::string>& diagnostics() noexcept { return diagnostics_; }
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

  /// The observed-variable part with the surrogate dropped.
  PatternGraph pattern() const {
    PatternGraph p(d_);
    for (int i = 0; i < d_; ++i)
      for (int j = 0; j < d_; ++j) {
        if (g_.directed(i, j)) p.add_directed(i, j);
        else if (i < j && g_.undirected(i, j)) p.add_undirected(i, j);
      }
    return p;
  }

  /// Graph equality ignores diagnostics, which are a log.
  bool operator==(const AugmentedGraph& o) const {
    return d_ == o.d_ && g_ == o.g_ && sepsets_ == o.sepsets_ && conflicts_ == o.conflicts_;
  }

  static std::pair<int, int> key(int i, int j) { return {std::min(i, j), std::max(i, j)}; }

  // Raw edge insertion for deserialization and tests.
  MixedGraph& mutable_graph() noexcept { return g_; }

 private:
  int d_ = 0;
  MixedGraph g_;
  std::map<std::pair<int, int>, VarSet> sepsets_;
  std::set<std::pair<int, int>> conflicts_;
  std::vector<std::string> diagnostics_;
};

inline AugmentedGraph complete_augmented(int d) {
  if (d < 1) throw config_error("augmented graph needs at least one observed variable");
  AugmentedGraph g(d);
  for (int i = 0; i <= d; ++i)
    for (int j = i + 1; j <= d; ++j) g.mutable_graph().add_undirected(i, j);
  return g;
}

namespace detail {

inline std::string edge_name(const AugmentedGraph& g, int i) {
  return i == g.surrogate() ? std::string("U") : "V" + std::to_string(i);
}

/// Orients from -> to unless that closes a directed cycle.
inline bool try_orient(AugmentedGraph& g, int from, int to, const char* rule) {
  if (g.graph().has_directed_path(to, from)) {
    g.mark_conflict(from, to);
    g.diagnostics().push_back(std::string("conflict ") + rule + ": " + edge_name(g, from) + "->" +
                              edge_name(g, to) + " would close a cycle; left undirected");
    return false;
  }
  g.orient(from, to);
  return true;
}

inline bool meek_r1(const AugmentedGraph& g, int i, int j) {
  for (int k = 0; k < g.node_count(); ++k)
    if (k != j && g.directed(k, i) && !g.adjacent(k, j)) return true;
  return false;
}

inline bool meek_r2(const AugmentedGraph& g, int i, int j) {
  for (int k = 0; k < g.node_count(); ++k)
    if (g.directed(i, k) && g.directed(k, j)) return true;
  return false;
}

inline bool meek_r3(const AugmentedGraph& g, int i, int j) {
  const int n = g.node_count();
  for (int k = 0; k < n; ++k) {
    if (k == j || !g.undirected(i, k) || !g.directed(k, j)) continue;
    for (int l = k + 1; l < n; ++l)
      if (l != j && g.undirected(i, l) && g.directed(l, j) && !g.adjacent(k, l)) return true;
  }
  return false;
}

inline bool meek_r4(const AugmentedGraph& g, int i, int j) {
  const int n = g.node_count();
  for (int k = 0; k < n; ++k) {
    if (k == j || !g.undirected(i, k) || g.adjacent(k, j)) continue;
    for (int l = 0; l < n; ++l)
      if (l != i && l != k && g.directed(k, l) && g.directed(l, j) && g.adjacent(i, l)) return true;
  }
  return false;
}

/// Orients unshielded colliders a -> b <- c where b is outside sepset(a, c).
/// Triples through the surrogate with an observed collider are the
/// one-changing-module rule; collider demands on the surrogate itself are
/// dropped because it has no parents.
inline void orient_colliders(AugmentedGraph& g) {
  const int n = g.node_count();
  std::map<std::pair<int, int>, unsigned> demands;  // bit 1: lo->hi, bit 2: hi->lo
  auto demand = [&](int from, int to) {
    demands[AugmentedGraph::key(from, to)] |= from < to ? 1u : 2u;
  };
  for (int b = 0; b < n; ++b) {
    const auto nb = g.neighbors(b);
    for (std::size_t x = 0; x < nb.size(); ++x)
      for (std::size_t y = x + 1; y < nb.size(); ++y) {
        const int a = nb[x], c = nb[y];
        if (g.adjacent(a, c)) continue;
        const VarSet* sep = g.sepset(a, c);
        if (sep == nullptr) {
          g.diagnostics().push_back("no sepset for nonadjacent " + edge_name(g, a) + "," + edge_name(g, c));
          continue;
        }
        if (std::binary_search(sep->begin(), sep->end(), b)) continue;
        if (b == g.surrogate()) {
          g.diagnostics().push_back("ignored collider at surrogate between " + edge_name(g, a) + "," +
                                    edge_name(g, c));
          continue;
        }
        demand(a, b);
        demand(c, b);
      }
  }
  for (const auto& [edge, bits] : demands) {
    const auto [lo, hi] = edge;
    if (g.conflicted(lo, hi)) continue;
    if (bits == 3u) {
      if (g.undirected(lo, hi)) {
        g.mark_conflict(lo, hi);
        g.diagnostics().push_back("conflict collider: " + edge_name(g, lo) + "--" + edge_name(g, hi) +
                                  " demanded both ways; left undirected");
      }
      continue;
    }
    const int from = bits == 1u ? lo : hi;
    const int to = bits == 1u ? hi : lo;
    if (g.undirected(from, to)) {
      try_orient(g, from, to, "collider");
    } else if (g.directed(to, from)) {
      g.diagnostics().push_back("conflict collider: " + edge_name(g, from) + "->" + edge_name(g, to) +
                                " contradicts existing orientation; kept");
    }
  }
}

/// Meek rules 1-4 to fixpoint, scanning ordered pairs ascending.
inline void propagate(AugmentedGraph& g) {
  const int n = g.node_count();
  bool changed = true;
  while (changed) {
    changed = false;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j || !g.undirected(i, j) || g.conflicted(i, j) || j == g.surrogate()) continue;
        if (meek_r1(g, i, j) || meek_r2(g, i, j) || meek_r3(g, i, j) || meek_r4(g, i, j))
          changed |= try_orient(g, i, j, "propagation");
      }
  }
}

}  // namespace detail

/// Collider orientation from recorded sepsets followed by closure under the
/// standard propagation rules. Never removes an edge and never closes a cycle;
/// contradictory demands leave the edge undirected and are recorded.
inline AugmentedGraph apply_orientation_rules(AugmentedGraph g) {
  for (int i = 0; i < g.d(); ++i)
    if (g.adjacent(g.surrogate(), i) && g.undirected(g.surrogate(), i)) g.orient(g.surrogate(), i);
  detail::orient_colliders(g);
  detail::propagate(g);
  return g;
}

/// Extends a pattern to a DAG by repeatedly removing a sink whose undirected
/// neighbours are adjacent to all of its other neighbours, highest index first.
/// When no consistent extension exists the remaining undirected edges follow
/// the smallest-index-first topological order and the result is flagged.
inline Dag cpdag_to_dag(const PatternGraph& p) {
  if (!p.directed_part_acyclic()) throw input_error("pattern has a directed cycle");
  const int d = p.d();
  MixedGraph work = p;
  std::vector<char> alive(d, 1);
  int remaining = d;
  bool forced = false;

  while (remaining > 0) {
    int chosen = -1;
    for (int x = d - 1; x >= 0 && chosen < 0; --x) {
      if (!alive[x]) continue;
      bool sink = true;
      for (int y = 0; y < d && sink; ++y)
        if (alive[y] && work.directed(x, y)) sink = false;
      if (!sink) continue;
      std::vector<int> nb;
      for (int y = 0; y < d; ++y)
        if (alive[y] && y != x && work.adjacent(x, y)) nb.push_back(y);
      bool ok = true;
      for (int y : nb) {
        if (!work.undirected(x, y)) continue;
        for (int z : nb)
          if (z != y && !work.adjacent(y, z)) {
            ok = false;
            break;
          }
        if (!ok) break;
      }
      if (ok) chosen = x;
    }
    if (chosen < 0) {
      forced = true;
      break;
    }
    for (int y = 0; y < d; ++y)
      if (alive[y] && work.undirected(chosen, y)) work.add_directed(y, chosen);
    alive[chosen] = 0;
    --remaining;
  }

  if (forced) {
    const auto order = work.topological_order();
    std::vector<int> rank(d);
    for (int r = 0; r < d; ++r) rank[order[r]] = r;
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        if (work.undirected(i, j)) {
          if (rank[i] < rank[j]) work.add_directed(i, j);
          else work.add_directed(j, i);
        }
  }

  Dag dag(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (work.directed(i, j)) dag.add_edge(i, j);
  dag.forced = forced;
  return dag;
}

// ---------------------------------------------------------------------------
// Serialization

inline std::string to_adjacency_text(const MixedGraph& g) {
  std::ostringstream os;
  for (int i = 0; i < g.size(); ++i) {
    for (int j = 0; j < g.size(); ++j) os << (j ? " " : "") << int(g.cell(i, j));
    os << '\n';
  }
  return os.str();
}

inline MixedGraph mixed_graph_from_adjacency_text(const std::string& text) {
  std::vector<std::vector<int>> rows;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::vector<int> row;
    int v;
    while (ls >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  const int n = static_cast<int>(rows.size());
  MixedGraph g(n);
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(rows[i].size()) != n) throw input_error("adjacency matrix is not square");
    for (int j = 0; j < n; ++j) {
      const int v = rows[i][j];
      if (v < 0 || v > 2 || (i == j && v != 0)) throw input_error("bad adjacency entry");
      if (v == 1) {
        if (rows[j][i] != 0) throw input_error("inconsistent directed entry");
        g.add_directed(i, j);
      } else if (v == 2) {
        if (rows[j][i] != 2) throw input_error("asymmetric undirected entry");
        g.add_undirected(i, j);
      }
    }
  }
  return g;
}

inline nlohmann::json edges_to_json(const MixedGraph& g) {
  auto edges = nlohmann::json::array();
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j) {
      if (g.directed(i, j))
        edges.push_back({{"from", i}, {"to", j}, {"mark", "directed"}});
      else if (i < j && g.undirected(i, j))
        edges.push_back({{"from", i}, {"to", j}, {"mark", "undirected"}});
    }
  return edges;
}

inline nlohmann::json to_json(const PatternGraph& p) { return {{"d", p.d()}, {"edges", edges_to_json(p)}}; }

inline nlohmann::json to_json(const Dag& g) {
  return {{"d", g.d()}, {"edges", edges_to_json(g.graph())}};
}

/// Augmented form: node d is the surrogate.
inline nlohmann::json to_json(const AugmentedGraph& g) {
  return {{"d", g.d()}, {"surrogate", true}, {"edges", edges_to_json(g.graph())}};
}

/// Reads the edge-list form into a graph over d nodes (d + 1 if augmented).
inline MixedGraph mixed_graph_from_json(const nlohmann::json& j) {
  if (!j.contains("d") || !j.contains("edges")) throw input_error("graph JSON needs \"d\" and \"edges\"");
  int n = j.at("d").get<int>();
  if (j.value("surrogate", false)) ++n;
  if (n < 0) throw input_error("negative node count");
  MixedGraph g(n);
  for (const auto& e : j.at("edges")) {
    const int from = e.at("from").get<int>();
    const int to = e.at("to").get<int>();
    const auto mark = e.at("mark").get<std::string>();
    if (from < 0 || to < 0 || from >= n || to >= n || from == to) throw input_error("edge index out of range");
    if (g.adjacent(from, to)) throw input_error("duplicate edge in graph JSON");
    if (mark == "directed") g.add_directed(from, to);
    else if (mark == "undirected") g.add_undirected(from, to);
    else throw input_error("unknown edge mark \"" + mark + "\"");
  }
  return g;
}

inline Dag dag_from_graph(const MixedGraph& g) {
  Dag dag(g.size());
  for (int i = 0; i < g.size(); ++i)
    for (int j = 0; j < g.size(); ++j) {
      if (g.undirected(i, j)) throw input_error("DAG input contains an undirected edge");
      if (g.directed(i, j)) dag.add_edge(i, j);
    }
  return dag;
}

}  // namespace fedcdh
