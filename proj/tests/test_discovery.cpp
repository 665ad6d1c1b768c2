#include <gtest/gtest.h>

#include <functional>

#include "fedcdh/datagen.hpp"
#include "fedcdh/discovery.hpp"
#include "fedcdh/federation.hpp"
#include "support.hpp"

using namespace fedcdh;

namespace {

// Per-domain linear SCM. mech(k, row, rng) fills one row for domain k.
using Mechanism = std::function<void(int, Eigen::Ref<Eigen::RowVectorXd>, Rng&)>;

std::vector<ClientDataset> clients_from(int d, int K, int n_k, std::uint64_t seed, const Mechanism& mech) {
  std::vector<ClientDataset> out;
  for (int k = 0; k < K; ++k) {
    Rng rng(derive_seed(seed, 7, k));
    Eigen::MatrixXd m(n_k, d);
    for (int i = 0; i < n_k; ++i) {
      Eigen::RowVectorXd row(d);
      mech(k, row, rng);
      m.row(i) = row;
    }
    out.push_back({"c" + std::to_string(k), {}, m, 0});
  }
  return out;
}

DiscoveryResult discover(const std::vector<ClientDataset>& clients, const DiscoveryConfig& cfg = {},
                         std::uint64_t seed = 1, int h = 5) {
  FederationConfig fc;
  fc.seed = seed;
  fc.h = h;
  return run(simulate(clients, fc).summary, cfg);
}

std::vector<ClientDataset> chain(int K, int n_k, std::uint64_t seed) {
  return clients_from(3, K, n_k, seed, [](int, auto row, Rng& rng) {
    row[0] = rng.normal();
    row[1] = row[0] + rng.normal();
    row[2] = row[1] + rng.normal();
  });
}

}  // namespace

TEST(Discovery, SingleVariableRunsOneTest) {
  const auto clients = clients_from(1, 3, 30, 1, [](int k, auto row, Rng& rng) { row[0] = k + rng.normal(); });
  const auto r = discover(clients);
  EXPECT_EQ(r.test_count, 1u);
  EXPECT_EQ(r.pattern.edge_count(), 0);
  ASSERT_FALSE(r.trace.empty());
  EXPECT_EQ(r.trace.front().rfind("CI X={1} Y={0} Z={}", 0), 0u);
}

TEST(Discovery, MaxCondZeroRunsOnlyMarginalTests) {
  DiscoveryConfig cfg;
  cfg.max_cond_size = 0;
  const auto r = discover(chain(4, 100, 2), cfg);
  for (const auto& line : r.trace)
    if (line.rfind("CI ", 0) == 0) EXPECT_NE(line.find("Z={} "), std::string::npos) << line;
}

TEST(Discovery, ChainSeparatedByMiddle) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto r = discover(chain(10, 100, seed));
    ASSERT_FALSE(r.augmented.adjacent(0, 2)) << seed;
    const VarSet* sep = r.augmented.sepset(0, 2);
    ASSERT_NE(sep, nullptr);
    EXPECT_NE(std::find(sep->begin(), sep->end(), 1), sep->end()) << seed;
  }
}

TEST(Discovery, IndependentPairIsSeparated) {
  int removed = 0, empty = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto clients = clients_from(2, 10, 100, 100 + seed, [](int, auto row, Rng& rng) {
      row[0] = rng.normal();
      row[1] = rng.normal();
    });
    const auto r = discover(clients, {}, seed);
    removed += !r.augmented.adjacent(0, 1);
    empty += r.pattern.edge_count() == 0;
  }
  EXPECT_GE(removed, 45);
  EXPECT_GE(empty, 45);
}

TEST(Discovery, HomogeneousDataHasNoChangingModules) {
  int none = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto r = discover(chain(10, 100, 500 + seed), {}, seed);
    none += r.augmented.changing_modules().empty();
  }
  EXPECT_GE(none, 45);
}

TEST(Discovery, TwoChangingModulesOnAChain) {
  // V0 -> V1 -> V2 with the mechanisms of V1 and V2 varying across domains.
  std::vector<std::array<double, 4>> params;
  Rng draw(77);
  for (int k = 0; k < 10; ++k)
    params.push_back({draw.uniform(0.5, 2.5), draw.uniform(1, 3), draw.uniform(0.5, 2.5), draw.uniform(1, 3)});
  const auto clients = clients_from(3, 10, 100, 78, [&](int k, auto row, Rng& rng) {
    const auto& p = params[k];
    row[0] = rng.normal();
    row[1] = p[0] * row[0] + p[1] * rng.normal();
    row[2] = p[2] * row[1] + p[3] * rng.normal();
  });
  // Five features cannot resolve ten domains reliably; the V1 change needs h = 20.
  const auto r = discover(clients, {}, 1, 20);
  EXPECT_EQ(r.augmented.changing_modules(), (VarSet{1, 2}));
  EXPECT_TRUE(r.pattern.directed(0, 1));
  EXPECT_TRUE(r.pattern.directed(1, 2));
  EXPECT_FALSE(r.pattern.adjacent(0, 2));
}

TEST(Discovery, DeterministicAndStructurallySound) {
  GenConfig gc;
  gc.seed = 3;
  const auto bench = generate(gc);
  const auto clients = to_clients(bench.clients);
  const auto a = discover(clients), b = discover(clients);
  EXPECT_EQ(a.augmented, b.augmented);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.dag, b.dag);
  EXPECT_TRUE(a.dag.graph().directed_part_acyclic());
  EXPECT_TRUE(a.pattern.directed_part_acyclic());
  EXPECT_LE(a.pattern.edge_count(), 15);
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) EXPECT_EQ(a.pattern.adjacent(i, j), a.dag.graph().adjacent(i, j));
}

TEST(Discovery, PhasesNeverAddEdges) {
  GenConfig gc;
  gc.seed = 4;
  const auto bench = generate(gc);
  const auto s = simulate(to_clients(bench.clients), FederationConfig{}).summary;
  DiscoveryConfig cfg;
  TestLog log(s, cfg);
  auto g = complete_augmented(6);
  const int e0 = g.graph().edge_count();
  g = detect_changing_modules(g, log);
  const int e1 = g.graph().edge_count();
  g = discover_skeleton(g, log);
  const int e2 = g.graph().edge_count();
  g = orient(g, log);
  EXPECT_LE(e1, e0);
  EXPECT_LE(e2, e1);
  EXPECT_EQ(g.graph().edge_count(), e2);
  EXPECT_EQ(log.test_count(), run(s, cfg).test_count);
}

TEST(Discovery, SplitAndPooledAgree) {
  GenConfig gc;
  gc.seed = 5;
  gc.K = 4;
  const auto bench = generate(gc);
  // Same rows, same domain labels: one client per domain vs each domain split in two.
  std::vector<ClientDataset> whole, halves;
  for (int k = 0; k < 4; ++k) whole.push_back({"k" + std::to_string(k), {}, bench.clients[k], k + 1});
  const auto s1 = simulate(whole, FederationConfig{}).summary;
  const auto maps = draw_feature_maps(simulate(whole, FederationConfig{}).spec);
  std::vector<Eigen::MatrixXd> parts;
  for (int k = 0; k < 4; ++k) {
    const auto full = with_domain_column(bench.clients[k], k + 1);
    parts.push_back(full.topRows(30));
    parts.push_back(full.bottomRows(70));
  }
  const auto s2 = support::split_summary(parts, maps);
  const auto a = run(s1, {}), b = run(s2, {});
  EXPECT_EQ(a.augmented.graph(), b.augmented.graph());
  EXPECT_EQ(a.dag, b.dag);
}

TEST(Discovery, ConfigValidation) {
  GenConfig gc;
  const auto s = simulate(to_clients(generate(gc).clients), FederationConfig{}).summary;
  DiscoveryConfig cfg;
  cfg.alpha = 1.5;
  EXPECT_THROW(run(s, cfg), Error);
  cfg = {};
  cfg.max_cond_size = -1;
  EXPECT_THROW(run(s, cfg), Error);
}
