#include <gtest/gtest.h>

#include <filesystem>

#include "fedcdh/citest.hpp"
#include "fedcdh/datagen.hpp"
#include "fedcdh/federation.hpp"

using namespace fedcdh;

TEST(ErDag, EdgeCounts) {
  EXPECT_EQ(gen_er_dag(6, 1, 0).edge_count(), 6);
  EXPECT_EQ(gen_er_dag(6, 2, 0).edge_count(), 12);
  EXPECT_EQ(gen_er_dag(1, 1, 0).edge_count(), 0);
  EXPECT_EQ(gen_er_dag(20, 2, 3).edge_count(), 40);
  EXPECT_THROW(gen_er_dag(3, 2, 0), Error);
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_TRUE(gen_er_dag(8, 1, s).graph().directed_part_acyclic());
  EXPECT_EQ(gen_er_dag(8, 1, 4), gen_er_dag(8, 1, 4));
  EXPECT_NE(gen_er_dag(8, 1, 4), gen_er_dag(8, 1, 5));
}

TEST(Generate, ShapesAndDeterminism) {
  GenConfig cfg;
  const auto a = generate(cfg), b = generate(cfg);
  ASSERT_EQ(a.clients.size(), 10u);
  for (std::size_t k = 0; k < 10; ++k) {
    EXPECT_EQ(a.clients[k].rows(), 100);
    EXPECT_EQ(a.clients[k].cols(), 6);
    EXPECT_EQ(a.clients[k], b.clients[k]);
  }
  EXPECT_EQ(a.changing.size(), 2u);
  EXPECT_NE(a.changing[0], a.changing[1]);
  cfg.n_k = 0;
  EXPECT_THROW(generate(cfg), Error);
}

namespace {

double sample_var(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / double(v.size() - 1);
}

}  // namespace

TEST(LinearGaussian, FixedSourceVarianceInRange) {
  // Source node with a fixed module: variance v ~ U(1, 2) shared by every client.
  Dag dag(2);
  GenConfig cfg;
  cfg.d = 2;
  cfg.n_k = 400;
  cfg.n_changing = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    cfg.seed = seed;
    const auto b = gen_linear_gaussian(dag, cfg);
    const double v = sample_var(b.clients[0].col(0));
    for (const auto& c : b.clients) {
      EXPECT_GE(sample_var(c.col(0)), 0.5 * 1.0);
      EXPECT_LE(sample_var(c.col(0)), 1.5 * 2.0);
      EXPECT_NEAR(sample_var(c.col(0)), v, 0.5 * v);
    }
  }
}

TEST(LinearGaussian, ChangingSourceSpreadsAcrossClients) {
  Dag dag(2);
  GenConfig cfg;
  cfg.d = 2;
  cfg.n_k = 400;
  cfg.n_changing = 2;
  const auto changing = gen_linear_gaussian(dag, cfg);
  cfg.n_changing = 0;
  const auto fixed = gen_linear_gaussian(dag, cfg);
  auto spread = [](const Benchmark& b) {
    Eigen::VectorXd vars(b.clients.size());
    for (std::size_t k = 0; k < b.clients.size(); ++k) vars[k] = sample_var(b.clients[k].col(0));
    return sample_var(vars);
  };
  EXPECT_GT(spread(changing), spread(fixed));
}

TEST(LinearGaussian, EmptyDagGivesIndependentColumns) {
  Dag dag(3);
  GenConfig cfg;
  cfg.d = 3;
  cfg.n_changing = 0;
  int rejections = 0, tests = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    cfg.seed = seed;
    const auto b = gen_linear_gaussian(dag, cfg);
    FederationConfig fc;
    fc.seed = seed;
    const auto s = simulate(to_clients(b.clients), fc).summary;
    for (auto [x, y] : {std::pair{0, 1}, {0, 2}, {1, 2}}) {
      rejections += !test_ci(s, {x}, {y}, {}).independent;
      ++tests;
    }
  }
  EXPECT_LE(double(rejections) / tests, 0.09);
}

TEST(GeneralFunctional, ChangingSpreadAndShapes) {
  Dag dag(2);
  dag.add_edge(0, 1);
  GenConfig cfg;
  cfg.d = 2;
  cfg.n_k = 400;
  cfg.family = Family::GeneralFunctional;
  cfg.n_changing = 2;
  const auto changing = gen_general_functional(dag, cfg);
  cfg.n_changing = 0;
  const auto fixed = gen_general_functional(dag, cfg);
  ASSERT_EQ(changing.clients.size(), 10u);
  auto spread = [](const Benchmark& b) {
    Eigen::VectorXd vars(b.clients.size());
    for (std::size_t k = 0; k < b.clients.size(); ++k) vars[k] = sample_var(b.clients[k].col(1));
    return sample_var(vars);
  };
  EXPECT_GT(spread(changing), spread(fixed));
  for (const auto& c : changing.clients) EXPECT_TRUE(c.allFinite());
}

TEST(PostNonlinear, ZIndependentOfX) {
  int rejections = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto blocks = gen_postnonlinear_power(1000, 10, seed);
    FederationConfig fc;
    fc.seed = seed;
    const auto s = simulate(to_clients(blocks), fc).summary;
    rejections += !test_ci(s, {1}, {3}, {}).independent;
  }
  EXPECT_LE(rejections / 100.0, 0.09);
}

TEST(PostNonlinear, ShapesAndErrors) {
  const auto blocks = gen_postnonlinear_power(100, 4, 1);
  EXPECT_THROW(gen_postnonlinear_power(100, 3, 1), Error);
  ASSERT_EQ(blocks.size(), 4u);
  EXPECT_EQ(blocks[0].rows(), 25);
  EXPECT_EQ(blocks[0].cols(), 4);
  // K = 1 and K = 4 hold the same rows.
  const auto one = gen_postnonlinear_power(100, 1, 1);
  for (int k = 0; k < 4; ++k) EXPECT_EQ(one[0].middleRows(25 * k, 25), blocks[k]);
}

TEST(Csv, RoundTripIsBitExact) {
  GenConfig cfg;
  cfg.family = Family::GeneralFunctional;
  const auto b = generate(cfg);
  const auto path = std::filesystem::temp_directory_path() / ("fedcdh_csv_" + std::to_string(::getpid()) + ".csv");
  write_csv(path, default_names(6), b.clients[3]);
  const auto t = read_csv(path);
  EXPECT_EQ(t.names, default_names(6));
  EXPECT_EQ(t.values, b.clients[3]);
  std::filesystem::remove(path);
}

TEST(Csv, MalformedInputNamesRow) {
  const auto path = std::filesystem::temp_directory_path() / ("fedcdh_bad_" + std::to_string(::getpid()) + ".csv");
  {
    std::ofstream out(path);
    out << "V0,V1\n1,2\n3,x\n";
  }
  try {
    read_csv(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("3"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_THROW(read_csv(path), Error);
}
