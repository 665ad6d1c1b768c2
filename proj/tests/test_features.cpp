#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fedcdh/features.hpp"
#include "fedcdh/summary.hpp"
#include "oracle.hpp"

using namespace fedcdh;

static FeatureSpec one_var(int h, double sigma, std::uint64_t seed = 1) {
  FeatureSpec s;
  s.h = h;
  s.seed = seed;
  s.variables = {VariableSpec::continuous(sigma), VariableSpec::discrete(4)};
  return s;
}

TEST(Features, DrawsAreDeterministic) {
  const auto a = draw_feature_maps(one_var(7, 1.3, 42));
  const auto b = draw_feature_maps(one_var(7, 1.3, 42));
  const auto& ca = std::get<ContinuousFeatureMap>(a[0]);
  const auto& cb = std::get<ContinuousFeatureMap>(b[0]);
  EXPECT_EQ(0, std::memcmp(ca.w.data(), cb.w.data(), sizeof(double) * 7));
  EXPECT_EQ(0, std::memcmp(ca.b.data(), cb.b.data(), sizeof(double) * 7));
  EXPECT_EQ(std::get<DiscreteFeatureMap>(a[1]).signs, std::get<DiscreteFeatureMap>(b[1]).signs);
}

TEST(Features, VariablesGetDistinctDraws) {
  FeatureSpec s;
  s.h = 5;
  s.variables = {VariableSpec::continuous(1.0), VariableSpec::continuous(1.0)};
  const auto m = draw_feature_maps(s);
  EXPECT_NE(std::get<ContinuousFeatureMap>(m[0]).w, std::get<ContinuousFeatureMap>(m[1]).w);
}

TEST(Features, SingleFeature) {
  const auto m = draw_feature_maps(one_var(1, 1.0));
  EXPECT_EQ(feature_count(m[0]), 1);
  EXPECT_EQ(feature_count(m[1]), 1);
}

TEST(Features, PhasesAndScale) {
  const auto m = draw_feature_maps(one_var(200, 2.0, 9));
  const auto& c = std::get<ContinuousFeatureMap>(m[0]);
  EXPECT_GE(c.b.minCoeff(), 0.0);
  EXPECT_LT(c.b.maxCoeff(), 2.0 * std::numbers::pi);
  // w ~ N(0, 1/sigma^2): sample variance near 1/4.
  const double var = c.w.squaredNorm() / 200.0;
  EXPECT_NEAR(var, 0.25, 0.1);
}

TEST(Features, ContinuousClosedForms) {
  ContinuousFeatureMap m{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  EXPECT_DOUBLE_EQ(embed_continuous(3.7, m)[0], std::sqrt(2.0));
  ContinuousFeatureMap m2{Eigen::VectorXd::Zero(2), Eigen::Vector2d(0.0, std::numbers::pi)};
  const auto v = embed_continuous(-1.0, m2);
  EXPECT_NEAR(v[0], 1.0, 1e-15);
  EXPECT_NEAR(v[1], -1.0, 1e-15);
  EXPECT_THROW(embed_continuous(std::nan(""), m), Error);
}

TEST(Features, ComponentsBounded) {
  const auto m = draw_feature_maps(one_var(9, 0.7, 3));
  const auto& c = std::get<ContinuousFeatureMap>(m[0]);
  for (double x : {-100.0, -1.0, 0.0, 0.3, 55.5})
    EXPECT_LE(embed_continuous(x, c).cwiseAbs().maxCoeff(), std::sqrt(2.0 / 9.0) + 1e-15);
}

TEST(Features, GaussianKernelApproximation) {
  // Monte-Carlo over redraws with h = 2000 against exp(-(x-y)^2 / (2 sigma^2)).
  const double sigma = 1.5;
  for (auto [x, y] : {std::pair{0.0, 0.5}, {1.0, -1.0}, {0.2, 2.9}}) {
    double mean = 0.0;
    const int redraws = 20;
    for (int r = 0; r < redraws; ++r) {
      const auto m = draw_feature_maps(one_var(2000, sigma, 100 + r));
      const auto& c = std::get<ContinuousFeatureMap>(m[0]);
      mean += embed_continuous(x, c).dot(embed_continuous(y, c)) / redraws;
    }
    EXPECT_NEAR(mean, std::exp(-(x - y) * (x - y) / (2 * sigma * sigma)), 0.05);
  }
}

TEST(Features, DiscreteSelfProductIsOne) {
  for (int h : {1, 5, 16}) {
    const auto m = draw_feature_maps(one_var(h, 1.0, 7));
    const auto& d = std::get<DiscreteFeatureMap>(m[1]);
    for (int k = 1; k <= 4; ++k) EXPECT_DOUBLE_EQ(embed_discrete(k, d).squaredNorm(), 1.0);
  }
}

TEST(Features, DiscreteCrossProductH1) {
  const auto m = draw_feature_maps(one_var(1, 1.0, 7));
  const auto& d = std::get<DiscreteFeatureMap>(m[1]);
  const double p = embed_discrete(1, d).dot(embed_discrete(2, d));
  EXPECT_TRUE(p == 1.0 || p == -1.0);
}

TEST(Features, DiscreteCrossProductUnbiased) {
  double mean = 0.0;
  for (int r = 0; r < 100; ++r) {
    const auto m = draw_feature_maps(one_var(1000, 1.0, 500 + r));
    const auto& d = std::get<DiscreteFeatureMap>(m[1]);
    const double p = embed_discrete(1, d).dot(embed_discrete(2, d));
    ASSERT_LE(std::abs(p), 1.0);
    mean += p / 100;
  }
  EXPECT_LE(std::abs(mean), 0.1);
}

TEST(Features, DiscreteRangeChecked) {
  const auto m = draw_feature_maps(one_var(3, 1.0));
  const auto& d = std::get<DiscreteFeatureMap>(m[1]);
  EXPECT_THROW(embed_discrete(0, d), Error);
  EXPECT_THROW(embed_discrete(5, d), Error);
  EXPECT_THROW(embed(1.5, m[1]), Error);
}

TEST(Features, OneHotSwitch) {
  FeatureSpec s = one_var(4, 1.0);
  s.one_hot_discrete = true;
  const auto m = draw_feature_maps(s);
  const auto& d = std::get<DiscreteFeatureMap>(m[1]);
  for (int k = 1; k <= 4; ++k)
    for (int l = 1; l <= 4; ++l) EXPECT_DOUBLE_EQ(embed_discrete(k, d).dot(embed_discrete(l, d)), k == l ? 1.0 : 0.0);
  s.h = 3;
  EXPECT_THROW(draw_feature_maps(s), Error);
}

TEST(Features, EmbedSet) {
  const auto m = draw_feature_maps(oracle::random_spec(3, 2, 4, 8));
  const double vals[] = {0.3, -1.2};
  EXPECT_EQ(embed_set(std::span<const double>(vals, 1), {0}, m, 4), embed(0.3, m[0]));
  EXPECT_EQ(embed_set({}, {}, m, 4), Eigen::VectorXd::Zero(4));
  EXPECT_TRUE(embed_set(vals, {0, 2}, m, 4).isApprox(embed(0.3, m[0]) + embed(-1.2, m[2])));
}

TEST(Features, SetCovarianceExpandsToBlockSum) {
  // 10 samples; covariance of the summed {Z1, Z2} embedding against the four blocks.
  const int h = 3;
  const auto spec = oracle::random_spec(2, 2, h, 21);
  const auto maps = draw_feature_maps(spec);
  const Eigen::MatrixXd data = oracle::random_data(10, 2, 2, 4);
  Eigen::MatrixXd set_phi(10, h);
  for (int i = 0; i < 10; ++i) {
    const double v[] = {data(i, 0), data(i, 1)};
    set_phi.row(i) = embed_set(v, {0, 1}, maps, h).transpose();
  }
  const auto p1 = oracle::features(data, 0, maps[0]);
  const auto p2 = oracle::features(data, 1, maps[1]);
  const Eigen::MatrixXd expect = oracle::cov(p1, p1) + oracle::cov(p1, p2) + oracle::cov(p2, p1) + oracle::cov(p2, p2);
  EXPECT_LE((oracle::cov(set_phi, set_phi) - expect).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Features, KernelTraceIdentities) {
  // With the feature inner product as the kernel, tr(K~_{x,y}) = n tr(C_xy)
  // and tr(K~_x K~_y) = n^2 ||C_xy||_F^2.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int n = 3 + int(seed % 6), h = 1 + int(seed % 3);
    const auto maps = draw_feature_maps(oracle::random_spec(2, 3, h, seed));
    const Eigen::MatrixXd data = oracle::random_data(n, 2, 3, seed + 50);
    const auto px = oracle::features(data, 0, maps[0]);
    const auto py = oracle::features(data, 1, maps[1]);
    const Eigen::MatrixXd H = oracle::centering(n);
    const Eigen::MatrixXd kx = H * px * px.transpose() * H, ky = H * py * py.transpose() * H;
    const Eigen::MatrixXd kxy = H * px * py.transpose() * H;
    const Eigen::MatrixXd c = oracle::cov(px, py);
    EXPECT_NEAR((kx * ky).trace(), n * n * c.squaredNorm(), 1e-8);
    EXPECT_NEAR(kxy.trace(), n * c.trace(), 1e-8);
  }
}

TEST(Features, SpecJsonRoundTrip) {
  FeatureSpec s = oracle::random_spec(3, 5, 6, 77);
  const auto j = to_json(s);
  EXPECT_EQ(j["variables"][3]["kind"], "discrete");
  EXPECT_EQ(j["variables"][3]["k"], 5);
  EXPECT_EQ(feature_spec_from_json(j), s);
  auto bad = j;
  bad["variables"][0]["sigma"] = -1.0;
  EXPECT_THROW(feature_spec_from_json(bad), Error);
}
