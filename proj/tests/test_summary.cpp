#include <gtest/gtest.h>

#include "fedcdh/summary.hpp"
#include "oracle.hpp"
#include "support.hpp"

using namespace fedcdh;

TEST(LocalMoments, SingleSampleIsOuterProduct) {
  const auto maps = draw_feature_maps(oracle::random_spec(2, 3, 4, 1));
  Eigen::MatrixXd data(1, 3);
  data << 0.4, -1.1, 2;
  const auto m = compute_local_moments(data, maps);
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const Eigen::MatrixXd expect = embed(data(0, a), maps[a]) * embed(data(0, b), maps[b]).transpose();
      EXPECT_EQ(Eigen::MatrixXd(m.block(a, b)), expect);
    }
  EXPECT_EQ(m.n, 1u);
  ASSERT_EQ(m.scalar.size(), 2u);
  EXPECT_DOUBLE_EQ(m.scalar[1].sum_sq, 1.21);
}

TEST(LocalMoments, MatchesDoubleLoop) {
  // 5 samples, d' = 3.
  const auto maps = draw_feature_maps(oracle::random_spec(2, 3, 3, 2));
  const Eigen::MatrixXd data = oracle::random_data(5, 2, 3, 9);
  const auto m = compute_local_moments(data, maps);
  for (int a = 0; a < 3; ++a) {
    const auto fa = oracle::features(data, a, maps[a]);
    for (int b = 0; b < 3; ++b) {
      const auto fb = oracle::features(data, b, maps[b]);
      Eigen::MatrixXd s2 = Eigen::MatrixXd::Zero(3, 3);
      for (int i = 0; i < 5; ++i)
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 3; ++q) s2(p, q) += fa(i, p) * fb(i, q);
      EXPECT_LE((m.block(a, b) - s2).cwiseAbs().maxCoeff(), 1e-13);
    }
    EXPECT_LE((m.s1.segment(a * 3, 3) - fa.colwise().sum().transpose()).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(LocalMoments, Errors) {
  const auto maps = draw_feature_maps(oracle::random_spec(1, 2, 3, 2));
  Eigen::MatrixXd data(2, 2);
  data << 0.1, 1, std::numeric_limits<double>::infinity(), 2;
  try {
    compute_local_moments(data, maps);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Input);
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos);
  }
  EXPECT_THROW(compute_local_moments(Eigen::MatrixXd(0, 2), maps), Error);
  EXPECT_THROW(compute_local_moments(Eigen::MatrixXd::Zero(3, 3), maps), Error);
}

TEST(Aggregate, OnePartAndDoubling) {
  const auto maps = draw_feature_maps(oracle::random_spec(2, 2, 3, 3));
  const auto m = compute_local_moments(oracle::random_data(7, 2, 2, 3), maps);
  const auto one = aggregate(std::vector<LocalMoments>{m});
  EXPECT_EQ(one.m1, m.s1);
  EXPECT_EQ(one.m2, m.s2);
  const auto two = aggregate(std::vector<LocalMoments>{m, m});
  EXPECT_EQ(two.n, 14u);
  EXPECT_EQ(two.m2, 2.0 * m.s2);
  EXPECT_EQ(two.m1, 2.0 * m.s1);
}

TEST(Aggregate, ShapeMismatchIsProtocolError) {
  const auto a = compute_local_moments(oracle::random_data(4, 2, 2, 3), draw_feature_maps(oracle::random_spec(2, 2, 3, 3)));
  const auto b = compute_local_moments(oracle::random_data(4, 2, 2, 3), draw_feature_maps(oracle::random_spec(2, 2, 4, 3)));
  try {
    aggregate(std::vector<LocalMoments>{a, b});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Protocol);
  }
  EXPECT_THROW(aggregate({}), Error);
}

TEST(Aggregate, AnySplitMatchesPooled) {
  // 40 samples, several K-way splits.
  const auto maps = draw_feature_maps(oracle::random_spec(3, 4, 3, 5));
  const Eigen::MatrixXd data = oracle::random_data(40, 3, 4, 6);
  const auto pooled = support::summary_of(data, maps);
  Rng rng(8);
  for (int K : {1, 2, 3, 5, 10, 40}) {
    const auto s = support::split_summary(support::random_split(data, K, rng), maps);
    EXPECT_EQ(s.n, pooled.n);
    EXPECT_LE(support::rel_diff(s.m2, pooled.m2), 1e-10) << K;
    EXPECT_LE(support::rel_diff(s.m1, pooled.m1), 1e-10) << K;
  }
}

TEST(Aggregate, PermutationInvariantStatistics) {
  const auto maps = draw_feature_maps(oracle::random_spec(2, 4, 3, 5));
  const Eigen::MatrixXd data = oracle::random_data(30, 2, 4, 7);
  Rng rng(2);
  auto parts = support::random_split(data, 4, rng);
  std::vector<LocalMoments> local;
  for (const auto& p : parts) local.push_back(compute_local_moments(p, maps));
  const auto base = aggregate(local);
  for (int t = 0; t < 5; ++t) {
    rng.shuffle(local);
    const auto s = aggregate(local);
    EXPECT_LE((centered_cov(s, {0}, {1}) - centered_cov(base, {0}, {1})).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LE((centered_cov(s, {2}, {0, 1}) - centered_cov(base, {2}, {0, 1})).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(CenteredCov, MatchesExplicitCentering) {
  // 8 samples.
  const auto maps = draw_feature_maps(oracle::random_spec(3, 3, 3, 12));
  const Eigen::MatrixXd data = oracle::random_data(8, 3, 3, 13);
  const auto s = support::summary_of(data, maps);
  for (const VarSet& a : {VarSet{0}, VarSet{1, 2}, VarSet{3}})
    for (const VarSet& b : {VarSet{0}, VarSet{2}, VarSet{0, 1, 3}}) {
      const Eigen::MatrixXd expect =
          oracle::cov(oracle::set_features(data, a, maps, 3), oracle::set_features(data, b, maps, 3));
      EXPECT_LE((centered_cov(s, a, b) - expect).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(CenteredCov, SymmetryPsdAndConstants) {
  const auto maps = draw_feature_maps(oracle::random_spec(2, 3, 4, 12));
  Eigen::MatrixXd data = oracle::random_data(12, 2, 3, 13);
  data.col(1).setConstant(0.75);
  const auto s = support::summary_of(data, maps);
  EXPECT_LE((centered_cov(s, {0}, {2}) - centered_cov(s, {2}, {0}).transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE(centered_cov(s, {1}, {1}).cwiseAbs().maxCoeff(), 1e-15);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(centered_cov(s, {0}, {0}));
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-14);
  EXPECT_THROW(centered_cov(s, {}, {0}), Error);
  EXPECT_THROW(centered_cov(s, {7}, {0}), Error);
}

TEST(Tensor, RoundTripAndPayloadSize) {
  const auto maps = draw_feature_maps(oracle::random_spec(3, 4, 5, 1));
  const auto m = compute_local_moments(oracle::random_data(9, 3, 4, 2), maps);
  const std::string bytes = encode_tensor(m);
  EXPECT_EQ(bytes.size(), tensor_payload_bytes(4, 5));
  EXPECT_EQ(bytes.size(), 8u * (20 + 400));
  auto header = tensor_header(m);
  header["scalar"] = scalar_moments_to_json(m.scalar);
  EXPECT_EQ(decode_local_moments(header, bytes), m);
  // little-endian float64: first byte block is s1[0]
  double first;
  std::memcpy(&first, bytes.data(), 8);
  EXPECT_EQ(first, m.s1[0]);
  EXPECT_THROW(decode_local_moments(header, bytes.substr(1)), Error);
  auto bad = header;
  bad["version"] = 99;
  EXPECT_THROW(decode_local_moments(bad, bytes), Error);
}

TEST(Tensor, DebugJsonCarriesEveryEntry) {
  const auto maps = draw_feature_maps(oracle::random_spec(1, 2, 2, 1));
  const auto s = support::summary_of(oracle::random_data(3, 1, 2, 2), maps);
  const auto j = to_debug_json(s);
  EXPECT_EQ(j["dprime"], 2);
  EXPECT_EQ(j.dump().find("nan"), std::string::npos);
}
