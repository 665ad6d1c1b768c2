#pragma once

// Small fixtures shared by the test binaries. Unlike oracle.hpp these go
// through the library.

#include <vector>

#include <Eigen/Dense>

#include "fedcdh/features.hpp"
#include "fedcdh/graph.hpp"
#include "fedcdh/rng.hpp"
#include "fedcdh/summary.hpp"

namespace support {

inline fedcdh::GlobalSummary summary_of(const Eigen::MatrixXd& data, const std::vector<fedcdh::FeatureMap>& maps) {
  const fedcdh::LocalMoments m = fedcdh::compute_local_moments(data, maps);
  return fedcdh::aggregate(std::span<const fedcdh::LocalMoments>(&m, 1));
}

/// Splits rows into K contiguous blocks of random (nonzero) sizes.
inline std::vector<Eigen::MatrixXd> random_split(const Eigen::MatrixXd& data, int K, fedcdh::Rng& rng) {
  std::vector<Eigen::Index> cuts{0};
  std::vector<Eigen::Index> pool;
  for (Eigen::Index r = 1; r < data.rows(); ++r) pool.push_back(r);
  rng.shuffle(pool);
  pool.resize(K - 1);
  std::sort(pool.begin(), pool.end());
  cuts.insert(cuts.end(), pool.begin(), pool.end());
  cuts.push_back(data.rows());
  std::vector<Eigen::MatrixXd> out;
  for (int k = 0; k < K; ++k) out.push_back(data.middleRows(cuts[k], cuts[k + 1] - cuts[k]));
  return out;
}

inline fedcdh::GlobalSummary split_summary(const std::vector<Eigen::MatrixXd>& parts,
                                           const std::vector<fedcdh::FeatureMap>& maps) {
  std::vector<fedcdh::LocalMoments> local;
  for (const auto& p : parts) local.push_back(fedcdh::compute_local_moments(p, maps));
  return fedcdh::aggregate(local);
}

inline double rel_diff(double a, double b) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) / scale;
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-300});
  return (a - b).norm() / scale;
}

/// Complete augmented graph with each edge removed with probability 0.55 under
/// a random sepset.
inline fedcdh::AugmentedGraph random_augmented(int d, fedcdh::Rng& rng) {
  auto g = fedcdh::complete_augmented(d);
  for (int i = 0; i <= d; ++i)
    for (int j = i + 1; j <= d; ++j) {
      if (rng.uniform01() >= 0.55) continue;
      fedcdh::VarSet sep;
      for (int k = 0; k <= d; ++k)
        if (k != i && k != j && rng.uniform01() < 0.3) sep.push_back(k);
      g.remove_edge(i, j, sep);
    }
  return g;
}

}  // namespace support
