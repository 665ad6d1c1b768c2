#pragma once

// Client/server protocol logic shared by the in-process simulator and the
// wire mode: bandwidth round, feature-spec construction, moment upload and
// aggregation in roster order.

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fedcdh/error.hpp"
#include "fedcdh/features.hpp"
#include "fedcdh/summary.hpp"

namespace fedcdh {

inline constexpr int kProtocolVersion = 1;

struct FederationConfig {
  int h = 5;
  std::uint64_t seed = 0;
  /// Skip the scalar-moment round and use fixed_sigma for every variable.
  bool single_round = false;
  double fixed_sigma = 1.0;
  bool one_hot_surrogate = false;

  void validate() const {
    if (h < 1) throw config_error("h must be at least 1");
    if (!(fixed_sigma > 0.0)) throw config_error("fixed bandwidth must be positive");
  }
};

inline nlohmann::json to_json(const FederationConfig& c) {
  return {{"h", c.h}, {"seed", c.seed}, {"single_round", c.single_round}, {"fixed_sigma", c.fixed_sigma},
          {"one_hot_surrogate", c.one_hot_surrogate}};
}

/// One client's raw data. domain == 0 lets the server assign one.
struct ClientDataset {
  std::string id;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // n_k x d, observed variables only
  int domain = 0;
};

/// Population standard deviation from aggregated scalar moments; a constant
/// (or empty) column falls back to bandwidth 1.
inline double bandwidth_from_moments(const ScalarMoments& m) {
  if (m.count <= 0.0) return 1.0;
  const double mean = m.sum / m.count;
  const double var = m.sum_sq / m.count - mean * mean;
  const double sd = var > 0.0 ? std::sqrt(var) : 0.0;
  return sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
}

/// Observed continuous variables first, surrogate (K categories) last.
inline FeatureSpec build_feature_spec(const std::vector<ScalarMoments>& global, int d, int K,
                                      const FederationConfig& cfg) {
  cfg.validate();
  FeatureSpec spec;
  spec.h = cfg.h;
  spec.seed = cfg.seed;
  spec.one_hot_discrete = cfg.one_hot_surrogate;
  for (int j = 0; j < d; ++j) {
    const double sigma = cfg.single_round ? cfg.fixed_sigma : bandwidth_from_moments(global.at(j));
    spec.variables.push_back(VariableSpec::continuous(sigma));
  }
  spec.variables.push_back(VariableSpec::discrete(K));
  spec.validate();
  return spec;
}

/// Appends the surrogate column holding the client's domain index.
inline Eigen::MatrixXd with_domain_column(const Eigen::MatrixXd& values, int domain) {
  Eigen::MatrixXd out(values.rows(), values.cols() + 1);
  out.leftCols(values.cols()) = values;
  out.col(values.cols()).setConstant(static_cast<double>(domain));
  return out;
}

/// Declared domains are kept; the rest are numbered by roster position.
inline std::vector<int> assign_domains(std::span<const ClientDataset> clients) {
  std::vector<int> out;
  std::map<int, std::string> used;
  for (std::size_t k = 0; k < clients.size(); ++k) {
    const int dom = clients[k].domain > 0 ? clients[k].domain : static_cast<int>(k) + 1;
    if (dom > static_cast<int>(clients.size()))
      throw protocol_error("client " + clients[k].id + " declares domain " + std::to_string(dom) +
                           " outside 1.." + std::to_string(clients.size()));
    if (auto [it, fresh] = used.emplace(dom, clients[k].id); !fresh)
      throw protocol_error("clients " + it->second + " and " + clients[k].id + " share domain " + std::to_string(dom));
    out.push_back(dom);
  }
  return out;
}

inline void check_schema(std::span<const ClientDataset> clients) {
  if (clients.empty()) throw protocol_error("no clients");
  const auto& ref = clients.front();
  for (const auto& c : clients) {
    if (c.values.rows() < 1) throw protocol_error("client " + c.id + " has an empty dataset");
    if (c.values.cols() != ref.values.cols() || (!c.columns.empty() && !ref.columns.empty() && c.columns != ref.columns))
      throw protocol_error("client " + c.id + " does not match the schema of client " + ref.id);
  }
}

/// What the server holds after both rounds.
struct Session {
  FeatureSpec spec;
  GlobalSummary summary;
  std::vector<int> domains;
  std::vector<std::size_t> upload_bytes;  // tensor payload per client
};

/// In-process run of the protocol. Clients are processed in the given order,
/// which is also the aggregation order.
inline Session simulate(std::span<const ClientDataset> clients, const FederationConfig& cfg) {
  cfg.validate();
  check_schema(clients);
  const int d = static_cast<int>(clients.front().values.cols());
  const int K = static_cast<int>(clients.size());

  Session session;
  session.domains = assign_domains(clients);

  // Round A: raw scalar moments, summed in client order.
  std::vector<ScalarMoments> global(d);
  if (!cfg.single_round)
    for (const auto& c : clients) {
      const auto local = compute_scalar_moments(c.values, d);
      for (int j = 0; j < d; ++j) global[j] += local[j];
    }
  session.spec = build_feature_spec(global, d, K, cfg);

  // Round B: broadcast spec, local feature moments, aggregation.
  const auto maps = draw_feature_maps(session.spec);
  std::vector<LocalMoments> parts;
  for (std::size_t k = 0; k < clients.size(); ++k) {
    parts.push_back(compute_local_moments(with_domain_column(clients[k].values, session.domains[k]), maps));
    session.upload_bytes.push_back(encode_tensor(parts.back()).size());
  }
  session.summary = aggregate(parts);
  return session;
}

inline std::vector<ClientDataset> to_clients(const std::vector<Eigen::MatrixXd>& blocks,
                                             const std::vector<std::string>& columns = {}) {
  std::vector<ClientDataset> out;
  for (std::size_t k = 0; k < blocks.size(); ++k)
    out.push_back({"client" + std::to_string(k + 1), columns, blocks[k], 0});
  return out;
}

}  // namespace fedcdh
