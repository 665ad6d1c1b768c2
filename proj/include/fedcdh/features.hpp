#pragma once

// Random-feature embeddings. Continuous variables use cosine features whose
// inner products approximate a Gaussian kernel; the discrete domain index
// uses random sign rows whose inner products equal the delta kernel in
// expectation (exactly, in the one-hot mode).

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "fedcdh/error.hpp"
#include "fedcdh/graph.hpp"
#include "fedcdh/rng.hpp"

namespace fedcdh {

enum class VariableKind { Continuous, Discrete };

struct VariableSpec {
  VariableKind kind = VariableKind::Continuous;
  double sigma = 1.0;   // kernel bandwidth, continuous only
  int categories = 0;   // K, discrete only

  static VariableSpec continuous(double sigma) { return {VariableKind::Continuous, sigma, 0}; }
  static VariableSpec discrete(int k) { return {VariableKind::Discrete, 0.0, k}; }

  bool operator==(const VariableSpec&) const = default;
};

/// Everything a client needs to embed its data exactly like every other client.
struct FeatureSpec {
  int h = 5;
  std::uint64_t seed = 0;
  std::vector<VariableSpec> variables;
  /// Scaled one-hot rows for discrete variables; requires h >= K.
  bool one_hot_discrete = false;

  int variable_count() const { return static_cast<int>(variables.size()); }

  void validate() const {
    if (h < 1) throw config_error("feature count h must be at least 1");
    for (std::size_t j = 0; j < variables.size(); ++j) {
      const auto& v = variables[j];
      if (v.kind == VariableKind::Continuous && !(v.sigma > 0.0 && std::isfinite(v.sigma)))
        throw config_error("bandwidth of variable " + std::to_string(j) + " must be positive");
      if (v.kind == VariableKind::Discrete) {
        if (v.categories < 1) throw config_error("discrete variable needs at least one category");
        if (one_hot_discrete && v.categories > h)
          throw config_error("one-hot discrete features need h >= K");
      }
    }
  }

  bool operator==(const FeatureSpec&) const = default;
};

struct ContinuousFeatureMap {
  Eigen::VectorXd w;  // frequencies, N(0, 1) / sigma
  Eigen::VectorXd b;  // phases, U[0, 2 pi)
};

struct DiscreteFeatureMap {
  Eigen::MatrixXd signs;  // K x h, row k-1 for category k
};

using FeatureMap = std::variant<ContinuousFeatureMap, DiscreteFeatureMap>;

inline int feature_count(const FeatureMap& m) {
  return std::visit([](const auto& x) -> int {
    if constexpr (std::is_same_v<std::decay_t<decltype(x)>, ContinuousFeatureMap>) return int(x.w.size());
    else return int(x.signs.cols());
  }, m);
}

/// One map per variable; each draw depends only on (seed, variable, category).
inline std::vector<FeatureMap> draw_feature_maps(const FeatureSpec& spec) {
  spec.validate();
  std::vector<FeatureMap> maps;
  maps.reserve(spec.variables.size());
  for (std::size_t j = 0; j < spec.variables.size(); ++j) {
    const auto& v = spec.variables[j];
    if (v.kind == VariableKind::Continuous) {
      Rng rng(derive_seed(spec.seed, 1, j));
      ContinuousFeatureMap m{Eigen::VectorXd(spec.h), Eigen::VectorXd(spec.h)};
      for (int t = 0; t < spec.h; ++t) m.w[t] = rng.normal() / v.sigma;
      for (int t = 0; t < spec.h; ++t) m.b[t] = rng.uniform(0.0, 2.0 * std::numbers::pi);
      maps.emplace_back(std::move(m));
    } else {
      DiscreteFeatureMap m{Eigen::MatrixXd::Zero(v.categories, spec.h)};
      for (int k = 0; k < v.categories; ++k) {
        if (spec.one_hot_discrete) {
          m.signs(k, k) = std::sqrt(static_cast<double>(spec.h));
        } else {
          Rng rng(derive_seed(spec.seed, 2, j, k + 1));
          for (int t = 0; t < spec.h; ++t) m.signs(k, t) = rng.coin() ? 1.0 : -1.0;
        }
      }
      maps.emplace_back(std::move(m));
    }
  }
  return maps;
}

inline void embed_continuous_into(double x, const ContinuousFeatureMap& m, Eigen::Ref<Eigen::VectorXd> out) {
  if (!std::isfinite(x)) throw input_error("non-finite sample value");
  const double scale = std::sqrt(2.0 / static_cast<double>(m.w.size()));
  for (Eigen::Index t = 0; t < m.w.size(); ++t) out[t] = scale * std::cos(m.w[t] * x + m.b[t]);
}

inline Eigen::VectorXd embed_continuous(double x, const ContinuousFeatureMap& m) {
  Eigen::VectorXd out(m.w.size());
  embed_continuous_into(x, m, out);
  return out;
}

/// Category k is 1-based.
inline void embed_discrete_into(int k, const DiscreteFeatureMap& m, Eigen::Ref<Eigen::VectorXd> out) {
  if (k < 1 || k > m.signs.rows())
    throw input_error("category " + std::to_string(k) + " outside 1.." + std::to_string(m.signs.rows()));
  out = m.signs.row(k - 1).transpose() / std::sqrt(static_cast<double>(m.signs.cols()));
}

inline Eigen::VectorXd embed_discrete(int k, const DiscreteFeatureMap& m) {
  Eigen::VectorXd out(m.signs.cols());
  embed_discrete_into(k, m, out);
  return out;
}

inline void embed_into(double value, const FeatureMap& m, Eigen::Ref<Eigen::VectorXd> out) {
  if (const auto* c = std::get_if<ContinuousFeatureMap>(&m)) {
    embed_continuous_into(value, *c, out);
    return;
  }
  if (!std::isfinite(value) || value != std::round(value))
    throw input_error("discrete value must be an integer category");
  embed_discrete_into(static_cast<int>(value), std::get<DiscreteFeatureMap>(m), out);
}

inline Eigen::VectorXd embed(double value, const FeatureMap& m) {
  Eigen::VectorXd out(feature_count(m));
  embed_into(value, m, out);
  return out;
}

/// Sum of member embeddings; values[i] is the sample of variable members[i].
inline Eigen::VectorXd embed_set(std::span<const double> values, const VarSet& members,
                                 std::span<const FeatureMap> maps, int h) {
  if (values.size() != members.size()) throw input_error("embed_set: value/member count mismatch");
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(h);
  Eigen::VectorXd tmp(h);
  for (std::size_t i = 0; i < members.size(); ++i) {
    const int v = members[i];
    if (v < 0 || v >= static_cast<int>(maps.size())) throw input_error("embed_set: no map for variable");
    embed_into(values[i], maps[v], tmp);
    sum += tmp;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const FeatureSpec& s) {
  auto vars = nlohmann::json::array();
  for (const auto& v : s.variables) {
    if (v.kind == VariableKind::Continuous) vars.push_back({{"kind", "continuous"}, {"sigma", v.sigma}});
    else vars.push_back({{"kind", "discrete"}, {"k", v.categories}});
  }
  nlohmann::json j{{"h", s.h}, {"seed", s.seed}, {"variables", vars}};
  if (s.one_hot_discrete) j["one_hot_discrete"] = true;
  return j;
}

inline FeatureSpec feature_spec_from_json(const nlohmann::json& j) {
  FeatureSpec s;
  try {
    s.h = j.at("h").get<int>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.one_hot_discrete = j.value("one_hot_discrete", false);
    for (const auto& v : j.at("variables")) {
      const auto kind = v.at("kind").get<std::string>();
      if (kind == "continuous") s.variables.push_back(VariableSpec::continuous(v.at("sigma").get<double>()));
      else if (kind == "discrete") s.variables.push_back(VariableSpec::discrete(v.at("k").get<int>()));
      else throw input_error("unknown variable kind \"" + kind + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("malformed feature spec: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace fedcdh
