#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedcdh/error.hpp"
#include "fedcdh/graph.hpp"

namespace fedcdh {

struct Scores {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  int shd = 0;
  // confusion counts behind the ratios
  int tp = 0, fp = 0, fn = 0;
};

struct EvalReport {
  Scores skeleton;
  Scores direction;
};

inline double f1_score(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// pred may contain undirected edges: they count for the skeleton but are
/// neither directed predictions nor directed hits. Reversals cost 1 in the
/// directed SHD unless reversal_cost says otherwise.
inline EvalReport evaluate(const MixedGraph& pred, const Dag& truth, int reversal_cost = 1) {
  if (pred.size() != truth.d())
    throw input_error("graph sizes differ: predicted " + std::to_string(pred.size()) + ", truth " +
                      std::to_string(truth.d()));
  const MixedGraph& t = truth.graph();
  const int d = pred.size();
  EvalReport rep;
  auto& sk = rep.skeleton;
  auto& dir = rep.direction;
  int pred_directed = 0, true_edges = 0;
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const bool pa = pred.adjacent(i, j), ta = t.adjacent(i, j);
      if (pa && ta) ++sk.tp;
      else if (pa) ++sk.fp;
      else if (ta) ++sk.fn;
      if (ta) ++true_edges;
      const bool pd = pred.directed(i, j) || pred.directed(j, i);
      if (pd) ++pred_directed;
      const bool hit = ta && ((pred.directed(i, j) && t.directed(i, j)) || (pred.directed(j, i) && t.directed(j, i)));
      if (hit) ++dir.tp;
      if (pa != ta) dir.shd += 1;
      else if (pa && !hit) dir.shd += reversal_cost;
    }
  sk.shd = sk.fp + sk.fn;
  sk.precision = sk.tp + sk.fp > 0 ? double(sk.tp) / (sk.tp + sk.fp) : 0.0;
  sk.recall = sk.tp + sk.fn > 0 ? double(sk.tp) / (sk.tp + sk.fn) : 0.0;
  dir.fp = pred_directed - dir.tp;
  dir.fn = true_edges - dir.tp;
  dir.precision = pred_directed > 0 ? double(dir.tp) / pred_directed : 0.0;
  dir.recall = true_edges > 0 ? double(dir.tp) / true_edges : 0.0;
  sk.f1 = f1_score(sk.precision, sk.recall);
  dir.f1 = f1_score(dir.precision, dir.recall);
  // An empty truth predicted empty is a perfect recovery.
  if (true_edges == 0 && sk.fp == 0) sk.precision = sk.recall = sk.f1 = 1.0;
  if (true_edges == 0 && pred_directed == 0) dir.precision = dir.recall = dir.f1 = 1.0;
  return rep;
}

inline EvalReport evaluate(const Dag& pred, const Dag& truth) { return evaluate(pred.graph(), truth); }

inline nlohmann::json to_json(const Scores& s) {
  return {{"f1", s.f1}, {"precision", s.precision}, {"recall", s.recall}, {"shd", s.shd}};
}

inline nlohmann::json to_json(const EvalReport& r) {
  return {{"skeleton", to_json(r.skeleton)}, {"direction", to_json(r.direction)}};
}

inline std::string format_table(const EvalReport& r) {
  char buf[256];
  std::string out = "           f1      precision  recall     shd\n";
  for (auto [name, s] : {std::pair<const char*, const Scores*>{"skeleton", &r.skeleton}, {"direction", &r.direction}}) {
    std::snprintf(buf, sizeof buf, "%-10s %-8.4f %-10.4f %-10.4f %d\n", name, s->f1, s->precision, s->recall, s->shd);
    out += buf;
  }
  return out;
}

struct MeanStd {
  double mean = 0.0;
  double sd = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd m;
  if (v.empty()) return m;
  for (double x : v) m.mean += x;
  m.mean /= double(v.size());
  if (v.size() > 1) {
    for (double x : v) m.sd += (x - m.mean) * (x - m.mean);
    m.sd = std::sqrt(m.sd / double(v.size() - 1));
  }
  return m;
}

/// Mean and sample standard deviation of every metric over a batch.
struct BatchSummary {
  MeanStd sk_f1, sk_precision, sk_recall, sk_shd;
  MeanStd dir_f1, dir_precision, dir_recall, dir_shd;
  std::size_t count = 0;
};

inline BatchSummary summarize(const std::vector<EvalReport>& reports) {
  auto col = [&](auto get) {
    std::vector<double> v;
    for (const auto& r : reports) v.push_back(get(r));
    return mean_std(v);
  };
  BatchSummary b;
  b.count = reports.size();
  b.sk_f1 = col([](const EvalReport& r) { return r.skeleton.f1; });
  b.sk_precision = col([](const EvalReport& r) { return r.skeleton.precision; });
  b.sk_recall = col([](const EvalReport& r) { return r.skeleton.recall; });
  b.sk_shd = col([](const EvalReport& r) { return double(r.skeleton.shd); });
  b.dir_f1 = col([](const EvalReport& r) { return r.direction.f1; });
  b.dir_precision = col([](const EvalReport& r) { return r.direction.precision; });
  b.dir_recall = col([](const EvalReport& r) { return r.direction.recall; });
  b.dir_shd = col([](const EvalReport& r) { return double(r.direction.shd); });
  return b;
}

inline std::string format_table(const BatchSummary& b) {
  char buf[512];
  std::string out = "           f1                precision         recall            shd\n";
  auto row = [&](const char* name, MeanStd f, MeanStd p, MeanStd r, MeanStd s) {
    std::snprintf(buf, sizeof buf, "%-10s %.3f +- %.3f    %.3f +- %.3f    %.3f +- %.3f    %.2f +- %.2f\n", name, f.mean,
                  f.sd, p.mean, p.sd, r.mean, r.sd, s.mean, s.sd);
    out += buf;
  };
  row("skeleton", b.sk_f1, b.sk_precision, b.sk_recall, b.sk_shd);
  row("direction", b.dir_f1, b.dir_precision, b.dir_recall, b.dir_shd);
  return out;
}

inline nlohmann::json to_json(const BatchSummary& b) {
  auto ms = [](MeanStd m) { return nlohmann::json{{"mean", m.mean}, {"sd", m.sd}}; };
  return {{"count", b.count},
          {"skeleton", {{"f1", ms(b.sk_f1)}, {"precision", ms(b.sk_precision)}, {"recall", ms(b.sk_recall)}, {"shd", ms(b.sk_shd)}}},
          {"direction", {{"f1", ms(b.dir_f1)}, {"precision", ms(b.dir_precision)}, {"recall", ms(b.dir_recall)}, {"shd", ms(b.dir_shd)}}}};
}

}  // namespace fedcdh
