// fedcdh: generate benchmarks, run federated discovery (in-process or over
// TCP), evaluate graphs, and run benchmark sweeps.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <future>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fedcdh/fedcdh.hpp"

#ifndef FEDCDH_VERSION
#define FEDCDH_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fedcdh;

namespace {

// FEDCDH_LOG=quiet|info|debug
int log_level() {
  static const int level = [] {
    const char* v = std::getenv("FEDCDH_LOG");
    if (!v) return 1;
    const std::string s = v;
    return s == "quiet" ? 0 : s == "debug" ? 2 : 1;
  }();
  return level;
}

template <typename... Args>
void info(const char* fmt, Args... args) {
  if (log_level() < 1) return;
  std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

template <typename... Args>
void debug(const char* fmt, Args... args) {
  if (log_level() < 2) return;
  std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

fs::path default_run_dir(std::uint64_t seed) {
  const std::time_t now = std::time(nullptr);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", std::localtime(&now));
  return fs::path("runs") / (std::string(stamp) + "-s" + std::to_string(seed));
}

struct Manifest {
  std::string command;
  std::vector<std::string> argv;
  json config;
  std::uint64_t seed = 0;
  json inputs = json::array();
  json outputs = json::array();
  double wall_s = 0.0;
};

void write_manifest(const fs::path& dir, const Manifest& m) {
  const json j{{"command", m.command}, {"argv", m.argv},       {"config", m.config},   {"seed", m.seed},
               {"inputs", m.inputs},   {"outputs", m.outputs}, {"version", FEDCDH_VERSION},
               {"wall_clock_s", m.wall_s}};
  write_file_atomic(dir / "manifest.json", j.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// shared option groups

struct FedOpts {
  int h = 5;
  std::uint64_t seed = 0;
  bool single_round = false;
  double fixed_sigma = 1.0;
  bool one_hot = false;

  FederationConfig get() const {
    FederationConfig c;
    c.h = h;
    c.seed = seed;
    c.single_round = single_round;
    c.fixed_sigma = fixed_sigma;
    c.one_hot_surrogate = one_hot;
    return c;
  }
};

struct DiscOpts {
  double alpha = 0.05;
  double gamma = kDefaultRidge;
  int max_cond = 3;
  double tie_tol = kDefaultTieTolerance;

  DiscoveryConfig get(std::uint64_t seed) const {
    DiscoveryConfig c;
    c.alpha = alpha;
    c.gamma = gamma;
    c.max_cond_size = max_cond;
    c.tie_tol = tie_tol;
    c.seed = seed;
    return c;
  }
};

void add_fed_opts(CLI::App* app, FedOpts& o) {
  app->add_option("--h", o.h, "random features per variable")->capture_default_str();
  app->add_option("--seed", o.seed, "feature seed")->capture_default_str();
  app->add_flag("--single-round", o.single_round, "skip the bandwidth round; use --fixed-sigma for every variable");
  app->add_option("--fixed-sigma", o.fixed_sigma, "bandwidth in single-round mode")->capture_default_str();
  app->add_flag("--one-hot", o.one_hot, "one-hot surrogate features (needs h >= K)");
}

void add_disc_opts(CLI::App* app, DiscOpts& o) {
  app->add_option("--alpha", o.alpha, "significance level")->capture_default_str();
  app->add_option("--gamma", o.gamma, "ridge parameter")->capture_default_str();
  app->add_option("--max-cond", o.max_cond, "largest conditioning set")->capture_default_str();
  app->add_option("--tie-tol", o.tie_tol, "relative tie tolerance for direction scores")->capture_default_str();
}

std::string client_file_name(int k, int K) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "client_%0*d.csv", K >= 100 ? 3 : 2, k);
  return buf;
}

// ---------------------------------------------------------------------------
// gen

struct GenOpts {
  GenConfig cfg;
  std::string family = "linear_gaussian";
  bool plain_square = false;
  std::string out;
};

json to_json(const GenConfig& c) {
  return {{"d", c.d},           {"K", c.K},         {"n_k", c.n_k},
          {"edge_factor", c.edge_factor}, {"family", to_string(c.family)}, {"n_changing", c.n_changing},
          {"seed", c.seed},     {"signed_square", c.signed_square}};
}

int cmd_gen(GenOpts o, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  o.cfg.family = family_from_string(o.family);
  o.cfg.signed_square = !o.plain_square;
  o.cfg.validate();
  const fs::path dir = o.out.empty() ? default_run_dir(o.cfg.seed) : fs::path(o.out);
  const Benchmark b = generate(o.cfg);
  fs::create_directories(dir);
  Manifest m{"gen", argv, to_json(o.cfg), o.cfg.seed};
  const auto names = o.cfg.family == Family::PostNonlinearPower ? std::vector<std::string>{"W", "X", "Y", "Z"}
                                                                 : default_names(o.cfg.d);
  for (int k = 0; k < o.cfg.K; ++k) {
    const auto name = client_file_name(k + 1, o.cfg.K);
    write_csv(dir / name, names, b.clients[k]);
    m.outputs.push_back(name);
  }
  write_file_atomic(dir / "truth.json", to_json(b.truth).dump(2) + "\n");
  write_file_atomic(dir / "truth.txt", to_adjacency_text(b.truth.graph()));
  write_file_atomic(dir / "changing.json", json(b.changing).dump() + "\n");
  for (const char* f : {"truth.json", "truth.txt", "changing.json"}) m.outputs.push_back(f);
  m.wall_s = since(t0);
  write_manifest(dir, m);
  std::printf("%s\n", dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// discover

struct DiscoverOpts {
  FedOpts fed;
  DiscOpts disc;
  std::string data;
  std::string serve;
  std::string client;
  std::string client_id;
  int domain = 0;
  std::vector<std::string> roster;
  int roster_size = 0;
  double timeout = 60.0;
  std::string port_file;
  std::string out;
};

std::vector<ClientDataset> load_clients(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw io_error("data directory " + dir.string() + " does not exist");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw input_error("no client CSV files in " + dir.string());
  std::vector<ClientDataset> out;
  for (const auto& f : files) {
    Table t = read_csv(f);
    if (!out.empty() && t.names != out.front().columns)
      throw input_error(f.string() + ": header differs from " + files.front().string());
    out.push_back({f.stem().string(), std::move(t.names), std::move(t.values), 0});
  }
  return out;
}

json discover_config(const DiscoverOpts& o) {
  return {{"federation", to_json(o.fed.get())}, {"discovery", to_json(o.disc.get(o.fed.seed))}};
}

int cmd_discover(const DiscoverOpts& o, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  const int modes = !o.serve.empty() + !o.client.empty() + (o.client.empty() && !o.data.empty());
  if (modes != 1) throw config_error("choose exactly one of --data DIR, --serve ADDR, --client ADDR");
  const FederationConfig fed = o.fed.get();
  const DiscoveryConfig disc = o.disc.get(o.fed.seed);
  fed.validate();
  disc.validate();

  if (!o.client.empty()) {
    if (o.data.empty()) throw config_error("--client needs --data FILE.csv");
    Table t = read_csv(o.data);
    ClientDataset ds{o.client_id.empty() ? fs::path(o.data).stem().string() : o.client_id, std::move(t.names),
                     std::move(t.values), o.domain};
    const ClientReport rep = run_client(wire::parse_endpoint(o.client), ds, o.timeout);
    info("client %s: domain %d, uploaded %zu tensor bytes", ds.id.c_str(), rep.domain, rep.upload_bytes);
    return 0;
  }

  const fs::path dir = o.out.empty() ? default_run_dir(o.fed.seed) : fs::path(o.out);
  Manifest m{"discover", argv, discover_config(o), o.fed.seed};
  Session session;
  DiscoveryResult result;
  std::vector<std::string> ids, columns;

  if (!o.serve.empty()) {
    ServeConfig sc;
    sc.bind = wire::parse_endpoint(o.serve);
    sc.roster = o.roster;
    sc.roster_size = o.roster_size;
    sc.timeout_s = o.timeout;
    sc.federation = fed;
    sc.discovery = disc;
    sc.on_listening = [&](int port) {
      info("listening on %s:%d", sc.bind.host.c_str(), port);
      if (!o.port_file.empty()) write_file_atomic(o.port_file, std::to_string(port) + "\n");
    };
    ServeResult r = serve(sc);
    session = std::move(r.session);
    result = std::move(r.discovery);
    ids = r.roster;
    for (const auto& id : ids) m.inputs.push_back("tcp:" + id);
  } else {
    auto clients = load_clients(o.data);
    for (const auto& c : clients) {
      ids.push_back(c.id);
      m.inputs.push_back((fs::path(o.data) / (c.id + ".csv")).string());
    }
    columns = clients.front().columns;
    session = simulate(clients, fed);
    result = run(session.summary, disc);
  }
  if (columns.empty())
    for (int j = 0; j < session.summary.observed(); ++j) columns.push_back("V" + std::to_string(j));

  write_bundle(dir, {session, result, fed, disc, ids, columns});
  for (const auto& f : bundle_files()) m.outputs.push_back(f);
  m.outputs.push_back("timings.json");
  m.wall_s = since(t0);
  write_manifest(dir, m);
  debug("%zu CI tests", result.test_count);
  std::printf("%s", to_adjacency_text(result.pattern).c_str());
  info("bundle written to %s", dir.string().c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// eval

MixedGraph load_graph(const fs::path& p) {
  fs::path file = p;
  if (fs::is_directory(p)) {
    if (fs::exists(p / "dag.json")) file = p / "dag.json";
    else if (fs::exists(p / "truth.json")) file = p / "truth.json";
    else throw io_error(p.string() + " holds neither dag.json nor truth.json");
  }
  const std::string text = read_file(file);
  if (file.extension() == ".json") {
    try {
      return mixed_graph_from_json(json::parse(text));
    } catch (const json::exception& e) {
      throw input_error(file.string() + ": " + e.what());
    }
  }
  return mixed_graph_from_adjacency_text(text);
}

struct EvalOpts {
  std::vector<std::string> pred;
  std::vector<std::string> truth;
  int reversal_cost = 1;
  std::string out;
};

int cmd_eval(const EvalOpts& o, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  if (o.pred.size() != o.truth.size())
    throw config_error("--pred and --truth must be given the same number of times");
  std::vector<EvalReport> reports;
  for (std::size_t i = 0; i < o.pred.size(); ++i) {
    const MixedGraph pred = load_graph(o.pred[i]);
    const Dag truth = dag_from_graph(load_graph(o.truth[i]));
    reports.push_back(evaluate(pred, truth, o.reversal_cost));
  }
  json report;
  std::string table;
  if (reports.size() == 1) {
    report = to_json(reports.front());
    table = format_table(reports.front());
  } else {
    const auto b = summarize(reports);
    report = to_json(b);
    table = format_table(b);
  }
  std::printf("%s", table.c_str());
  if (!o.out.empty()) {
    const fs::path dir = o.out;
    write_file_atomic(dir / "eval.json", report.dump(2) + "\n");
    write_file_atomic(dir / "eval.txt", table);
    Manifest m{"eval", argv, {{"reversal_cost", o.reversal_cost}}, 0};
    for (std::size_t i = 0; i < o.pred.size(); ++i) m.inputs.push_back({{"pred", o.pred[i]}, {"truth", o.truth[i]}});
    m.outputs = {"eval.json", "eval.txt"};
    m.wall_s = since(t0);
    write_manifest(dir, m);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// bench

struct BenchOpts {
  std::string suite;
  int seeds = 10;
  int d = 6, K = 10, n_k = 100, edge_factor = 1;
  std::string vary;  // d | K | n_k
  std::vector<int> values;
  std::vector<int> hs{5, 10, 15};
  std::vector<int> sizes{200, 400, 600, 800, 1000};
  int reps = 200;
  int jobs = 1;
  FedOpts fed;
  DiscOpts disc;
  std::string out;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; results keep index order.
template <typename T, typename F>
std::vector<T> parallel_map(int n, int jobs, F fn) {
  std::vector<T> out(n);
  jobs = std::max(1, jobs);
  for (int start = 0; start < n; start += jobs) {
    std::vector<std::future<T>> batch;
    for (int i = start; i < std::min(n, start + jobs); ++i) batch.push_back(std::async(std::launch::async, fn, i));
    for (int i = 0; i < static_cast<int>(batch.size()); ++i) out[start + i] = batch[i].get();
  }
  return out;
}

BatchSummary bench_cell(const BenchOpts& o, GenConfig base, int h) {
  auto reports = parallel_map<EvalReport>(o.seeds, o.jobs, [&](int s) {
    GenConfig g = base;
    g.seed = static_cast<std::uint64_t>(s);
    const Benchmark b = generate(g);
    FederationConfig fed = o.fed.get();
    fed.h = h;
    fed.seed = g.seed;
    const Session sess = simulate(to_clients(b.clients), fed);
    const DiscoveryResult r = run(sess.summary, o.disc.get(g.seed));
    return evaluate(r.dag, b.truth);
  });
  return summarize(reports);
}

std::string bench_header(const std::string& key) {
  return key + ",skeleton_f1,skeleton_f1_sd,skeleton_precision,skeleton_recall,skeleton_shd,skeleton_shd_sd," +
         "direction_f1,direction_f1_sd,direction_precision,direction_recall,direction_shd,direction_shd_sd\n";
}

std::string bench_row(int key, const BatchSummary& b) {
  char buf[512];
  std::snprintf(buf, sizeof buf, "%d,%.4f,%.4f,%.4f,%.4f,%.3f,%.3f,%.4f,%.4f,%.4f,%.4f,%.3f,%.3f\n", key,
                b.sk_f1.mean, b.sk_f1.sd, b.sk_precision.mean, b.sk_recall.mean, b.sk_shd.mean, b.sk_shd.sd,
                b.dir_f1.mean, b.dir_f1.sd, b.dir_precision.mean, b.dir_recall.mean, b.dir_shd.mean, b.dir_shd.sd);
  return buf;
}

int cmd_bench(const BenchOpts& o, const std::vector<std::string>& argv) {
  const auto t0 = Clock::now();
  const fs::path dir = o.out.empty() ? default_run_dir(o.fed.seed) : fs::path(o.out);
  Manifest m{"bench", argv, {{"suite", o.suite}, {"seeds", o.seeds}}, o.fed.seed};
  std::string csv;
  std::string name;

  if (o.suite == "linear" || o.suite == "functional") {
    GenConfig base;
    base.d = o.d;
    base.K = o.K;
    base.n_k = o.n_k;
    base.edge_factor = o.edge_factor;
    base.family = o.suite == "linear" ? Family::LinearGaussian : Family::GeneralFunctional;
    const std::string key = o.vary.empty() ? "h" : o.vary;
    std::vector<int> values = o.values;
    if (o.vary.empty()) values = {o.fed.h};
    else if (o.vary != "d" && o.vary != "K" && o.vary != "n_k") throw config_error("--vary must be d, K or n_k");
    if (values.empty()) throw config_error("--vary needs --values");
    csv = bench_header(key);
    for (int v : values) {
      GenConfig g = base;
      if (o.vary == "d") g.d = v;
      if (o.vary == "K") g.K = v;
      if (o.vary == "n_k") g.n_k = v;
      g.validate();
      csv += bench_row(v, bench_cell(o, g, o.fed.h));
      info("%s %s=%d done (%.1fs)", o.suite.c_str(), key.c_str(), v, since(t0));
    }
    name = o.suite + (o.vary.empty() ? "" : "_by_" + o.vary) + ".csv";
  } else if (o.suite == "hyper-h") {
    GenConfig base;
    base.d = o.d;
    base.K = o.K;
    base.n_k = o.n_k;
    base.edge_factor = o.edge_factor;
    csv = bench_header("h");
    for (int h : o.hs) {
      csv += bench_row(h, bench_cell(o, base, h));
      info("hyper-h h=%d done (%.1fs)", h, since(t0));
    }
    name = "hyper_h.csv";
  } else if (o.suite == "power") {
    csv = "n,K,reps,power,type1_xz\n";
    for (int n : o.sizes) {
      auto hits = parallel_map<std::pair<int, int>>(o.reps, o.jobs, [&](int r) {
        const auto blocks = gen_postnonlinear_power(n, o.K, static_cast<std::uint64_t>(r));
        FederationConfig fed = o.fed.get();
        fed.seed = static_cast<std::uint64_t>(r);
        const Session s = simulate(to_clients(blocks), fed);
        const auto& g = s.summary;
        const bool dep = !test_ci(g, {1}, {2}, {3}, o.disc.gamma, o.disc.alpha).independent;
        const bool false_alarm = !test_ci(g, {1}, {3}, {}, o.disc.gamma, o.disc.alpha).independent;
        return std::pair<int, int>{dep, false_alarm};
      });
      int power = 0, type1 = 0;
      for (auto [a, b] : hits) power += a, type1 += b;
      char buf[128];
      std::snprintf(buf, sizeof buf, "%d,%d,%d,%.4f,%.4f\n", n, o.K, o.reps, double(power) / o.reps,
                    double(type1) / o.reps);
      csv += buf;
      info("power n=%d done (%.1fs)", n, since(t0));
    }
    name = "power.csv";
  } else {
    throw config_error("unknown suite \"" + o.suite + "\"; expected linear, functional, power or hyper-h");
  }

  fs::create_directories(dir);
  write_file_atomic(dir / name, csv);
  std::printf("%s", csv.c_str());
  m.outputs.push_back(name);
  m.wall_s = since(t0);
  write_manifest(dir, m);
  return 0;
}

int run_cli(std::vector<std::string> args);

int cmd_replay(const std::string& manifest_path) {
  json j;
  try {
    j = json::parse(read_file(manifest_path));
  } catch (const json::exception& e) {
    throw input_error(manifest_path + ": " + e.what());
  }
  auto argv = j.at("argv").get<std::vector<std::string>>();
  if (argv.empty()) throw input_error(manifest_path + ": empty argv");
  return run_cli(std::move(argv));
}

int run_cli(std::vector<std::string> args) {
  CLI::App app{"Federated causal discovery from heterogeneous data"};
  app.set_config("--config", "", "key=value file; keys are <command>.<option> or grouped under [command]");
  app.set_version_flag("--version", FEDCDH_VERSION);
  app.require_subcommand(1);

  GenOpts gen;
  auto* g = app.add_subcommand("gen", "write a synthetic benchmark as one CSV per client");
  g->set_help_flag("--help", "show help");
  g->add_option("--d", gen.cfg.d, "observed variables")->capture_default_str();
  g->add_option("--K", gen.cfg.K, "clients")->capture_default_str();
  g->add_option("--n-k", gen.cfg.n_k, "samples per client")->capture_default_str();
  g->add_option("--edge-factor", gen.cfg.edge_factor, "edges per variable (1 or 2)")->capture_default_str();
  g->add_option("--family", gen.family, "linear_gaussian | general_functional | postnonlinear_power")
      ->capture_default_str();
  g->add_option("--n-changing", gen.cfg.n_changing, "changing modules")->capture_default_str();
  g->add_option("--seed", gen.cfg.seed, "generator seed")->capture_default_str();
  g->add_flag("--plain-square", gen.plain_square, "use x^2 instead of x|x| for the square link");
  g->add_option("--out", gen.out, "output directory (default runs/<timestamp>-s<seed>)");

  DiscoverOpts disc;
  auto* d = app.add_subcommand("discover", "federated discovery from client CSVs or over TCP");
  d->set_help_flag("--help", "show help");
  add_fed_opts(d, disc.fed);
  add_disc_opts(d, disc.disc);
  d->add_option("--data", disc.data, "directory of client CSVs, or one CSV with --client");
  d->add_option("--serve", disc.serve, "run the server on host:port");
  d->add_option("--client", disc.client, "run one client against host:port");
  d->add_option("--client-id", disc.client_id, "client id (default: CSV file stem)");
  d->add_option("--domain", disc.domain, "declared domain index (default: roster position)");
  d->add_option("--roster", disc.roster, "expected client ids in roster order")->delimiter(',');
  d->add_option("--roster-size", disc.roster_size, "expected client count when ids are not listed");
  d->add_option("--timeout", disc.timeout, "seconds to wait for the roster")->capture_default_str();
  d->add_option("--port-file", disc.port_file, "write the bound port here");
  d->add_option("--out", disc.out, "bundle directory (default runs/<timestamp>-s<seed>)");

  EvalOpts ev;
  auto* e = app.add_subcommand("eval", "score predicted graphs against ground truth");
  e->set_help_flag("--help", "show help");
  e->add_option("--pred", ev.pred, "predicted graph: .json, adjacency .txt, or bundle directory")->required();
  e->add_option("--truth", ev.truth, "true DAG: .json, adjacency .txt, or benchmark directory")->required();
  e->add_option("--reversal-cost", ev.reversal_cost, "directed SHD cost of a reversed edge")->capture_default_str();
  e->add_option("--out", ev.out, "write eval.json and eval.txt here");

  BenchOpts bench;
  auto* b = app.add_subcommand("bench", "benchmark sweeps");
  b->set_help_flag("--help", "show help");
  b->add_option("--suite", bench.suite, "linear | functional | power | hyper-h")->required();
  b->add_option("--seeds", bench.seeds, "seeds per cell")->capture_default_str();
  b->add_option("--d", bench.d)->capture_default_str();
  b->add_option("--K", bench.K)->capture_default_str();
  b->add_option("--n-k", bench.n_k)->capture_default_str();
  b->add_option("--edge-factor", bench.edge_factor)->capture_default_str();
  b->add_option("--vary", bench.vary, "sweep d, K or n_k over --values");
  b->add_option("--values", bench.values)->delimiter(',');
  b->add_option("--hs", bench.hs, "h values for hyper-h")->delimiter(',')->capture_default_str();
  b->add_option("--sizes", bench.sizes, "total sample sizes for power")->delimiter(',')->capture_default_str();
  b->add_option("--reps", bench.reps, "replications per size for power")->capture_default_str();
  b->add_option("--jobs", bench.jobs, "concurrent replications")->capture_default_str();
  add_fed_opts(b, bench.fed);
  add_disc_opts(b, bench.disc);
  b->add_option("--out", bench.out, "output directory");

  std::string manifest;
  auto* r = app.add_subcommand("replay", "re-run the command recorded in a manifest");
  r->add_option("manifest", manifest)->required();

  std::vector<std::string> argv(args.begin() + 1, args.end());
  std::vector<std::string> rev(argv.rbegin(), argv.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  // FEDCDH_BIND stands in for --serve when no other mode is chosen.
  if (const char* env = std::getenv("FEDCDH_BIND"); env && *d && disc.serve.empty() && disc.client.empty() && disc.data.empty())
    disc.serve = env;

  if (*g) return cmd_gen(gen, args);
  if (*d) return cmd_discover(disc, args);
  if (*e) return cmd_eval(ev, args);
  if (*b) return cmd_bench(bench, args);
  if (*r) return cmd_replay(manifest);
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  try {
    return run_cli(std::move(args));
  } catch (const Error& e) {
    std::fprintf(stderr, "error (%s): %s\n", to_string(e.kind()), e.what());
    return e.kind() == ErrorKind::InvalidConfig ? 2 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
