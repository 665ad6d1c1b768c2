#pragma once

// Result bundle: graphs in both formats, run report, trace log, and the
// aggregated summary. Everything except timings.json is a pure function of
// (summary, config), so two equivalent runs produce byte-identical files.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedcdh/discovery.hpp"
#include "fedcdh/error.hpp"
#include "fedcdh/federation.hpp"
#include "fedcdh/graph.hpp"
#include "fedcdh/summary.hpp"

namespace fedcdh {

namespace fs = std::filesystem;

/// Writes via a temporary sibling and rename, so readers never see half a file.
inline void write_file_atomic(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw io_error("write failed for " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw io_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot read " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Deterministic files of a bundle, in the order they are written.
inline const std::vector<std::string>& bundle_files() {
  static const std::vector<std::string> files{
      "pattern.txt", "pattern.json", "dag.txt",   "dag.json",       "augmented.txt", "augmented.json",
      "report.json", "trace.log",    "spec.json", "summary.json", "summary.bin"};
  return files;
}

struct BundleInput {
  const Session& session;
  const DiscoveryResult& result;
  const FederationConfig& federation;
  const DiscoveryConfig& discovery;
  std::vector<std::string> clients;  // roster order
  std::vector<std::string> columns;
};

inline nlohmann::json run_report(const BundleInput& in) {
  nlohmann::json clients = nlohmann::json::array();
  for (std::size_t k = 0; k < in.clients.size(); ++k)
    clients.push_back({{"id", in.clients[k]},
                       {"domain", in.session.domains.at(k)},
                       {"upload_bytes", in.session.upload_bytes.at(k)}});
  const auto& aug = in.result.augmented;
  return {{"federation", to_json(in.federation)},
          {"discovery", to_json(in.discovery)},
          {"n", in.session.summary.n},
          {"K", in.clients.size()},
          {"d", in.session.summary.observed()},
          {"columns", in.columns},
          {"clients", clients},
          {"test_count", in.result.test_count},
          {"changing_modules", aug.changing_modules()},
          {"dag_forced", in.result.dag.forced},
          {"edges", {{"pattern", in.result.pattern.edge_count()}, {"dag", in.result.dag.edges().size()}}}};
}

inline void write_bundle(const fs::path& dir, const BundleInput& in) {
  fs::create_directories(dir);
  const auto& r = in.result;
  auto dump = [](const nlohmann::json& j) { return j.dump(2) + "\n"; };
  write_file_atomic(dir / "pattern.txt", to_adjacency_text(r.pattern));
  write_file_atomic(dir / "pattern.json", dump(to_json(r.pattern)));
  write_file_atomic(dir / "dag.txt", to_adjacency_text(r.dag.graph()));
  write_file_atomic(dir / "dag.json", dump(to_json(r.dag)));
  write_file_atomic(dir / "augmented.txt", to_adjacency_text(r.augmented.graph()));
  write_file_atomic(dir / "augmented.json", dump(to_json(r.augmented)));
  write_file_atomic(dir / "report.json", dump(run_report(in)));
  std::string trace;
  for (const auto& line : r.trace) trace += line + "\n";
  write_file_atomic(dir / "trace.log", trace);
  write_file_atomic(dir / "spec.json", dump(to_json(in.session.spec)));
  write_file_atomic(dir / "summary.json", dump(tensor_header(in.session.summary)));
  write_file_atomic(dir / "summary.bin", encode_tensor(in.session.summary));
  const auto& t = r.timings;
  write_file_atomic(dir / "timings.json", dump({{"changing_modules_s", t.changing_modules_s},
                                                {"skeleton_s", t.skeleton_s},
                                                {"orientation_s", t.orientation_s},
                                                {"extension_s", t.extension_s}}));
}

}  // namespace fedcdh
