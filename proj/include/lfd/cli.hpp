/*
 * Copyright 2026 The LFD Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef LFD_CLI_HPP_
#define LFD_CLI_HPP_

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/error.hpp"
#include "lfd/evaluation.hpp"
#include "lfd/layout.hpp"
#include "lfd/metrics.hpp"
#include "lfd/pipeline.hpp"
#include "lfd/service.hpp"
#include "lfd/shap.hpp"
#include "lfd/synthetic.hpp"

namespace lfd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

inline constexpr int kExitOk = 0;

inline int ExitCode(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput: return 2;
    case ErrorKind::kDegenerate: return 3;
    case ErrorKind::kTraining: return 4;
    case ErrorKind::kIo: return 5;
  }
  return 1;
}

// Flags shared by every data-driven command.
struct CommonOptions {
  std::string data;
  double threshold = 0.15;
  std::size_t shap_bins = 20;
  std::size_t feature_bins = 20;
  std::string weights = "2,1,2,1";
  std::size_t top_k = 15;
  std::uint64_t seed = 42;
  std::string out;
};

inline MetricWeights ParseWeights(std::string_view text) {
  MetricWeights w{};
  std::size_t k = 0;
  while (true) {
    const auto comma = text.find(',');
    const auto v = detail::ParseDouble(text.substr(0, comma));
    if (!v || k == w.size() || !std::isfinite(*v) || *v < 0.0) {
      throw InputError("--weights expects four non-negative numbers, e.g. 2,1,2,1");
    }
    w[k++] = *v;
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  if (k != w.size()) throw InputError("--weights expects four non-negative numbers, e.g. 2,1,2,1");
  return w;
}

inline PipelineConfig MakeConfig(const CommonOptions& o) {
  PipelineConfig cfg;
  detail::CheckThreshold(o.threshold);
  cfg.threshold = o.threshold;
  cfg.binning.shap_bin_count = o.shap_bins;
  cfg.binning.feature_bin_count = o.feature_bins;
  cfg.binning.validate();
  cfg.weights = ParseWeights(o.weights);
  cfg.train.seed = o.seed;
  cfg.layout_seed = o.seed;
  return cfg;
}

inline std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline ScoredDataset LoadDatasetFile(const std::string& path) {
  if (path.empty()) throw InputError("--data is required");
  return LoadDataset(ReadFile(path));
}

inline std::string UtcTimestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

// Feature names are free text; file names are not.
inline std::string SafeFileName(std::string_view name) {
  std::string out;
  for (char c : name) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
    out += ok ? c : '_';
  }
  return out.empty() ? "_" : out;
}

// Writes files under one directory and removes them again unless committed.
class OutputSet {
 public:
  explicit OutputSet(fs::path root) : root_(std::move(root)) {}
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;

  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (auto it = written_.rbegin(); it != written_.rend(); ++it) fs::remove(*it, ec);
    for (auto it = dirs_.rbegin(); it != dirs_.rend(); ++it) fs::remove(*it, ec);
  }

  void Write(const fs::path& relative, std::string_view content) {
    const fs::path path = root_ / relative;
    MakeDirs(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    written_.push_back(path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
  }

  void Commit() { committed_ = true; }

 private:
  void MakeDirs(const fs::path& dir) {
    if (dir.empty() || fs::exists(dir)) return;
    MakeDirs(dir.parent_path());
    std::error_code ec;
    if (!fs::create_directory(dir, ec) && !fs::is_directory(dir)) {
      throw IoError("cannot create directory '" + dir.string() + "'");
    }
    dirs_.push_back(dir);
  }

  fs::path root_;
  std::vector<fs::path> written_;
  std::vector<fs::path> dirs_;
  bool committed_ = false;
};

inline json Manifest(const CommonOptions& o, const PipelineConfig& cfg) {
  return {{"input", o.data},
          {"threshold", cfg.threshold},
          {"binning", {{"shap_bins", cfg.binning.shap_bin_count},
                       {"feature_bins", cfg.binning.feature_bin_count}}},
          {"weights", {{"magnitude", cfg.weights[0]},
                       {"consistency", cfg.weights[1]},
                       {"contrast", cfg.weights[2]},
                       {"correlation", cfg.weights[3]}}},
          {"k", o.top_k},
          {"seed", o.seed},
          {"output", o.out},
          {"version", LFD_VERSION}};
}

inline std::string Dump(const json& j) { return j.dump(2) + "\n"; }

inline std::string SummaryText(const ScoredDataset& d, const ThresholdAnalysis& a,
                               std::size_t top_k) {
  std::ostringstream out;
  out << "instances " << d.size() << ", meta-features " << d.features.cols() << "\n";
  out << "threshold " << FormatDouble(a.capture.threshold) << ": cutoff A "
      << FormatDouble(a.capture.cutoff_a) << ", cutoff B " << FormatDouble(a.capture.cutoff_b)
      << "\n";
  for (Side side : {Side::kTp, Side::kFp}) {
    out << SideName(side) << " cells:";
    for (Cell c : {Cell::kBoth, Cell::kAOnly, Cell::kBOnly}) {
      out << ' ' << CellName(c) << '=' << a.cells.cell(c, side).size();
    }
    out << "\n";
  }
  for (const SideAnalysis* s : {&a.tp, &a.fp}) {
    out << "\n" << s->name << " discriminator: auc " << FormatDouble(s->auc()) << ", trees "
        << s->discriminator.trees.size() << ", rows " << s->training.instances.size() << "\n";
    const std::size_t k = std::min(top_k, s->profiles.size());
    for (std::size_t r = 0; r < k; ++r) {
      const auto& p = s->profiles[r];
      out << "  " << r + 1 << ". " << p.feature << "  overall " << FormatDouble(p.overall)
          << "\n";
    }
  }
  return out.str();
}

// Full pipeline from CSV to artifacts. Partial outputs are removed on error.
inline void CmdRun(const CommonOptions& o) {
  if (o.out.empty()) throw InputError("--out is required");
  const PipelineConfig cfg = MakeConfig(o);
  const ScoredDataset d = LoadDatasetFile(o.data);

  OutputSet out(o.out);
  json manifest = Manifest(o, cfg);
  manifest["timestamp"] = UtcTimestamp();
  out.Write("manifest.json", Dump(manifest));

  const ThresholdAnalysis a = AnalyzeThreshold(d, cfg);
  json cells = ToJson(a.cells);
  cells["capture"] = ToJson(a.capture);
  out.Write("cells.json", Dump(cells));
  for (const SideAnalysis* s : {&a.tp, &a.fp}) {
    out.Write("discriminator_" + s->name + ".json", Dump(ToJson(s->discriminator)));
    std::ostringstream shap;
    WriteShapBinary(s->shap, shap);
    out.Write("shap_" + s->name + ".bin", shap.str());
    out.Write("rankings_" + s->name + ".json",
              Dump({{"side", s->name},
                    {"auc", s->auc()},
                    {"max_additivity_error", s->max_additivity_error},
                    {"features", ToJson(s->profiles)}}));
  }
  for (const SideAnalysis* s : {&a.tp, &a.fp}) {
    for (const auto& p : s->profiles) {
      const FeatureLayout layout = BuildFeatureLayout(*s, p.feature, cfg);
      const std::string stem = "layouts/" + s->name + "_" + SafeFileName(p.feature);
      out.Write(stem + ".json", Dump(ToJson(layout)));
      out.Write(stem + ".svg", RenderSvg(s->name + ": " + p.feature, layout.packed.bubbles,
                                         layout.area, cfg.scale));
    }
  }
  out.Write("summary.txt", SummaryText(d, a, o.top_k));
  out.Commit();
}

struct EnsembleCommand {
  std::vector<std::string> metrics;  // empty: all five
  double eval_split = 0.3;
  double lambda = 1e-4;
};

inline EnsembleReport CmdEnsemble(const CommonOptions& o, const EnsembleCommand& e,
                                  std::ostream& out) {
  const PipelineConfig cfg = MakeConfig(o);
  const ScoredDataset d = LoadDatasetFile(o.data);
  EnsembleOptions options;
  if (!e.metrics.empty()) {
    options.metrics.clear();
    for (const auto& m : e.metrics) options.metrics.push_back(ParseMetric(m));
  }
  options.k = o.top_k;
  options.eval_split = e.eval_split;
  options.seed = o.seed;
  options.lambda = e.lambda;
  EnsembleReport report = RunEnsemble(d, cfg, options);
  WriteEnsembleCsv(report, out);
  return report;
}

struct AblationCommand {
  std::string order = "both";
  int repeats = 100;
  std::string side = "tp";
  unsigned threads = 0;
};

inline AblationCurve CmdAblation(const CommonOptions& o, const AblationCommand& c,
                                 std::ostream& out) {
  const PipelineConfig cfg = MakeConfig(o);
  AblationOptions options;
  options.order = ParseAblationOrder(c.order);
  options.repeats = c.repeats;
  options.seed = o.seed;
  options.threads = c.threads;
  const Side side = ParseSide(c.side);
  const ScoredDataset d = LoadDatasetFile(o.data);
  const CaptureResult capture = Capture(d, cfg.threshold);
  const DisagreementCells cells = JoinCells(capture, d.labels);
  RequireDisagreement(cells);
  const SideAnalysis s = AnalyzeSide(d, DiscriminatorTrainingSet(cells, side),
                                     std::string(SideName(side)), cfg);
  std::vector<std::string> order;
  for (const auto& p : s.profiles) order.push_back(p.feature);
  AblationCurve curve = Ablation(s.features, s.training.labels, order, options, cfg.train);
  WriteAblationCsv(curve, out);
  return curve;
}

struct ServeCommand {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string snapshot_dir;
};

// Binds the service; returns the session id of a preloaded dataset, if any.
inline std::optional<std::string> PrepareServer(service::Service& svc, httplib::Server& server,
                                                const CommonOptions& o, const ServeCommand& c) {
  if (c.port < 0 || c.port > 65535) throw InputError("--port must lie in [0,65535]");
  svc.Register(server);
  std::optional<std::string> preloaded;
  if (!o.data.empty()) preloaded = svc.CreateSession(ReadFile(o.data))->id;
  return preloaded;
}

inline int CmdServe(const CommonOptions& o, const ServeCommand& c) {
  service::ServiceOptions options;
  options.pipeline = MakeConfig(o);
  if (!c.snapshot_dir.empty()) options.snapshot_dir = c.snapshot_dir;
  service::Service svc(std::move(options));
  httplib::Server server;
  const auto preloaded = PrepareServer(svc, server, o, c);
  int port = c.port;
  if (port == 0) {
    port = server.bind_to_any_port(c.host);
    if (port < 0) throw IoError("cannot bind " + c.host);
  } else if (!server.bind_to_port(c.host, port)) {
    throw IoError("cannot bind " + c.host + ":" + std::to_string(port));
  }
  std::cout << "listening on http://" << c.host << ':' << port << std::endl;
  if (preloaded) std::cout << "session " << *preloaded << std::endl;
  if (!server.listen_after_bind()) throw IoError("server stopped unexpectedly");
  return kExitOk;
}

struct SynthCommand {
  std::string kind = "planted";  // or "complementary"
  std::size_t n = 10000;
  std::size_t m = 20;
};

inline ScoredDataset CmdSynth(const CommonOptions& o, const SynthCommand& c, std::ostream& out) {
  ScoredDataset d;
  if (c.kind == "planted") {
    synthetic::PlantedOptions p;
    p.n = c.n;
    p.m = c.m;
    p.seed = o.seed;
    d = synthetic::Planted(p);
  } else if (c.kind == "complementary") {
    synthetic::ComplementaryOptions p;
    p.n = c.n;
    p.m = c.m;
    p.seed = o.seed;
    d = synthetic::Complementary(p);
  } else {
    throw InputError("unknown synthetic kind '" + c.kind + "' (expected planted or complementary)");
  }
  WriteDataset(d, out);
  return d;
}

}  // namespace lfd::cli

#endif  // LFD_CLI_HPP_
