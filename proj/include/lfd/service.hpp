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

#ifndef LFD_SERVICE_HPP_
#define LFD_SERVICE_HPP_

#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/disagreement.hpp"
#include "lfd/error.hpp"
#include "lfd/evaluation.hpp"
#include "lfd/layout.hpp"
#include "lfd/metrics.hpp"
#include "lfd/pipeline.hpp"

// After Eigen: <resolv.h> defines `_res`, which Eigen uses as a parameter name.
#include "httplib.h"

#ifndef LFD_VERSION
#define LFD_VERSION "0.1.0"
#endif

namespace lfd::service {

using nlohmann::json;

// Cache key of a threshold: micro-fraction resolution.
inline std::int64_t ThresholdKey(double threshold) {
  return std::llround(threshold * 1e6);
}

// Published result of one threshold job. Immutable once shared.
struct Entry {
  double threshold = 0.0;
  ThresholdAnalysis analysis;
  std::map<std::string, json> area[2];  // per side, by feature; default config

  const SideAnalysis& side(Side s) const {
    return s == Side::kTp ? analysis.tp : analysis.fp;
  }
};

enum class JobState { kPending, kRunning, kDone, kFailed };

inline std::string_view JobStateName(JobState s) {
  switch (s) {
    case JobState::kPending: return "pending";
    case JobState::kRunning: return "running";
    case JobState::kDone: return "done";
    case JobState::kFailed: return "failed";
  }
  return "unknown";
}

inline std::string_view ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput: return "input";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kTraining: return "training";
    case ErrorKind::kIo: return "io";
  }
  return "internal";
}

struct Job {
  std::string id;
  std::string kind;  // "threshold" or "ablation"
  json params;
  std::atomic<JobState> state{JobState::kPending};
  // Written once before state turns done/failed.
  json result;
  std::string error_kind;
  std::string error;

  json ToJson() const {
    const JobState s = state.load();
    json out{{"job", id}, {"kind", kind}, {"params", params}, {"state", JobStateName(s)}};
    if (s == JobState::kDone) out["result"] = result;
    if (s == JobState::kFailed) out["error"] = {{"kind", error_kind}, {"message", error}};
    return out;
  }
};

struct Session {
  std::string id;
  ScoredDataset data;  // immutable after load
  DatasetSummary summary;
  json distribution;

  mutable std::shared_mutex mutex;
  double threshold = 0.15;
  std::map<std::int64_t, std::shared_ptr<const Entry>> entries;
  std::map<std::int64_t, std::string> threshold_jobs;
  std::map<std::string, std::shared_ptr<Job>> jobs;
};

// Raised by handlers for HTTP-level failures that are not module errors.
struct HttpError {
  int status;
  std::string kind;
  std::string message;
};

inline int StatusFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInput: return 400;
    case ErrorKind::kDegenerate: return 422;
    case ErrorKind::kTraining: return 422;
    case ErrorKind::kIo: return 500;
  }
  return 500;
}

inline json ErrorBody(std::string_view kind, std::string_view message) {
  return {{"error", {{"kind", kind}, {"message", message}}}};
}

struct ServiceOptions {
  PipelineConfig pipeline;
  std::optional<std::filesystem::path> snapshot_dir;
};

class Service {
 public:
  explicit Service(ServiceOptions options = {}) : options_(std::move(options)) {}

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Session API, also used by the HTTP handlers.

  std::shared_ptr<Session> CreateSession(std::string_view csv) {
    auto session = std::make_shared<Session>();
    session->data = LoadDataset(csv);
    session->summary = Summarize(session->data);
    const auto grid = DefaultGrid();
    session->distribution = ToJson(DistributionCurve(session->data, grid));
    session->threshold = options_.pipeline.threshold;
    std::lock_guard lock(sessions_mutex_);
    session->id = "s" + std::to_string(++session_counter_);
    sessions_[session->id] = session;
    return session;
  }

  std::shared_ptr<Session> FindSession(const std::string& id) const {
    std::lock_guard lock(sessions_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw HttpError{404, "not_found", "no session '" + id + "'"};
    return it->second;
  }

  json Distribution(const Session& s) const {
    json out = s.distribution;
    double t;
    {
      std::shared_lock lock(s.mutex);
      t = s.threshold;
    }
    const CaptureResult capture = Capture(s.data, t);
    out["current"] = ToJson(capture);
    return out;
  }

  // Starts (or joins) the training job for `threshold`. Returns the job and
  // whether its entry was already published.
  std::pair<std::shared_ptr<Job>, bool> SetThreshold(const std::shared_ptr<Session>& session,
                                                     double threshold) {
    detail::CheckThreshold(threshold);
    Session& s = *session;
    const auto key = ThresholdKey(threshold);
    std::unique_lock lock(s.mutex);
    s.threshold = threshold;
    if (const auto it = s.threshold_jobs.find(key); it != s.threshold_jobs.end()) {
      auto job = s.jobs.at(it->second);
      // A failed job is retried by a new request.
      if (job->state.load() != JobState::kFailed) return {job, s.entries.count(key) > 0};
    }
    auto job = NewJob(s, "threshold", {{"threshold", threshold}});
    s.threshold_jobs[key] = job->id;
    lock.unlock();
    Launch(job, [this, session, threshold, key] {
      Session& s = *session;
      auto entry = BuildEntry(s.data, threshold);
      json summary{{"threshold", threshold},
                   {"auc", {{"tp", entry->analysis.tp.auc()}, {"fp", entry->analysis.fp.auc()}}},
                   {"cells", CellSizesJson(entry->analysis.cells)}};
      {
        std::unique_lock guard(s.mutex);
        s.entries[key] = entry;
      }
      Snapshot(s, *entry);
      return summary;
    });
    return {job, false};
  }

  std::shared_ptr<Job> FindJob(const Session& s, const std::string& id) const {
    std::shared_lock lock(s.mutex);
    const auto it = s.jobs.find(id);
    if (it == s.jobs.end()) throw HttpError{404, "not_found", "no job '" + id + "'"};
    return it->second;
  }

  // Published entry for `threshold` (current threshold when empty).
  std::shared_ptr<const Entry> FindEntry(const Session& s, std::optional<double> threshold) const {
    std::shared_lock lock(s.mutex);
    const double t = threshold.value_or(s.threshold);
    const auto key = ThresholdKey(t);
    if (const auto it = s.entries.find(key); it != s.entries.end()) return it->second;
    if (const auto j = s.threshold_jobs.find(key); j != s.threshold_jobs.end()) {
      const auto& job = s.jobs.at(j->second);
      if (job->state.load() == JobState::kFailed) {
        throw HttpError{422, job->error_kind, job->error};
      }
      throw HttpError{409, "pending", "analysis for threshold " + FormatDouble(t) +
                                          " is still running (job " + job->id + ")"};
    }
    throw HttpError{404, "not_found",
                    "no analysis for threshold " + FormatDouble(t) + "; POST /threshold first"};
  }

  json Features(const Entry& e, Side side, Metric order) const {
    json features = ToJson(OrderBy(e.side(side).profiles, order));
    json paired;
    for (Side s : {Side::kTp, Side::kFp}) {
      json columns = json::array();
      for (const auto& p : OrderBy(e.side(s).profiles, order)) {
        columns.push_back({{"feature", p.feature},
                           {"rank", p.rank(order)},
                           {"area", e.area[static_cast<int>(s)].at(p.feature)}});
      }
      paired[std::string(SideName(s))] = std::move(columns);
    }
    json links = json::array();
    for (const auto& p : OrderBy(e.analysis.tp.profiles, order)) {
      const auto& fp = e.analysis.fp.profiles;
      const auto other = std::find_if(fp.begin(), fp.end(),
                                      [&](const auto& q) { return q.feature == p.feature; });
      links.push_back({{"feature", p.feature},
                       {"tp_rank", p.rank(order)},
                       {"fp_rank", other == fp.end() ? json(nullptr) : json(other->rank(order))}});
    }
    return {{"threshold", e.threshold},
            {"side", SideName(side)},
            {"order", MetricName(order)},
            {"auc", AucJson(e)},
            {"features", std::move(features)},
            {"paired", std::move(paired)},
            {"links", std::move(links)}};
  }

  struct DetailOptions {
    std::optional<BinningConfig> binning;
    std::optional<TransferFunction> tf;
    std::optional<PackingMode> packing;
    std::optional<std::uint64_t> seed;
    std::optional<std::pair<double, double>> brush;
  };

  json FeatureDetail(const Session& s, const Entry& e, Side side, const std::string& feature,
                     const DetailOptions& o) const {
    const SideAnalysis& analysis = e.side(side);
    const auto profile = std::find_if(analysis.profiles.begin(), analysis.profiles.end(),
                                      [&](const auto& p) { return p.feature == feature; });
    if (profile == analysis.profiles.end()) {
      throw HttpError{404, "not_found", "no feature '" + feature + "'"};
    }
    PipelineConfig cfg = options_.pipeline;
    if (o.packing) cfg.packing = *o.packing;
    if (o.seed) cfg.layout_seed = *o.seed;
    const FeatureLayout layout = BuildFeatureLayout(analysis, feature, cfg, o.tf, o.binning);
    json ranks;
    for (Metric m : kAllMetrics) ranks[std::string(MetricName(m))] = profile->rank(m);
    json out{{"threshold", e.threshold}, {"side", SideName(side)},
             {"auc", AucJson(e)},        {"profile", ToJson(*profile)},
             {"ranks", ranks},           {"layout", ToJson(layout)}};
    if (o.brush) {
      std::vector<std::size_t> rows;
      for (const auto& b : BrushSelect(layout.packed.bubbles, o.brush->first, o.brush->second)) {
        for (std::size_t r : b.members) rows.push_back(analysis.training.instances[r]);
      }
      std::sort(rows.begin(), rows.end());
      std::vector<std::string> ids;
      for (std::size_t i : rows) ids.push_back(s.data.ids[i]);
      out["brush"] = {{"interval", {o.brush->first, o.brush->second}},
                      {"count", ids.size()},
                      {"ids", ids}};
    }
    return out;
  }

  json Ensemble(const Session& s, const EnsembleOptions& options) const {
    const EnsembleReport report = RunEnsemble(s.data, options_.pipeline, options);
    json out = ToJson(report);
    out["profiles"] = ToJson(report.profiles);
    return out;
  }

  std::shared_ptr<Job> StartAblation(Session& s, std::shared_ptr<const Entry> entry, Side side,
                                     AblationOptions options) {
    json params{{"threshold", entry->threshold},
                {"side", SideName(side)},
                {"repeats", options.repeats},
                {"seed", options.seed}};
    std::unique_lock lock(s.mutex);
    auto job = NewJob(s, "ablation", std::move(params));
    lock.unlock();
    const TrainConfig train = options_.pipeline.train;
    Launch(job, [entry, side, options, train] {
      const SideAnalysis& a = entry->side(side);
      std::vector<std::string> order;
      for (const auto& p : a.profiles) order.push_back(p.feature);
      return ToJson(Ablation(a.features, a.training.labels, order, options, train));
    });
    return job;
  }

  // Blocks until `job` leaves pending/running; intended for tools and tests.
  static void Wait(const Job& job) {
    for (;;) {
      const JobState st = job.state.load();
      if (st == JobState::kDone || st == JobState::kFailed) return;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
  }

  void Register(httplib::Server& server);

  const ServiceOptions& options() const { return options_; }

 private:
  std::shared_ptr<Job> NewJob(Session& s, std::string kind, json params) {
    auto job = std::make_shared<Job>();
    job->id = "j" + std::to_string(++job_counter_);
    job->kind = std::move(kind);
    job->params = std::move(params);
    s.jobs[job->id] = job;
    return job;
  }

  template <typename Work>
  void Launch(std::shared_ptr<Job> job, Work work) {
    std::lock_guard lock(workers_mutex_);
    workers_.emplace_back([job, work = std::move(work)] {
      job->state = JobState::kRunning;
      try {
        job->result = work();
        job->state = JobState::kDone;
      } catch (const Error& e) {
        job->error_kind = ErrorKindName(e.kind());
        job->error = e.what();
        job->state = JobState::kFailed;
      } catch (const std::exception& e) {
        job->error_kind = "internal";
        job->error = e.what();
        job->state = JobState::kFailed;
      }
    });
  }

  std::shared_ptr<const Entry> BuildEntry(const ScoredDataset& d, double threshold) const {
    PipelineConfig cfg = options_.pipeline;
    cfg.threshold = threshold;
    auto entry = std::make_shared<Entry>();
    entry->threshold = threshold;
    entry->analysis = AnalyzeThreshold(d, cfg);
    for (Side side : {Side::kTp, Side::kFp}) {
      const SideAnalysis& a = entry->side(side);
      for (std::size_t j = 0; j < a.shap.cols; ++j) {
        const auto col = a.features.index_of(a.shap.feature_names[j]);
        const auto values = a.features.column(*col);
        const auto tf = TransferFunction::DefaultFor(values);
        entry->area[static_cast<int>(side)][a.shap.feature_names[j]] =
            ToJson(AreaPlot(values, a.shap.column(j), cfg.area_bins, tf,
                            cfg.binning.feature_bin_count));
      }
    }
    return entry;
  }

  static json AucJson(const Entry& e) {
    return {{"tp", e.analysis.tp.auc()}, {"fp", e.analysis.fp.auc()}};
  }

  static json CellSizesJson(const DisagreementCells& cells) {
    json out;
    for (Cell c : {Cell::kBoth, Cell::kAOnly, Cell::kBOnly}) {
      out[std::string(CellName(c)) + "_tp"] = cells.cell(c, Side::kTp).size();
      out[std::string(CellName(c)) + "_fp"] = cells.cell(c, Side::kFp).size();
    }
    return out;
  }

  void Snapshot(const Session& s, const Entry& e) const {
    if (!options_.snapshot_dir) return;
    const auto dir = *options_.snapshot_dir / s.id;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    json out{{"session", s.id},
             {"threshold", e.threshold},
             {"auc", AucJson(e)},
             {"cells", ToJson(e.analysis.cells)},
             {"rankings", {{"tp", ToJson(e.analysis.tp.profiles)},
                           {"fp", ToJson(e.analysis.fp.profiles)}}}};
    std::ofstream file(dir / ("t" + std::to_string(ThresholdKey(e.threshold)) + ".json"));
    file << out.dump(1) << '\n';
  }

  ServiceOptions options_;
  mutable std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t session_counter_ = 0;
  std::atomic<std::uint64_t> job_counter_{0};
  std::mutex workers_mutex_;
  std::vector<std::jthread> workers_;
};

namespace detail {

inline void Reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline json ParseBody(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw HttpError{400, "input", "request body must be a JSON object"};
  }
  return body;
}

inline std::optional<std::string> Param(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return std::nullopt;
  return req.get_param_value(name);
}

inline double ParseNumber(const std::string& text, const char* what) {
  const auto v = lfd::detail::ParseDouble(text);
  if (!v) throw InputError(std::string("bad ") + what + " '" + text + "'");
  return *v;
}

inline std::size_t ParseCount(const std::string& text, const char* what) {
  const double v = ParseNumber(text, what);
  if (!(v >= 0.0) || v != std::floor(v)) {
    throw InputError(std::string("bad ") + what + " '" + text + "'");
  }
  return static_cast<std::size_t>(v);
}

inline std::optional<double> ThresholdParam(const httplib::Request& req) {
  const auto t = Param(req, "threshold");
  if (!t) return std::nullopt;
  return ParseNumber(*t, "threshold");
}

template <typename T>
T Field(const json& body, const char* name, T fallback) {
  if (!body.contains(name)) return fallback;
  try {
    return body.at(name).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("field '") + name + "' has the wrong type");
  }
}

template <typename Handler>
httplib::Server::Handler Guard(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const HttpError& e) {
      Reply(res, e.status, ErrorBody(e.kind, e.message));
    } catch (const Error& e) {
      Reply(res, StatusFor(e.kind()), ErrorBody(ErrorKindName(e.kind()), e.what()));
    } catch (const std::exception& e) {
      Reply(res, 500, ErrorBody("internal", e.what()));
    }
  };
}

}  // namespace detail

inline void Service::Register(httplib::Server& server) {
  using detail::Guard;
  using detail::Param;
  using detail::Reply;
  using httplib::Request;
  using httplib::Response;

  server.Get("/health", Guard([](const Request&, Response& res) {
               Reply(res, 200, {{"status", "ok"}, {"version", LFD_VERSION}});
             }));

  server.Post("/sessions", Guard([this](const Request& req, Response& res) {
                const auto s = CreateSession(req.body);
                Reply(res, 201, {{"session", s->id}, {"summary", ToJson(s->summary)}});
              }));

  server.Get(R"(/sessions/([^/]+)/distribution)", Guard([this](const Request& req, Response& res) {
               const auto s = FindSession(req.matches[1]);
               Reply(res, 200, Distribution(*s));
             }));

  server.Post(R"(/sessions/([^/]+)/threshold)", Guard([this](const Request& req, Response& res) {
                const auto s = FindSession(req.matches[1]);
                const json body = detail::ParseBody(req);
                std::optional<double> t = detail::ThresholdParam(req);
                if (body.contains("threshold")) t = detail::Field<double>(body, "threshold", 0.0);
                if (!t) throw InputError("missing 'threshold'");
                auto [job, cached] = SetThreshold(s, *t);
                json out = job->ToJson();
                out["cached"] = cached;
                Reply(res, cached ? 200 : 202, out);
              }));

  server.Get(R"(/sessions/([^/]+)/jobs/([^/]+))", Guard([this](const Request& req, Response& res) {
               const auto s = FindSession(req.matches[1]);
               Reply(res, 200, FindJob(*s, req.matches[2])->ToJson());
             }));

  server.Get(R"(/sessions/([^/]+)/features)", Guard([this](const Request& req, Response& res) {
               const auto s = FindSession(req.matches[1]);
               const Side side = ParseSide(Param(req, "side").value_or("tp"));
               const Metric order = ParseMetric(Param(req, "order").value_or("overall"));
               const auto entry = FindEntry(*s, detail::ThresholdParam(req));
               Reply(res, 200, Features(*entry, side, order));
             }));

  server.Get(R"(/sessions/([^/]+)/features/([^/]+))", Guard([this](const Request& req,
                                                                    Response& res) {
               const auto s = FindSession(req.matches[1]);
               const Side side = ParseSide(Param(req, "side").value_or("tp"));
               const auto entry = FindEntry(*s, detail::ThresholdParam(req));
               DetailOptions o;
               const auto shap_bins = Param(req, "shap_bins");
               const auto feature_bins = Param(req, "feature_bins");
               if (shap_bins || feature_bins) {
                 BinningConfig b = options_.pipeline.binning;
                 if (shap_bins) b.shap_bin_count = detail::ParseCount(*shap_bins, "shap_bins");
                 if (feature_bins) {
                   b.feature_bin_count = detail::ParseCount(*feature_bins, "feature_bins");
                 }
                 b.validate();
                 o.binning = b;
               }
               if (const auto tf = Param(req, "tf")) o.tf = TransferFunction::Parse(*tf);
               if (const auto p = Param(req, "packing")) o.packing = ParsePackingMode(*p);
               if (const auto seed = Param(req, "seed")) o.seed = detail::ParseCount(*seed, "seed");
               if (const auto brush = Param(req, "brush")) {
                 const auto comma = brush->find(',');
                 if (comma == std::string::npos) throw InputError("brush must be lo,hi");
                 o.brush = std::pair{detail::ParseNumber(brush->substr(0, comma), "brush"),
                                     detail::ParseNumber(brush->substr(comma + 1), "brush")};
               }
               Reply(res, 200, FeatureDetail(*s, *entry, side, req.matches[2], o));
             }));

  server.Post(R"(/sessions/([^/]+)/ensemble)", Guard([this](const Request& req, Response& res) {
                const auto s = FindSession(req.matches[1]);
                const json body = detail::ParseBody(req);
                EnsembleOptions o;
                const std::string metric = detail::Field<std::string>(body, "metric", "all");
                if (metric != "all") o.metrics = {ParseMetric(metric)};
                const int k = detail::Field<int>(body, "k", 15);
                if (k < 0) throw InputError("k must be >= 0");
                o.k = static_cast<std::size_t>(k);
                o.eval_split = detail::Field<double>(body, "eval_split", o.eval_split);
                o.seed = detail::Field<std::uint64_t>(body, "seed", o.seed);
                o.lambda = detail::Field<double>(body, "lambda", o.lambda);
                Reply(res, 200, Ensemble(*s, o));
              }));

  server.Post(R"(/sessions/([^/]+)/ablation)", Guard([this](const Request& req, Response& res) {
                const auto s = FindSession(req.matches[1]);
                const json body = detail::ParseBody(req);
                std::optional<double> t;
                if (body.contains("threshold")) t = detail::Field<double>(body, "threshold", 0.0);
                const auto entry = FindEntry(*s, t);
                const Side side = ParseSide(detail::Field<std::string>(body, "side", "tp"));
                AblationOptions o;
                o.order = ParseAblationOrder(detail::Field<std::string>(body, "order", "both"));
                o.repeats = detail::Field<int>(body, "repeats", o.repeats);
                o.seed = detail::Field<std::uint64_t>(body, "seed", o.seed);
                if (o.repeats < 1) throw InputError("repeats must be >= 1");
                Reply(res, 202, StartAblation(*s, entry, side, o)->ToJson());
              }));
}

}  // namespace lfd::service

#endif  // LFD_SERVICE_HPP_
