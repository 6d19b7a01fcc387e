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

#ifndef LFD_PIPELINE_HPP_
#define LFD_PIPELINE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/disagreement.hpp"
#include "lfd/discriminator.hpp"
#include "lfd/ensemble.hpp"
#include "lfd/error.hpp"
#include "lfd/evaluation.hpp"
#include "lfd/layout.hpp"
#include "lfd/metrics.hpp"
#include "lfd/scoring.hpp"
#include "lfd/shap.hpp"

namespace lfd {

struct PipelineConfig {
  double threshold = 0.15;
  TrainConfig train;
  BinningConfig binning;
  MetricWeights weights = kDefaultWeights;
  BubbleScale scale;
  std::size_t area_bins = 100;
  PackingMode packing = PackingMode::kCirclePacking;
  std::uint64_t layout_seed = 42;
};

// Discriminator rows: A+B- labelled 0, A-B+ labelled 1, ascending index.
struct TrainingSet {
  std::vector<std::size_t> instances;
  std::vector<int> labels;
};

// Training set for one side, or for all disagreed instances when `side` is
// empty.
inline TrainingSet DiscriminatorTrainingSet(const DisagreementCells& cells,
                                            std::optional<Side> side) {
  const auto& a_only = side ? cells.cell(Cell::kAOnly, *side) : cells.a_only;
  const auto& b_only = side ? cells.cell(Cell::kBOnly, *side) : cells.b_only;
  std::vector<std::pair<std::size_t, int>> rows;
  for (std::size_t i : a_only) rows.emplace_back(i, 0);
  for (std::size_t i : b_only) rows.emplace_back(i, 1);
  std::sort(rows.begin(), rows.end());
  TrainingSet set;
  for (const auto& [i, y] : rows) {
    set.instances.push_back(i);
    set.labels.push_back(y);
  }
  return set;
}

struct SideAnalysis {
  std::string name;  // "tp", "fp" or "all"
  TrainingSet training;
  MetaFeatureTable features;  // rows of training.instances
  TreeEnsemble discriminator;
  ShapMatrix shap;
  std::vector<FeatureProfile> profiles;  // Overall order
  double max_additivity_error = 0.0;

  double auc() const { return discriminator.info.best_auc; }
};

// Trains the discriminator, attributes it, and ranks the meta-features.
inline SideAnalysis AnalyzeSide(const ScoredDataset& d, TrainingSet training, std::string name,
                                const PipelineConfig& cfg) {
  std::size_t negatives = 0, positives = 0;
  for (int y : training.labels) (y == 1 ? positives : negatives) += 1;
  if (negatives == 0 || positives == 0) {
    throw DegenerateError("no disagreement to learn from on side '" + name + "': " +
                          std::to_string(negatives) + " A+B- vs " + std::to_string(positives) +
                          " A-B+ instances");
  }
  SideAnalysis out;
  out.name = std::move(name);
  out.features = d.features.select_rows(training.instances);
  out.discriminator = Train(out.features, training.labels, cfg.train);
  out.shap = TreeShap(out.discriminator, out.features, training.instances);
  for (std::size_t i = 0; i < out.shap.rows; ++i) {
    const double margin = out.discriminator.margin(out.features.row(i));
    out.max_additivity_error = std::max(
        out.max_additivity_error, std::abs(out.shap.base_value + out.shap.row_sum(i) - margin));
  }
  out.profiles = RankFeatures(out.shap, out.features, cfg.binning, cfg.weights);
  out.training = std::move(training);
  return out;
}

struct ThresholdAnalysis {
  CaptureResult capture;
  DisagreementCells cells;
  SideAnalysis tp;
  SideAnalysis fp;
};

inline void RequireDisagreement(const DisagreementCells& cells) {
  if (cells.a_only.empty() || cells.b_only.empty()) {
    throw DegenerateError("no disagreement to learn from: a captured-only cell is empty");
  }
}

inline ThresholdAnalysis AnalyzeThreshold(const ScoredDataset& d, const PipelineConfig& cfg) {
  ThresholdAnalysis out;
  out.capture = Capture(d, cfg.threshold);
  out.cells = JoinCells(out.capture, d.labels);
  RequireDisagreement(out.cells);
  out.tp = AnalyzeSide(d, DiscriminatorTrainingSet(out.cells, Side::kTp), "tp", cfg);
  out.fp = AnalyzeSide(d, DiscriminatorTrainingSet(out.cells, Side::kFp), "fp", cfg);
  return out;
}

struct FeatureLayout {
  std::string feature;
  Histogram2d histogram;
  PackResult packed;
  std::vector<AreaColumn> area;
  TransferFunction tf = TransferFunction::Default(0.0, 1.0);
};

inline FeatureLayout BuildFeatureLayout(const SideAnalysis& side, const std::string& feature,
                                        const PipelineConfig& cfg,
                                        std::optional<TransferFunction> tf = std::nullopt,
                                        std::optional<BinningConfig> binning = std::nullopt) {
  const auto col = side.features.index_of(feature);
  const auto shap_col = std::find(side.shap.feature_names.begin(), side.shap.feature_names.end(),
                                  feature);
  if (!col || shap_col == side.shap.feature_names.end()) {
    throw InputError("unknown feature '" + feature + "'");
  }
  const auto values = side.features.column(*col);
  const auto shap = side.shap.column(
      static_cast<std::size_t>(shap_col - side.shap.feature_names.begin()));
  FeatureLayout out;
  out.feature = feature;
  out.tf = tf ? *tf : TransferFunction::DefaultFor(values);
  const BinningConfig bins = binning ? *binning : cfg.binning;
  out.histogram = MakeHistogram2d(values, shap, bins, out.tf, cfg.scale);
  out.packed = PackBubbles(out.histogram.bubbles, cfg.packing, cfg.layout_seed);
  out.area = AreaPlot(values, shap, cfg.area_bins, out.tf, bins.feature_bin_count);
  return out;
}

inline nlohmann::json ToJson(const FeatureLayout& layout) {
  return {{"feature", layout.feature},
          {"transfer_function", ToJson(layout.tf)},
          {"bubbles", ToJson(layout.packed.bubbles)},
          {"distortion", layout.packed.mean_distortion},
          {"max_overlap", layout.packed.max_overlap},
          {"missing", layout.histogram.missing},
          {"clipped", layout.histogram.clipped},
          {"shap_range", {layout.histogram.shap_lo, layout.histogram.shap_hi}},
          {"columns", ToJson(layout.area)}};
}

inline ScoredDataset Subset(const ScoredDataset& d, std::span<const std::size_t> rows) {
  ScoredDataset out;
  for (std::size_t i : rows) {
    out.ids.push_back(d.ids[i]);
    out.labels.push_back(d.labels[i]);
    out.scores_a.push_back(d.scores_a[i]);
    out.scores_b.push_back(d.scores_b[i]);
  }
  out.features = d.features.select_rows(rows);
  return out;
}

struct EnsembleOptions {
  std::vector<Metric> metrics{kAllMetrics.begin(), kAllMetrics.end()};
  std::size_t k = 15;
  double eval_split = 0.3;
  std::uint64_t seed = 42;
  double lambda = 1e-4;
};

struct EnsembleRow {
  std::string model;
  double auc_train = 0.0;
  double logloss_train = 0.0;
  double auc_eval = 0.0;
  double logloss_eval = 0.0;
};

struct EnsembleReport {
  std::vector<EnsembleRow> rows;
  std::vector<std::pair<std::string, StackModel>> models;
  double discriminator_auc = 0.0;
  std::vector<FeatureProfile> profiles;
  std::size_t train_size = 0;
  std::size_t eval_size = 0;
};

// Splits the data, ranks meta-features with one discriminator over all
// disagreed training instances (no TP/FP split), and compares the two base
// models, plain stacking, and FWLS over the top-k features of each metric.
inline EnsembleReport RunEnsemble(const ScoredDataset& d, const PipelineConfig& cfg,
                                  const EnsembleOptions& options) {
  if (!(options.eval_split > 0.0 && options.eval_split < 1.0)) {
    throw InputError("eval split must lie in (0,1)");
  }
  auto [train_rows, eval_rows] = detail::StratifiedSplit(d.labels, options.eval_split, options.seed);
  if (eval_rows.empty()) throw DegenerateError("ensemble: both label classes need >= 2 instances");
  const ScoredDataset train = Subset(d, train_rows);
  const ScoredDataset eval = Subset(d, eval_rows);

  EnsembleReport report;
  report.train_size = train.size();
  report.eval_size = eval.size();

  auto add_row = [&](std::string name, const std::vector<double>& p_train,
                     const std::vector<double>& p_eval) {
    report.rows.push_back({std::move(name), Auc(p_train, train.labels),
                           LogLoss(p_train, train.labels), Auc(p_eval, eval.labels),
                           LogLoss(p_eval, eval.labels)});
  };
  add_row("A", train.scores_a, eval.scores_a);
  add_row("B", train.scores_b, eval.scores_b);

  StackFitOptions fit;
  fit.lambda = options.lambda;
  auto fit_and_score = [&](const std::string& name, StackVariant variant,
                           const std::vector<std::string>& selected) {
    StackModel model = FitStack(train.scores_a, train.scores_b, train.features, train.labels,
                                variant, selected, fit);
    add_row(name, PredictStack(model, train.scores_a, train.scores_b, train.features),
            PredictStack(model, eval.scores_a, eval.scores_b, eval.features));
    report.models.emplace_back(name, std::move(model));
  };
  fit_and_score("plain", StackVariant::kPlain, {});

  if (options.k > 0 && !options.metrics.empty()) {
    const CaptureResult capture = Capture(train, cfg.threshold);
    const DisagreementCells cells = JoinCells(capture, train.labels);
    RequireDisagreement(cells);
    const SideAnalysis all = AnalyzeSide(train, DiscriminatorTrainingSet(cells, std::nullopt),
                                         "all", cfg);
    report.discriminator_auc = all.auc();
    report.profiles = all.profiles;
    for (Metric metric : options.metrics) {
      fit_and_score("fwls_" + std::string(MetricName(metric)), StackVariant::kFwls,
                    TopK(all.profiles, metric, options.k));
    }
  }
  return report;
}

inline void WriteEnsembleCsv(const EnsembleReport& report, std::ostream& out) {
  out << "model,auc_train,logloss_train,auc_eval,logloss_eval\n";
  for (const auto& r : report.rows) {
    out << r.model << ',' << FormatDouble(r.auc_train) << ',' << FormatDouble(r.logloss_train)
        << ',' << FormatDouble(r.auc_eval) << ',' << FormatDouble(r.logloss_eval) << '\n';
  }
}

inline nlohmann::json ToJson(const EnsembleReport& report) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : report.rows) {
    rows.push_back({{"model", r.model},
                    {"auc_train", r.auc_train},
                    {"logloss_train", r.logloss_train},
                    {"auc_eval", r.auc_eval},
                    {"logloss_eval", r.logloss_eval}});
  }
  nlohmann::json models = nlohmann::json::object();
  for (const auto& [name, model] : report.models) models[name] = ToJson(model);
  return {{"rows", rows},
          {"models", models},
          {"discriminator_auc", report.discriminator_auc},
          {"train_size", report.train_size},
          {"eval_size", report.eval_size}};
}

}  // namespace lfd

#endif  // LFD_PIPELINE_HPP_
