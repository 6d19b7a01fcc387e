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

#ifndef LFD_DISCRIMINATOR_HPP_
#define LFD_DISCRIMINATOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/error.hpp"
#include "lfd/random.hpp"
#include "lfd/scoring.hpp"

namespace lfd {

// A node of a regression tree. Internal nodes send `value < threshold` left;
// missing values follow `default_left`. `cover` counts the training rows
// that reached the node.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  int left = -1;
  int right = -1;
  double leaf_value = 0.0;
  double cover = 0.0;

  bool is_leaf() const { return left < 0; }

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  // Child taken by `row` at internal node `index`.
  int next(int index, std::span<const double> row) const {
    const TreeNode& node = nodes[static_cast<std::size_t>(index)];
    const double v = row[static_cast<std::size_t>(node.feature)];
    if (IsMissing(v)) return node.default_left ? node.left : node.right;
    return v < node.threshold ? node.left : node.right;
  }

  int leaf_index(std::span<const double> row) const {
    int index = 0;
    while (!nodes[static_cast<std::size_t>(index)].is_leaf()) index = next(index, row);
    return index;
  }

  double leaf(std::span<const double> row) const {
    return nodes[static_cast<std::size_t>(leaf_index(row))].leaf_value;
  }

  int depth(int index = 0) const {
    const TreeNode& node = nodes[static_cast<std::size_t>(index)];
    if (node.is_leaf()) return 0;
    return 1 + std::max(depth(node.left), depth(node.right));
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TrainConfig {
  int max_depth = 4;
  double learning_rate = 0.1;
  int max_rounds = 1000;
  int patience = 10;
  double min_child_weight = 1.0;  // minimum hessian sum per child
  double validation_fraction = 0.2;
  std::uint64_t seed = 42;
  double reg_lambda = 1.0;  // L2 penalty on leaf values

  void validate() const {
    if (max_depth < 1) throw InputError("max_depth must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0)) {
      throw InputError("learning_rate must lie in (0,1]");
    }
    if (max_rounds < 1) throw InputError("max_rounds must be >= 1");
    if (patience < 1) throw InputError("patience must be >= 1");
    if (!(min_child_weight >= 0.0)) throw InputError("min_child_weight must be >= 0");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw InputError("validation fraction must lie in (0,1)");
    }
    if (!(reg_lambda >= 0.0)) throw InputError("reg_lambda must be >= 0");
  }
};

struct TrainingInfo {
  int rounds_run = 0;
  int best_round = 0;  // number of trees kept
  double best_auc = 0.0;
  bool holdout = false;  // false when the monitored AUC is on training rows
  std::size_t train_rows = 0;
  std::size_t validation_rows = 0;
  std::vector<double> auc_history;
};

struct TreeEnsemble {
  std::vector<Tree> trees;
  double base_score = 0.0;
  double learning_rate = 1.0;
  std::vector<std::string> feature_names;
  TrainingInfo info;

  std::size_t arity() const { return feature_names.size(); }

  double margin(std::span<const double> row) const {
    if (row.size() != arity()) {
      throw InputError("row has " + std::to_string(row.size()) + " features, ensemble expects " +
                       std::to_string(arity()));
    }
    double sum = base_score;
    for (const Tree& tree : trees) sum += learning_rate * tree.leaf(row);
    return sum;
  }

  double proba(std::span<const double> row) const { return Logistic(margin(row)); }
};

inline double PredictMargin(const TreeEnsemble& e, std::span<const double> row) {
  return e.margin(row);
}
inline double PredictProba(const TreeEnsemble& e, std::span<const double> row) {
  return e.proba(row);
}

namespace detail {

struct GradStats {
  double g = 0.0;
  double h = 0.0;
  std::size_t count = 0;

  void add(double gi, double hi) {
    g += gi;
    h += hi;
    ++count;
  }
  GradStats operator-(const GradStats& o) const { return {g - o.g, h - o.h, count - o.count}; }
  GradStats operator+(const GradStats& o) const { return {g + o.g, h + o.h, count + o.count}; }
};

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  bool default_left = true;
  bool valid = false;
};

inline double LeafObjective(const GradStats& s, double lambda) {
  return s.g * s.g / (s.h + lambda);
}

// Split point strictly above `lo` and not above `hi`.
inline double Midpoint(double lo, double hi) {
  const double mid = lo + (hi - lo) / 2.0;
  return mid > lo ? mid : hi;
}

// Exact greedy tree builder over presorted columns. Rows are positions in
// the training subset.
class TreeBuilder {
 public:
  TreeBuilder(const MetaFeatureTable& x, std::span<const std::size_t> rows,
              const TrainConfig& config)
      : x_(x), rows_(rows.begin(), rows.end()), config_(config) {
    const std::size_t m = x_.cols();
    sorted_.resize(m);
    missing_.resize(m);
    for (std::size_t f = 0; f < m; ++f) {
      for (std::size_t p = 0; p < rows_.size(); ++p) {
        if (IsMissing(x_.at(rows_[p], f))) {
          missing_[f].push_back(p);
        } else {
          sorted_[f].push_back(p);
        }
      }
      std::stable_sort(sorted_[f].begin(), sorted_[f].end(), [&](std::size_t a, std::size_t b) {
        return x_.at(rows_[a], f) < x_.at(rows_[b], f);
      });
    }
  }

  Tree build(std::span<const double> grad, std::span<const double> hess) const {
    Tree tree;
    const std::size_t n = rows_.size();
    std::vector<int> node_of(n, 0);
    tree.nodes.push_back(TreeNode{});
    std::vector<int> frontier{0};
    for (int depth = 0; !frontier.empty(); ++depth) {
      // Per-node gradient totals.
      std::vector<GradStats> totals(tree.nodes.size());
      for (std::size_t p = 0; p < n; ++p) {
        if (node_of[p] >= 0) totals[static_cast<std::size_t>(node_of[p])].add(grad[p], hess[p]);
      }
      for (int id : frontier) tree.nodes[static_cast<std::size_t>(id)].cover =
          static_cast<double>(totals[static_cast<std::size_t>(id)].count);

      std::vector<SplitCandidate> best(tree.nodes.size());
      if (depth < config_.max_depth) {
        for (std::size_t f = 0; f < x_.cols(); ++f) {
          scan_feature(f, grad, hess, node_of, totals, best);
        }
      }

      std::vector<int> next_frontier;
      std::vector<int> left_of(tree.nodes.size(), -1);
      for (int id : frontier) {
        const auto uid = static_cast<std::size_t>(id);
        const SplitCandidate& split = best[uid];
        if (!split.valid) {
          tree.nodes[uid].leaf_value = -totals[uid].g / (totals[uid].h + config_.reg_lambda);
          continue;
        }
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});
        TreeNode& node = tree.nodes[uid];
        node.feature = split.feature;
        node.threshold = split.threshold;
        node.default_left = split.default_left;
        node.left = left;
        node.right = left + 1;
        left_of[uid] = left;
        next_frontier.push_back(left);
        next_frontier.push_back(left + 1);
      }
      // Route rows; rows in finished leaves drop out.
      for (std::size_t p = 0; p < n; ++p) {
        const int id = node_of[p];
        if (id < 0) continue;
        if (left_of[static_cast<std::size_t>(id)] < 0) {
          node_of[p] = -1;
          continue;
        }
        node_of[p] = tree.next(id, x_.row(rows_[p]));
      }
      frontier = std::move(next_frontier);
    }
    return tree;
  }

 private:
  void consider(const GradStats& left_present, const GradStats& total,
                const GradStats& missing, int feature, double threshold,
                SplitCandidate& best) const {
    const double lambda = config_.reg_lambda;
    const GradStats present = total - missing;
    const GradStats right_present = present - left_present;
    const double parent = LeafObjective(total, lambda);
    for (bool missing_left : {true, false}) {
      if (missing.count == 0 && !missing_left) break;
      GradStats left = missing_left ? left_present + missing : left_present;
      GradStats right = missing_left ? right_present : right_present + missing;
      if (left.count == 0 || right.count == 0) continue;
      if (left.h < config_.min_child_weight || right.h < config_.min_child_weight) continue;
      const double gain =
          0.5 * (LeafObjective(left, lambda) + LeafObjective(right, lambda) - parent);
      if (gain > best.gain && gain > 1e-12) {
        best.gain = gain;
        best.feature = feature;
        best.threshold = threshold;
        // Without missing training values the default follows the heavier child.
        best.default_left = missing.count > 0 ? missing_left : left.h >= right.h;
        best.valid = true;
      }
    }
  }

  void scan_feature(std::size_t f, std::span<const double> grad, std::span<const double> hess,
                    const std::vector<int>& node_of, const std::vector<GradStats>& totals,
                    std::vector<SplitCandidate>& best) const {
    const std::size_t nodes = totals.size();
    std::vector<GradStats> missing(nodes);
    for (std::size_t p : missing_[f]) {
      if (node_of[p] >= 0) missing[static_cast<std::size_t>(node_of[p])].add(grad[p], hess[p]);
    }
    std::vector<GradStats> left(nodes);
    std::vector<double> last_value(nodes, 0.0);
    for (std::size_t p : sorted_[f]) {
      const int id = node_of[p];
      if (id < 0) continue;
      const auto uid = static_cast<std::size_t>(id);
      const double v = x_.at(rows_[p], f);
      if (left[uid].count > 0 && v > last_value[uid]) {
        consider(left[uid], totals[uid], missing[uid], static_cast<int>(f),
                 Midpoint(last_value[uid], v), best[uid]);
      }
      left[uid].add(grad[p], hess[p]);
      last_value[uid] = v;
    }
  }

  const MetaFeatureTable& x_;
  std::vector<std::size_t> rows_;
  const TrainConfig& config_;
  std::vector<std::vector<std::size_t>> sorted_;
  std::vector<std::vector<std::size_t>> missing_;
};

// Stratified holdout. Returns {train, validation} as ascending row lists;
// validation is empty when a class has fewer than two members.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> StratifiedSplit(
    std::span<const int> labels, double fraction, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> train, validation;
  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i] == 1].push_back(i);
  const bool feasible = by_class[0].size() >= 2 && by_class[1].size() >= 2;
  for (auto& members : by_class) {
    if (!feasible) {
      train.insert(train.end(), members.begin(), members.end());
      continue;
    }
    rng.shuffle(std::span<std::size_t>(members));
    const double want = std::round(fraction * static_cast<double>(members.size()));
    const std::size_t take =
        std::clamp<std::size_t>(static_cast<std::size_t>(want), 1, members.size() - 1);
    validation.insert(validation.end(), members.begin(),
                      members.begin() + static_cast<std::ptrdiff_t>(take));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(take), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(validation.begin(), validation.end());
  return {std::move(train), std::move(validation)};
}

}  // namespace detail

// Second-order gradient boosting on logistic loss. Labels: 1 for A-B+,
// 0 for A+B-. Training stops after `max_rounds` or once the monitored AUC
// has not improved for `patience` rounds; the ensemble is truncated to its
// best round.
inline TreeEnsemble Train(const MetaFeatureTable& features, std::span<const int> labels,
                          const TrainConfig& config) {
  config.validate();
  const std::size_t n = features.rows();
  if (labels.size() != n) throw InputError("train: label count does not match feature rows");
  if (n == 0) throw DegenerateError("no disagreement to learn from: empty training set");
  if (features.cols() == 0) throw InputError("train: at least one meta-feature is required");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw InputError("train: labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == n) {
    throw DegenerateError(
        "no disagreement to learn from: one model's captures strictly contain the other's "
        "(single-class discriminator labels)");
  }

  auto [train_rows, val_rows] = detail::StratifiedSplit(labels, config.validation_fraction,
                                                         config.seed);
  const bool holdout = !val_rows.empty();
  const std::vector<std::size_t>& monitor_rows = holdout ? val_rows : train_rows;

  std::vector<int> y_train(train_rows.size());
  std::size_t train_pos = 0;
  for (std::size_t p = 0; p < train_rows.size(); ++p) {
    y_train[p] = labels[train_rows[p]];
    train_pos += static_cast<std::size_t>(y_train[p]);
  }
  std::vector<int> y_monitor(monitor_rows.size());
  for (std::size_t p = 0; p < monitor_rows.size(); ++p) y_monitor[p] = labels[monitor_rows[p]];

  TreeEnsemble ensemble;
  ensemble.feature_names = features.names();
  ensemble.learning_rate = config.learning_rate;
  const double rate = std::clamp(static_cast<double>(train_pos) /
                                     static_cast<double>(train_rows.size()),
                                 1e-6, 1.0 - 1e-6);
  ensemble.base_score = std::log(rate / (1.0 - rate));

  detail::TreeBuilder builder(features, train_rows, config);
  std::vector<double> train_margin(train_rows.size(), ensemble.base_score);
  std::vector<double> monitor_margin(monitor_rows.size(), ensemble.base_score);
  std::vector<double> grad(train_rows.size()), hess(train_rows.size());

  TrainingInfo& info = ensemble.info;
  info.holdout = holdout;
  info.train_rows = train_rows.size();
  info.validation_rows = val_rows.size();
  info.best_auc = -std::numeric_limits<double>::infinity();

  for (int round = 0; round < config.max_rounds; ++round) {
    for (std::size_t p = 0; p < train_rows.size(); ++p) {
      const double prob = Logistic(train_margin[p]);
      grad[p] = prob - static_cast<double>(y_train[p]);
      hess[p] = std::max(prob * (1.0 - prob), 1e-16);
    }
    Tree tree = builder.build(grad, hess);
    for (std::size_t p = 0; p < train_rows.size(); ++p) {
      train_margin[p] += config.learning_rate * tree.leaf(features.row(train_rows[p]));
    }
    for (std::size_t p = 0; p < monitor_rows.size(); ++p) {
      monitor_margin[p] += config.learning_rate * tree.leaf(features.row(monitor_rows[p]));
    }
    ensemble.trees.push_back(std::move(tree));
    info.rounds_run = round + 1;

    const double auc = Auc(monitor_margin, y_monitor);
    info.auc_history.push_back(auc);
    if (auc > info.best_auc) {
      info.best_auc = auc;
      info.best_round = round + 1;
    } else if (info.rounds_run - info.best_round >= config.patience) {
      break;
    }
  }
  ensemble.trees.resize(static_cast<std::size_t>(info.best_round));
  return ensemble;
}

namespace detail {

inline nlohmann::json NodeToJson(const Tree& tree, int index,
                                 const std::vector<std::string>& names) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return {{"leaf", node.leaf_value}, {"cover", node.cover}};
  return {{"feature", names.at(static_cast<std::size_t>(node.feature))},
          {"feature_index", node.feature},
          {"threshold", node.threshold},
          {"default_left", node.default_left},
          {"cover", node.cover},
          {"left", NodeToJson(tree, node.left, names)},
          {"right", NodeToJson(tree, node.right, names)}};
}

inline int NodeFromJson(const nlohmann::json& j, Tree& tree,
                        const std::vector<std::string>& names) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back(TreeNode{});
  // Absent cover is kept as NaN so attribution can reject the tree.
  const double cover = j.contains("cover") ? j.at("cover").get<double>() : kMissing;
  if (j.contains("leaf")) {
    TreeNode& node = tree.nodes.back();
    node.leaf_value = j.at("leaf").get<double>();
    node.cover = cover;
    return index;
  }
  int feature = -1;
  if (j.contains("feature_index")) {
    feature = j.at("feature_index").get<int>();
  } else {
    const auto name = j.at("feature").get<std::string>();
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw InputError("ensemble JSON: unknown feature '" + name + "'");
    feature = static_cast<int>(it - names.begin());
  }
  if (feature < 0 || static_cast<std::size_t>(feature) >= names.size()) {
    throw InputError("ensemble JSON: feature index out of range");
  }
  const int left = NodeFromJson(j.at("left"), tree, names);
  const int right = NodeFromJson(j.at("right"), tree, names);
  TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  node.feature = feature;
  node.threshold = j.at("threshold").get<double>();
  node.default_left = j.value("default_left", true);
  node.left = left;
  node.right = right;
  node.cover = cover;
  return index;
}

}  // namespace detail

inline constexpr int kEnsembleFormatVersion = 1;

inline nlohmann::json ToJson(const TreeEnsemble& e) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : e.trees) trees.push_back(detail::NodeToJson(tree, 0, e.feature_names));
  return {{"format", "lfd.tree_ensemble"},
          {"version", kEnsembleFormatVersion},
          {"base_score", e.base_score},
          {"learning_rate", e.learning_rate},
          {"feature_names", e.feature_names},
          {"training",
           {{"rounds_run", e.info.rounds_run},
            {"best_round", e.info.best_round},
            {"best_auc", e.info.best_auc},
            {"holdout", e.info.holdout},
            {"train_rows", e.info.train_rows},
            {"validation_rows", e.info.validation_rows}}},
          {"trees", trees}};
}

inline TreeEnsemble EnsembleFromJson(const nlohmann::json& j) {
  try {
    if (j.value("version", 0) != kEnsembleFormatVersion) {
      throw InputError("ensemble JSON: unsupported version");
    }
    TreeEnsemble e;
    e.base_score = j.at("base_score").get<double>();
    e.learning_rate = j.at("learning_rate").get<double>();
    e.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    if (j.contains("training")) {
      const auto& t = j.at("training");
      e.info.rounds_run = t.value("rounds_run", 0);
      e.info.best_round = t.value("best_round", 0);
      e.info.best_auc = t.value("best_auc", 0.0);
      e.info.holdout = t.value("holdout", false);
      e.info.train_rows = t.value("train_rows", std::size_t{0});
      e.info.validation_rows = t.value("validation_rows", std::size_t{0});
    }
    for (const auto& tj : j.at("trees")) {
      Tree tree;
      detail::NodeFromJson(tj, tree, e.feature_names);
      e.trees.push_back(std::move(tree));
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("ensemble JSON: ") + ex.what());
  }
}

}  // namespace lfd

#endif  // LFD_DISCRIMINATOR_HPP_
