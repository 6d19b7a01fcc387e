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

#ifndef LFD_ENSEMBLE_HPP_
#define LFD_ENSEMBLE_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/error.hpp"
#include "lfd/scoring.hpp"

namespace lfd {

enum class StackVariant { kPlain, kFwls };

inline std::string_view VariantName(StackVariant v) {
  return v == StackVariant::kPlain ? "plain" : "fwls";
}

// Logistic stacker over crossed terms [M_a(x) F_i(x), M_b(x) F_i(x)],
// i = 0..k, with F_0 = 1 and F_i standardized. Plain stacking is the k = 0
// case. Weights are laid out pairwise: (a_0, b_0, a_1, b_1, ...).
struct StackModel {
  StackVariant variant = StackVariant::kPlain;
  std::vector<std::string> features;
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> means;
  std::vector<double> stddevs;  // 0 marks a constant column (standardizes to 0)
  double lambda = 1e-4;
  double final_loss = 0.0;
  int iterations = 0;

  std::size_t arity() const { return 2 * (features.size() + 1); }
};

struct StackFitOptions {
  double lambda = 1e-4;
  int max_iterations = 10000;
  double gradient_tolerance = 1e-8;
  std::optional<std::vector<double>> start;  // weights then bias
};

namespace detail {

// Feature columns of `table` in `names` order, or an arity error.
inline std::vector<std::size_t> ResolveColumns(const MetaFeatureTable& table,
                                               const std::vector<std::string>& names) {
  std::vector<std::size_t> cols;
  for (const auto& name : names) {
    const auto c = table.index_of(name);
    if (!c) throw InputError("stack: feature '" + name + "' not present in input");
    cols.push_back(*c);
  }
  return cols;
}

inline double Standardize(double v, double mean, double stddev) {
  if (IsMissing(v) || stddev == 0.0) return 0.0;
  return (v - mean) / stddev;
}

inline Eigen::MatrixXd CrossedDesign(const StackModel& model, std::span<const double> scores_a,
                                     std::span<const double> scores_b,
                                     const MetaFeatureTable& table) {
  const std::size_t n = scores_a.size();
  if (scores_b.size() != n) throw InputError("stack: score vectors differ in length");
  const std::size_t k = model.features.size();
  std::vector<std::size_t> cols;
  if (k > 0) {
    if (table.rows() != n) throw InputError("stack: feature rows do not match scores");
    cols = ResolveColumns(table, model.features);
  }
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * (k + 1)));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = scores_a[i];
    x(r, 1) = scores_b[i];
    for (std::size_t f = 0; f < k; ++f) {
      const double z = Standardize(table.at(i, cols[f]), model.means[f], model.stddevs[f]);
      x(r, static_cast<Eigen::Index>(2 * (f + 1))) = scores_a[i] * z;
      x(r, static_cast<Eigen::Index>(2 * (f + 1) + 1)) = scores_b[i] * z;
    }
  }
  return x;
}

// Mean logistic loss plus (lambda/2)|w|^2; the bias is not penalized.
inline double StackObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& w, double b, double lambda) {
  const Eigen::VectorXd z = (x * w).array() + b;
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // log(1 + e^z) - y z, computed stably
    const double zi = z(i);
    const double softplus = zi > 0 ? zi + std::log1p(std::exp(-zi)) : std::log1p(std::exp(zi));
    loss += softplus - y(i) * zi;
  }
  return loss / static_cast<double>(z.size()) + 0.5 * lambda * w.squaredNorm();
}

}  // namespace detail

// Objective value of `model` on the given data (used for convexity checks).
inline double StackLoss(const StackModel& model, std::span<const double> scores_a,
                        std::span<const double> scores_b, const MetaFeatureTable& table,
                        std::span<const int> labels) {
  const Eigen::MatrixXd x = detail::CrossedDesign(model, scores_a, scores_b, table);
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
  const Eigen::VectorXd w = Eigen::Map<const Eigen::VectorXd>(
      model.weights.data(), static_cast<Eigen::Index>(model.weights.size()));
  return detail::StackObjective(x, y, w, model.bias, model.lambda);
}

// Full-batch damped Newton on the convex regularized logistic objective.
inline StackModel FitStack(std::span<const double> scores_a, std::span<const double> scores_b,
                           const MetaFeatureTable& table, std::span<const int> labels,
                           StackVariant variant, const std::vector<std::string>& selected,
                           const StackFitOptions& options = {}) {
  const std::size_t n = scores_a.size();
  if (scores_b.size() != n || labels.size() != n) {
    throw InputError("fit_stack: inputs differ in length");
  }
  if (variant == StackVariant::kPlain && !selected.empty()) {
    throw InputError("fit_stack: plain stacking takes no features");
  }
  if (variant == StackVariant::kFwls && selected.empty()) {
    throw InputError("fit_stack: FWLS needs at least one selected feature (k >= 1)");
  }
  std::size_t positives = 0;
  for (int y : labels) positives += (y == 1);
  if (positives == 0 || positives == n) {
    throw DegenerateError("fit_stack: labels contain a single class");
  }
  if (!(options.lambda >= 0.0)) throw InputError("fit_stack: lambda must be >= 0");

  StackModel model;
  model.variant = variant;
  model.features = selected;
  model.lambda = options.lambda;
  if (!selected.empty()) {
    if (table.rows() != n) throw InputError("fit_stack: feature rows do not match scores");
    const auto cols = detail::ResolveColumns(table, selected);
    for (std::size_t c : cols) {
      double sum = 0.0, count = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!IsMissing(table.at(i, c))) {
          sum += table.at(i, c);
          count += 1.0;
        }
      }
      const double mean = count > 0.0 ? sum / count : 0.0;
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (!IsMissing(table.at(i, c))) ss += (table.at(i, c) - mean) * (table.at(i, c) - mean);
      }
      const double stddev = count > 0.0 ? std::sqrt(ss / count) : 0.0;
      model.means.push_back(mean);
      model.stddevs.push_back(stddev > 1e-12 * std::max(1.0, std::abs(mean)) ? stddev : 0.0);
    }
  }

  const Eigen::MatrixXd x = detail::CrossedDesign(model, scores_a, scores_b, table);
  const Eigen::Index p = x.cols();
  const Eigen::Index rows = x.rows();
  Eigen::VectorXd y(rows);
  for (Eigen::Index i = 0; i < rows; ++i) y(i) = labels[static_cast<std::size_t>(i)];

  // theta = (w, b)
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p + 1);
  if (options.start) {
    if (options.start->size() != static_cast<std::size_t>(p + 1)) {
      throw InputError("fit_stack: start vector has the wrong arity");
    }
    for (Eigen::Index j = 0; j <= p; ++j) theta(j) = (*options.start)[static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd xb(rows, p + 1);
  xb.leftCols(p) = x;
  xb.col(p).setOnes();
  Eigen::VectorXd penalty = Eigen::VectorXd::Constant(p + 1, options.lambda);
  penalty(p) = 0.0;
  const double inv_n = 1.0 / static_cast<double>(rows);

  auto objective = [&](const Eigen::VectorXd& t) {
    return detail::StackObjective(x, y, t.head(p), t(p), options.lambda);
  };

  double current = objective(theta);
  int iteration = 0;
  for (; iteration < options.max_iterations; ++iteration) {
    const Eigen::VectorXd z = xb * theta;
    Eigen::VectorXd prob(rows), weight(rows);
    for (Eigen::Index i = 0; i < rows; ++i) {
      prob(i) = Logistic(z(i));
      weight(i) = prob(i) * (1.0 - prob(i));
    }
    const Eigen::VectorXd grad =
        inv_n * (xb.transpose() * (prob - y)) + penalty.cwiseProduct(theta);
    if (grad.norm() <= options.gradient_tolerance) break;
    Eigen::MatrixXd hess = inv_n * (xb.transpose() * weight.asDiagonal() * xb);
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(-grad);
    double scale = 1.0;
    Eigen::VectorXd candidate = theta + step;
    double value = objective(candidate);
    // Backtrack until the Armijo condition holds.
    const double slope = grad.dot(step);
    while (value > current + 1e-4 * scale * slope && scale > 1e-10) {
      scale *= 0.5;
      candidate = theta + scale * step;
      value = objective(candidate);
    }
    if (!(value <= current)) break;
    const bool stalled = current - value <= 1e-16 * std::max(1.0, std::abs(current));
    theta = candidate;
    current = value;
    if (stalled) {
      ++iteration;
      break;
    }
  }
  model.weights.assign(theta.data(), theta.data() + p);
  model.bias = theta(p);
  model.final_loss = current;
  model.iterations = iteration;
  return model;
}

inline std::vector<double> PredictStack(const StackModel& model, std::span<const double> scores_a,
                                        std::span<const double> scores_b,
                                        const MetaFeatureTable& table) {
  if (model.weights.size() != model.arity()) throw InputError("stack model: weight arity mismatch");
  if (model.means.size() != model.features.size() ||
      model.stddevs.size() != model.features.size()) {
    throw InputError("stack model: standardization arity mismatch");
  }
  const Eigen::MatrixXd x = detail::CrossedDesign(model, scores_a, scores_b, table);
  std::vector<double> out(scores_a.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double z = model.bias;
    for (std::size_t j = 0; j < model.weights.size(); ++j) {
      z += model.weights[j] * x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
    out[i] = Logistic(z);
  }
  return out;
}

inline nlohmann::json ToJson(const StackModel& m) {
  return {{"variant", VariantName(m.variant)},
          {"features", m.features},
          {"weights", m.weights},
          {"bias", m.bias},
          {"standardization", {{"mean", m.means}, {"stddev", m.stddevs}}},
          {"lambda", m.lambda},
          {"final_loss", m.final_loss},
          {"iterations", m.iterations}};
}

inline StackModel StackModelFromJson(const nlohmann::json& j) {
  try {
    StackModel m;
    const auto variant = j.at("variant").get<std::string>();
    if (variant == "plain") {
      m.variant = StackVariant::kPlain;
    } else if (variant == "fwls") {
      m.variant = StackVariant::kFwls;
    } else {
      throw InputError("stack JSON: unknown variant '" + variant + "'");
    }
    m.features = j.at("features").get<std::vector<std::string>>();
    m.weights = j.at("weights").get<std::vector<double>>();
    m.bias = j.at("bias").get<double>();
    m.means = j.at("standardization").at("mean").get<std::vector<double>>();
    m.stddevs = j.at("standardization").at("stddev").get<std::vector<double>>();
    m.lambda = j.value("lambda", 1e-4);
    return m;
  } catch (const nlohmann::json::exception& ex) {
    throw InputError(std::string("stack JSON: ") + ex.what());
  }
}

}  // namespace lfd

#endif  // LFD_ENSEMBLE_HPP_
