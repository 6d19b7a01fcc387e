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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "lfd/ensemble.hpp"
#include "lfd/random.hpp"
#include "lfd/synthetic.hpp"

namespace lfd {
namespace {

struct Fixture {
  std::vector<double> a, b;
  std::vector<int> y;
  MetaFeatureTable table;
};

Fixture MakeFixture(std::uint64_t seed, std::size_t n = 600) {
  Rng rng(seed);
  Fixture f;
  std::vector<double> values;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = rng.uniform();
    const int y = rng.bernoulli(0.35) ? 1 : 0;
    const double sign = y ? 1.0 : -1.0;
    f.a.push_back(Logistic(2.0 * g * sign + rng.normal()));
    f.b.push_back(Logistic(2.0 * (1.0 - g) * sign + rng.normal()));
    f.y.push_back(y);
    values.push_back(g);
    values.push_back(rng.bernoulli(0.1) ? kMissing : rng.normal(5.0, 2.0));
    values.push_back(3.0);
  }
  f.table = MetaFeatureTable({"g", "noise", "constant"}, n, values);
  return f;
}

// Gradient of the regularized objective, written out with loops.
std::vector<double> Gradient(const StackModel& m, const Fixture& f) {
  const std::size_t k = m.features.size();
  std::vector<double> grad(m.weights.size() + 1, 0.0);
  const double n = static_cast<double>(f.y.size());
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    std::vector<double> row{f.a[i], f.b[i]};
    for (std::size_t j = 0; j < k; ++j) {
      const auto col = *f.table.index_of(m.features[j]);
      const double v = f.table.at(i, col);
      const double z = std::isnan(v) || m.stddevs[j] == 0.0 ? 0.0 : (v - m.means[j]) / m.stddevs[j];
      row.push_back(f.a[i] * z);
      row.push_back(f.b[i] * z);
    }
    double margin = m.bias;
    for (std::size_t j = 0; j < row.size(); ++j) margin += m.weights[j] * row[j];
    const double r = 1.0 / (1.0 + std::exp(-margin)) - f.y[i];
    for (std::size_t j = 0; j < row.size(); ++j) grad[j] += r * row[j] / n;
    grad.back() += r / n;
  }
  for (std::size_t j = 0; j < m.weights.size(); ++j) grad[j] += m.lambda * m.weights[j];
  return grad;
}

TEST(Ensemble, PlainReachesStationaryPoint) {
  const Fixture f = MakeFixture(1);
  const StackModel m = FitStack(f.a, f.b, f.table, f.y, StackVariant::kPlain, {});
  ASSERT_EQ(m.weights.size(), 2u);
  double norm = 0.0;
  for (double g : Gradient(m, f)) norm += g * g;
  EXPECT_LT(std::sqrt(norm), 1e-7);
  // Convex: any perturbation is worse.
  Rng rng(3);
  const double best = StackLoss(m, f.a, f.b, f.table, f.y);
  EXPECT_NEAR(best, m.final_loss, 1e-12);
  for (int t = 0; t < 20; ++t) {
    StackModel p = m;
    for (double& w : p.weights) w += 0.01 * rng.normal();
    p.bias += 0.01 * rng.normal();
    EXPECT_GT(StackLoss(p, f.a, f.b, f.table, f.y), best);
  }
}

TEST(Ensemble, FwlsStandardizesAndConverges) {
  const Fixture f = MakeFixture(2);
  const StackModel m =
      FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"g", "noise", "constant"});
  ASSERT_EQ(m.weights.size(), 8u);
  double mean = 0.0, count = 0.0;
  for (std::size_t i = 0; i < f.y.size(); ++i) {
    const double v = f.table.at(i, 1);
    if (!std::isnan(v)) {
      mean += v;
      count += 1.0;
    }
  }
  mean /= count;
  EXPECT_NEAR(m.means[1], mean, 1e-12);
  EXPECT_EQ(m.stddevs[2], 0.0);
  double norm = 0.0;
  for (double g : Gradient(m, f)) norm += g * g;
  EXPECT_LT(std::sqrt(norm), 1e-7);
  // Constant column weights shrink to zero under the penalty.
  EXPECT_NEAR(m.weights[6], 0.0, 1e-9);
  EXPECT_NEAR(m.weights[7], 0.0, 1e-9);
}

TEST(Ensemble, ConstantOnlyFwlsReducesToPlain) {
  const Fixture f = MakeFixture(4);
  const StackModel plain = FitStack(f.a, f.b, f.table, f.y, StackVariant::kPlain, {});
  const StackModel fwls = FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"constant"});
  const auto p = PredictStack(plain, f.a, f.b, f.table);
  const auto q = PredictStack(fwls, f.a, f.b, f.table);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-9);
}

TEST(Ensemble, WarmStartAgrees) {
  const Fixture f = MakeFixture(5);
  const StackModel cold = FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"g"});
  StackFitOptions o;
  o.start = std::vector<double>{0.3, -0.2, 0.1, 0.1, 0.5};
  const StackModel warm = FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"g"}, o);
  for (std::size_t j = 0; j < cold.weights.size(); ++j) {
    EXPECT_NEAR(cold.weights[j], warm.weights[j], 1e-6);
  }
  o.start = std::vector<double>{1.0};
  EXPECT_THROW(FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"g"}, o), Error);
}

TEST(Ensemble, JsonRoundTripPredictsIdentically) {
  const Fixture f = MakeFixture(6);
  const StackModel m = FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"g", "noise"});
  const StackModel back = StackModelFromJson(nlohmann::json::parse(ToJson(m).dump()));
  EXPECT_EQ(PredictStack(m, f.a, f.b, f.table), PredictStack(back, f.a, f.b, f.table));
}

TEST(Ensemble, Errors) {
  const Fixture f = MakeFixture(7, 50);
  EXPECT_THROW(FitStack(f.a, f.b, f.table, f.y, StackVariant::kPlain, {"g"}), Error);
  EXPECT_THROW(FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {}), Error);
  EXPECT_THROW(FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"nope"}), Error);
  const std::vector<int> ones(f.y.size(), 1);
  try {
    FitStack(f.a, f.b, f.table, ones, StackVariant::kPlain, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
  }
  const StackModel m = FitStack(f.a, f.b, f.table, f.y, StackVariant::kFwls, {"g"});
  const MetaFeatureTable other({"h"}, f.y.size(), std::vector<double>(f.y.size(), 1.0));
  EXPECT_THROW(PredictStack(m, f.a, f.b, other), Error);
}

TEST(Ensemble, ComplementaryFixtureBenefitsFromFeatureWeights) {
  synthetic::ComplementaryOptions o;
  o.n = 4000;
  o.m = 3;
  const ScoredDataset d = synthetic::Complementary(o);
  const StackModel plain =
      FitStack(d.scores_a, d.scores_b, d.features, d.labels, StackVariant::kPlain, {});
  const StackModel fwls =
      FitStack(d.scores_a, d.scores_b, d.features, d.labels, StackVariant::kFwls, {"f1"});
  const double auc_plain = Auc(PredictStack(plain, d.scores_a, d.scores_b, d.features), d.labels);
  const double auc_fwls = Auc(PredictStack(fwls, d.scores_a, d.scores_b, d.features), d.labels);
  EXPECT_GT(auc_fwls, auc_plain);
  EXPECT_GT(auc_plain, std::max(Auc(d.scores_a, d.labels), Auc(d.scores_b, d.labels)));
}

}  // namespace
}  // namespace lfd
