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

#include <set>
#include <sstream>
#include <vector>

#include "lfd/pipeline.hpp"
#include "lfd/synthetic.hpp"

namespace lfd {
namespace {

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    synthetic::PlantedOptions o;
    o.n = 4000;
    o.m = 8;
    o.missing_rate = 0.02;
    data_ = new ScoredDataset(synthetic::Planted(o));
    analysis_ = new ThresholdAnalysis(AnalyzeThreshold(*data_, PipelineConfig{}));
  }
  static void TearDownTestSuite() {
    delete analysis_;
    delete data_;
  }
  static ScoredDataset* data_;
  static ThresholdAnalysis* analysis_;
};

ScoredDataset* PipelineTest::data_ = nullptr;
ThresholdAnalysis* PipelineTest::analysis_ = nullptr;

TEST_F(PipelineTest, TrainingSetsFollowCells) {
  for (Side side : {Side::kTp, Side::kFp}) {
    const SideAnalysis& s = side == Side::kTp ? analysis_->tp : analysis_->fp;
    const auto& a_only = analysis_->cells.cell(Cell::kAOnly, side);
    const auto& b_only = analysis_->cells.cell(Cell::kBOnly, side);
    EXPECT_EQ(s.training.instances.size(), a_only.size() + b_only.size());
    const std::set<std::size_t> a(a_only.begin(), a_only.end());
    for (std::size_t r = 0; r < s.training.instances.size(); ++r) {
      EXPECT_EQ(s.training.labels[r], a.count(s.training.instances[r]) ? 0 : 1);
      if (r > 0) {
        EXPECT_LT(s.training.instances[r - 1], s.training.instances[r]);
      }
    }
    EXPECT_EQ(s.shap.instances, s.training.instances);
  }
}

TEST_F(PipelineTest, AdditivityAndSignalRanking) {
  for (const SideAnalysis* s : {&analysis_->tp, &analysis_->fp}) {
    EXPECT_LE(s->max_additivity_error, 1e-6);
    EXPECT_GT(s->auc(), 0.95);
    ASSERT_EQ(s->profiles.size(), 8u);
    const std::set<std::string> top{s->profiles[0].feature, s->profiles[1].feature};
    EXPECT_EQ(top, (std::set<std::string>{"signal_1", "signal_2"}));
  }
}

TEST_F(PipelineTest, FeatureLayoutConservesRows) {
  const SideAnalysis& s = analysis_->tp;
  for (const auto& name : {"signal_1", "noise_03"}) {
    const FeatureLayout layout = BuildFeatureLayout(s, name, PipelineConfig{});
    const auto col = *s.features.index_of(name);
    std::size_t present = 0;
    for (std::size_t i = 0; i < s.features.rows(); ++i) present += !IsMissing(s.features.at(i, col));
    std::size_t bubbles = 0, heights = 0;
    for (const auto& b : layout.packed.bubbles) bubbles += b.count;
    for (const auto& c : layout.area) heights += c.height;
    EXPECT_EQ(bubbles, present);
    EXPECT_EQ(heights, present);
    EXPECT_EQ(layout.area.size(), 100u);
    EXPECT_LE(layout.packed.max_overlap, 0.005);
  }
  EXPECT_THROW(BuildFeatureLayout(s, "absent", PipelineConfig{}), Error);
}

TEST_F(PipelineTest, NoDisagreementAtFullCapture) {
  PipelineConfig cfg;
  cfg.threshold = 1.0;
  try {
    AnalyzeThreshold(*data_, cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
    EXPECT_NE(std::string(e.what()).find("no disagreement to learn from"), std::string::npos);
  }
}

TEST_F(PipelineTest, EnsembleReportShape) {
  EnsembleOptions o;
  o.k = 0;
  const EnsembleReport plain = RunEnsemble(*data_, PipelineConfig{}, o);
  ASSERT_EQ(plain.rows.size(), 3u);
  EXPECT_EQ(plain.rows[2].model, "plain");
  o.k = 3;
  const EnsembleReport full = RunEnsemble(*data_, PipelineConfig{}, o);
  ASSERT_EQ(full.rows.size(), 8u);
  EXPECT_EQ(full.rows[3].model, "fwls_magnitude");
  EXPECT_EQ(full.rows[7].model, "fwls_overall");
  EXPECT_EQ(full.train_size + full.eval_size, data_->size());
  for (const auto& [name, model] : full.models) {
    if (name != "plain") {
      EXPECT_EQ(model.features.size(), 3u);
    }
  }
  std::ostringstream csv;
  WriteEnsembleCsv(full, csv);
  EXPECT_EQ(csv.str().substr(0, csv.str().find('\n')),
            "model,auc_train,logloss_train,auc_eval,logloss_eval");
  o.eval_split = 1.0;
  EXPECT_THROW(RunEnsemble(*data_, PipelineConfig{}, o), Error);
}

TEST(Pipeline, SubsetKeepsRowsInOrder) {
  synthetic::PlantedOptions o;
  o.n = 50;
  o.m = 3;
  const ScoredDataset d = synthetic::Planted(o);
  const std::vector<std::size_t> rows{40, 3, 7};
  const ScoredDataset s = Subset(d, rows);
  EXPECT_EQ(s.ids, (std::vector<std::string>{d.ids[40], d.ids[3], d.ids[7]}));
  EXPECT_EQ(s.features.at(1, 2), d.features.at(3, 2));
}

}  // namespace
}  // namespace lfd
