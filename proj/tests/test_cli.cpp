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

#include <fstream>
#include <sstream>

#include "lfd/cli.hpp"
#include "lfd/synthetic.hpp"
#include "support.hpp"

namespace lfd::cli {
namespace {

namespace fs = std::filesystem;

std::map<std::string, std::string> ReadTree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = testing::Slurp(e.path());
  }
  return files;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    synthetic::PlantedOptions p;
    p.n = 1500;
    p.m = 4;
    data_ = dir_.path() / "data.csv";
    std::ofstream out(data_);
    WriteDataset(synthetic::Planted(p), out);
  }

  CommonOptions Options(const std::string& out) const {
    CommonOptions o;
    o.data = data_.string();
    o.out = (dir_.path() / out).string();
    return o;
  }

  testing::TempDir dir_{"cli"};
  fs::path data_;
};

TEST_F(CliTest, RunIsDeterministic) {
  CmdRun(Options("one"));
  CmdRun(Options("two"));
  auto a = ReadTree(dir_.path() / "one");
  auto b = ReadTree(dir_.path() / "two");
  for (const char* f : {"manifest.json", "cells.json", "summary.txt", "discriminator_tp.json",
                        "discriminator_fp.json", "shap_tp.bin", "shap_fp.bin", "rankings_tp.json",
                        "rankings_fp.json", "layouts/tp_signal_1.json", "layouts/fp_noise_01.svg"}) {
    EXPECT_TRUE(a.count(f)) << f;
  }
  EXPECT_EQ(a.size(), 9u + 4u * 4u);
  ASSERT_EQ(a.size(), b.size());
  for (const auto& [name, content] : a) {
    if (name == "manifest.json") continue;
    EXPECT_EQ(content, b.at(name)) << name;
  }
  const json ma = json::parse(a.at("manifest.json"));
  const json mb = json::parse(b.at("manifest.json"));
  EXPECT_TRUE(ma.contains("timestamp"));
  EXPECT_EQ(ma["version"], LFD_VERSION);
  EXPECT_EQ(ma["threshold"], mb["threshold"]);
}

TEST_F(CliTest, DegenerateRemovesPartialOutput) {
  CommonOptions o = Options("degenerate");
  o.threshold = 1.0;
  try {
    CmdRun(o);
    FAIL() << "expected a degenerate error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDegenerate);
    EXPECT_EQ(ExitCode(e.kind()), 3);
  }
  EXPECT_FALSE(fs::exists(dir_.path() / "degenerate" / "manifest.json"));
  EXPECT_FALSE(fs::exists(dir_.path() / "degenerate"));
}

TEST(CliExitCodes, Mapping) {
  EXPECT_EQ(ExitCode(ErrorKind::kInput), 2);
  EXPECT_EQ(ExitCode(ErrorKind::kDegenerate), 3);
  EXPECT_EQ(ExitCode(ErrorKind::kTraining), 4);
  EXPECT_EQ(ExitCode(ErrorKind::kIo), 5);
}

TEST_F(CliTest, InputErrors) {
  CommonOptions o = Options("x");
  o.weights = "1,2,3";
  EXPECT_THROW(MakeConfig(o), Error);
  o.weights = "2,1,2,1";
  o.threshold = 0.0;
  EXPECT_THROW(MakeConfig(o), Error);
  o = Options("x");
  o.data = (dir_.path() / "absent.csv").string();
  try {
    CmdRun(o);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kIo);
  }
}

TEST_F(CliTest, EnsembleAndAblationCsv) {
  CommonOptions o = Options("unused");
  o.top_k = 2;
  std::ostringstream ensemble;
  EnsembleCommand e;
  e.metrics = {"overall"};
  const auto report = CmdEnsemble(o, e, ensemble);
  EXPECT_EQ(report.rows.size(), 4u);
  EXPECT_EQ(ensemble.str().rfind("model,auc_train,logloss_train,auc_eval,logloss_eval\n", 0), 0u);

  std::ostringstream ablation;
  AblationCommand c;
  c.repeats = 2;
  c.order = "random";
  const auto curve = CmdAblation(o, c, ablation);
  EXPECT_EQ(curve.points.size(), 4u);
  std::istringstream lines(ablation.str());
  std::string line;
  std::size_t count = 0;
  while (std::getline(lines, line)) ++count;
  EXPECT_EQ(count, 5u);
}

TEST_F(CliTest, SynthRoundTrips) {
  CommonOptions o;
  SynthCommand c;
  c.kind = "complementary";
  c.n = 50;
  c.m = 3;
  std::ostringstream out;
  const ScoredDataset d = CmdSynth(o, c, out);
  EXPECT_EQ(LoadDataset(out.str()).size(), 50u);
  EXPECT_EQ(d.features.cols(), 3u);
  c.kind = "other";
  EXPECT_THROW(CmdSynth(o, c, out), Error);
}

}  // namespace
}  // namespace lfd::cli
