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

// Command-line driver: run, ensemble, ablation, serve, synth.

#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "lfd/cli.hpp"

namespace {

void AddCommon(CLI::App* cmd, lfd::cli::CommonOptions& o, bool analysis = true) {
  cmd->add_option("--data", o.data, "input CSV (id,label,score_a,score_b,meta-features...)");
  cmd->add_option("--seed", o.seed, "random seed")->capture_default_str();
  cmd->add_option("--out", o.out, "output path");
  if (!analysis) return;
  cmd->add_option("--threshold", o.threshold, "capture fraction in (0,1]")->capture_default_str();
  cmd->add_option("--shap-bins", o.shap_bins, "SHAP bins")->capture_default_str();
  cmd->add_option("--feature-bins", o.feature_bins, "feature bins")->capture_default_str();
  cmd->add_option("--weights", o.weights, "Overall weights mag,cons,contrast,corr")
      ->capture_default_str();
  cmd->add_option("--top-k", o.top_k, "features kept per metric")->capture_default_str();
}

// Writes to --out when given, stdout otherwise.
template <typename F>
void WithOutput(const std::string& path, F&& f) {
  if (path.empty()) {
    f(std::cout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw lfd::IoError("cannot write '" + path + "'");
  f(out);
  if (!out) throw lfd::IoError("failed writing '" + path + "'");
}

}  // namespace

int main(int argc, char** argv) {
  namespace cli = lfd::cli;
  CLI::App app{"Learning-from-disagreement toolkit"};
  app.set_version_flag("--version", std::string(LFD_VERSION));
  app.require_subcommand(1);

  cli::CommonOptions common;
  auto* run = app.add_subcommand("run", "train discriminators and write all artifacts");
  AddCommon(run, common);

  cli::EnsembleCommand ensemble;
  auto* ens = app.add_subcommand("ensemble", "compare base models, stacking and FWLS");
  AddCommon(ens, common);
  ens->add_option("--metric", ensemble.metrics, "ranking metric(s) for FWLS; default all five");
  ens->add_option("--k", common.top_k, "alias of --top-k");
  ens->add_option("--eval-split", ensemble.eval_split, "held-out fraction")->capture_default_str();
  ens->add_option("--lambda", ensemble.lambda, "L2 penalty")->capture_default_str();

  cli::AblationCommand ablation;
  auto* abl = app.add_subcommand("ablation", "meta-feature removal curves");
  AddCommon(abl, common);
  abl->add_option("--order", ablation.order, "random, overall or both")->capture_default_str();
  abl->add_option("--repeats", ablation.repeats, "random orders")->capture_default_str();
  abl->add_option("--side", ablation.side, "tp or fp")->capture_default_str();
  abl->add_option("--threads", ablation.threads, "worker threads, 0 = all cores");

  cli::ServeCommand serve;
  auto* srv = app.add_subcommand("serve", "run the HTTP service");
  AddCommon(srv, common);
  srv->add_option("--host", serve.host)->capture_default_str();
  srv->add_option("--port", serve.port, "0 picks a free port")->capture_default_str();
  srv->add_option("--snapshot-dir", serve.snapshot_dir, "write published analyses here");

  cli::SynthCommand synth;
  auto* syn = app.add_subcommand("synth", "write a synthetic dataset");
  AddCommon(syn, common, false);
  syn->add_option("--kind", synth.kind, "planted or complementary")->capture_default_str();
  syn->add_option("--n", synth.n, "instances")->capture_default_str();
  syn->add_option("--m", synth.m, "meta-features")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cli::ExitCode(lfd::ErrorKind::kInput);
  }

  try {
    if (run->parsed()) {
      cli::CmdRun(common);
    } else if (ens->parsed()) {
      WithOutput(common.out, [&](std::ostream& out) { cli::CmdEnsemble(common, ensemble, out); });
    } else if (abl->parsed()) {
      WithOutput(common.out, [&](std::ostream& out) { cli::CmdAblation(common, ablation, out); });
    } else if (srv->parsed()) {
      return cli::CmdServe(common, serve);
    } else if (syn->parsed()) {
      WithOutput(common.out, [&](std::ostream& out) { cli::CmdSynth(common, synth, out); });
    }
  } catch (const lfd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::ExitCode(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return cli::kExitOk;
}
