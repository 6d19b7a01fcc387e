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

#ifndef LFD_EVALUATION_HPP_
#define LFD_EVALUATION_HPP_

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/discriminator.hpp"
#include "lfd/error.hpp"
#include "lfd/random.hpp"
#include "lfd/scoring.hpp"

namespace lfd {

enum class AblationOrder { kRandom, kOverall, kBoth };

inline AblationOrder ParseAblationOrder(std::string_view text) {
  if (text == "random") return AblationOrder::kRandom;
  if (text == "overall") return AblationOrder::kOverall;
  if (text == "both") return AblationOrder::kBoth;
  throw InputError("unknown ablation order '" + std::string(text) +
                   "' (expected random, overall or both)");
}

struct AblationOptions {
  AblationOrder order = AblationOrder::kBoth;
  int repeats = 100;
  std::uint64_t seed = 42;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct AblationPoint {
  std::size_t k = 0;  // features remaining
  double mean_auc = std::numeric_limits<double>::quiet_NaN();
  double std_auc = std::numeric_limits<double>::quiet_NaN();
  double mean_rounds = std::numeric_limits<double>::quiet_NaN();
  double overall_auc = std::numeric_limits<double>::quiet_NaN();
  double overall_rounds = std::numeric_limits<double>::quiet_NaN();
};

struct AblationCurve {
  std::vector<AblationPoint> points;  // k from m down to 1
  int repeats = 0;
  std::vector<std::string> overall_order;  // removal order, most important first
};

namespace detail {

struct AblationRun {
  std::vector<double> auc;     // indexed by removals so far
  std::vector<double> rounds;
};

// Retrains from scratch after each removal, k = m..1 features kept.
inline AblationRun RunRemovalSequence(const MetaFeatureTable& table, std::span<const int> labels,
                                      const std::vector<std::size_t>& removal,
                                      const TrainConfig& config) {
  AblationRun run;
  std::vector<std::size_t> rows(table.rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (std::size_t k = removal.size(); k >= 1; --k) {
    const std::span<const std::size_t> kept(removal.data() + (removal.size() - k), k);
    const MetaFeatureTable subset = table.select(rows, kept);
    const TreeEnsemble e = Train(subset, labels, config);
    run.auc.push_back(e.info.best_auc);
    run.rounds.push_back(static_cast<double>(e.info.rounds_run));
  }
  return run;
}

}  // namespace detail

// Feature ablation on a discriminator training set. Random orders remove a
// seeded permutation one feature at a time over `repeats` runs; the overall
// order removes `overall_order` front to back. Every point retrains from
// scratch and records holdout AUC and rounds run.
inline AblationCurve Ablation(const MetaFeatureTable& table, std::span<const int> labels,
                              const std::vector<std::string>& overall_order,
                              const AblationOptions& options, const TrainConfig& config = {}) {
  const std::size_t m = table.cols();
  if (m < 2) throw InputError("ablation needs at least 2 meta-features");
  const bool want_random = options.order != AblationOrder::kOverall;
  const bool want_overall = options.order != AblationOrder::kRandom;
  if (want_random && options.repeats < 1) throw InputError("ablation repeats must be >= 1");

  AblationCurve curve;
  curve.points.resize(m);
  for (std::size_t r = 0; r < m; ++r) curve.points[r].k = m - r;

  if (want_overall) {
    if (overall_order.size() != m) {
      throw InputError("overall removal order must name every feature once");
    }
    std::vector<std::size_t> removal;
    for (const auto& name : overall_order) {
      const auto c = table.index_of(name);
      if (!c) throw InputError("ablation: unknown feature '" + name + "'");
      removal.push_back(*c);
    }
    curve.overall_order = overall_order;
    const auto run = detail::RunRemovalSequence(table, labels, removal, config);
    for (std::size_t r = 0; r < m; ++r) {
      curve.points[r].overall_auc = run.auc[r];
      curve.points[r].overall_rounds = run.rounds[r];
    }
  }

  if (want_random) {
    const auto repeats = static_cast<std::size_t>(options.repeats);
    std::vector<detail::AblationRun> runs(repeats);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t rep = next++; rep < repeats; rep = next++) {
        std::vector<std::size_t> removal(m);
        std::iota(removal.begin(), removal.end(), std::size_t{0});
        Rng rng(options.seed + 7919 * static_cast<std::uint64_t>(rep));
        rng.shuffle(std::span<std::size_t>(removal));
        runs[rep] = detail::RunRemovalSequence(table, labels, removal, config);
      }
    };
    const unsigned hw = options.threads ? options.threads
                                        : std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, repeats);
    if (workers <= 1) {
      worker();
    } else {
      std::vector<std::jthread> pool;
      for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    curve.repeats = options.repeats;
    for (std::size_t r = 0; r < m; ++r) {
      double sum = 0.0, rounds = 0.0;
      for (const auto& run : runs) {
        sum += run.auc[r];
        rounds += run.rounds[r];
      }
      const double mean = sum / static_cast<double>(repeats);
      double ss = 0.0;
      for (const auto& run : runs) ss += (run.auc[r] - mean) * (run.auc[r] - mean);
      curve.points[r].mean_auc = mean;
      curve.points[r].std_auc = std::sqrt(ss / static_cast<double>(repeats));
      curve.points[r].mean_rounds = rounds / static_cast<double>(repeats);
    }
  }
  return curve;
}

namespace detail {

inline nlohmann::json NumberOrNull(double v) {
  if (std::isnan(v)) return nullptr;
  return v;
}

inline std::string CsvNumber(double v) { return std::isnan(v) ? "" : FormatDouble(v); }

}  // namespace detail

inline nlohmann::json ToJson(const AblationCurve& curve) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& p : curve.points) {
    points.push_back({{"k", p.k},
                      {"mean_auc", detail::NumberOrNull(p.mean_auc)},
                      {"std_auc", detail::NumberOrNull(p.std_auc)},
                      {"mean_rounds", detail::NumberOrNull(p.mean_rounds)},
                      {"overall_auc", detail::NumberOrNull(p.overall_auc)},
                      {"overall_rounds", detail::NumberOrNull(p.overall_rounds)}});
  }
  return {{"repeats", curve.repeats}, {"overall_order", curve.overall_order}, {"points", points}};
}

// k,mean_auc,std_auc,overall_auc,mean_rounds; absent series are empty cells.
inline void WriteAblationCsv(const AblationCurve& curve, std::ostream& out) {
  out << "k,mean_auc,std_auc,overall_auc,mean_rounds\n";
  for (const auto& p : curve.points) {
    out << p.k << ',' << detail::CsvNumber(p.mean_auc) << ',' << detail::CsvNumber(p.std_auc)
        << ',' << detail::CsvNumber(p.overall_auc) << ',' << detail::CsvNumber(p.mean_rounds)
        << '\n';
  }
}

}  // namespace lfd

#endif  // LFD_EVALUATION_HPP_
