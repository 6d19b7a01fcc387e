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

#ifndef LFD_SYNTHETIC_HPP_
#define LFD_SYNTHETIC_HPP_

#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "lfd/dataset.hpp"
#include "lfd/error.hpp"
#include "lfd/random.hpp"
#include "lfd/scoring.hpp"

// Seeded synthetic comparison datasets for demos and tests.
namespace lfd::synthetic {

inline std::string NoiseName(std::size_t k) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "noise_%02zu", k);
  return buffer;
}

struct PlantedOptions {
  std::size_t n = 10000;
  std::size_t m = 20;  // two signal features plus m - 2 noise features
  std::uint64_t seed = 1;
  double positive_rate = 0.2;
  double separation = 1.5;   // score shift between the two models
  double score_noise = 0.0;  // independent per-model score noise
  double missing_rate = 0.0;  // per-cell missing probability on noise features
};

// Both models share a label-driven quality term. Model A is shifted up (and
// B down) whenever signal_1 > 0.5 or signal_2 > 0.5, and the other way round
// when both are low, so without score noise A+B- instances all sit in the
// union region and A-B+ instances in the low-low corner. The remaining
// features are independent uniform noise.
inline ScoredDataset Planted(const PlantedOptions& o) {
  if (o.m < 2) throw InputError("planted fixture needs m >= 2");
  Rng rng(o.seed);
  std::vector<std::string> names{"signal_1", "signal_2"};
  for (std::size_t k = 1; k + 2 <= o.m; ++k) names.push_back(NoiseName(k));
  ScoredDataset d;
  d.features = MetaFeatureTable(names, o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    for (std::size_t j = 0; j < o.m; ++j) {
      const double v = rng.uniform();
      const bool drop = j >= 2 && o.missing_rate > 0.0 && rng.bernoulli(o.missing_rate);
      d.features.at(i, j) = drop ? kMissing : v;
    }
    const int y = rng.bernoulli(o.positive_rate) ? 1 : 0;
    const double quality = 2.5 * y + rng.normal();
    const bool a_favoured = d.features.at(i, 0) > 0.5 || d.features.at(i, 1) > 0.5;
    const double shift = a_favoured ? o.separation : -o.separation;
    const double noise_a = o.score_noise * rng.normal();
    const double noise_b = o.score_noise * rng.normal();
    d.ids.push_back("p" + std::to_string(i));
    d.labels.push_back(y);
    d.scores_a.push_back(Logistic(quality + shift + noise_a));
    d.scores_b.push_back(Logistic(quality - shift + noise_b));
  }
  Validate(d);
  return d;
}

struct ComplementaryOptions {
  std::size_t n = 10000;
  std::size_t m = 20;  // "f1" plus m - 1 noise features
  std::uint64_t seed = 1;
  double positive_rate = 0.3;
  double strength = 1.5;
  double score_noise = 1.0;
};

// Model A is informative where f1 is high, model B where f1 is low.
inline ScoredDataset Complementary(const ComplementaryOptions& o) {
  if (o.m < 1) throw InputError("complementary fixture needs m >= 1");
  Rng rng(o.seed);
  std::vector<std::string> names{"f1"};
  for (std::size_t k = 1; k < o.m; ++k) names.push_back(NoiseName(k));
  ScoredDataset d;
  d.features = MetaFeatureTable(names, o.n);
  for (std::size_t i = 0; i < o.n; ++i) {
    for (std::size_t j = 0; j < o.m; ++j) d.features.at(i, j) = rng.uniform();
    const int y = rng.bernoulli(o.positive_rate) ? 1 : 0;
    const double sign = y == 1 ? 1.0 : -1.0;
    const double f1 = d.features.at(i, 0);
    d.ids.push_back("c" + std::to_string(i));
    d.labels.push_back(y);
    d.scores_a.push_back(Logistic(o.strength * f1 * sign + o.score_noise * rng.normal()));
    d.scores_b.push_back(Logistic(o.strength * (1.0 - f1) * sign + o.score_noise * rng.normal()));
  }
  Validate(d);
  return d;
}

}  // namespace lfd::synthetic

#endif  // LFD_SYNTHETIC_HPP_
