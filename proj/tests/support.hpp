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

// Fixtures shared by the unit and acceptance suites.

#ifndef LFD_TESTS_SUPPORT_HPP_
#define LFD_TESTS_SUPPORT_HPP_

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "lfd/dataset.hpp"
#include "lfd/discriminator.hpp"
#include "lfd/random.hpp"

namespace lfd::testing {

// n x m uniform table; each cell is missing with probability `missing`.
inline MetaFeatureTable RandomTable(Rng& rng, std::size_t n, std::size_t m, double missing = 0.0) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < m; ++j) names.push_back("x" + std::to_string(j));
  MetaFeatureTable t(names, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      t.at(i, j) = missing > 0.0 && rng.bernoulli(missing) ? kMissing : rng.uniform();
    }
  }
  return t;
}

namespace detail {

inline int Grow(Tree& tree, const MetaFeatureTable& x, const std::vector<std::size_t>& rows,
                int depth, Rng& rng) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.push_back({});
  tree.nodes.back().cover = static_cast<double>(rows.size());
  if (depth > 0 && rows.size() >= 2 && rng.uniform() < 0.85) {
    const auto f = static_cast<int>(rng.below(x.cols()));
    std::vector<double> values;
    for (std::size_t r : rows) {
      const double v = x.at(r, static_cast<std::size_t>(f));
      if (!IsMissing(v)) values.push_back(v);
    }
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    if (values.size() >= 2) {
      const std::size_t k = 1 + rng.below(values.size() - 1);
      const double threshold = 0.5 * (values[k - 1] + values[k]);
      const bool default_left = rng.bernoulli(0.5);
      std::vector<std::size_t> left, right;
      for (std::size_t r : rows) {
        const double v = x.at(r, static_cast<std::size_t>(f));
        const bool go_left = IsMissing(v) ? default_left : v < threshold;
        (go_left ? left : right).push_back(r);
      }
      const int l = Grow(tree, x, left, depth - 1, rng);
      const int r = Grow(tree, x, right, depth - 1, rng);
      TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
      node.feature = f;
      node.threshold = threshold;
      node.default_left = default_left;
      node.left = l;
      node.right = r;
      return index;
    }
  }
  tree.nodes[static_cast<std::size_t>(index)].leaf_value = rng.normal();
  return index;
}

}  // namespace detail

// Random ensemble whose covers are the row counts of `x` reaching each node.
// Every split separates two observed values, so internal covers are >= 2.
inline TreeEnsemble RandomEnsemble(Rng& rng, const MetaFeatureTable& x, std::size_t max_trees,
                                   int max_depth) {
  TreeEnsemble e;
  e.feature_names = x.names();
  e.base_score = rng.normal(0.0, 0.5);
  e.learning_rate = 0.1 + 0.9 * rng.uniform();
  std::vector<std::size_t> rows(x.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const std::size_t trees = 1 + rng.below(max_trees);
  for (std::size_t t = 0; t < trees; ++t) {
    Tree tree;
    detail::Grow(tree, x, rows, 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_depth))),
                 rng);
    e.trees.push_back(std::move(tree));
  }
  return e;
}

// Reads a whole file; empty string when absent.
inline std::string Slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("lfd_" + tag + "_" + std::to_string(std::random_device{}()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace lfd::testing

#endif  // LFD_TESTS_SUPPORT_HPP_
