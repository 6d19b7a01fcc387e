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

#ifndef LFD_SHAP_HPP_
#define LFD_SHAP_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "lfd/dataset.hpp"
#include "lfd/discriminator.hpp"
#include "lfd/error.hpp"

namespace lfd {

// n x m attributions in margin (log-odds) space. Row i explains instance
// `instances[i]`; base_value + sum of row i reconstructs its margin.
struct ShapMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  double base_value = 0.0;
  std::vector<std::size_t> instances;
  std::vector<std::string> feature_names;

  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }

  std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }

  std::vector<double> column(std::size_t j) const {
    std::vector<double> out(rows);
    for (std::size_t i = 0; i < rows; ++i) out[i] = at(i, j);
    return out;
  }

  double row_sum(std::size_t i) const {
    const auto r = row(i);
    return std::accumulate(r.begin(), r.end(), 0.0);
  }
};

namespace detail {

// One element of the unique feature path. `pweight` of slot i is the
// permutation weight of subsets with i features switched on.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

inline void ExtendPath(PathElement* path, std::size_t depth, double zero_fraction,
                       double one_fraction, int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t k = depth; k-- > 0;) {
    path[k + 1].pweight += one_fraction * path[k].pweight * static_cast<double>(k + 1) / d1;
    path[k].pweight = zero_fraction * path[k].pweight * static_cast<double>(depth - k) / d1;
  }
}

inline void UnwindPath(PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].pweight;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[k].pweight;
      path[k].pweight = next_one_portion * d1 / (static_cast<double>(k + 1) * one);
      next_one_portion = tmp - path[k].pweight * zero * static_cast<double>(depth - k) / d1;
    } else {
      path[k].pweight = path[k].pweight * d1 / (zero * static_cast<double>(depth - k));
    }
  }
  for (std::size_t k = index; k < depth; ++k) {
    path[k].feature = path[k + 1].feature;
    path[k].zero_fraction = path[k + 1].zero_fraction;
    path[k].one_fraction = path[k + 1].one_fraction;
  }
}

// Total permutation weight left after unwinding element `index`.
inline double UnwoundPathSum(const PathElement* path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  for (std::size_t k = depth; k-- > 0;) {
    if (one != 0.0) {
      const double tmp = next_one_portion * d1 / (static_cast<double>(k + 1) * one);
      total += tmp;
      next_one_portion = path[k].pweight - tmp * zero * static_cast<double>(depth - k) / d1;
    } else if (zero != 0.0) {
      total += path[k].pweight / zero / (static_cast<double>(depth - k) / d1);
    }
  }
  return total;
}

// Polynomial-time path-dependent attribution for one tree; adds
// scale * phi into `phi`.
inline void TreeShapRecurse(const Tree& tree, std::span<const double> row, double scale,
                            std::span<double> phi, int node_index, std::size_t depth,
                            PathElement* parent_path, double parent_zero, double parent_one,
                            int parent_feature) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  PathElement* path = parent_path + depth + 1;
  std::copy(parent_path, parent_path + depth + 1, path);
  ExtendPath(path, depth, parent_zero, parent_one, parent_feature);

  if (node.is_leaf()) {
    for (std::size_t k = 1; k <= depth; ++k) {
      const double w = UnwoundPathSum(path, depth, k);
      const PathElement& el = path[k];
      phi[static_cast<std::size_t>(el.feature)] +=
          scale * w * (el.one_fraction - el.zero_fraction) * node.leaf_value;
    }
    return;
  }

  const int hot = tree.next(node_index, row);
  const int cold = hot == node.left ? node.right : node.left;
  const double hot_zero = tree.nodes[static_cast<std::size_t>(hot)].cover / node.cover;
  const double cold_zero = tree.nodes[static_cast<std::size_t>(cold)].cover / node.cover;
  double incoming_zero = 1.0;
  double incoming_one = 1.0;

  // A feature already on the path is unwound and re-extended here.
  std::size_t path_index = 0;
  for (; path_index <= depth; ++path_index) {
    if (path[path_index].feature == node.feature) break;
  }
  if (path_index != depth + 1) {
    incoming_zero = path[path_index].zero_fraction;
    incoming_one = path[path_index].one_fraction;
    UnwindPath(path, depth, path_index);
    depth -= 1;
  }

  TreeShapRecurse(tree, row, scale, phi, hot, depth + 1, path, hot_zero * incoming_zero,
                  incoming_one, node.feature);
  TreeShapRecurse(tree, row, scale, phi, cold, depth + 1, path, cold_zero * incoming_zero, 0.0,
                  node.feature);
}

inline void CheckCovers(const TreeEnsemble& e) {
  for (std::size_t t = 0; t < e.trees.size(); ++t) {
    for (const TreeNode& node : e.trees[t].nodes) {
      if (!std::isfinite(node.cover) || node.cover <= 0.0) {
        throw InputError("tree " + std::to_string(t) + " has a node with missing cover");
      }
      if (!node.is_leaf() && (node.feature < 0 ||
                              static_cast<std::size_t>(node.feature) >= e.arity())) {
        throw InputError("tree " + std::to_string(t) + " splits on an unknown feature");
      }
    }
  }
}

// Cover-weighted mean leaf value below `index`.
inline double ExpectedValue(const Tree& tree, int index = 0) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return node.leaf_value;
  const TreeNode& l = tree.nodes[static_cast<std::size_t>(node.left)];
  const TreeNode& r = tree.nodes[static_cast<std::size_t>(node.right)];
  return (l.cover * ExpectedValue(tree, node.left) + r.cover * ExpectedValue(tree, node.right)) /
         node.cover;
}

}  // namespace detail

// Expected margin under the cover-weighted distribution.
inline double ShapBaseValue(const TreeEnsemble& e) {
  double base = e.base_score;
  for (const Tree& tree : e.trees) base += e.learning_rate * detail::ExpectedValue(tree);
  return base;
}

// Attribution vector for one row, accumulated over all trees.
inline std::vector<double> TreeShapRow(const TreeEnsemble& e, std::span<const double> row) {
  if (row.size() != e.arity()) {
    throw InputError("tree_shap: row arity " + std::to_string(row.size()) + " != " +
                     std::to_string(e.arity()));
  }
  detail::CheckCovers(e);
  std::vector<double> phi(e.arity(), 0.0);
  std::vector<detail::PathElement> scratch;
  for (const Tree& tree : e.trees) {
    const std::size_t maxd = static_cast<std::size_t>(tree.depth()) + 2;
    scratch.assign(maxd * (maxd + 1) / 2, detail::PathElement{});
    detail::TreeShapRecurse(tree, row, e.learning_rate, phi, 0, 0, scratch.data(), 1.0, 1.0, -1);
  }
  return phi;
}

// Attributions for every row of `x`. `instances`, when given, records
// which dataset index each row explains.
inline ShapMatrix TreeShap(const TreeEnsemble& e, const MetaFeatureTable& x,
                           std::vector<std::size_t> instances = {}) {
  detail::CheckCovers(e);
  if (x.cols() != e.arity()) {
    throw InputError("tree_shap: table has " + std::to_string(x.cols()) +
                     " features, ensemble expects " + std::to_string(e.arity()));
  }
  if (instances.empty()) {
    instances.resize(x.rows());
    std::iota(instances.begin(), instances.end(), std::size_t{0});
  }
  if (instances.size() != x.rows()) throw InputError("tree_shap: instance mapping size mismatch");

  ShapMatrix out;
  out.rows = x.rows();
  out.cols = x.cols();
  out.values.assign(out.rows * out.cols, 0.0);
  out.base_value = ShapBaseValue(e);
  out.instances = std::move(instances);
  out.feature_names = e.feature_names;

  // Rows are independent; each worker owns a contiguous block.
  const std::size_t workers =
      std::clamp<std::size_t>(std::thread::hardware_concurrency(), 1, 8);
  const std::size_t block = (out.rows + workers - 1) / std::max<std::size_t>(workers, 1);
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto phi = TreeShapRow(e, x.row(i));
      std::copy(phi.begin(), phi.end(), out.values.begin() + static_cast<std::ptrdiff_t>(i * out.cols));
    }
  };
  if (out.rows < 256 || workers == 1) {
    work(0, out.rows);
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t begin = 0; begin < out.rows; begin += block) {
      threads.emplace_back(work, begin, std::min(out.rows, begin + block));
    }
  }
  return out;
}

inline constexpr std::size_t kBruteShapleyMaxFeatures = 12;

namespace detail {

// E[tree | features in `known` fixed to `row`], unknown features integrated
// out with cover weights.
inline double ConditionalExpectation(const Tree& tree, std::span<const double> row,
                                     std::uint32_t known, int index = 0) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return node.leaf_value;
  if (known & (1u << node.feature)) {
    return ConditionalExpectation(tree, row, known, tree.next(index, row));
  }
  const TreeNode& l = tree.nodes[static_cast<std::size_t>(node.left)];
  const TreeNode& r = tree.nodes[static_cast<std::size_t>(node.right)];
  return (l.cover * ConditionalExpectation(tree, row, known, node.left) +
          r.cover * ConditionalExpectation(tree, row, known, node.right)) /
         node.cover;
}

}  // namespace detail

// Exact Shapley values by enumerating all 2^m feature subsets of the
// cover-weighted conditional-expectation game.
inline std::vector<double> BruteShapley(const TreeEnsemble& e, std::span<const double> row) {
  const std::size_t m = e.arity();
  if (m > kBruteShapleyMaxFeatures) {
    throw InputError("brute_shapley supports at most 12 features, got " + std::to_string(m));
  }
  if (row.size() != m) throw InputError("brute_shapley: row arity mismatch");
  detail::CheckCovers(e);
  const std::uint32_t subsets = 1u << m;
  std::vector<double> value(subsets);
  for (std::uint32_t s = 0; s < subsets; ++s) {
    double v = e.base_score;
    for (const Tree& tree : e.trees) {
      v += e.learning_rate * detail::ConditionalExpectation(tree, row, s);
    }
    value[s] = v;
  }
  // weight[k] = k! (m-k-1)! / m!
  std::vector<double> weight(m, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    double w = 1.0 / static_cast<double>(m);
    // 1 / (m * C(m-1, k))
    for (std::size_t i = 1; i <= k; ++i) {
      w *= static_cast<double>(i) / static_cast<double>(m - 1 - k + i);
    }
    weight[k] = w;
  }
  std::vector<double> phi(m, 0.0);
  for (std::size_t j = 0; j < m; ++j) {
    const std::uint32_t bit = 1u << j;
    for (std::uint32_t s = 0; s < subsets; ++s) {
      if (s & bit) continue;
      phi[j] += weight[static_cast<std::size_t>(std::popcount(s))] * (value[s | bit] - value[s]);
    }
  }
  return phi;
}

// Columnar JSON: one attribution array per feature.
inline nlohmann::json ToJson(const ShapMatrix& shap) {
  nlohmann::json columns = nlohmann::json::object();
  for (std::size_t j = 0; j < shap.cols; ++j) columns[shap.feature_names[j]] = shap.column(j);
  return {{"rows", shap.rows},
          {"cols", shap.cols},
          {"base_value", shap.base_value},
          {"instances", shap.instances},
          {"feature_names", shap.feature_names},
          {"columns", columns}};
}

// Binary blob, all integers and doubles little-endian:
//   "LFDSHAP1" | u64 rows | u64 cols | f64 base_value
//   | cols x (u64 length, name bytes) | rows x u64 instance
//   | cols x rows f64 (column-major)
namespace detail {

template <typename T>
void WriteLittleEndian(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T>
T ReadLittleEndian(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw IoError("shap blob: truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace detail

inline constexpr char kShapMagic[8] = {'L', 'F', 'D', 'S', 'H', 'A', 'P', '1'};

inline void WriteShapBinary(const ShapMatrix& shap, std::ostream& out) {
  out.write(kShapMagic, sizeof(kShapMagic));
  detail::WriteLittleEndian<std::uint64_t>(out, shap.rows);
  detail::WriteLittleEndian<std::uint64_t>(out, shap.cols);
  detail::WriteLittleEndian<double>(out, shap.base_value);
  for (const auto& name : shap.feature_names) {
    detail::WriteLittleEndian<std::uint64_t>(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
  }
  for (std::size_t i : shap.instances) detail::WriteLittleEndian<std::uint64_t>(out, i);
  for (std::size_t j = 0; j < shap.cols; ++j) {
    for (std::size_t i = 0; i < shap.rows; ++i) detail::WriteLittleEndian<double>(out, shap.at(i, j));
  }
}

inline ShapMatrix ReadShapBinary(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kShapMagic, sizeof(magic)) != 0) {
    throw IoError("shap blob: bad magic");
  }
  ShapMatrix shap;
  shap.rows = detail::ReadLittleEndian<std::uint64_t>(in);
  shap.cols = detail::ReadLittleEndian<std::uint64_t>(in);
  shap.base_value = detail::ReadLittleEndian<double>(in);
  for (std::size_t j = 0; j < shap.cols; ++j) {
    const auto length = detail::ReadLittleEndian<std::uint64_t>(in);
    std::string name(length, '\0');
    in.read(name.data(), static_cast<std::streamsize>(length));
    if (!in) throw IoError("shap blob: truncated");
    shap.feature_names.push_back(std::move(name));
  }
  shap.instances.resize(shap.rows);
  for (auto& i : shap.instances) i = detail::ReadLittleEndian<std::uint64_t>(in);
  shap.values.assign(shap.rows * shap.cols, 0.0);
  for (std::size_t j = 0; j < shap.cols; ++j) {
    for (std::size_t i = 0; i < shap.rows; ++i) shap.at(i, j) = detail::ReadLittleEndian<double>(in);
  }
  return shap;
}

}  // namespace lfd

#endif  // LFD_SHAP_HPP_
