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

#ifndef LFD_DATASET_HPP_
#define LFD_DATASET_HPP_

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <iterator>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lfd/error.hpp"

namespace lfd {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool IsMissing(double value) { return std::isnan(value); }

// Dense n x m table of meta-feature values, row-major. NaN marks a missing
// cell; every present value is finite.
class MetaFeatureTable {
 public:
  MetaFeatureTable() = default;
  MetaFeatureTable(std::vector<std::string> names, std::size_t rows)
      : names_(std::move(names)),
        rows_(rows),
        values_(rows_ * names_.size(), kMissing) {}
  MetaFeatureTable(std::vector<std::string> names, std::size_t rows,
                   std::vector<double> values)
      : names_(std::move(names)), rows_(rows), values_(std::move(values)) {
    if (values_.size() != rows_ * names_.size()) {
      throw InputError("meta-feature table: value count does not match shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

  double at(std::size_t row, std::size_t col) const {
    return values_[row * cols() + col];
  }
  double& at(std::size_t row, std::size_t col) {
    return values_[row * cols() + col];
  }

  std::span<const double> row(std::size_t r) const {
    return {values_.data() + r * cols(), cols()};
  }

  std::vector<double> column(std::size_t col) const {
    std::vector<double> out(rows_);
    for (std::size_t r = 0; r < rows_; ++r) out[r] = at(r, col);
    return out;
  }

  std::optional<std::size_t> index_of(std::string_view name) const {
    for (std::size_t j = 0; j < names_.size(); ++j) {
      if (names_[j] == name) return j;
    }
    return std::nullopt;
  }

  // Rows `subset` (in the given order) and columns `cols` (in the given
  // order) copied into a new table.
  MetaFeatureTable select(std::span<const std::size_t> subset,
                          std::span<const std::size_t> columns) const {
    std::vector<std::string> names;
    names.reserve(columns.size());
    for (std::size_t c : columns) names.push_back(names_.at(c));
    MetaFeatureTable out(std::move(names), subset.size());
    for (std::size_t r = 0; r < subset.size(); ++r) {
      for (std::size_t c = 0; c < columns.size(); ++c) {
        out.at(r, c) = at(subset[r], columns[c]);
      }
    }
    return out;
  }

  MetaFeatureTable select_rows(std::span<const std::size_t> subset) const {
    std::vector<std::size_t> all(cols());
    for (std::size_t c = 0; c < all.size(); ++c) all[c] = c;
    return select(subset, all);
  }

  friend bool operator==(const MetaFeatureTable& a, const MetaFeatureTable& b) {
    if (a.names_ != b.names_ || a.rows_ != b.rows_) return false;
    for (std::size_t i = 0; i < a.values_.size(); ++i) {
      const double x = a.values_[i];
      const double y = b.values_[i];
      if (IsMissing(x) != IsMissing(y)) return false;
      if (!IsMissing(x) && x != y) return false;
    }
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::size_t rows_ = 0;
  std::vector<double> values_;
};

struct ScoredDataset {
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> scores_a;
  std::vector<double> scores_b;
  MetaFeatureTable features;

  std::size_t size() const { return ids.size(); }

  friend bool operator==(const ScoredDataset&, const ScoredDataset&) = default;
};

// Throws InputError unless every invariant of ScoredDataset holds.
inline void Validate(const ScoredDataset& d) {
  const std::size_t n = d.ids.size();
  if (n < 2) throw InputError("dataset needs at least 2 instances");
  if (d.labels.size() != n || d.scores_a.size() != n || d.scores_b.size() != n ||
      d.features.rows() != n) {
    throw InputError("dataset columns have different lengths");
  }
  if (d.features.cols() == 0) throw InputError("dataset has no meta-feature columns");
  std::unordered_set<std::string> seen_names;
  for (const auto& name : d.features.names()) {
    if (name.empty()) throw InputError("meta-feature name is empty");
    if (!seen_names.insert(name).second) {
      throw InputError("duplicate meta-feature name '" + name + "'");
    }
  }
  std::unordered_set<std::string_view> seen_ids;
  for (std::size_t i = 0; i < n; ++i) {
    if (!seen_ids.insert(d.ids[i]).second) {
      throw InputError("duplicate id '" + d.ids[i] + "' at row " + std::to_string(i + 1));
    }
    if (d.labels[i] != 0 && d.labels[i] != 1) {
      throw InputError("label outside {0,1} at row " + std::to_string(i + 1));
    }
    for (double s : {d.scores_a[i], d.scores_b[i]}) {
      if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
        throw InputError("score outside [0,1] at row " + std::to_string(i + 1));
      }
    }
    for (std::size_t j = 0; j < d.features.cols(); ++j) {
      const double v = d.features.at(i, j);
      if (!IsMissing(v) && !std::isfinite(v)) {
        throw InputError("non-finite meta-feature value at row " + std::to_string(i + 1));
      }
    }
  }
}

namespace csv {

// One parsed record plus the 1-based line on which it started.
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// line breaks. Accepts "\n" and "\r\n" terminators.
inline std::vector<Record> Parse(std::string_view text) {
  std::vector<Record> records;
  Record current;
  std::string field;
  std::size_t line = 1;
  current.line = 1;
  bool in_quotes = false;
  bool field_was_quoted = false;
  bool record_has_content = false;

  auto end_field = [&] {
    current.fields.push_back(std::move(field));
    field.clear();
    field_was_quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(current));
    current = Record{};
    record_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty() || field_was_quoted) {
          throw InputError("malformed CSV: stray quote at line " + std::to_string(line));
        }
        in_quotes = true;
        field_was_quoted = true;
        record_has_content = true;
        break;
      case ',':
        end_field();
        record_has_content = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        throw InputError("malformed CSV: bare carriage return at line " + std::to_string(line));
      case '\n':
        if (record_has_content || !field.empty()) {
          end_record();
        } else {
          // blank line
          current = Record{};
        }
        ++line;
        current.line = line;
        break;
      default:
        if (field_was_quoted) {
          throw InputError("malformed CSV: text after closing quote at line " +
                           std::to_string(line));
        }
        field.push_back(c);
        record_has_content = true;
    }
  }
  if (in_quotes) throw InputError("malformed CSV: unterminated quote");
  if (record_has_content || !field.empty()) end_record();
  return records;
}

inline std::string Quote(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace csv

// Shortest decimal text that parses back to the same double.
inline std::string FormatDouble(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

namespace detail {

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::optional<double> ParseDouble(std::string_view s) {
  s = Trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double value = 0.0;
  const auto result = std::from_chars(s.data(), s.data() + s.size(), value);
  if (s.empty() || result.ec != std::errc() || result.ptr != s.data() + s.size()) {
    return std::nullopt;
  }
  return value;
}

inline std::string Position(std::size_t row, std::size_t col, const std::string& name) {
  return "row " + std::to_string(row) + ", column " + std::to_string(col + 1) + " ('" +
         name + "')";
}

}  // namespace detail

// Parses CSV text with a header containing id,label,score_a,score_b (any
// order); every other column is a meta-feature in file order. Rows are
// numbered from 1 in error messages, counting data rows only.
inline ScoredDataset LoadDataset(std::string_view text) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  const std::vector<csv::Record> records = csv::Parse(text);
  if (records.empty()) throw InputError("malformed CSV: missing header row");

  const auto& header = records.front().fields;
  std::optional<std::size_t> id_col, label_col, a_col, b_col;
  std::vector<std::size_t> feature_cols;
  std::vector<std::string> feature_names;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(detail::Trim(header[c]));
    auto claim = [&](std::optional<std::size_t>& slot) {
      if (slot) throw InputError("malformed CSV: duplicate column '" + name + "'");
      slot = c;
    };
    if (name == "id") {
      claim(id_col);
    } else if (name == "label") {
      claim(label_col);
    } else if (name == "score_a") {
      claim(a_col);
    } else if (name == "score_b") {
      claim(b_col);
    } else {
      feature_cols.push_back(c);
      feature_names.push_back(name);
    }
  }
  if (!id_col || !label_col || !a_col || !b_col) {
    throw InputError("malformed CSV: header must contain id,label,score_a,score_b");
  }
  if (feature_cols.empty()) throw InputError("CSV has zero meta-feature columns");
  {
    std::unordered_set<std::string> seen;
    for (std::size_t k = 0; k < feature_names.size(); ++k) {
      if (feature_names[k].empty()) {
        throw InputError("malformed CSV: empty header at column " +
                         std::to_string(feature_cols[k] + 1));
      }
      if (!seen.insert(feature_names[k]).second) {
        throw InputError("malformed CSV: duplicate column '" + feature_names[k] + "'");
      }
    }
  }

  const std::size_t n = records.size() - 1;
  ScoredDataset d;
  d.ids.reserve(n);
  d.labels.reserve(n);
  d.scores_a.reserve(n);
  d.scores_b.reserve(n);
  d.features = MetaFeatureTable(feature_names, n);
  std::unordered_map<std::string, std::size_t> id_rows;

  for (std::size_t r = 0; r < n; ++r) {
    const auto& fields = records[r + 1].fields;
    const std::size_t row = r + 1;
    if (fields.size() != header.size()) {
      throw InputError("malformed CSV: row " + std::to_string(row) + " (line " +
                       std::to_string(records[r + 1].line) + ") has " +
                       std::to_string(fields.size()) + " fields, header has " +
                       std::to_string(header.size()));
    }
    std::string id(detail::Trim(fields[*id_col]));
    if (id.empty()) {
      throw InputError("empty id at " + detail::Position(row, *id_col, "id"));
    }
    if (auto [it, inserted] = id_rows.emplace(id, row); !inserted) {
      throw InputError("duplicate id '" + id + "' at " + detail::Position(row, *id_col, "id") +
                       " (first seen at row " + std::to_string(it->second) + ")");
    }
    const auto label = detail::ParseDouble(fields[*label_col]);
    if (!label || (*label != 0.0 && *label != 1.0)) {
      throw InputError("label outside {0,1} at " + detail::Position(row, *label_col, "label"));
    }
    auto parse_score = [&](std::size_t col, const char* name) {
      const auto s = detail::ParseDouble(fields[col]);
      if (!s || !std::isfinite(*s) || *s < 0.0 || *s > 1.0) {
        throw InputError("score outside [0,1] at " + detail::Position(row, col, name) +
                         ": '" + fields[col] + "'");
      }
      return *s;
    };
    d.ids.push_back(std::move(id));
    d.labels.push_back(static_cast<int>(*label));
    d.scores_a.push_back(parse_score(*a_col, "score_a"));
    d.scores_b.push_back(parse_score(*b_col, "score_b"));
    for (std::size_t k = 0; k < feature_cols.size(); ++k) {
      const std::string_view cell = detail::Trim(fields[feature_cols[k]]);
      if (cell.empty()) continue;
      const auto v = detail::ParseDouble(cell);
      if (!v || !std::isfinite(*v)) {
        throw InputError("non-numeric meta-feature value at " +
                         detail::Position(row, feature_cols[k], feature_names[k]) + ": '" +
                         std::string(cell) + "'");
      }
      d.features.at(r, k) = *v;
    }
  }
  Validate(d);
  return d;
}

inline ScoredDataset LoadDataset(std::istream& in) {
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (in.bad()) throw IoError("failed reading dataset stream");
  return LoadDataset(std::string_view(text));
}

// Canonical CSV serialization: id,label,score_a,score_b then meta-features.
inline void WriteDataset(const ScoredDataset& d, std::ostream& out) {
  out << "id,label,score_a,score_b";
  for (const auto& name : d.features.names()) out << ',' << csv::Quote(name);
  out << '\n';
  for (std::size_t i = 0; i < d.size(); ++i) {
    out << csv::Quote(d.ids[i]) << ',' << d.labels[i] << ',' << FormatDouble(d.scores_a[i]) << ','
        << FormatDouble(d.scores_b[i]);
    for (std::size_t j = 0; j < d.features.cols(); ++j) {
      out << ',';
      const double v = d.features.at(i, j);
      if (!IsMissing(v)) out << FormatDouble(v);
    }
    out << '\n';
  }
}

inline std::string ToCsv(const ScoredDataset& d) {
  std::ostringstream out;
  WriteDataset(d, out);
  return out.str();
}

struct DatasetSummary {
  std::size_t n = 0;
  std::size_t m = 0;
  double positive_rate = 0.0;
  std::vector<std::pair<std::string, std::size_t>> missing;  // file order
};

inline DatasetSummary Summarize(const ScoredDataset& d) {
  DatasetSummary s;
  s.n = d.size();
  s.m = d.features.cols();
  std::size_t positives = 0;
  for (int y : d.labels) positives += (y == 1);
  s.positive_rate = s.n == 0 ? 0.0 : static_cast<double>(positives) / static_cast<double>(s.n);
  for (std::size_t j = 0; j < s.m; ++j) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.n; ++i) count += IsMissing(d.features.at(i, j));
    s.missing.emplace_back(d.features.names()[j], count);
  }
  return s;
}

inline nlohmann::json ToJson(const DatasetSummary& s) {
  nlohmann::json missing = nlohmann::json::object();
  for (const auto& [name, count] : s.missing) missing[name] = count;
  return {{"n", s.n}, {"m", s.m}, {"positive_rate", s.positive_rate}, {"missing", missing}};
}

}  // namespace lfd

#endif  // LFD_DATASET_HPP_
