// Copyright 2026 The Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "protoparts/common.hpp"
#include "protoparts/csv.hpp"

namespace protoparts {

// In-memory tabular dataset. Immutable once loaded; cells are finite reals
// or the missing marker. Categorical feature columns are ordinally encoded
// at load time (first-appearance order) and their category names kept so the
// dataset can be written back losslessly. Ordinal encoding of categories is
// a deliberate minimal policy; downstream code treats every feature as
// numeric.
struct Dataset {
  Matrix features;                                   // n x d
  std::vector<int> labels;                           // class indices in [0, c)
  std::vector<std::string> feature_names;            // length d, unique
  std::vector<std::string> class_names;              // length c
  std::vector<std::vector<std::string>> categories;  // per feature; empty = numeric
  std::string label_column;
  std::string missing_token;

  std::size_t size() const { return features.rows(); }
  std::size_t n_features() const { return features.cols(); }
  std::size_t n_classes() const { return class_names.size(); }
  std::span<const double> instance(std::size_t i) const { return features.row(i); }
};

namespace detail {

inline int encode_first_appearance(const std::string& token,
                                   std::vector<std::string>& names) {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == token) return static_cast<int>(i);
  names.push_back(token);
  return static_cast<int>(names.size()) - 1;
}

}  // namespace detail

inline Dataset load_csv(const std::string& path, const std::string& label_column,
                        const std::string& missing_token = "") {
  CsvTable table = read_csv(path, /*has_header=*/true);
  if (table.header.empty()) throw std::runtime_error("empty header in: " + path);
  if (table.rows.empty()) throw std::runtime_error("no data rows in: " + path);

  std::size_t label_col = table.header.size();
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    std::string name(trim(table.header[j]));
    table.header[j] = name;
    if (name == label_column) label_col = j;
  }
  if (label_col == table.header.size())
    throw std::runtime_error("label column '" + label_column + "' not found in: " + path);

  const std::size_t n = table.rows.size();
  const std::size_t d = table.header.size() - 1;
  if (d == 0) throw std::runtime_error("no feature columns in: " + path);

  Dataset ds;
  ds.label_column = label_column;
  ds.missing_token = missing_token;
  for (std::size_t j = 0; j < table.header.size(); ++j)
    if (j != label_col) ds.feature_names.push_back(table.header[j]);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t k = j + 1; k < d; ++k)
      if (ds.feature_names[j] == ds.feature_names[k])
        throw std::runtime_error("duplicate feature name '" + ds.feature_names[j] +
                                 "' in: " + path);

  for (std::size_t i = 0; i < n; ++i)
    if (table.rows[i].size() != table.header.size())
      throw std::runtime_error("row " + std::to_string(i + 1) + " has " +
                               std::to_string(table.rows[i].size()) + " cells, expected " +
                               std::to_string(table.header.size()));

  ds.features = Matrix(n, d);
  ds.labels.resize(n);
  ds.categories.resize(d);

  // Labels: first-appearance encoding.
  for (std::size_t i = 0; i < n; ++i) {
    std::string token(trim(table.rows[i][label_col]));
    if (token.empty() || token == missing_token)
      throw std::runtime_error("missing label at row " + std::to_string(i + 1));
    ds.labels[i] = detail::encode_first_appearance(token, ds.class_names);
  }

  // Feature columns: decide numeric vs categorical, reject mixed columns.
  std::size_t out_col = 0;
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (j == label_col) continue;
    const std::string& col_name = table.header[j];

    std::size_t numeric_rows = 0, text_rows = 0, first_text_row = 0, first_numeric_row = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::string token(trim(table.rows[i][j]));
      if (token.empty() || token == missing_token) continue;
      double v;
      if (try_parse_double(token, v) && std::isfinite(v)) {
        if (numeric_rows++ == 0) first_numeric_row = i;
      } else {
        if (text_rows++ == 0) first_text_row = i;
      }
    }
    if (numeric_rows > 0 && text_rows > 0) {
      const std::size_t row = std::max(first_text_row, first_numeric_row);
      throw std::runtime_error("column '" + col_name +
                               "' mixes numeric and non-numeric values (row " +
                               std::to_string(row + 1) + ")");
    }
    const bool categorical = text_rows > 0;

    for (std::size_t i = 0; i < n; ++i) {
      std::string token(trim(table.rows[i][j]));
      if (token.empty() || token == missing_token) {
        ds.features(i, out_col) = kMissing;
      } else if (categorical) {
        ds.features(i, out_col) =
            static_cast<double>(detail::encode_first_appearance(token, ds.categories[out_col]));
      } else {
        double v;
        try_parse_double(token, v);
        ds.features(i, out_col) = v;
      }
    }
    ++out_col;
  }
  return ds;
}

// Lossless inverse of load_csv: categorical codes are written back as their
// original tokens, missing cells as the missing token.
inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);

  std::vector<std::string> header = ds.feature_names;
  header.push_back(ds.label_column.empty() ? "label" : ds.label_column);
  write_csv_row(out, header);

  const std::size_t n = ds.size(), d = ds.n_features();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::string> row;
    row.reserve(d + 1);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = ds.features(i, j);
      if (is_missing(v)) {
        row.push_back(ds.missing_token);
      } else if (!ds.categories[j].empty()) {
        row.push_back(ds.categories[j][static_cast<std::size_t>(v)]);
      } else {
        row.push_back(format_double(v));
      }
    }
    row.push_back(ds.class_names[static_cast<std::size_t>(ds.labels[i])]);
    write_csv_row(out, row);
  }
}

struct SplitResult {
  Dataset train;
  Dataset test;
  std::vector<std::size_t> train_indices;  // rows of the source dataset, ascending
  std::vector<std::size_t> test_indices;
};

namespace detail {

inline Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.class_names = ds.class_names;
  out.categories = ds.categories;
  out.label_column = ds.label_column;
  out.missing_token = ds.missing_token;
  out.features = Matrix(rows.size(), ds.n_features());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = ds.features.row(rows[i]);
    std::copy(src.begin(), src.end(), out.features.row(i).begin());
    out.labels[i] = ds.labels[rows[i]];
  }
  return out;
}

}  // namespace detail

// Deterministic stratified split. Per class, round(test_fraction * count)
// rows go to the test part; both parts must end up non-empty and every class
// needs at least two members.
inline SplitResult split(const Dataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test_fraction must lie in (0, 1)");

  const std::size_t c = ds.n_classes();
  std::vector<std::vector<std::size_t>> by_class(c);
  for (std::size_t i = 0; i < ds.size(); ++i)
    by_class[static_cast<std::size_t>(ds.labels[i])].push_back(i);

  for (std::size_t cls = 0; cls < c; ++cls)
    if (by_class[cls].size() < 2)
      throw std::invalid_argument("class '" + ds.class_names[cls] +
                                  "' has fewer than 2 members; cannot stratify");

  std::mt19937 rng(static_cast<std::uint32_t>(seed));
  SplitResult result;
  for (std::size_t cls = 0; cls < c; ++cls) {
    auto& members = by_class[cls];
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::lround(test_fraction * static_cast<double>(members.size())));
    for (std::size_t i = 0; i < members.size(); ++i)
      (i < n_test ? result.test_indices : result.train_indices).push_back(members[i]);
  }
  if (result.test_indices.empty() || result.train_indices.empty())
    throw std::invalid_argument("test_fraction " + format_double(test_fraction) +
                                " yields an empty part");

  std::sort(result.train_indices.begin(), result.train_indices.end());
  std::sort(result.test_indices.begin(), result.test_indices.end());
  result.train = detail::take_rows(ds, result.train_indices);
  result.test = detail::take_rows(ds, result.test_indices);
  return result;
}

}  // namespace protoparts
