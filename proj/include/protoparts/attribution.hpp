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

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "protoparts/common.hpp"
#include "protoparts/csv.hpp"
#include "protoparts/dataset.hpp"
#include "protoparts/forest.hpp"

namespace protoparts {

enum class AttributionProvider { kPath, kExactShapley, kImported };

inline std::string to_string(AttributionProvider p) {
  switch (p) {
    case AttributionProvider::kPath: return "path";
    case AttributionProvider::kExactShapley: return "exact-shapley";
    case AttributionProvider::kImported: return "imported";
  }
  return "path";
}

inline AttributionProvider attribution_provider_from_string(const std::string& s) {
  if (s == "path") return AttributionProvider::kPath;
  if (s == "exact-shapley") return AttributionProvider::kExactShapley;
  if (s == "imported") return AttributionProvider::kImported;
  throw std::invalid_argument("unknown attribution provider: " + s);
}

// Per-instance feature importance. `raw` holds the provider's scores, each
// `normalized` row is squared scores over their sum (uniform when the raw row
// is all zeros), so rows are simplex vectors. target_class is the class index
// the scores explain; kPredictedClass means each instance explains its own
// predicted class.
inline constexpr int kPredictedClass = -1;

struct AttributionMatrix {
  Matrix raw;
  Matrix normalized;
  AttributionProvider provider = AttributionProvider::kPath;
  int target_class = kPredictedClass;

  std::size_t size() const { return raw.rows(); }
  std::size_t n_features() const { return raw.cols(); }
};

// Squares entries and divides by their sum; the all-zero vector maps to the
// uniform vector so downstream scores stay total.
inline std::vector<double> normalize_attribution(std::span<const double> phi) {
  if (phi.empty()) throw std::invalid_argument("normalize_attribution: empty vector");
  double sum_sq = 0.0;
  for (double v : phi) {
    if (!std::isfinite(v))
      throw std::invalid_argument("normalize_attribution: non-finite entry");
    sum_sq += v * v;
  }
  std::vector<double> out(phi.size());
  if (sum_sq > 0.0) {
    for (std::size_t l = 0; l < phi.size(); ++l) out[l] = phi[l] * phi[l] / sum_sq;
  } else {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(phi.size()));
  }
  return out;
}

// Path contribution decomposition: along each tree's routing path the split
// feature is credited with the change in the target-class probability between
// parent and child; contributions are averaged over trees. By construction
// the contributions sum to predict(x)[target] minus the mean root prior.
inline std::vector<double> path_contributions(const Forest& forest, std::span<const double> x,
                                              int target_class) {
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= forest.n_classes)
    throw std::invalid_argument("path_contributions: invalid target class");
  if (x.size() != forest.n_features)
    throw std::invalid_argument("path_contributions: instance length mismatch");

  const auto cls = static_cast<std::size_t>(target_class);
  std::vector<double> phi(forest.n_features, 0.0);
  for (const Tree& tree : forest.trees) {
    int idx = 0;
    while (!tree.nodes[static_cast<std::size_t>(idx)].is_leaf()) {
      const TreeNode& nd = tree.nodes[static_cast<std::size_t>(idx)];
      const double v = x[static_cast<std::size_t>(nd.feature)];
      const bool go_left = is_missing(v) ? nd.missing_goes_left : v <= nd.threshold;
      const int child = go_left ? nd.left : nd.right;
      phi[static_cast<std::size_t>(nd.feature)] +=
          tree.nodes[static_cast<std::size_t>(child)].class_distribution[cls] -
          nd.class_distribution[cls];
      idx = child;
    }
  }
  const double n_trees = static_cast<double>(forest.trees.size());
  for (double& v : phi) v /= n_trees;
  return phi;
}

inline constexpr std::size_t kShapleyMaxFeatures = 15;

// Interventional Shapley values by full coalition enumeration. The value of
// a coalition S is the mean target-class probability over hybrid instances
// taking x on S and a background row elsewhere (background missing markers
// included). Exponential in d; guarded to small feature counts.
inline std::vector<double> exact_shapley(const Forest& forest, std::span<const double> x,
                                         const Dataset& background, int target_class) {
  const std::size_t d = forest.n_features;
  if (x.size() != d) throw std::invalid_argument("exact_shapley: instance length mismatch");
  if (d > kShapleyMaxFeatures)
    throw std::invalid_argument("exact_shapley: feature count " + std::to_string(d) +
                                " exceeds enumeration guard " +
                                std::to_string(kShapleyMaxFeatures));
  if (background.size() == 0) throw std::invalid_argument("exact_shapley: empty background");
  if (background.n_features() != d)
    throw std::invalid_argument("exact_shapley: background feature count mismatch");
  if (target_class < 0 || static_cast<std::size_t>(target_class) >= forest.n_classes)
    throw std::invalid_argument("exact_shapley: invalid target class");

  const auto cls = static_cast<std::size_t>(target_class);
  const std::size_t n_subsets = std::size_t{1} << d;
  const double n_bg = static_cast<double>(background.size());

  std::vector<double> value(n_subsets, 0.0);
  std::vector<double> hybrid(d);
  for (std::size_t b = 0; b < background.size(); ++b) {
    const auto bg = background.instance(b);
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      for (std::size_t l = 0; l < d; ++l)
        hybrid[l] = (mask >> l) & 1 ? x[l] : bg[l];
      value[mask] += predict(forest, hybrid).probabilities[cls];
    }
  }
  for (double& v : value) v /= n_bg;

  // |S|! (d-|S|-1)! / d!, factorials exact in double for d <= 15.
  std::vector<double> factorial(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);
  std::vector<double> weight(d);
  for (std::size_t s = 0; s < d; ++s)
    weight[s] = factorial[s] * factorial[d - s - 1] / factorial[d];

  std::vector<double> phi(d, 0.0);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    const auto s = static_cast<std::size_t>(std::popcount(mask));
    for (std::size_t l = 0; l < d; ++l) {
      if ((mask >> l) & 1) continue;
      phi[l] += weight[s] * (value[mask | (std::size_t{1} << l)] - value[mask]);
    }
  }
  return phi;
}

namespace detail {

inline AttributionMatrix from_raw(Matrix raw, AttributionProvider provider, int target_class) {
  AttributionMatrix attr;
  attr.normalized = Matrix(raw.rows(), raw.cols());
  for (std::size_t i = 0; i < raw.rows(); ++i) {
    const auto norm = normalize_attribution(raw.row(i));
    std::copy(norm.begin(), norm.end(), attr.normalized.row(i).begin());
  }
  attr.raw = std::move(raw);
  attr.provider = provider;
  attr.target_class = target_class;
  return attr;
}

}  // namespace detail

// Attribution rows for a whole dataset. target_class = kPredictedClass scores
// each instance against its own predicted class. The Shapley provider uses
// `background` (the dataset itself when null).
inline AttributionMatrix compute_attributions(const Forest& forest, const Dataset& ds,
                                              AttributionProvider provider,
                                              int target_class = kPredictedClass,
                                              const Dataset* background = nullptr) {
  if (provider == AttributionProvider::kImported)
    throw std::invalid_argument("compute_attributions: imported scores must come from a file");
  Matrix raw(ds.size(), ds.n_features());
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto x = ds.instance(i);
    const int cls = target_class == kPredictedClass ? predict(forest, x).label : target_class;
    const auto phi = provider == AttributionProvider::kPath
                         ? path_contributions(forest, x, cls)
                         : exact_shapley(forest, x, background ? *background : ds, cls);
    std::copy(phi.begin(), phi.end(), raw.row(i).begin());
  }
  return detail::from_raw(std::move(raw), provider, target_class);
}

// Headerless CSV of raw scores, row i = instance i, column l = feature l.
inline AttributionMatrix import_attributions(const std::string& path, std::size_t expected_n,
                                             std::size_t expected_d) {
  CsvTable table = read_csv(path, /*has_header=*/false);
  if (table.rows.size() != expected_n)
    throw std::runtime_error("attribution file " + path + " has " +
                             std::to_string(table.rows.size()) + " rows, expected " +
                             std::to_string(expected_n));
  Matrix raw(expected_n, expected_d);
  for (std::size_t i = 0; i < expected_n; ++i) {
    if (table.rows[i].size() != expected_d)
      throw std::runtime_error("attribution file " + path + " row " + std::to_string(i + 1) +
                               " has " + std::to_string(table.rows[i].size()) +
                               " columns, expected " + std::to_string(expected_d));
    for (std::size_t l = 0; l < expected_d; ++l) {
      double v;
      if (!try_parse_double(trim(table.rows[i][l]), v) || !std::isfinite(v))
        throw std::runtime_error("attribution file " + path + " has a non-numeric cell at row " +
                                 std::to_string(i + 1) + ", column " + std::to_string(l + 1));
      raw(i, l) = v;
    }
  }
  return detail::from_raw(std::move(raw), AttributionProvider::kImported, kPredictedClass);
}

namespace detail {

inline void write_matrix_csv(const Matrix& m, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

}  // namespace detail

inline void export_attributions(const AttributionMatrix& attr, const std::string& raw_path,
                                const std::string& normalized_path) {
  detail::write_matrix_csv(attr.raw, raw_path);
  detail::write_matrix_csv(attr.normalized, normalized_path);
}

// Row subset (e.g. the training or test side of a split) of a full-dataset
// attribution matrix. Normalization is per row, so rows carry over verbatim.
inline AttributionMatrix subset_attributions(const AttributionMatrix& attr,
                                             std::span<const std::size_t> rows) {
  AttributionMatrix out;
  out.provider = attr.provider;
  out.target_class = attr.target_class;
  out.raw = Matrix(rows.size(), attr.n_features());
  out.normalized = Matrix(rows.size(), attr.n_features());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= attr.size())
      throw std::out_of_range("subset_attributions: row " + std::to_string(rows[i]) +
                              " out of range");
    for (std::size_t l = 0; l < attr.n_features(); ++l) {
      out.raw(i, l) = attr.raw(rows[i], l);
      out.normalized(i, l) = attr.normalized(rows[i], l);
    }
  }
  return out;
}

}  // namespace protoparts
