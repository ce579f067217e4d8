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

// Test-only utilities: deterministic synthetic datasets, hand-built trees,
// and independent reference implementations (oracles) of the raw coverage
// objective. The oracles deliberately share no code with the library: they
// recompute every trial assignment from scratch so that agreement between
// the two is evidence, not tautology.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "protoparts/protoparts.hpp"

namespace testutil {

// ---------------------------------------------------------------------------
// Dataset builders
// ---------------------------------------------------------------------------

inline protoparts::Dataset make_dataset(protoparts::Matrix features, std::vector<int> labels) {
  protoparts::Dataset ds;
  int n_classes = 0;
  for (int y : labels) n_classes = std::max(n_classes, y + 1);
  ds.features = std::move(features);
  ds.labels = std::move(labels);
  for (std::size_t l = 0; l < ds.features.cols(); ++l)
    ds.feature_names.push_back("f" + std::to_string(l));
  for (int c = 0; c < n_classes; ++c) ds.class_names.push_back("c" + std::to_string(c));
  ds.categories.assign(ds.features.cols(), {});
  ds.label_column = "label";
  return ds;
}

// Gaussian blobs, one per center; row order is blob-major and deterministic.
inline protoparts::Dataset make_blobs(std::size_t n_per_blob,
                                      const std::vector<std::vector<double>>& centers,
                                      const std::vector<int>& blob_labels, double spread,
                                      std::uint32_t seed) {
  const std::size_t d = centers.at(0).size();
  protoparts::Matrix features(n_per_blob * centers.size(), d);
  std::vector<int> labels(features.rows());
  std::mt19937 rng(seed);
  std::normal_distribution<double> noise(0.0, spread);
  std::size_t row = 0;
  for (std::size_t b = 0; b < centers.size(); ++b) {
    for (std::size_t i = 0; i < n_per_blob; ++i, ++row) {
      for (std::size_t l = 0; l < d; ++l) features(row, l) = centers[b][l] + noise(rng);
      labels[row] = blob_labels[b];
    }
  }
  return make_dataset(std::move(features), std::move(labels));
}

// Two informative features (class-dependent means) plus two noise features;
// the fixed 100-instance dataset used by reduction and monotonicity checks.
inline protoparts::Dataset make_synthetic100() {
  std::vector<std::vector<double>> centers = {{-2.0, -2.0, 0.0, 0.0}, {2.0, 2.0, 0.0, 0.0}};
  return make_blobs(50, centers, {0, 1}, 1.0, 42);
}

// XOR pattern on the unit square with a margin around the decision lines.
inline protoparts::Dataset make_xor(std::size_t n, double margin, std::uint32_t seed) {
  protoparts::Matrix features(n, 2);
  std::vector<int> labels(n);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    double x = 0.5, y = 0.5;
    while (std::abs(x - 0.5) < margin) x = unit(rng);
    while (std::abs(y - 0.5) < margin) y = unit(rng);
    features(i, 0) = x;
    features(i, 1) = y;
    labels[i] = (x > 0.5) != (y > 0.5) ? 1 : 0;
  }
  return make_dataset(std::move(features), std::move(labels));
}

// Uniform features, uniform labels; no structure guaranteed.
inline protoparts::Dataset make_random(std::size_t n, std::size_t d, int n_classes,
                                       std::uint32_t seed) {
  protoparts::Matrix features(n, d);
  std::vector<int> labels(n);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> value(0.0, 10.0);
  std::uniform_int_distribution<int> cls(0, n_classes - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t l = 0; l < d; ++l) features(i, l) = value(rng);
    labels[i] = cls(rng);
  }
  // Stratification needs at least two members per class.
  for (int c = 0; c < n_classes; ++c) {
    labels[static_cast<std::size_t>(2 * c) % n] = c;
    labels[static_cast<std::size_t>(2 * c + 1) % n] = c;
  }
  return make_dataset(std::move(features), std::move(labels));
}

// ---------------------------------------------------------------------------
// Hand-built trees and forests
// ---------------------------------------------------------------------------

inline protoparts::Tree leaf_tree(std::vector<double> distribution, int train_count = 10) {
  protoparts::TreeNode leaf;
  leaf.feature = -1;
  leaf.train_count = train_count;
  leaf.class_distribution = std::move(distribution);
  protoparts::Tree tree;
  tree.nodes.push_back(std::move(leaf));
  return tree;
}

// Root split with two leaf children.
inline protoparts::Tree stump(int feature, double threshold, std::vector<double> left_dist,
                              std::vector<double> right_dist, bool missing_left = true,
                              int left_count = 5, int right_count = 5) {
  protoparts::Tree tree;
  protoparts::TreeNode root;
  root.feature = feature;
  root.threshold = threshold;
  root.missing_goes_left = missing_left;
  root.left = 1;
  root.right = 2;
  root.train_count = left_count + right_count;
  root.class_distribution.assign(left_dist.size(), 0.0);
  for (std::size_t c = 0; c < left_dist.size(); ++c)
    root.class_distribution[c] =
        (left_dist[c] * left_count + right_dist[c] * right_count) / (left_count + right_count);
  protoparts::TreeNode left;
  left.feature = -1;
  left.train_count = left_count;
  left.class_distribution = std::move(left_dist);
  protoparts::TreeNode right;
  right.feature = -1;
  right.train_count = right_count;
  right.class_distribution = std::move(right_dist);
  tree.nodes = {std::move(root), std::move(left), std::move(right)};
  return tree;
}

inline protoparts::Forest manual_forest(std::vector<protoparts::Tree> trees, int n_classes,
                                        int n_features) {
  protoparts::Forest forest;
  forest.trees = std::move(trees);
  forest.n_classes = n_classes;
  forest.n_features = n_features;
  forest.training_params.n_trees = forest.trees.size();
  return forest;
}

// Attribution matrix with caller-chosen normalized rows (raw set to the same
// values; tests using it never look at raw).
inline protoparts::AttributionMatrix attr_from_rows(
    const std::vector<std::vector<double>>& normalized_rows) {
  const std::size_t n = normalized_rows.size();
  const std::size_t d = normalized_rows.at(0).size();
  protoparts::Matrix m(n, d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t l = 0; l < d; ++l) m(i, l) = normalized_rows[i][l];
  protoparts::AttributionMatrix attr;
  attr.raw = m;
  attr.normalized = std::move(m);
  return attr;
}

// Distance matrix with hand-chosen leaf vectors: disagreements[i][j] out of
// n_trees trees. Builds leaf rows realizing exactly those counts.
inline protoparts::DistanceMatrix distances_from_leaves(const std::vector<std::vector<int>>& rows,
                                                        std::size_t n_trees) {
  std::vector<int> flat;
  for (const auto& row : rows)
    for (int leaf : row) flat.push_back(leaf);
  return protoparts::DistanceMatrix(std::move(flat), rows.size(), n_trees);
}

// ---------------------------------------------------------------------------
// Independent oracles for the raw (distance-only) coverage objective
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> dense(const protoparts::DistanceMatrix& dm) {
  std::vector<std::vector<double>> out(dm.size(), std::vector<double>(dm.size()));
  for (std::size_t i = 0; i < dm.size(); ++i)
    for (std::size_t j = 0; j < dm.size(); ++j) out[i][j] = dm.at(i, j);
  return out;
}

// Coverage sum of `universe` (instance indices) when `chosen` plus optionally
// `extra` serve as prototypes. Assignment minima recomputed from scratch.
inline double raw_coverage(const std::vector<std::vector<double>>& dist,
                           const std::vector<std::size_t>& universe,
                           const std::vector<std::size_t>& chosen, std::size_t extra) {
  double total = 0.0;
  for (std::size_t i : universe) {
    double best = dist[i][extra];
    for (std::size_t j : chosen) best = std::min(best, dist[i][j]);
    total += best;
  }
  return total;
}

// Global greedy with a fixed budget; candidates scanned ascending, strict
// improvement, so ties resolve to the lower index.
inline std::vector<std::size_t> raw_sma(const std::vector<std::vector<double>>& dist,
                                        std::size_t k) {
  const std::size_t n = dist.size();
  std::vector<std::size_t> universe(n);
  for (std::size_t i = 0; i < n; ++i) universe[i] = i;
  std::vector<std::size_t> chosen;
  std::vector<char> used(n, 0);
  for (std::size_t step = 0; step < k; ++step) {
    double best_total = std::numeric_limits<double>::infinity();
    std::size_t best_c = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      const double total = raw_coverage(dist, universe, chosen, c);
      if (total < best_total) {
        best_total = total;
        best_c = c;
      }
    }
    chosen.push_back(best_c);
    used[best_c] = 1;
  }
  return chosen;
}

// Per-class greedy: each class's budget optimizes that class's own coverage
// over its own candidates; union ordered by (class, step).
inline std::vector<std::size_t> raw_gkm(const std::vector<std::vector<double>>& dist,
                                        const std::vector<int>& labels,
                                        std::size_t k_per_class) {
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<std::size_t> chosen;
  for (int cls : classes) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    std::vector<std::size_t> class_chosen;
    std::vector<char> used(labels.size(), 0);
    for (std::size_t step = 0; step < k_per_class; ++step) {
      double best_total = std::numeric_limits<double>::infinity();
      std::size_t best_c = labels.size();
      for (std::size_t c : members) {
        if (used[c]) continue;
        const double total = raw_coverage(dist, members, class_chosen, c);
        if (total < best_total) {
          best_total = total;
          best_c = c;
        }
      }
      class_chosen.push_back(best_c);
      used[best_c] = 1;
    }
    chosen.insert(chosen.end(), class_chosen.begin(), class_chosen.end());
  }
  return chosen;
}

// Per-class seeding on the global objective, then global greedy additions
// until the relative improvement drops below epsilon.
inline std::vector<std::size_t> raw_apete(const std::vector<std::vector<double>>& dist,
                                          const std::vector<int>& labels, double epsilon) {
  const std::size_t n = dist.size();
  std::vector<std::size_t> universe(n);
  for (std::size_t i = 0; i < n; ++i) universe[i] = i;
  std::vector<int> classes(labels);
  std::sort(classes.begin(), classes.end());
  classes.erase(std::unique(classes.begin(), classes.end()), classes.end());

  std::vector<std::size_t> chosen;
  std::vector<char> used(n, 0);
  double f_prev = std::numeric_limits<double>::infinity();
  for (int cls : classes) {
    double best_total = std::numeric_limits<double>::infinity();
    std::size_t best_c = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (used[c] || labels[c] != cls) continue;
      const double total = raw_coverage(dist, universe, chosen, c);
      if (total < best_total) {
        best_total = total;
        best_c = c;
      }
    }
    chosen.push_back(best_c);
    used[best_c] = 1;
    f_prev = best_total;
  }

  while (chosen.size() < n && f_prev != 0.0) {
    double best_total = std::numeric_limits<double>::infinity();
    std::size_t best_c = n;
    for (std::size_t c = 0; c < n; ++c) {
      if (used[c]) continue;
      const double total = raw_coverage(dist, universe, chosen, c);
      if (total < best_total) {
        best_total = total;
        best_c = c;
      }
    }
    if ((f_prev - best_total) / f_prev < epsilon) break;
    chosen.push_back(best_c);
    used[best_c] = 1;
    f_prev = best_total;
  }
  return chosen;
}

// Exhaustive single-medoid search under an arbitrary pair cost.
template <typename CostFn>
std::size_t brute_force_one_medoid(std::size_t n, CostFn&& cost) {
  double best_total = std::numeric_limits<double>::infinity();
  std::size_t best_c = n;
  for (std::size_t c = 0; c < n; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, c);
    if (total < best_total) {
      best_total = total;
      best_c = c;
    }
  }
  return best_c;
}

// ---------------------------------------------------------------------------
// Scratch directories
// ---------------------------------------------------------------------------

// Fresh, deterministic scratch directory under the system temp dir.
inline std::string scratch_dir(const std::string& tag) {
  const auto path = std::filesystem::temp_directory_path() / ("protoparts-test-" + tag);
  std::filesystem::remove_all(path);
  std::filesystem::create_directories(path);
  return path.string();
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace testutil
