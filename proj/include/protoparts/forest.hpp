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
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "protoparts/common.hpp"
#include "protoparts/dataset.hpp"

namespace protoparts {

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 2;
  std::size_t mtry = 0;  // 0 = ceil(sqrt(d)), resolved when training starts
  std::uint64_t seed = 0;

  bool operator==(const ForestParams&) const = default;
};

// Flat-array binary tree. Node 0 is the root; a node with feature < 0 is a
// leaf and its index doubles as the leaf id (unique within the tree).
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  bool missing_goes_left = true;
  int left = -1;
  int right = -1;
  int train_count = 0;
  std::vector<double> class_distribution;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

struct Tree {
  std::vector<TreeNode> nodes;

  // Total routing: missing values follow the recorded majority direction,
  // otherwise x[feature] <= threshold goes left.
  int route(std::span<const double> x) const {
    int idx = 0;
    while (!nodes[static_cast<std::size_t>(idx)].is_leaf()) {
      const TreeNode& nd = nodes[static_cast<std::size_t>(idx)];
      const double v = x[static_cast<std::size_t>(nd.feature)];
      const bool go_left = is_missing(v) ? nd.missing_goes_left : v <= nd.threshold;
      idx = go_left ? nd.left : nd.right;
    }
    return idx;
  }

  bool operator==(const Tree&) const = default;
};

struct Forest {
  std::vector<Tree> trees;
  std::size_t n_classes = 0;
  std::size_t n_features = 0;
  ForestParams training_params;

  bool operator==(const Forest&) const = default;
};

struct Prediction {
  int label = 0;
  std::vector<double> probabilities;
};

namespace detail {

inline double gini_impurity(const std::vector<std::size_t>& counts, std::size_t total) {
  double sum_sq = 0.0;
  for (std::size_t cnt : counts) {
    const double p = static_cast<double>(cnt) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  bool missing_left = true;
  double gain = 0.0;
};

// Exhaustive scan over candidate features (ascending) and midpoints between
// adjacent distinct values (ascending); strict improvement keeps the lowest
// feature index, then the lowest threshold. Missing rows join the child that
// received more non-missing rows (ties go left).
inline SplitChoice best_split(const Dataset& ds, const std::vector<std::size_t>& rows,
                              const std::vector<int>& features, std::size_t n_classes,
                              std::size_t min_leaf) {
  SplitChoice best;
  std::vector<std::size_t> node_counts(n_classes, 0);
  for (std::size_t r : rows) node_counts[static_cast<std::size_t>(ds.labels[r])]++;
  const double node_gini = gini_impurity(node_counts, rows.size());
  const double n_node = static_cast<double>(rows.size());

  std::vector<std::pair<double, int>> present;
  std::vector<std::size_t> miss_counts(n_classes);
  std::vector<std::size_t> left_counts(n_classes), right_counts(n_classes);

  for (int f : features) {
    present.clear();
    std::fill(miss_counts.begin(), miss_counts.end(), 0);
    std::size_t n_miss = 0;
    for (std::size_t r : rows) {
      const double v = ds.features(r, static_cast<std::size_t>(f));
      if (is_missing(v)) {
        miss_counts[static_cast<std::size_t>(ds.labels[r])]++;
        ++n_miss;
      } else {
        present.emplace_back(v, ds.labels[r]);
      }
    }
    if (present.size() < 2) continue;
    std::sort(present.begin(), present.end());

    std::fill(left_counts.begin(), left_counts.end(), 0);
    for (std::size_t i = 0; i + 1 < present.size(); ++i) {
      left_counts[static_cast<std::size_t>(present[i].second)]++;
      if (present[i].first == present[i + 1].first) continue;
      const double thr = present[i].first + (present[i + 1].first - present[i].first) / 2.0;
      if (thr >= present[i + 1].first) continue;  // adjacent doubles, no gap

      const std::size_t n_left0 = i + 1;
      const std::size_t n_right0 = present.size() - n_left0;
      const bool missing_left = n_left0 >= n_right0;
      const std::size_t n_left = n_left0 + (missing_left ? n_miss : 0);
      const std::size_t n_right = n_right0 + (missing_left ? 0 : n_miss);
      if (n_left < min_leaf || n_right < min_leaf) continue;

      std::vector<std::size_t> lc(n_classes);
      for (std::size_t cls = 0; cls < n_classes; ++cls) {
        lc[cls] = left_counts[cls] + (missing_left ? miss_counts[cls] : 0);
        right_counts[cls] = node_counts[cls] - lc[cls];
      }
      const double child_gini =
          (static_cast<double>(n_left) * gini_impurity(lc, n_left) +
           static_cast<double>(n_right) * gini_impurity(right_counts, n_right)) /
          n_node;
      const double gain = node_gini - child_gini;
      if (gain > best.gain) best = {f, thr, missing_left, gain};
    }
  }
  return best;
}

inline std::vector<int> sample_features(std::size_t d, std::size_t mtry, std::mt19937& rng) {
  std::vector<int> pool(d);
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t i = 0; i < mtry; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, d - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(mtry);
  std::sort(pool.begin(), pool.end());
  return pool;
}

inline int grow_node(Tree& tree, const Dataset& ds, const std::vector<std::size_t>& rows,
                     std::size_t depth, const ForestParams& params, std::size_t n_classes,
                     std::mt19937& rng) {
  const int idx = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();

  std::vector<std::size_t> counts(n_classes, 0);
  for (std::size_t r : rows) counts[static_cast<std::size_t>(ds.labels[r])]++;
  {
    TreeNode& node = tree.nodes[static_cast<std::size_t>(idx)];
    node.train_count = static_cast<int>(rows.size());
    node.class_distribution.resize(n_classes);
    for (std::size_t cls = 0; cls < n_classes; ++cls)
      node.class_distribution[cls] =
          static_cast<double>(counts[cls]) / static_cast<double>(rows.size());
  }

  const auto n_present =
      std::count_if(counts.begin(), counts.end(), [](std::size_t c) { return c > 0; });
  if (n_present <= 1 || depth >= params.max_depth || rows.size() < 2 * params.min_leaf)
    return idx;

  const auto features = sample_features(ds.n_features(), params.mtry, rng);
  const SplitChoice split = best_split(ds, rows, features, n_classes, params.min_leaf);
  if (split.feature < 0 || !(split.gain > 0.0)) return idx;

  std::vector<std::size_t> left_rows, right_rows;
  for (std::size_t r : rows) {
    const double v = ds.features(r, static_cast<std::size_t>(split.feature));
    const bool go_left = is_missing(v) ? split.missing_left : v <= split.threshold;
    (go_left ? left_rows : right_rows).push_back(r);
  }

  // Do not hold a node reference across the recursive calls: they reallocate.
  tree.nodes[static_cast<std::size_t>(idx)].feature = split.feature;
  tree.nodes[static_cast<std::size_t>(idx)].threshold = split.threshold;
  tree.nodes[static_cast<std::size_t>(idx)].missing_goes_left = split.missing_left;
  const int left = grow_node(tree, ds, left_rows, depth + 1, params, n_classes, rng);
  const int right = grow_node(tree, ds, right_rows, depth + 1, params, n_classes, rng);
  tree.nodes[static_cast<std::size_t>(idx)].left = left;
  tree.nodes[static_cast<std::size_t>(idx)].right = right;
  return idx;
}

inline std::mt19937 tree_rng(std::uint64_t seed, std::size_t tree_index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tree_index)};
  return std::mt19937(seq);
}

}  // namespace detail

inline Forest train(const Dataset& ds, ForestParams params) {
  const std::size_t n = ds.size(), d = ds.n_features();
  if (n == 0) throw std::invalid_argument("train: empty dataset");
  if (params.n_trees < 1) throw std::invalid_argument("train: n_trees must be >= 1");
  if (params.max_depth < 1) throw std::invalid_argument("train: max_depth must be >= 1");
  if (params.min_leaf < 1) throw std::invalid_argument("train: min_leaf must be >= 1");
  if (n < params.min_leaf)
    throw std::invalid_argument("train: dataset has fewer rows than min_leaf");
  if (params.mtry == 0)
    params.mtry = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))));
  if (params.mtry > d) throw std::invalid_argument("train: mtry exceeds feature count");

  Forest forest;
  forest.n_classes = ds.n_classes();
  forest.n_features = d;
  forest.training_params = params;
  forest.trees.resize(params.n_trees);

  for (std::size_t t = 0; t < params.n_trees; ++t) {
    auto rng = detail::tree_rng(params.seed, t);
    std::vector<std::size_t> bootstrap(n);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (auto& r : bootstrap) r = pick(rng);
    detail::grow_node(forest.trees[t], ds, bootstrap, 0, params, forest.n_classes, rng);
  }
  return forest;
}

inline Prediction predict(const Forest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features)
    throw std::invalid_argument("predict: instance length " + std::to_string(x.size()) +
                                " does not match n_features " +
                                std::to_string(forest.n_features));
  Prediction pred;
  pred.probabilities.assign(forest.n_classes, 0.0);
  for (const Tree& tree : forest.trees) {
    const auto& dist = tree.nodes[static_cast<std::size_t>(tree.route(x))].class_distribution;
    for (std::size_t cls = 0; cls < forest.n_classes; ++cls)
      pred.probabilities[cls] += dist[cls];
  }
  const double n_trees = static_cast<double>(forest.trees.size());
  for (auto& p : pred.probabilities) p /= n_trees;

  // Argmax with ties broken toward the lower class index.
  pred.label = 0;
  for (std::size_t cls = 1; cls < forest.n_classes; ++cls)
    if (pred.probabilities[cls] > pred.probabilities[static_cast<std::size_t>(pred.label)])
      pred.label = static_cast<int>(cls);
  return pred;
}

inline std::vector<int> leaf_ids(const Forest& forest, std::span<const double> x) {
  if (x.size() != forest.n_features)
    throw std::invalid_argument("leaf_ids: instance length " + std::to_string(x.size()) +
                                " does not match n_features " +
                                std::to_string(forest.n_features));
  std::vector<int> leaves(forest.trees.size());
  for (std::size_t t = 0; t < forest.trees.size(); ++t) leaves[t] = forest.trees[t].route(x);
  return leaves;
}

inline std::vector<int> predict_labels(const Forest& forest, const Dataset& ds) {
  std::vector<int> labels(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) labels[i] = predict(forest, ds.instance(i)).label;
  return labels;
}

inline constexpr int kForestFormatVersion = 1;

inline nlohmann::json forest_to_json(const Forest& forest) {
  nlohmann::json trees = nlohmann::json::array();
  for (const Tree& tree : forest.trees) {
    nlohmann::json t;
    auto& feature = t["feature"] = nlohmann::json::array();
    auto& threshold = t["threshold"] = nlohmann::json::array();
    auto& missing = t["missing_goes_left"] = nlohmann::json::array();
    auto& left = t["left"] = nlohmann::json::array();
    auto& right = t["right"] = nlohmann::json::array();
    auto& count = t["train_count"] = nlohmann::json::array();
    auto& dist = t["class_distribution"] = nlohmann::json::array();
    for (const TreeNode& node : tree.nodes) {
      feature.push_back(node.feature);
      threshold.push_back(node.threshold);
      missing.push_back(node.missing_goes_left);
      left.push_back(node.left);
      right.push_back(node.right);
      count.push_back(node.train_count);
      dist.push_back(node.class_distribution);
    }
    trees.push_back(std::move(t));
  }
  return nlohmann::json{{"format_version", kForestFormatVersion},
                        {"n_classes", forest.n_classes},
                        {"n_features", forest.n_features},
                        {"training_params",
                         {{"n_trees", forest.training_params.n_trees},
                          {"max_depth", forest.training_params.max_depth},
                          {"min_leaf", forest.training_params.min_leaf},
                          {"mtry", forest.training_params.mtry},
                          {"seed", forest.training_params.seed}}},
                        {"trees", std::move(trees)}};
}

inline Forest forest_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") || j.at("format_version").get<int>() != kForestFormatVersion)
    throw std::runtime_error("unsupported forest format version");
  Forest forest;
  forest.n_classes = j.at("n_classes").get<std::size_t>();
  forest.n_features = j.at("n_features").get<std::size_t>();
  const auto& p = j.at("training_params");
  forest.training_params.n_trees = p.at("n_trees").get<std::size_t>();
  forest.training_params.max_depth = p.at("max_depth").get<std::size_t>();
  forest.training_params.min_leaf = p.at("min_leaf").get<std::size_t>();
  forest.training_params.mtry = p.at("mtry").get<std::size_t>();
  forest.training_params.seed = p.at("seed").get<std::uint64_t>();
  for (const auto& t : j.at("trees")) {
    Tree tree;
    const auto& feature = t.at("feature");
    tree.nodes.resize(feature.size());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      TreeNode& node = tree.nodes[i];
      node.feature = feature[i].get<int>();
      node.threshold = t.at("threshold")[i].get<double>();
      node.missing_goes_left = t.at("missing_goes_left")[i].get<bool>();
      node.left = t.at("left")[i].get<int>();
      node.right = t.at("right")[i].get<int>();
      node.train_count = t.at("train_count")[i].get<int>();
      node.class_distribution = t.at("class_distribution")[i].get<std::vector<double>>();
    }
    forest.trees.push_back(std::move(tree));
  }
  return forest;
}

inline void save_forest(const Forest& forest, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << forest_to_json(forest).dump(2) << '\n';
}

inline Forest load_forest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  in >> j;
  return forest_from_json(j);
}

}  // namespace protoparts
