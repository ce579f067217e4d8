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
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "protoparts/attribution.hpp"
#include "protoparts/common.hpp"
#include "protoparts/csv.hpp"
#include "protoparts/dataset.hpp"
#include "protoparts/forest.hpp"
#include "protoparts/proximity.hpp"
#include "protoparts/selection.hpp"

namespace protoparts {

// Per-feature weights shared by an instance and its prototype: the product of
// their normalized importance scores. High where both agree the feature
// matters, zero on disjoint support.
inline std::vector<double> alike_weights(std::span<const double> u_hat,
                                         std::span<const double> v_hat) {
  if (u_hat.size() != v_hat.size())
    throw std::invalid_argument("alike_weights: vector length mismatch");
  if (u_hat.empty()) throw std::invalid_argument("alike_weights: empty vectors");
  std::vector<double> w(u_hat.size());
  for (std::size_t l = 0; l < w.size(); ++l) w[l] = u_hat[l] * v_hat[l];
  return w;
}

// Binary mask keeping the features whose weight strictly exceeds the mean of
// all weights. A constant weight vector yields the all-zero mask ("no
// distinguishing alike part").
inline std::vector<int> alike_mask(std::span<const double> weights) {
  if (weights.empty()) throw std::invalid_argument("alike_mask: empty weight vector");
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0)
      throw std::invalid_argument("alike_mask: weights must be finite and non-negative");
    sum += w;
  }
  const double mean = sum / static_cast<double>(weights.size());
  std::vector<int> mask(weights.size());
  for (std::size_t l = 0; l < weights.size(); ++l) mask[l] = weights[l] > mean ? 1 : 0;
  return mask;
}

struct AlikeExplanation {
  std::size_t instance_index = 0;   // row in the explained set
  std::size_t prototype_index = 0;  // training row of the assigned prototype
  std::vector<double> weights;
  std::vector<int> mask;
  double assignment_cost = 0.0;
  AssignmentMetric metric_used = AssignmentMetric::kCombined;

  int mask_length() const {
    int total = 0;
    for (int m : mask) total += m;
    return total;
  }
};

struct ExplanationBatch {
  std::vector<AlikeExplanation> explanations;
  std::vector<double> highlight_frequencies;  // per feature: fraction of masks with m_l = 1
};

// Fraction of explanations highlighting each feature.
inline std::vector<double> highlight_frequencies(const std::vector<AlikeExplanation>& explanations,
                                                 std::size_t n_features) {
  if (explanations.empty())
    throw std::invalid_argument("highlight_frequencies: no explanations");
  std::vector<double> freq(n_features, 0.0);
  for (const auto& e : explanations) {
    if (e.mask.size() != n_features)
      throw std::invalid_argument("highlight_frequencies: inconsistent mask length");
    for (std::size_t l = 0; l < n_features; ++l) freq[l] += e.mask[l];
  }
  for (double& f : freq) f /= static_cast<double>(explanations.size());
  return freq;
}

namespace detail {

inline double attribution_dot(std::span<const double> u, std::span<const double> v) {
  double acc = 0.0;
  for (std::size_t l = 0; l < u.size(); ++l) acc += u[l] * v[l];
  return acc;
}

// Shared assignment core. `distance_to` returns the tree-space distance from
// the query to a training row; prototypes are scanned in ascending training
// index so cost ties resolve toward the lower index.
template <typename DistanceFn>
AlikeExplanation assign_and_mask(std::size_t query_index, std::span<const double> query_attr,
                                 const PrototypeSet& prototypes,
                                 const AttributionMatrix& train_attributions, double beta,
                                 AssignmentMetric metric, DistanceFn&& distance_to) {
  if (prototypes.indices.empty())
    throw std::invalid_argument("explain: empty prototype set");
  if (!std::isfinite(beta)) throw std::invalid_argument("explain: beta must be finite");

  std::vector<std::size_t> ordered = prototypes.indices;
  std::sort(ordered.begin(), ordered.end());

  std::size_t best = ordered.front();
  double best_cost = kInf;
  for (std::size_t p : ordered) {
    if (p >= train_attributions.size())
      throw std::out_of_range("explain: prototype " + std::to_string(p) +
                              " has no attribution row");
    double cost = distance_to(p);
    if (metric == AssignmentMetric::kCombined)
      cost += beta * attribution_dot(query_attr, train_attributions.normalized.row(p));
    if (cost < best_cost) {
      best_cost = cost;
      best = p;
    }
  }

  AlikeExplanation out;
  out.instance_index = query_index;
  out.prototype_index = best;
  out.weights = alike_weights(query_attr, train_attributions.normalized.row(best));
  out.mask = alike_mask(out.weights);
  out.assignment_cost = best_cost;
  out.metric_used = metric;
  return out;
}

}  // namespace detail

// Explain a training instance by its nearest prototype within the same set.
inline AlikeExplanation explain_instance(std::size_t i, const PrototypeSet& prototypes,
                                         const DistanceMatrix& distances,
                                         const AttributionMatrix& attributions, double beta,
                                         AssignmentMetric metric) {
  if (i >= attributions.size())
    throw std::out_of_range("explain: instance " + std::to_string(i) +
                            " has no attribution row");
  return detail::assign_and_mask(
      i, attributions.normalized.row(i), prototypes, attributions, beta, metric,
      [&](std::size_t p) { return distances.at(i, p); });
}

// Explain every instance of the set the prototypes were drawn from.
inline ExplanationBatch explain_all(const Dataset& ds, const PrototypeSet& prototypes,
                                    const DistanceMatrix& distances,
                                    const AttributionMatrix& attributions, double beta,
                                    AssignmentMetric metric) {
  if (ds.size() != distances.size() || ds.size() != attributions.size())
    throw std::invalid_argument("explain_all: dataset, distances, and attributions disagree");
  ExplanationBatch batch;
  batch.explanations.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    batch.explanations.push_back(
        explain_instance(i, prototypes, distances, attributions, beta, metric));
  batch.highlight_frequencies =
      highlight_frequencies(batch.explanations, attributions.n_features());
  return batch;
}

// Explain one query instance from outside the training set: tree-space
// distance is computed between the query's leaf vector and each prototype's,
// importance alignment between the query's normalized attribution row and
// the prototype's.
inline AlikeExplanation explain_query(std::size_t query_index,
                                      std::span<const int> query_leaves,
                                      std::span<const double> query_attribution,
                                      const PrototypeSet& prototypes,
                                      const DistanceMatrix& train_distances,
                                      const AttributionMatrix& train_attributions, double beta,
                                      AssignmentMetric metric) {
  if (query_attribution.size() != train_attributions.n_features())
    throw std::invalid_argument("explain: query attribution length mismatch");
  return detail::assign_and_mask(
      query_index, query_attribution, prototypes, train_attributions, beta, metric,
      [&](std::size_t p) {
        return leaf_disagreement(query_leaves, train_distances.leaf_row(p));
      });
}

// Explain every row of a query set (typically the test split) against
// prototypes drawn from the training set.
inline ExplanationBatch explain_queries(const Forest& forest, const Dataset& query,
                                        const AttributionMatrix& query_attributions,
                                        const PrototypeSet& prototypes,
                                        const DistanceMatrix& train_distances,
                                        const AttributionMatrix& train_attributions, double beta,
                                        AssignmentMetric metric) {
  if (query.size() != query_attributions.size())
    throw std::invalid_argument("explain: query attributions do not match query set");
  if (query_attributions.n_features() != train_attributions.n_features())
    throw std::invalid_argument("explain: query and training attribution widths differ");
  const std::vector<int> leaves = leaf_table(forest, query);
  const std::size_t n_trees = forest.trees.size();

  ExplanationBatch batch;
  batch.explanations.reserve(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    std::span<const int> row(leaves.data() + i * n_trees, n_trees);
    batch.explanations.push_back(explain_query(i, row, query_attributions.normalized.row(i),
                                               prototypes, train_distances, train_attributions,
                                               beta, metric));
  }
  batch.highlight_frequencies =
      highlight_frequencies(batch.explanations, train_attributions.n_features());
  return batch;
}

inline nlohmann::json explanation_to_json(const AlikeExplanation& e,
                                          AttributionProvider provider) {
  return nlohmann::json{{"instance_index", e.instance_index},
                        {"prototype_index", e.prototype_index},
                        {"weights", e.weights},
                        {"mask", e.mask},
                        {"assignment_cost", e.assignment_cost},
                        {"metric", to_string(e.metric_used)},
                        {"provider", to_string(provider)}};
}

// One compact JSON object per line.
inline void write_explanations_jsonl(const std::vector<AlikeExplanation>& explanations,
                                     AttributionProvider provider, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (const auto& e : explanations) out << explanation_to_json(e, provider).dump() << '\n';
}

inline void write_highlight_frequencies_csv(const std::vector<double>& frequencies,
                                            const std::vector<std::string>& feature_names,
                                            const std::string& path) {
  if (frequencies.size() != feature_names.size())
    throw std::invalid_argument("frequencies: feature name count mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  write_csv_row(out, {"feature_name", "highlight_fraction"});
  for (std::size_t l = 0; l < frequencies.size(); ++l)
    write_csv_row(out, {feature_names[l], format_double(frequencies[l])});
}

}  // namespace protoparts
