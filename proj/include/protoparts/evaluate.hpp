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
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "protoparts/attribution.hpp"
#include "protoparts/common.hpp"
#include "protoparts/dataset.hpp"
#include "protoparts/forest.hpp"
#include "protoparts/proximity.hpp"
#include "protoparts/selection.hpp"

namespace protoparts {

struct EvaluationReport {
  double accuracy = 0.0;               // agreement with the model's own predictions (fidelity)
  double ground_truth_accuracy = 0.0;  // agreement with the dataset labels
  std::vector<double> per_class_accuracy;   // per model-predicted class
  std::vector<std::vector<int>> confusion;  // rows: model label, cols: surrogate label
  std::size_t n_prototypes = 0;
  SelectionConfig config;
};

inline nlohmann::json evaluation_report_to_json(const EvaluationReport& r) {
  return nlohmann::json{{"accuracy", r.accuracy},
                        {"ground_truth_accuracy", r.ground_truth_accuracy},
                        {"per_class_accuracy", r.per_class_accuracy},
                        {"confusion", r.confusion},
                        {"n_prototypes", r.n_prototypes},
                        {"config", selection_config_to_json(r.config)}};
}

inline void save_evaluation_report(const EvaluationReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << evaluation_report_to_json(r).dump(2) << '\n';
}

// 1-NN surrogate over the prototype set: each test instance receives the
// model-predicted label of its nearest prototype under the chosen metric.
// The primary accuracy is fidelity to the model's predictions on the test
// set; agreement with ground-truth labels is reported alongside.
inline EvaluationReport evaluate_surrogate(const PrototypeSet& prototypes, const Dataset& train,
                                           const Dataset& test, const Forest& forest,
                                           const AttributionMatrix* train_attributions,
                                           const AttributionMatrix* test_attributions,
                                           double beta, AssignmentMetric metric) {
  if (prototypes.indices.empty())
    throw std::invalid_argument("evaluate: empty prototype set");
  if (test.size() == 0) throw std::invalid_argument("evaluate: empty test set");
  if (train.n_features() != test.n_features())
    throw std::invalid_argument("evaluate: train and test feature counts differ");
  if (!std::isfinite(beta)) throw std::invalid_argument("evaluate: beta must be finite");
  const bool combined = metric == AssignmentMetric::kCombined;
  if (combined) {
    if (train_attributions == nullptr || test_attributions == nullptr)
      throw std::invalid_argument("evaluate: combined metric requires attributions");
    if (train_attributions->size() != train.size() ||
        test_attributions->size() != test.size())
      throw std::invalid_argument("evaluate: attribution rows do not match datasets");
  }

  // Prototype leaf vectors and model-predicted labels, ascending training
  // index so assignment ties resolve toward the lower index.
  std::vector<std::size_t> ordered = prototypes.indices;
  std::sort(ordered.begin(), ordered.end());
  const std::size_t n_trees = forest.trees.size();
  std::vector<std::vector<int>> proto_leaves;
  std::vector<int> proto_labels;
  for (std::size_t p : ordered) {
    if (p >= train.size())
      throw std::out_of_range("evaluate: prototype " + std::to_string(p) +
                              " outside training set");
    const auto x = train.instance(p);
    std::vector<int> leaves(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) leaves[t] = forest.trees[t].route(x);
    proto_leaves.push_back(std::move(leaves));
    proto_labels.push_back(predict(forest, x).label);
  }

  const int c = forest.n_classes;
  EvaluationReport report;
  report.confusion.assign(c, std::vector<int>(c, 0));
  report.n_prototypes = prototypes.indices.size();
  report.config = prototypes.config;

  int fidelity_hits = 0, truth_hits = 0;
  std::vector<int> query_leaves(n_trees);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto x = test.instance(i);
    for (std::size_t t = 0; t < n_trees; ++t) query_leaves[t] = forest.trees[t].route(x);

    std::size_t best = 0;
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < ordered.size(); ++j) {
      double cost = leaf_disagreement(query_leaves, proto_leaves[j]);
      if (combined) {
        const auto u = test_attributions->normalized.row(i);
        const auto v = train_attributions->normalized.row(ordered[j]);
        double dot = 0.0;
        for (std::size_t l = 0; l < u.size(); ++l) dot += u[l] * v[l];
        cost += beta * dot;
      }
      if (cost < best_cost) {
        best_cost = cost;
        best = j;
      }
    }

    const int surrogate = proto_labels[best];
    const int model = predict(forest, x).label;
    report.confusion[model][surrogate] += 1;
    if (surrogate == model) ++fidelity_hits;
    if (surrogate == test.labels[i]) ++truth_hits;
  }

  const double n = static_cast<double>(test.size());
  report.accuracy = fidelity_hits / n;
  report.ground_truth_accuracy = truth_hits / n;
  report.per_class_accuracy.assign(c, 0.0);
  for (int cls = 0; cls < c; ++cls) {
    long total = 0;
    for (int other = 0; other < c; ++other) total += report.confusion[cls][other];
    if (total > 0)
      report.per_class_accuracy[cls] =
          report.confusion[cls][cls] / static_cast<double>(total);
  }
  return report;
}

}  // namespace protoparts
