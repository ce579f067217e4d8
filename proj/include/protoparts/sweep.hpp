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

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "protoparts/alike.hpp"
#include "protoparts/attribution.hpp"
#include "protoparts/common.hpp"
#include "protoparts/csv.hpp"
#include "protoparts/dataset.hpp"
#include "protoparts/evaluate.hpp"
#include "protoparts/forest.hpp"
#include "protoparts/proximity.hpp"
#include "protoparts/selection.hpp"

namespace protoparts {

struct SweepRecord {
  Strategy strategy = Strategy::kApete;
  double beta = 0.0;
  double hyper = 0.0;  // k, k_per_class, or epsilon, depending on the strategy
  double accuracy = 0.0;
  double ground_truth_accuracy = 0.0;
  double mean_alike_importance = 0.0;
  double mean_mask_length = 0.0;
  std::size_t n_prototypes = 0;
};

struct SweepOptions {
  AssignmentMetric metric = AssignmentMetric::kCombined;
  AttributionProvider provider = AttributionProvider::kPath;  // tag recorded in emitted JSONL
  std::string out_dir;  // when non-empty: sweep.csv plus one explanation JSONL per cell
};

// Maps one grid value onto the active strategy's own hyperparameter.
inline SelectionConfig cell_config(Strategy strategy, double beta, double hyper,
                                   AssignmentMetric metric) {
  SelectionConfig cfg;
  cfg.strategy = strategy;
  cfg.beta = beta;
  cfg.assignment_metric = metric;
  switch (strategy) {
    case Strategy::kSma:
    case Strategy::kGkm: {
      const long long rounded = std::llround(hyper);
      if (!std::isfinite(hyper) || rounded < 1 ||
          static_cast<double>(rounded) != hyper)
        throw std::invalid_argument("sweep: budget grid value must be a positive integer, got " +
                                    format_double(hyper));
      if (strategy == Strategy::kSma)
        cfg.k = static_cast<std::size_t>(rounded);
      else
        cfg.k_per_class = static_cast<std::size_t>(rounded);
      break;
    }
    case Strategy::kApete:
      cfg.epsilon = hyper;
      break;
  }
  return cfg;
}

// Mean over explained instances of the summed normalized importance of the
// features their mask highlights.
inline double mean_alike_importance(const std::vector<AlikeExplanation>& explanations,
                                    const AttributionMatrix& attributions) {
  if (explanations.empty())
    throw std::invalid_argument("mean_alike_importance: no explanations");
  double total = 0.0;
  for (const auto& e : explanations) {
    const auto row = attributions.normalized.row(e.instance_index);
    for (std::size_t l = 0; l < e.mask.size(); ++l)
      if (e.mask[l]) total += row[l];
  }
  return total / static_cast<double>(explanations.size());
}

// Mean number of highlighted features; integer mask sums keep this exactly
// recomputable from the emitted explanation records.
inline double mean_mask_length(const std::vector<AlikeExplanation>& explanations) {
  if (explanations.empty()) throw std::invalid_argument("mean_mask_length: no explanations");
  long long total = 0;
  for (const auto& e : explanations) total += e.mask_length();
  return static_cast<double>(total) / static_cast<double>(explanations.size());
}

namespace detail {

inline std::string cell_tag(Strategy s, double beta, double hyper) {
  return to_string(s) + "-beta" + format_double(beta) + "-hyper" + format_double(hyper);
}

}  // namespace detail

// Grid sweep over (strategy, beta, hyperparameter) cells. Each cell selects
// prototypes on the training split, explains and evaluates the test split,
// and yields one record; with an output directory set, records are appended
// to sweep.csv and flushed as each cell completes.
inline std::vector<SweepRecord> sweep(const Dataset& train, const Dataset& test,
                                      const Forest& forest,
                                      const AttributionMatrix& train_attributions,
                                      const AttributionMatrix& test_attributions,
                                      const std::vector<Strategy>& strategies,
                                      const std::vector<double>& beta_grid,
                                      const std::vector<double>& hyper_grid,
                                      const SweepOptions& options = {}) {
  if (strategies.empty() || beta_grid.empty() || hyper_grid.empty())
    throw std::invalid_argument("sweep: strategies and grids must be non-empty");

  const DistanceMatrix distances = distance_matrix(forest, train);
  const std::vector<int> labels = predict_labels(forest, train);

  std::ofstream csv;
  if (!options.out_dir.empty()) {
    const std::string path = options.out_dir + "/sweep.csv";
    csv.open(path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write file: " + path);
    write_csv_row(csv, {"strategy", "beta", "hyper", "n_prototypes", "accuracy",
                        "ground_truth_accuracy", "mean_alike_importance", "mean_mask_length"});
    csv.flush();
  }

  std::vector<SweepRecord> records;
  for (Strategy strategy : strategies) {
    for (double beta : beta_grid) {
      for (double hyper : hyper_grid) {
        const SelectionConfig cfg = cell_config(strategy, beta, hyper, options.metric);
        const PrototypeSet set = select_prototypes(distances, train_attributions, labels, cfg);
        const ExplanationBatch batch =
            explain_queries(forest, test, test_attributions, set, distances,
                            train_attributions, beta, options.metric);
        const EvaluationReport report =
            evaluate_surrogate(set, train, test, forest, &train_attributions,
                               &test_attributions, beta, options.metric);

        SweepRecord rec;
        rec.strategy = strategy;
        rec.beta = beta;
        rec.hyper = hyper;
        rec.accuracy = report.accuracy;
        rec.ground_truth_accuracy = report.ground_truth_accuracy;
        rec.mean_alike_importance = mean_alike_importance(batch.explanations, test_attributions);
        rec.mean_mask_length = mean_mask_length(batch.explanations);
        rec.n_prototypes = set.indices.size();
        records.push_back(rec);

        if (csv.is_open()) {
          write_csv_row(csv, {to_string(strategy), format_double(beta), format_double(hyper),
                              std::to_string(rec.n_prototypes), format_double(rec.accuracy),
                              format_double(rec.ground_truth_accuracy),
                              format_double(rec.mean_alike_importance),
                              format_double(rec.mean_mask_length)});
          csv.flush();
          write_explanations_jsonl(batch.explanations, options.provider,
                                   options.out_dir + "/explanations-" +
                                       detail::cell_tag(strategy, beta, hyper) + ".jsonl");
        }
      }
    }
  }
  return records;
}

}  // namespace protoparts
