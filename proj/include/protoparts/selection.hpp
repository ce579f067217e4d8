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
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "protoparts/attribution.hpp"
#include "protoparts/common.hpp"
#include "protoparts/proximity.hpp"

namespace protoparts {

enum class Strategy { kGkm, kSma, kApete };
enum class AssignmentMetric { kCombined, kDistanceOnly };

inline std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::kGkm: return "gkm";
    case Strategy::kSma: return "sma";
    case Strategy::kApete: return "apete";
  }
  return "apete";
}

inline Strategy strategy_from_string(const std::string& s) {
  if (s == "gkm") return Strategy::kGkm;
  if (s == "sma") return Strategy::kSma;
  if (s == "apete") return Strategy::kApete;
  throw std::invalid_argument("unknown strategy: " + s);
}

inline std::string to_string(AssignmentMetric m) {
  return m == AssignmentMetric::kCombined ? "combined" : "distance-only";
}

inline AssignmentMetric assignment_metric_from_string(const std::string& s) {
  if (s == "combined") return AssignmentMetric::kCombined;
  if (s == "distance-only") return AssignmentMetric::kDistanceOnly;
  throw std::invalid_argument("unknown assignment metric: " + s);
}

struct SelectionConfig {
  Strategy strategy = Strategy::kApete;
  double beta = 0.0;           // weight of the importance-alignment term; may be negative
  std::size_t k = 0;           // SM-A total budget
  std::size_t k_per_class = 0; // G-KM per-class budget
  double epsilon = 0.01;       // A-PETE relative-improvement threshold
  AssignmentMetric assignment_metric = AssignmentMetric::kCombined;

  bool operator==(const SelectionConfig&) const = default;
};

inline void validate(const SelectionConfig& cfg, std::size_t n) {
  if (!std::isfinite(cfg.beta)) throw std::invalid_argument("selection: beta must be finite");
  switch (cfg.strategy) {
    case Strategy::kSma:
      if (cfg.k < 1 || cfg.k > n)
        throw std::invalid_argument("selection: k must lie in [1, " + std::to_string(n) + "]");
      break;
    case Strategy::kGkm:
      if (cfg.k_per_class < 1)
        throw std::invalid_argument("selection: k_per_class must be >= 1");
      break;
    case Strategy::kApete:
      if (!(cfg.epsilon >= 0.0) || !std::isfinite(cfg.epsilon))
        throw std::invalid_argument("selection: epsilon must be a finite value >= 0");
      break;
  }
}

inline nlohmann::json selection_config_to_json(const SelectionConfig& cfg) {
  nlohmann::json j{{"strategy", to_string(cfg.strategy)},
                   {"beta", cfg.beta},
                   {"assignment_metric", to_string(cfg.assignment_metric)}};
  switch (cfg.strategy) {
    case Strategy::kSma: j["k"] = cfg.k; break;
    case Strategy::kGkm: j["k_per_class"] = cfg.k_per_class; break;
    case Strategy::kApete: j["epsilon"] = cfg.epsilon; break;
  }
  return j;
}

inline SelectionConfig selection_config_from_json(const nlohmann::json& j) {
  SelectionConfig cfg;
  cfg.strategy = strategy_from_string(j.at("strategy").get<std::string>());
  cfg.beta = j.at("beta").get<double>();
  cfg.assignment_metric =
      assignment_metric_from_string(j.at("assignment_metric").get<std::string>());
  if (j.contains("k")) cfg.k = j.at("k").get<std::size_t>();
  if (j.contains("k_per_class")) cfg.k_per_class = j.at("k_per_class").get<std::size_t>();
  if (j.contains("epsilon")) cfg.epsilon = j.at("epsilon").get<double>();
  return cfg;
}

// Importance alignment of two normalized attribution rows (their inner
// product); 1 when both concentrate on the same feature, 0 on disjoint
// support.
inline double fi_score(std::span<const double> u_hat, std::span<const double> v_hat) {
  if (u_hat.size() != v_hat.size())
    throw std::invalid_argument("fi_score: vector length mismatch");
  if (u_hat.empty()) throw std::invalid_argument("fi_score: empty vectors");
  double su = 0.0, sv = 0.0, dot = 0.0;
  for (std::size_t l = 0; l < u_hat.size(); ++l) {
    if (!(u_hat[l] >= 0.0) || !(v_hat[l] >= 0.0))
      throw std::invalid_argument("fi_score: inputs must be non-negative simplex vectors");
    su += u_hat[l];
    sv += v_hat[l];
    dot += u_hat[l] * v_hat[l];
  }
  if (std::abs(su - 1.0) > 1e-9 || std::abs(sv - 1.0) > 1e-9)
    throw std::invalid_argument("fi_score: inputs must sum to 1");
  return dot;
}

// Combined per-pair assignment cost d(i, j) + beta * fi(i, j). Alignment
// scores are memoized so each pair is evaluated at most once per run; above
// the memo cap they are recomputed on demand.
class PairCostFn {
 public:
  PairCostFn(const DistanceMatrix& distances, const AttributionMatrix& attributions,
             double beta, std::size_t memo_cap = kDefaultMaterializeCap)
      : distances_(&distances), attributions_(&attributions), beta_(beta) {
    if (!std::isfinite(beta)) throw std::invalid_argument("pair_cost: beta must be finite");
    if (attributions.size() != distances.size())
      throw std::invalid_argument("pair_cost: attribution rows do not match distance matrix");
    if (distances.size() <= memo_cap) memo_.assign(distances.size() * distances.size(), kMissing);
  }

  std::size_t size() const { return distances_->size(); }
  double beta() const { return beta_; }

  double fi(std::size_t i, std::size_t j) const {
    if (i >= size() || j >= size()) throw std::out_of_range("pair_cost: index out of range");
    if (memo_.empty()) return dot(i, j);
    double& slot = memo_[i * size() + j];
    if (is_missing(slot)) {
      slot = dot(i, j);
      memo_[j * size() + i] = slot;
    }
    return slot;
  }

  double operator()(std::size_t i, std::size_t j) const {
    return distances_->at(i, j) + beta_ * fi(i, j);
  }

  std::size_t fi_evaluations() const { return evaluations_; }

 private:
  double dot(std::size_t i, std::size_t j) const {
    ++evaluations_;
    const auto u = attributions_->normalized.row(i);
    const auto v = attributions_->normalized.row(j);
    double acc = 0.0;
    for (std::size_t l = 0; l < u.size(); ++l) acc += u[l] * v[l];
    return acc;
  }

  const DistanceMatrix* distances_;
  const AttributionMatrix* attributions_;
  double beta_;
  mutable std::vector<double> memo_;
  mutable std::size_t evaluations_ = 0;
};

inline double pair_cost(std::size_t i, std::size_t j, const DistanceMatrix& distances,
                        const AttributionMatrix& attributions, double beta) {
  PairCostFn cost(distances, attributions, beta, /*memo_cap=*/0);
  return cost(i, j);
}

// Sum over all instances of the cost to their cheapest prototype.
inline double objective_value(const std::vector<std::size_t>& prototypes,
                              const DistanceMatrix& distances,
                              const AttributionMatrix& attributions, double beta) {
  if (prototypes.empty()) throw std::invalid_argument("objective: empty prototype set");
  PairCostFn cost(distances, attributions, beta);
  double total = 0.0;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t j : prototypes) best = std::min(best, cost(i, j));
    total += best;
  }
  return total;
}

struct PrototypeSet {
  std::vector<std::size_t> indices;    // training-instance indices, selection order
  std::vector<int> labels;             // label of each prototype in the caller's labeling
  std::vector<double> objective_trace; // objective after each greedy addition
  SelectionConfig config;
};

namespace detail {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct GreedyPick {
  std::size_t candidate = 0;
  double objective = kInf;
};

// Best single addition over `pool` given per-instance costs so far; scanning
// ascending with strict improvement breaks ties toward the lower index.
inline GreedyPick greedy_step(const std::vector<std::size_t>& instance_set,
                              const std::vector<double>& current, const PairCostFn& cost,
                              const std::vector<std::size_t>& pool) {
  GreedyPick best;
  bool first = true;
  for (std::size_t c : pool) {
    double trial = 0.0;
    for (std::size_t i : instance_set) trial += std::min(current[i], cost(i, c));
    if (first || trial < best.objective) {
      best = {c, trial};
      first = false;
    }
  }
  return best;
}

inline void commit(std::size_t chosen, const std::vector<std::size_t>& instance_set,
                   std::vector<double>& current, const PairCostFn& cost,
                   std::vector<std::size_t>& pool) {
  for (std::size_t i : instance_set) current[i] = std::min(current[i], cost(i, chosen));
  pool.erase(std::find(pool.begin(), pool.end(), chosen));
}

inline std::vector<int> distinct_sorted(const std::vector<int>& labels) {
  std::vector<int> out(labels);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

inline void check_selection_inputs(const DistanceMatrix& distances,
                                   const AttributionMatrix& attributions,
                                   const std::vector<int>& labels) {
  if (distances.size() == 0) throw std::invalid_argument("selection: no instances");
  if (labels.size() != distances.size())
    throw std::invalid_argument("selection: labels length does not match distance matrix");
  if (attributions.size() != distances.size())
    throw std::invalid_argument("selection: attribution rows do not match distance matrix");
}

inline void finalize(PrototypeSet& set, const std::vector<int>& labels) {
  set.labels.reserve(set.indices.size());
  for (std::size_t idx : set.indices) set.labels.push_back(labels[idx]);
}

}  // namespace detail

// Greedy best-improvement selection with a fixed total budget.
inline PrototypeSet select_sma(const DistanceMatrix& distances,
                               const AttributionMatrix& attributions,
                               const std::vector<int>& labels, std::size_t k, double beta) {
  detail::check_selection_inputs(distances, attributions, labels);
  const std::size_t n = distances.size();
  if (k < 1 || k > n)
    throw std::invalid_argument("select_sma: k must lie in [1, " + std::to_string(n) + "]");

  PairCostFn cost(distances, attributions, beta);
  std::vector<std::size_t> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  std::vector<std::size_t> pool = everyone;
  std::vector<double> current(n, detail::kInf);

  PrototypeSet set;
  // Inactive knobs keep their defaults so sparse serialization round-trips.
  set.config.strategy = Strategy::kSma;
  set.config.beta = beta;
  set.config.k = k;
  for (std::size_t step = 0; step < k; ++step) {
    const auto pick = detail::greedy_step(everyone, current, cost, pool);
    detail::commit(pick.candidate, everyone, current, cost, pool);
    set.indices.push_back(pick.candidate);
    set.objective_trace.push_back(pick.objective);
  }
  detail::finalize(set, labels);
  return set;
}

// Greedy k-medoid run independently within each class: candidates and the
// optimized coverage sum are both restricted to that class's instances. The
// union is ordered by (class, selection step) and the trace reports the
// global objective as the union grows.
inline PrototypeSet select_gkm(const DistanceMatrix& distances,
                               const AttributionMatrix& attributions,
                               const std::vector<int>& labels, std::size_t k_per_class,
                               double beta) {
  detail::check_selection_inputs(distances, attributions, labels);
  const std::size_t n = distances.size();
  if (k_per_class < 1) throw std::invalid_argument("select_gkm: k_per_class must be >= 1");

  PairCostFn cost(distances, attributions, beta);
  PrototypeSet set;
  set.config.strategy = Strategy::kGkm;
  set.config.beta = beta;
  set.config.k_per_class = k_per_class;

  for (int cls : detail::distinct_sorted(labels)) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] == cls) members.push_back(i);
    if (members.size() < k_per_class)
      throw std::invalid_argument("select_gkm: class " + std::to_string(cls) + " has " +
                                  std::to_string(members.size()) +
                                  " members, fewer than k_per_class " +
                                  std::to_string(k_per_class));

    std::vector<std::size_t> pool = members;
    std::vector<double> current(n, detail::kInf);
    for (std::size_t step = 0; step < k_per_class; ++step) {
      const auto pick = detail::greedy_step(members, current, cost, pool);
      detail::commit(pick.candidate, members, current, cost, pool);
      set.indices.push_back(pick.candidate);
    }
  }

  // Per-class runs optimize their own portion; the recorded trace is the
  // global objective after each addition in output order.
  std::vector<std::size_t> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  std::vector<double> current(n, detail::kInf);
  for (std::size_t idx : set.indices) {
    double total = 0.0;
    for (std::size_t i : everyone) {
      current[i] = std::min(current[i], cost(i, idx));
      total += current[i];
    }
    set.objective_trace.push_back(total);
  }
  detail::finalize(set, labels);
  return set;
}

// Greedy selection with automatic stopping: after seeding one prototype per
// class (classes in ascending order, each the class's best global-objective
// candidate), additions continue while the relative improvement
// (f_prev - f_candidate) / f_prev stays at or above epsilon.
inline PrototypeSet select_apete(const DistanceMatrix& distances,
                                 const AttributionMatrix& attributions,
                                 const std::vector<int>& labels, double epsilon, double beta) {
  detail::check_selection_inputs(distances, attributions, labels);
  if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
    throw std::invalid_argument("select_apete: epsilon must be a finite value >= 0");
  const std::size_t n = distances.size();

  PairCostFn cost(distances, attributions, beta);
  std::vector<std::size_t> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  std::vector<std::size_t> pool = everyone;
  std::vector<double> current(n, detail::kInf);

  PrototypeSet set;
  set.config.strategy = Strategy::kApete;
  set.config.beta = beta;
  set.config.epsilon = epsilon;

  for (int cls : detail::distinct_sorted(labels)) {
    std::vector<std::size_t> class_pool;
    for (std::size_t c : pool)
      if (labels[c] == cls) class_pool.push_back(c);
    const auto pick = detail::greedy_step(everyone, current, cost, class_pool);
    detail::commit(pick.candidate, everyone, current, cost, pool);
    set.indices.push_back(pick.candidate);
    set.objective_trace.push_back(pick.objective);
  }

  double f_prev = set.objective_trace.back();
  while (!pool.empty() && f_prev != 0.0) {
    const auto pick = detail::greedy_step(everyone, current, cost, pool);
    const double improvement = (f_prev - pick.objective) / f_prev;
    if (improvement < epsilon) break;
    detail::commit(pick.candidate, everyone, current, cost, pool);
    set.indices.push_back(pick.candidate);
    set.objective_trace.push_back(pick.objective);
    f_prev = pick.objective;
  }
  detail::finalize(set, labels);
  return set;
}

inline PrototypeSet select_prototypes(const DistanceMatrix& distances,
                                      const AttributionMatrix& attributions,
                                      const std::vector<int>& labels,
                                      const SelectionConfig& cfg) {
  validate(cfg, distances.size());
  PrototypeSet set;
  switch (cfg.strategy) {
    case Strategy::kSma:
      set = select_sma(distances, attributions, labels, cfg.k, cfg.beta);
      break;
    case Strategy::kGkm:
      set = select_gkm(distances, attributions, labels, cfg.k_per_class, cfg.beta);
      break;
    case Strategy::kApete:
      set = select_apete(distances, attributions, labels, cfg.epsilon, cfg.beta);
      break;
  }
  set.config = cfg;
  return set;
}

inline constexpr int kPrototypeFormatVersion = 1;

inline nlohmann::json prototype_set_to_json(const PrototypeSet& set) {
  return nlohmann::json{{"format_version", kPrototypeFormatVersion},
                        {"indices", set.indices},
                        {"labels", set.labels},
                        {"objective_trace", set.objective_trace},
                        {"config", selection_config_to_json(set.config)}};
}

inline PrototypeSet prototype_set_from_json(const nlohmann::json& j) {
  if (!j.contains("format_version") ||
      j.at("format_version").get<int>() != kPrototypeFormatVersion)
    throw std::runtime_error("unsupported prototype set format version");
  PrototypeSet set;
  set.indices = j.at("indices").get<std::vector<std::size_t>>();
  set.labels = j.at("labels").get<std::vector<int>>();
  set.objective_trace = j.at("objective_trace").get<std::vector<double>>();
  set.config = selection_config_from_json(j.at("config"));
  return set;
}

inline void save_prototype_set(const PrototypeSet& set, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << prototype_set_to_json(set).dump(2) << '\n';
}

inline PrototypeSet load_prototype_set(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open file: " + path);
  nlohmann::json j;
  in >> j;
  return prototype_set_from_json(j);
}

}  // namespace protoparts
