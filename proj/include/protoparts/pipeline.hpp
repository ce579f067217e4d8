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

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "protoparts/alike.hpp"
#include "protoparts/attribution.hpp"
#include "protoparts/common.hpp"
#include "protoparts/dataset.hpp"
#include "protoparts/evaluate.hpp"
#include "protoparts/forest.hpp"
#include "protoparts/proximity.hpp"
#include "protoparts/selection.hpp"
#include "protoparts/sweep.hpp"

namespace protoparts {

// Everything a full run needs, assembled from a plain key=value config file
// and/or command-line flags. Unset keys keep these defaults.
struct RunConfig {
  std::string data;              // dataset CSV path (required)
  std::string label_column;      // label column name (required)
  std::string missing_token;     // extra token treated as missing, besides empty cells
  double test_fraction = 0.25;
  std::uint64_t seed = 0;

  std::size_t trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 2;
  std::size_t mtry = 0;  // 0 = ceil(sqrt(d))

  AttributionProvider provider = AttributionProvider::kPath;
  std::string attributions_file;  // imported provider: raw scores for the full dataset

  Strategy strategy = Strategy::kApete;
  double beta = 1.0;
  std::size_t k = 5;
  std::size_t k_per_class = 2;
  double epsilon = 0.01;
  AssignmentMetric metric = AssignmentMetric::kCombined;

  std::string out_dir = "runs";
  bool export_distances = false;
  bool export_attributions = false;

  // Sweep-only knobs.
  std::vector<Strategy> strategies = {Strategy::kGkm, Strategy::kSma, Strategy::kApete};
  std::vector<double> beta_grid = {0.0, 0.5, 1.0, 1.5, 2.0};
  std::vector<double> hyper_grid = {1.0, 2.0, 3.0};
};

// Plain-text config: one `key = value` per line, blank lines and lines
// starting with '#' ignored; later occurrences of a key win.
inline std::map<std::string, std::string> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::map<std::string, std::string> kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view stripped = trim(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto eq = stripped.find('=');
    if (eq == std::string_view::npos)
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected key=value");
    const std::string key{trim(stripped.substr(0, eq))};
    const std::string value{trim(stripped.substr(eq + 1))};
    if (key.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty key");
    kv[key] = value;
  }
  return kv;
}

namespace detail {

inline double config_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  if (!try_parse_double(value, out))
    throw std::invalid_argument("config: key '" + key + "' expects a number, got '" + value +
                                "'");
  return out;
}

inline std::size_t config_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw std::invalid_argument("config: key '" + key +
                                "' expects a non-negative integer, got '" + value + "'");
  return out;
}

inline std::uint64_t config_seed(const std::string& key, const std::string& value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw std::invalid_argument("config: key '" + key +
                                "' expects a non-negative integer, got '" + value + "'");
  return out;
}

inline bool config_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: key '" + key + "' expects true/false, got '" + value +
                              "'");
}

inline std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::string item;
  std::stringstream stream(value);
  while (std::getline(stream, item, ',')) items.emplace_back(trim(item));
  return items;
}

inline std::vector<double> config_double_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const auto& item : split_list(value)) out.push_back(config_double(key, item));
  if (out.empty())
    throw std::invalid_argument("config: key '" + key + "' expects a non-empty list");
  return out;
}

inline std::vector<Strategy> config_strategy_list(const std::string& key,
                                                  const std::string& value) {
  std::vector<Strategy> out;
  for (const auto& item : split_list(value)) out.push_back(strategy_from_string(item));
  if (out.empty())
    throw std::invalid_argument("config: key '" + key + "' expects a non-empty list");
  return out;
}

inline std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 1469598103934665603ull;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

inline std::string hex16(std::uint64_t value) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = kDigits[value & 0xf];
    value >>= 4;
  }
  return out;
}

inline std::string join_doubles(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

inline std::string join_strategies(const std::vector<Strategy>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += to_string(values[i]);
  }
  return out;
}

template <typename Fn>
auto pipeline_stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const std::exception& e) {
    throw std::runtime_error(name + ": " + e.what());
  }
}

}  // namespace detail

inline void apply_config_entry(RunConfig& cfg, const std::string& key,
                               const std::string& value) {
  using namespace detail;
  if (key == "data") cfg.data = value;
  else if (key == "label_column") cfg.label_column = value;
  else if (key == "missing_token") cfg.missing_token = value;
  else if (key == "test_fraction") cfg.test_fraction = config_double(key, value);
  else if (key == "seed") cfg.seed = config_seed(key, value);
  else if (key == "trees") cfg.trees = config_size(key, value);
  else if (key == "max_depth") cfg.max_depth = config_size(key, value);
  else if (key == "min_leaf") cfg.min_leaf = config_size(key, value);
  else if (key == "mtry") cfg.mtry = config_size(key, value);
  else if (key == "attribution_provider") cfg.provider = attribution_provider_from_string(value);
  else if (key == "attributions_file") cfg.attributions_file = value;
  else if (key == "strategy") cfg.strategy = strategy_from_string(value);
  else if (key == "beta") cfg.beta = config_double(key, value);
  else if (key == "k") cfg.k = config_size(key, value);
  else if (key == "k_per_class") cfg.k_per_class = config_size(key, value);
  else if (key == "epsilon") cfg.epsilon = config_double(key, value);
  else if (key == "metric") cfg.metric = assignment_metric_from_string(value);
  else if (key == "out_dir") cfg.out_dir = value;
  else if (key == "export_distances") cfg.export_distances = config_bool(key, value);
  else if (key == "export_attributions") cfg.export_attributions = config_bool(key, value);
  else if (key == "strategies") cfg.strategies = config_strategy_list(key, value);
  else if (key == "beta_grid") cfg.beta_grid = config_double_list(key, value);
  else if (key == "hyper_grid") cfg.hyper_grid = config_double_list(key, value);
  else throw std::invalid_argument("config: unknown key '" + key + "'");
}

inline RunConfig run_config_from_map(const std::map<std::string, std::string>& kv) {
  RunConfig cfg;
  for (const auto& [key, value] : kv) apply_config_entry(cfg, key, value);
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_map(parse_config_file(path));
}

// Canonical flat rendering of the full effective config; its hash stamps the
// run directory so identical configs land in identical places.
inline std::string canonical_config_string(const RunConfig& cfg) {
  using namespace detail;
  std::string out;
  const auto put = [&out](const std::string& key, const std::string& value) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  };
  put("attribution_provider", to_string(cfg.provider));
  put("attributions_file", cfg.attributions_file);
  put("beta", format_double(cfg.beta));
  put("beta_grid", join_doubles(cfg.beta_grid));
  put("data", cfg.data);
  put("epsilon", format_double(cfg.epsilon));
  put("export_attributions", cfg.export_attributions ? "true" : "false");
  put("export_distances", cfg.export_distances ? "true" : "false");
  put("hyper_grid", join_doubles(cfg.hyper_grid));
  put("k", std::to_string(cfg.k));
  put("k_per_class", std::to_string(cfg.k_per_class));
  put("label_column", cfg.label_column);
  put("max_depth", std::to_string(cfg.max_depth));
  put("metric", to_string(cfg.metric));
  put("min_leaf", std::to_string(cfg.min_leaf));
  put("missing_token", cfg.missing_token);
  put("mtry", std::to_string(cfg.mtry));
  put("out_dir", cfg.out_dir);
  put("seed", std::to_string(cfg.seed));
  put("strategies", join_strategies(cfg.strategies));
  put("strategy", to_string(cfg.strategy));
  put("test_fraction", format_double(cfg.test_fraction));
  put("trees", std::to_string(cfg.trees));
  return out;
}

inline std::uint64_t config_hash(const RunConfig& cfg) {
  return detail::fnv1a64(canonical_config_string(cfg));
}

inline nlohmann::json run_config_to_json(const RunConfig& cfg) {
  std::vector<std::string> strategies;
  for (Strategy s : cfg.strategies) strategies.push_back(to_string(s));
  return nlohmann::json{{"attribution_provider", to_string(cfg.provider)},
                        {"attributions_file", cfg.attributions_file},
                        {"beta", cfg.beta},
                        {"beta_grid", cfg.beta_grid},
                        {"data", cfg.data},
                        {"epsilon", cfg.epsilon},
                        {"export_attributions", cfg.export_attributions},
                        {"export_distances", cfg.export_distances},
                        {"hyper_grid", cfg.hyper_grid},
                        {"k", cfg.k},
                        {"k_per_class", cfg.k_per_class},
                        {"label_column", cfg.label_column},
                        {"max_depth", cfg.max_depth},
                        {"metric", to_string(cfg.metric)},
                        {"min_leaf", cfg.min_leaf},
                        {"missing_token", cfg.missing_token},
                        {"mtry", cfg.mtry},
                        {"out_dir", cfg.out_dir},
                        {"seed", cfg.seed},
                        {"strategies", strategies},
                        {"strategy", to_string(cfg.strategy)},
                        {"test_fraction", cfg.test_fraction},
                        {"trees", cfg.trees}};
}

// How far a run should go. Partial runs emit only their final stage's
// artifacts into out_dir; a full run emits everything into a hashed run
// directory.
enum class RunStage { kTrain, kSelect, kExplain, kEvaluate, kFull };

struct RunOutcome {
  std::string output_dir;
  std::vector<std::string> artifacts;  // paths in write order
  PrototypeSet prototypes;             // populated from the select stage on
  EvaluationReport report;             // populated from the evaluate stage on
};

inline RunOutcome run_pipeline(const RunConfig& cfg, RunStage until = RunStage::kFull) {
  namespace fs = std::filesystem;
  using detail::pipeline_stage;
  const bool full = until == RunStage::kFull;

  RunOutcome outcome;
  outcome.output_dir =
      full ? cfg.out_dir + "/run-" + detail::hex16(config_hash(cfg)) + "-seed" +
                 std::to_string(cfg.seed)
           : cfg.out_dir;
  fs::create_directories(outcome.output_dir);
  const auto emit = [&outcome](const std::string& name) {
    outcome.artifacts.push_back(outcome.output_dir + "/" + name);
    return outcome.artifacts.back();
  };

  if (full) {
    std::ofstream out(emit("run_config.json"), std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + outcome.artifacts.back());
    out << run_config_to_json(cfg).dump(2) << '\n';
  }

  const Dataset ds = pipeline_stage("load", [&] {
    if (cfg.data.empty()) throw std::invalid_argument("no dataset path configured");
    if (cfg.label_column.empty()) throw std::invalid_argument("no label column configured");
    return load_csv(cfg.data, cfg.label_column, cfg.missing_token);
  });

  const SplitResult parts =
      pipeline_stage("split", [&] { return split(ds, cfg.test_fraction, cfg.seed); });

  const Forest forest = pipeline_stage("train", [&] {
    const ForestParams params{cfg.trees, cfg.max_depth, cfg.min_leaf, cfg.mtry, cfg.seed};
    return train(parts.train, params);
  });
  if (full || until == RunStage::kTrain) save_forest(forest, emit("forest.json"));
  if (until == RunStage::kTrain) return outcome;

  const auto [a_train, a_test] = pipeline_stage("attribute", [&] {
    if (cfg.provider == AttributionProvider::kImported) {
      if (cfg.attributions_file.empty())
        throw std::invalid_argument("imported provider requires attributions_file");
      const AttributionMatrix everything =
          import_attributions(cfg.attributions_file, ds.size(), ds.n_features());
      return std::pair{subset_attributions(everything, parts.train_indices),
                       subset_attributions(everything, parts.test_indices)};
    }
    return std::pair{
        compute_attributions(forest, parts.train, cfg.provider, kPredictedClass, &parts.train),
        compute_attributions(forest, parts.test, cfg.provider, kPredictedClass, &parts.train)};
  });

  const DistanceMatrix distances =
      pipeline_stage("distance", [&] { return distance_matrix(forest, parts.train); });

  const PrototypeSet set = pipeline_stage("select", [&] {
    const std::vector<int> labels = predict_labels(forest, parts.train);
    const SelectionConfig sel{cfg.strategy, cfg.beta,    cfg.k,
                              cfg.k_per_class, cfg.epsilon, cfg.metric};
    return select_prototypes(distances, a_train, labels, sel);
  });
  outcome.prototypes = set;
  if (full || until == RunStage::kSelect) save_prototype_set(set, emit("prototypes.json"));
  if (until == RunStage::kSelect) return outcome;

  const ExplanationBatch batch = pipeline_stage("explain", [&] {
    return explain_queries(forest, parts.test, a_test, set, distances, a_train, cfg.beta,
                           cfg.metric);
  });
  if (full || until == RunStage::kExplain) {
    write_explanations_jsonl(batch.explanations, cfg.provider, emit("explanations.jsonl"));
    write_highlight_frequencies_csv(batch.highlight_frequencies, ds.feature_names,
                                    emit("frequencies.csv"));
  }
  if (until == RunStage::kExplain) return outcome;

  outcome.report = pipeline_stage("evaluate", [&] {
    return evaluate_surrogate(set, parts.train, parts.test, forest, &a_train, &a_test, cfg.beta,
                              cfg.metric);
  });
  save_evaluation_report(outcome.report, emit("evaluation.json"));
  if (!full) return outcome;

  if (cfg.export_distances) export_distance_matrix(distances, emit("distances.csv"));
  if (cfg.export_attributions) {
    const std::string train_raw = emit("attributions_train_raw.csv");
    const std::string train_norm = emit("attributions_train_normalized.csv");
    export_attributions(a_train, train_raw, train_norm);
    const std::string test_raw = emit("attributions_test_raw.csv");
    const std::string test_norm = emit("attributions_test_normalized.csv");
    export_attributions(a_test, test_raw, test_norm);
  }
  return outcome;
}

struct SweepOutcome {
  std::string output_dir;
  std::vector<SweepRecord> records;
};

// Shared-stage front half of run_pipeline, then the grid sweep; sweep.csv and
// per-cell explanation files land in a hashed sweep directory.
inline SweepOutcome run_sweep(const RunConfig& cfg) {
  namespace fs = std::filesystem;
  using detail::pipeline_stage;

  SweepOutcome outcome;
  outcome.output_dir = cfg.out_dir + "/sweep-" + detail::hex16(config_hash(cfg)) + "-seed" +
                       std::to_string(cfg.seed);
  fs::create_directories(outcome.output_dir);
  {
    const std::string path = outcome.output_dir + "/run_config.json";
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << run_config_to_json(cfg).dump(2) << '\n';
  }

  const Dataset ds = pipeline_stage("load", [&] {
    if (cfg.data.empty()) throw std::invalid_argument("no dataset path configured");
    if (cfg.label_column.empty()) throw std::invalid_argument("no label column configured");
    return load_csv(cfg.data, cfg.label_column, cfg.missing_token);
  });
  const SplitResult parts =
      pipeline_stage("split", [&] { return split(ds, cfg.test_fraction, cfg.seed); });
  const Forest forest = pipeline_stage("train", [&] {
    const ForestParams params{cfg.trees, cfg.max_depth, cfg.min_leaf, cfg.mtry, cfg.seed};
    return train(parts.train, params);
  });
  const auto [a_train, a_test] = pipeline_stage("attribute", [&] {
    if (cfg.provider == AttributionProvider::kImported) {
      if (cfg.attributions_file.empty())
        throw std::invalid_argument("imported provider requires attributions_file");
      const AttributionMatrix everything =
          import_attributions(cfg.attributions_file, ds.size(), ds.n_features());
      return std::pair{subset_attributions(everything, parts.train_indices),
                       subset_attributions(everything, parts.test_indices)};
    }
    return std::pair{
        compute_attributions(forest, parts.train, cfg.provider, kPredictedClass, &parts.train),
        compute_attributions(forest, parts.test, cfg.provider, kPredictedClass, &parts.train)};
  });

  outcome.records = pipeline_stage("sweep", [&] {
    SweepOptions options;
    options.metric = cfg.metric;
    options.provider = cfg.provider;
    options.out_dir = outcome.output_dir;
    return sweep(parts.train, parts.test, forest, a_train, a_test, cfg.strategies,
                 cfg.beta_grid, cfg.hyper_grid, options);
  });
  return outcome;
}

}  // namespace protoparts
