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

// Command-line front end: train a forest, select prototypes, emit alike-part
// explanations, evaluate the 1-NN surrogate, sweep hyperparameters, or run
// the whole pipeline. Settings come from an optional key=value config file;
// flags given on the command line override it.

#include <cstdio>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "protoparts/protoparts.hpp"

namespace {

struct CommandArgs {
  std::string config_path;
  std::map<std::string, std::string> overrides;  // only flags actually passed
};

// Every subcommand shares the same flag set; each flag records its value as a
// config override so file and command line merge with identical semantics.
void add_common_flags(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_path, "key=value config file");
  const auto bind = [cmd, &args](const std::string& flag, const std::string& key,
                                 const std::string& help) {
    cmd->add_option_function<std::string>(
        flag, [&args, key](const std::string& value) { args.overrides[key] = value; }, help);
  };
  bind("--data", "data", "dataset CSV path");
  bind("--label-column", "label_column", "name of the label column");
  bind("--missing-token", "missing_token", "extra token treated as a missing value");
  bind("--test-fraction", "test_fraction", "fraction of each class held out for testing");
  bind("--seed", "seed", "seed for splitting and forest training");
  bind("--trees", "trees", "number of trees");
  bind("--max-depth", "max_depth", "maximum tree depth");
  bind("--min-leaf", "min_leaf", "minimum instances per leaf");
  bind("--mtry", "mtry", "features tried per split (0 = ceil(sqrt(d)))");
  bind("--attribution-provider", "attribution_provider",
       "path | exact-shapley | imported");
  bind("--attributions-file", "attributions_file",
       "raw attribution scores CSV (imported provider)");
  bind("--strategy", "strategy", "gkm | sma | apete");
  bind("--beta", "beta", "weight of the importance-alignment term");
  bind("--k", "k", "total prototype budget (sma)");
  bind("--k-per-class", "k_per_class", "per-class prototype budget (gkm)");
  bind("--epsilon", "epsilon", "relative-improvement stopping threshold (apete)");
  bind("--metric", "metric", "assignment metric: combined | distance-only");
  bind("--out-dir", "out_dir", "output directory");
  bind("--export-distances", "export_distances", "also write the distance matrix (true/false)");
  bind("--export-attributions", "export_attributions",
       "also write attribution matrices (true/false)");
  bind("--strategies", "strategies", "comma-separated strategy list (sweep)");
  bind("--beta-grid", "beta_grid", "comma-separated beta grid (sweep)");
  bind("--hyper-grid", "hyper_grid", "comma-separated hyperparameter grid (sweep)");
}

protoparts::RunConfig resolve_config(const CommandArgs& args) {
  std::map<std::string, std::string> kv;
  if (!args.config_path.empty()) kv = protoparts::parse_config_file(args.config_path);
  for (const auto& [key, value] : args.overrides) kv[key] = value;
  return protoparts::run_config_from_map(kv);
}

void print_artifacts(const protoparts::RunOutcome& outcome) {
  for (const auto& path : outcome.artifacts) std::cout << "wrote " << path << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prototype selection and alike-part explanations for random forests"};
  app.require_subcommand(1);

  CommandArgs args;
  CLI::App* cmd_train = app.add_subcommand("train", "train a forest and save it");
  CLI::App* cmd_select = app.add_subcommand("select", "select prototypes");
  CLI::App* cmd_explain = app.add_subcommand("explain", "explain the test split");
  CLI::App* cmd_evaluate = app.add_subcommand("evaluate", "evaluate the 1-NN surrogate");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "grid sweep over strategies and beta");
  CLI::App* cmd_run = app.add_subcommand("run", "full pipeline into a hashed run directory");
  for (CLI::App* cmd : {cmd_train, cmd_select, cmd_explain, cmd_evaluate, cmd_sweep, cmd_run})
    add_common_flags(cmd, args);

  CLI11_PARSE(app, argc, argv);

  try {
    const protoparts::RunConfig cfg = resolve_config(args);
    using protoparts::RunStage;
    if (cmd_train->parsed()) {
      print_artifacts(protoparts::run_pipeline(cfg, RunStage::kTrain));
    } else if (cmd_select->parsed()) {
      const auto outcome = protoparts::run_pipeline(cfg, RunStage::kSelect);
      print_artifacts(outcome);
      std::cout << "selected " << outcome.prototypes.indices.size() << " prototypes\n";
    } else if (cmd_explain->parsed()) {
      print_artifacts(protoparts::run_pipeline(cfg, RunStage::kExplain));
    } else if (cmd_evaluate->parsed()) {
      const auto outcome = protoparts::run_pipeline(cfg, RunStage::kEvaluate);
      print_artifacts(outcome);
      std::cout << "fidelity " << protoparts::format_double(outcome.report.accuracy)
                << " ground_truth_accuracy "
                << protoparts::format_double(outcome.report.ground_truth_accuracy) << " with "
                << outcome.report.n_prototypes << " prototypes\n";
    } else if (cmd_sweep->parsed()) {
      const auto outcome = protoparts::run_sweep(cfg);
      std::cout << outcome.records.size() << " sweep records in " << outcome.output_dir << '\n';
    } else if (cmd_run->parsed()) {
      const auto outcome = protoparts::run_pipeline(cfg, RunStage::kFull);
      print_artifacts(outcome);
      std::cout << "run directory: " << outcome.output_dir << '\n';
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
