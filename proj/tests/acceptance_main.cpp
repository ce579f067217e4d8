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

// Acceptance gate: one pass/fail line per criterion, nonzero exit when any
// criterion fails or exceeds its time budget. Tolerances and budgets are
// pinned here on purpose; loosening them is a behavior change, not a fix.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "helpers.hpp"

namespace {

using namespace protoparts;

constexpr double kShapleyTol = 1e-9;
constexpr double kPathEfficiencyTol = 1e-12;
constexpr double kSimplexTol = 1e-9;
constexpr double kScaleInvarianceTol = 1e-12;
constexpr double kTriangleSlack = 1e-15;  // guards the final per-term divisions
constexpr double kMinBlobFidelity = 0.9;

[[noreturn]] void fail(const std::string& message) { throw std::runtime_error(message); }

void check(bool ok, const std::string& message) {
  if (!ok) fail(message);
}

// Combined pair cost recomputed outside the library, accumulating in the same
// order, so exhaustive argmins can be compared for exact equality.
double combined_cost(const DistanceMatrix& dm, const AttributionMatrix& attr, double beta,
                     std::size_t i, std::size_t j) {
  const auto u = attr.normalized.row(i);
  const auto v = attr.normalized.row(j);
  double dot = 0.0;
  for (std::size_t l = 0; l < u.size(); ++l) dot += u[l] * v[l];
  return dm.at(i, j) + beta * dot;
}

std::string join_indices(const std::vector<std::size_t>& indices) {
  std::string out;
  for (std::size_t idx : indices) {
    if (!out.empty()) out += ',';
    out += std::to_string(idx);
  }
  return out;
}

// --- criterion 1 -----------------------------------------------------------

void mask_fixture() {
  const std::vector<double> weights{0.18, 0.02, 0.27, 0.00, 0.00, 0.51, 0.00};
  const std::vector<int> expected{1, 0, 1, 0, 0, 1, 0};
  const auto mask = alike_mask(weights);
  check(mask == expected, "mask differs from the reference fixture");
}

// --- criterion 2 -----------------------------------------------------------

void zero_beta_reduction() {
  const Dataset ds = testutil::make_synthetic100();
  const Forest forest = train(ds, {.n_trees = 30, .max_depth = 6, .seed = 5});
  const DistanceMatrix dm = distance_matrix(forest, ds);
  const auto attr = compute_attributions(forest, ds, AttributionProvider::kPath);
  const auto dist = testutil::dense(dm);

  const auto sma = select_sma(dm, attr, ds.labels, 5, 0.0).indices;
  const auto sma_ref = testutil::raw_sma(dist, 5);
  check(sma == sma_ref, "budgeted strategy diverged: " + join_indices(sma) + " vs " +
                            join_indices(sma_ref));

  const auto gkm = select_gkm(dm, attr, ds.labels, 3, 0.0).indices;
  const auto gkm_ref = testutil::raw_gkm(dist, ds.labels, 3);
  check(gkm == gkm_ref, "per-class strategy diverged: " + join_indices(gkm) + " vs " +
                            join_indices(gkm_ref));

  const auto apete = select_apete(dm, attr, ds.labels, 0.02, 0.0).indices;
  const auto apete_ref = testutil::raw_apete(dist, ds.labels, 0.02);
  check(apete == apete_ref, "auto-stopping strategy diverged: " + join_indices(apete) +
                                " vs " + join_indices(apete_ref));
}

// --- criterion 3 -----------------------------------------------------------

void single_medoid_oracle() {
  for (std::uint32_t trial = 0; trial < 20; ++trial) {
    const Dataset ds = testutil::make_random(50, 4, 2, 400 + trial);
    const Forest forest = train(ds, {.n_trees = 12, .max_depth = 6, .seed = 400 + trial});
    const DistanceMatrix dm = distance_matrix(forest, ds);
    const auto attr = compute_attributions(forest, ds, AttributionProvider::kPath);
    for (double beta : {-1.0, 0.0, 1.0, 2.0}) {
      const auto set = select_sma(dm, attr, ds.labels, 1, beta);
      const std::size_t expected = testutil::brute_force_one_medoid(
          ds.size(),
          [&](std::size_t i, std::size_t c) { return combined_cost(dm, attr, beta, i, c); });
      check(set.indices.size() == 1 && set.indices[0] == expected,
            "dataset " + std::to_string(trial) + ", beta " + format_double(beta) +
                ": selected " + join_indices(set.indices) + ", exhaustive search found " +
                std::to_string(expected));
    }
  }
}

// --- criterion 4 -----------------------------------------------------------

void shapley_axioms() {
  // Efficiency on a trained forest with eight features.
  const Dataset bg = testutil::make_random(20, 8, 2, 405);
  const Forest forest = train(bg, {.n_trees = 15, .max_depth = 5, .seed = 405});
  std::mt19937 rng(406);
  std::uniform_real_distribution<double> value(0.0, 10.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(8);
    for (double& v : x) v = value(rng);
    const auto cls = static_cast<std::size_t>(predict(forest, x).label);
    const auto phi = exact_shapley(forest, x, bg, static_cast<int>(cls));

    double total = 0.0;
    for (double p : phi) total += p;
    const double v_full = predict(forest, x).probabilities[cls];
    double v_empty = 0.0;
    for (std::size_t b = 0; b < bg.size(); ++b)
      v_empty += predict(forest, bg.instance(b)).probabilities[cls];
    v_empty /= static_cast<double>(bg.size());
    const double gap = std::abs(total - (v_full - v_empty));
    check(gap < kShapleyTol,
          "efficiency gap " + format_double(gap) + " on instance " + std::to_string(trial));
  }

  // Symmetry on a forest whose first two features are exchangeable: one stump
  // per feature with identical thresholds and leaf distributions, and a
  // background whose first two columns agree row-wise.
  const Forest twins = testutil::manual_forest(
      {testutil::stump(0, 0.5, {0.9, 0.1}, {0.1, 0.9}),
       testutil::stump(1, 0.5, {0.9, 0.1}, {0.1, 0.9})},
      2, 8);
  Matrix bg_rows(4, 8);
  const std::vector<double> paired{0.2, 0.8, 0.35, 0.65};
  for (std::size_t r = 0; r < 4; ++r) {
    bg_rows(r, 0) = paired[r];
    bg_rows(r, 1) = paired[r];
    for (std::size_t l = 2; l < 8; ++l) bg_rows(r, l) = 0.1 * static_cast<double>(l);
  }
  const Dataset twin_bg = testutil::make_dataset(std::move(bg_rows), {0, 1, 0, 1});
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(8);
    for (double& v : x) v = value(rng) / 10.0;
    x[1] = x[0];
    const auto phi = exact_shapley(twins, x, twin_bg, 0);
    const double gap = std::abs(phi[0] - phi[1]);
    check(gap < kShapleyTol,
          "symmetry gap " + format_double(gap) + " on instance " + std::to_string(trial));
  }
}

// --- criterion 5 -----------------------------------------------------------

void path_contribution_efficiency() {
  std::mt19937 rng(419);
  std::uniform_real_distribution<double> value(0.0, 10.0);
  for (std::uint32_t f = 0; f < 10; ++f) {
    const Dataset ds = testutil::make_random(25, 4, 3, 420 + f);
    const Forest forest = train(ds, {.n_trees = 10, .seed = 420 + f});
    for (int trial = 0; trial < 10; ++trial) {
      std::vector<double> x(4);
      for (double& v : x) v = value(rng);
      const auto cls = static_cast<std::size_t>(predict(forest, x).label);
      const auto phi = path_contributions(forest, x, static_cast<int>(cls));

      double total = 0.0;
      for (double p : phi) total += p;
      double prior = 0.0;
      for (const Tree& tree : forest.trees) prior += tree.nodes[0].class_distribution[cls];
      prior /= static_cast<double>(forest.trees.size());
      const double gap =
          std::abs(total - (predict(forest, x).probabilities[cls] - prior));
      check(gap <= kPathEfficiencyTol,
            "efficiency gap " + format_double(gap) + " on forest " + std::to_string(f) +
                ", instance " + std::to_string(trial));
    }
  }
}

// --- criterion 6 -----------------------------------------------------------

void normalization_properties() {
  std::mt19937 rng(427);
  std::normal_distribution<double> value(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> phi(8);
    if (trial > 0)
      for (double& v : phi) v = value(rng);
    const auto norm = normalize_attribution(phi);

    double sum = 0.0;
    for (double v : norm) {
      check(v >= 0.0, "negative normalized entry");
      sum += v;
    }
    check(std::abs(sum - 1.0) <= kSimplexTol,
          "row sum " + format_double(sum) + " off the simplex");

    for (double alpha : {-3.0, 0.5, 10.0}) {
      std::vector<double> scaled(phi);
      for (double& v : scaled) v *= alpha;
      const auto norm_scaled = normalize_attribution(scaled);
      for (std::size_t l = 0; l < norm.size(); ++l)
        check(std::abs(norm[l] - norm_scaled[l]) <= kScaleInvarianceTol,
              "scale variance at alpha " + format_double(alpha));
    }
  }
}

// --- criterion 7 -----------------------------------------------------------

void metric_properties() {
  const Dataset ds = testutil::make_random(60, 4, 3, 431);
  const Forest forest = train(ds, {.n_trees = 20, .seed = 431});
  const DistanceMatrix dm = distance_matrix(forest, ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    check(dm.at(i, i) == 0.0, "nonzero diagonal at " + std::to_string(i));
    for (std::size_t j = 0; j < ds.size(); ++j) {
      check(dm.at(i, j) == dm.at(j, i), "asymmetry at (" + std::to_string(i) + "," +
                                            std::to_string(j) + ")");
      check(dm.at(i, j) >= 0.0 && dm.at(i, j) <= 1.0, "distance outside [0, 1]");
    }
  }
  std::mt19937 rng(432);
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t a = pick(rng), b = pick(rng), c = pick(rng);
    check(dm.at(a, c) <= dm.at(a, b) + dm.at(b, c) + kTriangleSlack,
          "triangle violation on (" + std::to_string(a) + "," + std::to_string(b) + "," +
              std::to_string(c) + ")");
  }
}

// --- criterion 8 -----------------------------------------------------------

void greedy_monotonicity() {
  const Dataset ds = testutil::make_synthetic100();
  const Forest forest = train(ds, {.n_trees = 30, .max_depth = 6, .seed = 5});
  const DistanceMatrix dm = distance_matrix(forest, ds);
  const auto attr = compute_attributions(forest, ds, AttributionProvider::kPath);

  const auto assert_monotone = [](const PrototypeSet& set, const std::string& what) {
    for (std::size_t t = 1; t < set.objective_trace.size(); ++t)
      check(set.objective_trace[t] <= set.objective_trace[t - 1],
            what + ": trace rises at step " + std::to_string(t));
  };

  for (double beta : {0.0, 1.0, 2.0}) {
    for (std::size_t k : {std::size_t{2}, std::size_t{5}, std::size_t{8}})
      assert_monotone(select_sma(dm, attr, ds.labels, k, beta),
                      "budget " + std::to_string(k) + ", beta " + format_double(beta));
    for (std::size_t kpc : {std::size_t{1}, std::size_t{2}, std::size_t{3}})
      assert_monotone(select_gkm(dm, attr, ds.labels, kpc, beta),
                      "per-class " + std::to_string(kpc) + ", beta " + format_double(beta));
    for (double eps : {0.001, 0.01, 0.05})
      assert_monotone(select_apete(dm, attr, ds.labels, eps, beta),
                      "threshold " + format_double(eps) + ", beta " + format_double(beta));
  }
}

// --- criterion 9 -----------------------------------------------------------

void blob_surrogate_fidelity() {
  const Dataset ds = testutil::make_blobs(150, {{-2.0, -2.0}, {2.0, 2.0}}, {0, 1}, 1.0, 9);
  const SplitResult parts = split(ds, 1.0 / 3.0, 9);
  check(parts.train.size() == 200 && parts.test.size() == 100,
        "unexpected split sizes " + std::to_string(parts.train.size()) + "/" +
            std::to_string(parts.test.size()));

  const Forest forest = train(parts.train, {.n_trees = 50, .seed = 9});
  const DistanceMatrix dm = distance_matrix(forest, parts.train);
  const auto attr = compute_attributions(forest, parts.train, AttributionProvider::kPath);
  const auto set = select_gkm(dm, attr, predict_labels(forest, parts.train), 2, 0.0);

  const auto report = evaluate_surrogate(set, parts.train, parts.test, forest, nullptr,
                                         nullptr, 0.0, AssignmentMetric::kDistanceOnly);
  check(report.accuracy >= kMinBlobFidelity,
        "fidelity " + format_double(report.accuracy) + " below " +
            format_double(kMinBlobFidelity));
}

// --- criterion 10 ----------------------------------------------------------

void byte_identical_rerun() {
  RunConfig cfg;
  cfg.data = std::string(PROTOPARTS_DATA_DIR) + "/demo.csv";
  cfg.label_column = "quality";
  cfg.missing_token = "?";
  cfg.seed = 7;
  cfg.trees = 25;
  cfg.max_depth = 6;
  cfg.epsilon = 0.02;
  cfg.out_dir = testutil::scratch_dir("acceptance-rerun");

  const RunOutcome first = run_pipeline(cfg);
  std::vector<std::string> contents;
  for (const auto& path : first.artifacts) contents.push_back(testutil::read_file(path));

  const RunOutcome second = run_pipeline(cfg);
  check(second.output_dir == first.output_dir, "run directories differ");
  check(second.artifacts == first.artifacts, "artifact lists differ");
  for (std::size_t i = 0; i < first.artifacts.size(); ++i)
    check(testutil::read_file(second.artifacts[i]) == contents[i],
          "artifact differs between reruns: " + first.artifacts[i]);
}

// --- criterion 11 ----------------------------------------------------------

void sweep_mask_length_consistency() {
  const Dataset ds = testutil::make_blobs(20, {{-2.0, -2.0}, {2.0, 2.0}}, {0, 1}, 1.0, 47);
  const SplitResult parts = split(ds, 0.25, 47);
  const Forest forest = train(parts.train, {.n_trees = 20, .max_depth = 6, .seed = 47});
  const auto a_train = compute_attributions(forest, parts.train, AttributionProvider::kPath);
  const auto a_test = compute_attributions(forest, parts.test, AttributionProvider::kPath);

  SweepOptions options;
  options.out_dir = testutil::scratch_dir("acceptance-sweep");
  const auto records = sweep(parts.train, parts.test, forest, a_train, a_test,
                             {Strategy::kSma, Strategy::kApete}, {0.0, 1.0}, {2.0}, options);

  for (const auto& rec : records) {
    const std::string path = options.out_dir + "/explanations-" + to_string(rec.strategy) +
                             "-beta" + format_double(rec.beta) + "-hyper" +
                             format_double(rec.hyper) + ".jsonl";
    std::istringstream lines(testutil::read_file(path));
    std::string line;
    long long total = 0;
    long long count = 0;
    while (std::getline(lines, line)) {
      const auto mask = nlohmann::json::parse(line).at("mask").get<std::vector<int>>();
      for (int m : mask) total += m;
      ++count;
    }
    check(count > 0, "no serialized explanations in " + path);
    const double recomputed = static_cast<double>(total) / static_cast<double>(count);
    check(recomputed == rec.mean_mask_length,
          "mean mask length " + format_double(rec.mean_mask_length) +
              " does not equal its recompute " + format_double(recomputed));
  }
}

struct Criterion {
  const char* name;
  double budget_ms;
  std::function<void()> body;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"alike mask matches the skewed-weights fixture", 1.0, mask_fixture},
      {"zero-beta selection equals the distance-only reference", 5000.0, zero_beta_reduction},
      {"single-prototype selection equals exhaustive search", 10000.0, single_medoid_oracle},
      {"exact Shapley values satisfy efficiency and symmetry", 30000.0, shapley_axioms},
      {"path contributions sum to the prediction shift", 5000.0, path_contribution_efficiency},
      {"normalized attributions are scale-invariant simplex rows", 1000.0,
       normalization_properties},
      {"tree-space distances form a symmetric bounded metric", 5000.0, metric_properties},
      {"greedy objective traces never increase across the grid", 30000.0, greedy_monotonicity},
      {"prototype surrogate reaches the fidelity floor on blobs", 10000.0,
       blob_surrogate_fidelity},
      {"identical configurations rerun byte-for-byte", 30000.0, byte_identical_rerun},
      {"reported mean mask length equals its serialized recompute", 5000.0,
       sweep_mask_length_consistency},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    std::string error;
    try {
      criterion.body();
    } catch (const std::exception& e) {
      error = e.what();
    }
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
            .count();
    if (error.empty() && elapsed_ms > criterion.budget_ms)
      error = "exceeded time budget";
    if (error.empty()) {
      std::printf("[PASS] %s (%.2f ms <= %.0f ms)\n", criterion.name, elapsed_ms,
                  criterion.budget_ms);
    } else {
      std::printf("[FAIL] %s: %s (%.2f ms, budget %.0f ms)\n", criterion.name, error.c_str(),
                  elapsed_ms, criterion.budget_ms);
      ++failures;
    }
  }
  std::printf("%zu of %zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failures),
              criteria.size());
  return failures == 0 ? 0 : 1;
}
