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

#include <fstream>
#include <string>
#include <vector>

#include "protoparts/common.hpp"
#include "protoparts/dataset.hpp"
#include "protoparts/forest.hpp"

namespace protoparts {

// Fraction of trees in which two leaf vectors disagree (1 - forest proximity).
inline double leaf_disagreement(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("leaf_disagreement: leaf vector length mismatch");
  if (a.empty()) throw std::invalid_argument("leaf_disagreement: empty leaf vectors");
  std::size_t differ = 0;
  for (std::size_t t = 0; t < a.size(); ++t) differ += a[t] != b[t];
  return static_cast<double>(differ) / static_cast<double>(a.size());
}

inline double tree_distance(const Forest& forest, std::span<const double> a,
                            std::span<const double> b) {
  const auto la = leaf_ids(forest, a);
  const auto lb = leaf_ids(forest, b);
  return leaf_disagreement(la, lb);
}

// Leaf vectors for every instance, row-major n x T.
inline std::vector<int> leaf_table(const Forest& forest, const Dataset& ds) {
  const std::size_t trees = forest.trees.size();
  std::vector<int> table(ds.size() * trees);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto leaves = leaf_ids(forest, ds.instance(i));
    std::copy(leaves.begin(), leaves.end(), table.begin() + static_cast<long>(i * trees));
  }
  return table;
}

inline constexpr std::size_t kDefaultMaterializeCap = 5000;

// Pairwise tree-space distances. Leaf vectors are computed once per instance;
// the full n x n matrix is materialized only below the cap, larger inputs
// answer entries from the leaf vectors on demand.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;

  DistanceMatrix(std::vector<int> leaf_tbl, std::size_t n, std::size_t n_trees,
                 std::size_t materialize_cap = kDefaultMaterializeCap)
      : leaves_(std::move(leaf_tbl)), n_(n), trees_(n_trees) {
    if (n_ == 0) throw std::invalid_argument("DistanceMatrix: empty dataset");
    if (leaves_.size() != n_ * trees_)
      throw std::invalid_argument("DistanceMatrix: leaf table shape mismatch");
    if (n_ <= materialize_cap) {
      values_.assign(n_ * n_, 0.0);
      for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i + 1; j < n_; ++j) {
          const double dist = leaf_disagreement(leaf_row(i), leaf_row(j));
          values_[i * n_ + j] = dist;
          values_[j * n_ + i] = dist;
        }
    }
  }

  std::size_t size() const { return n_; }
  std::size_t n_trees() const { return trees_; }
  bool materialized() const { return !values_.empty(); }

  double at(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_) throw std::out_of_range("DistanceMatrix: index out of range");
    if (!values_.empty()) return values_[i * n_ + j];
    if (i == j) return 0.0;
    return leaf_disagreement(leaf_row(i), leaf_row(j));
  }

  std::span<const int> leaf_row(std::size_t i) const {
    return {leaves_.data() + i * trees_, trees_};
  }

 private:
  std::vector<int> leaves_;  // n x T
  std::size_t n_ = 0;
  std::size_t trees_ = 0;
  std::vector<double> values_;  // n x n when materialized
};

inline DistanceMatrix distance_matrix(const Forest& forest, const Dataset& ds,
                                      std::size_t materialize_cap = kDefaultMaterializeCap) {
  if (ds.size() == 0) throw std::invalid_argument("distance_matrix: empty dataset");
  return DistanceMatrix(leaf_table(forest, ds), ds.size(), forest.trees.size(),
                        materialize_cap);
}

// Headerless CSV dump for inspection.
inline void export_distance_matrix(const DistanceMatrix& dm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (std::size_t i = 0; i < dm.size(); ++i) {
    for (std::size_t j = 0; j < dm.size(); ++j) {
      if (j) out << ',';
      out << format_double(dm.at(i, j));
    }
    out << '\n';
  }
}

}  // namespace protoparts
