/*
 * Copyright 2026 The devcert Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Query-based maximization of delta(x) = f(x) - f0(x) when only evaluations
// are available: hierarchical optimistic optimization over a bisection tree
// of the region, optionally run separately on the cells of a known partition.
//
// Distances are normalized l_inf: every continuous edge of the searched
// region is rescaled to [0, 1], and a categorical component has length 1
// while it holds more than one category.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "devcert/models.hpp"

namespace devcert {

using Oracle = std::function<double(const Point&)>;

struct OptRun {
  std::uint64_t queries_used = 0;
  Point best_point;
  double best_value = -kInf;
  std::vector<double> regret_curve;  // best value after each query
};

struct Smoothness {
  double c = 1.0;     // |delta(x) - delta(y)| <= c * l(x, y)^beta
  double beta = 1.0;  // in (0, 1]
};

struct HooOptions {
  Smoothness smoothness;
  double exploration = 1.0;  // confidence-width constant, noisy mode only
  bool deterministic = true;
};

// Queries the region's center first. In deterministic mode each cell is
// scored by its center value plus c * diam^beta; the search stops early once
// every remaining cell is a single point whose value is known.
OptRun hoo_maximize(const Oracle& delta, const FeatureSpace& space, const Box& region, std::uint64_t budget,
                    const HooOptions& options = {});

struct PartitionSpec {
  std::vector<Box> cells;
  std::vector<Smoothness> smoothness;  // per cell
  std::size_t num_pairs = 0;           // pi: non-empty cell intersections when built from two models
};

// Non-empty leaf intersections of two trees (or tree-like models), each a
// constant cell (c = 0).
PartitionSpec partition_from_trees(const DecisionTree& f, const DecisionTree& f0);

// Budget floor(q / pi) per cell, remainder to the largest cells. A cell with
// c = 0 takes a single query and its share goes to the other cells. Throws
// kBudgetTooSmall when q < pi.
OptRun partitioned_maximize(const Oracle& delta, const FeatureSpace& space, const PartitionSpec& partition,
                            std::uint64_t budget, const HooOptions& options = {});

// Smoothness certified for h0 - h1 under a metric bounded by 1.
Smoothness combine_lipschitz(double c0, double beta0, double c1, double beta1);

// Normalized l_inf distance within `region`.
double normalized_distance(const Box& region, const Point& x, const Point& y);

// An external program answering one query per line: it reads a JSON array of
// raw feature values and writes one number. Throws kOracleFailure on any
// protocol or process error.
class ProcessOracle {
 public:
  ProcessOracle(std::string command, FeatureSpace space);
  ~ProcessOracle();
  ProcessOracle(const ProcessOracle&) = delete;
  ProcessOracle& operator=(const ProcessOracle&) = delete;

  double operator()(const Point& x);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace devcert
