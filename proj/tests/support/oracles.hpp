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

// Brute-force reference computations. None of these call a certifier or the
// library's box algebra: intervals, membership and enumeration are
// re-implemented here from first principles so that agreement is evidence.

#include <cstdint>
#include <vector>

#include "devcert/models.hpp"

namespace devcert::testing {

struct OracleResult {
  double max_deviation = -kInf;
  double signed_max = -kInf;  // f - f0
  double signed_min = kInf;
  std::uint64_t count = 0;  // grid points / cliques / bin products considered feasible
};

// Membership of a point in a certification set under the categorical
// convention (distinct categories are at l_inf distance 1).
bool oracle_in_certset(const FeatureSpace& space, const Point& x, const CertificationSet& set);

// Evaluates both models on every point of a grid built per coordinate from
// the bounds, the leaf boundaries of `trees`, every ball face and point
// coordinate of `set`, plus every midpoint between consecutive values. Each
// cell of the resulting arrangement is on one side of every split and ball
// face, so the grid hits every non-empty (leaf, leaf, ball) region.
OracleResult grid_oracle(const Model& f, const Model& f0, const DeviationFn& d, const CertificationSet& set,
                         const std::vector<const DecisionTree*>& trees);

// Enumerates every combination of one leaf per ensemble tree plus one
// reference leaf whose common box meets `set`.
OracleResult clique_oracle(const TreeEnsemble& f, const DecisionTree& f0, const DeviationFn& d,
                           const CertificationSet& set);

// Number of leaf combinations (ensemble trees plus reference) with a
// non-empty common box, full space.
std::uint64_t count_cliques(const TreeEnsemble& f, const DecisionTree& f0);

// Additive model (piecewise-constant and category-table terms only) against
// a tree: every product of one bin per feature, intersected with every
// reference leaf and every ball.
OracleResult gam_tree_oracle(const AdditiveModel& f, const DecisionTree& f0, const DeviationFn& d,
                             const CertificationSet& set);

// Two identity-link additive models: every product of merged bins of f and
// f0, per ball. D is applied as D(f, f0).
OracleResult gam_gam_oracle(const AdditiveModel& f, const AdditiveModel& f0, const DeviationFn& d,
                            const CertificationSet& set);

// Largest D(g^{-1}(score), y0) over every bin product of the full space.
double gam_constant_oracle(const AdditiveModel& f, double y0, const DeviationFn& d);

// Worst-case 0-1 loss for an all-linear model over the l_inf ball around x
// clipped to the bounds, found by enumerating every corner of the clipped box.
int corner_robust_loss(const AdditiveModel& f, const Point& x, int label, double eps, double threshold);

}  // namespace devcert::testing
