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

// Exact maximum deviation between two decision trees: the maximum of
// D(y_l, y0_m) over leaf pairs (l, m) whose intersection meets the
// certification set. At most L * L0 pairs are evaluated.

#include <vector>

#include "devcert/cert_result.hpp"
#include "devcert/models.hpp"

namespace devcert {

struct LeafPairEdge {
  std::size_t model_leaf = 0;
  std::size_t reference_leaf = 0;
  Box region;  // model leaf ∩ reference leaf
  std::vector<std::size_t> witness_ball_ids;
  double deviation = 0.0;
};

// All leaf pairs whose intersection meets the set.
std::vector<LeafPairEdge> enumerate_edges(const DecisionTree& f, const DecisionTree& f0, const DeviationFn& d,
                                          const CertificationSet& set);

// Throws kEmptyCertSet when no leaf pair meets the set. Maximizers are all
// edges within 1e-12 of the maximum, clipped to their first witness ball.
CertResult certify_tree_tree(const DecisionTree& f, const DecisionTree& f0, const DeviationFn& d,
                             const CertificationSet& set);

// Per reference leaf meeting the set: maximum deviation and its region.
std::vector<ReferenceLeafSummary> breakdown_by_reference_leaf(const DecisionTree& f, const DecisionTree& f0,
                                                              const DeviationFn& d, const CertificationSet& set);

}  // namespace devcert
