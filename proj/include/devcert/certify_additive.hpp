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

// Exact maximum deviation for additive models (GLM/GAM). The score
// intercept + sum_j f_j(x_j) separates over features, so its extremum over a
// box is the sum of one-dimensional extrema.

#include <cstdint>
#include <vector>

#include "devcert/cert_result.hpp"
#include "devcert/models.hpp"

namespace devcert {

enum class Sense { kMax, kMin };

struct Extremum {
  double value = 0.0;  // link scale
  // Per feature: the plateau (or endpoint) attaining the extremum, or the
  // category set attaining it. The closure of an open piece is reported,
  // since the extremum of a linear piece may only be a supremum.
  Box argmax;
  std::vector<double> per_feature;  // extremum of f_j; 0 for features without terms
  std::uint64_t segment_evaluations = 0;
};

// Throws kEmptyRegion when `region` misses the feature space.
Extremum extremize_additive(const AdditiveModel& f, const Box& region, Sense sense);

// max over sigma of D(g^{-1}(M_sigma(f, region)), y0). Requires a monotone D.
CertResult certify_additive_vs_constant(const AdditiveModel& f, double y0, const DeviationFn& d, const Box& region);

// One pair of extremizations per (reference leaf, witness ball) region.
// Identical clipped regions are extremized once.
CertResult certify_additive_vs_tree(const AdditiveModel& f, const DecisionTree& f0, const DeviationFn& d,
                                    const CertificationSet& set);

// Extremizes the difference model f - f0. Both links must be the identity and
// D must depend on y - y0 only. l_1 / l_2 balls are exact when the difference
// is linear in continuous features and every ball lies inside the bounds.
CertResult certify_additive_vs_additive(const AdditiveModel& f, const AdditiveModel& f0, const DeviationFn& d,
                                        const CertificationSet& set);

struct FeatureContribution {
  std::size_t feature = 0;
  double contribution = 0.0;
  bool categorical = false;
  Interval interval;        // extremizing values, continuous features
  CategorySet categories;   // extremizing categories, categorical features
};

// Every feature's extremum of f_j over region_j, ordered by |contribution|
// descending, then by feature index. Contributions plus the intercept sum to
// the extremize_additive value.
std::vector<FeatureContribution> feature_contributions(const AdditiveModel& f, const Box& region, Sense sense);

// Worst-case 0-1 loss over the closed l_inf ball of radius eps around x. The
// model predicts +1 when the link score exceeds `threshold`.
int robust_loss_additive(const AdditiveModel& f, const Point& x, int label, double eps, double threshold = 0.0);

// 1 - mean robust loss.
double robust_accuracy(const AdditiveModel& f, const std::vector<Point>& points, const std::vector<int>& labels,
                       double eps, double threshold = 0.0);

}  // namespace devcert
