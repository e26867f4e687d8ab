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

#include <cstdint>
#include <optional>
#include <vector>

#include "devcert/core.hpp"

namespace devcert {

// One region on which the maximum (or the best bound found) is attained.
struct Maximizer {
  Box region;
  double deviation = 0.0;
  std::optional<double> model_score;
  std::optional<double> reference_score;
  std::optional<std::size_t> model_leaf;
  std::optional<std::size_t> reference_leaf;
  std::vector<std::size_t> witness_ball_ids;
};

struct ReferenceLeafSummary {
  std::size_t leaf = 0;
  Box leaf_region;
  double reference_score = 0.0;
  double min_model_score = 0.0;
  double max_model_score = 0.0;
  double max_deviation = 0.0;
  Box maximizer;
};

struct SearchStats {
  std::uint64_t edges_evaluated = 0;
  std::uint64_t extremizations = 0;
  std::uint64_t segment_evaluations = 0;
  std::uint64_t nodes_expanded = 0;
  std::uint64_t cliques_completed = 0;
  std::uint64_t heuristic_evals = 0;
  double wall_seconds = 0.0;
};

struct CertResult {
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
  // Set when l_1 / l_2 balls were replaced by enclosing l_inf balls: `upper`
  // is then an over-approximation and `lower` comes from the ball centers.
  bool relaxed_norm = false;
  // The search stopped on its time or node limit; [lower, upper] still holds.
  bool budget_expired = false;
  std::vector<Maximizer> maximizers;
  std::vector<ReferenceLeafSummary> per_reference_leaf;
  // Extremes of the signed difference model - reference, when computed.
  std::optional<double> signed_max;
  std::optional<double> signed_min;
  SearchStats stats;
};

// Runs `certify` on the relaxed set and on the ball centers when `set` is an
// l_1 / l_2 ball union and merges them into a sound bracket.
template <typename Certify>
CertResult certify_with_norm_relaxation(const CertificationSet& set, Certify certify) {
  if (!certset_needs_relaxation(set)) return certify(set);
  const auto& balls = std::get<BallUnion>(set);
  CertResult upper = certify(CertificationSet{BallUnion{balls.centers, balls.radius, Norm::kLinf}});
  CertResult lower = certify(CertificationSet{FiniteSet{balls.centers}});
  CertResult out = std::move(upper);
  out.lower = lower.lower;
  out.exact = false;
  out.relaxed_norm = true;
  out.budget_expired = out.budget_expired || lower.budget_expired;
  out.stats.wall_seconds += lower.stats.wall_seconds;
  return out;
}

}  // namespace devcert
