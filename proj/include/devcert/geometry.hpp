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

// Box algebra and certification-set predicates.

#include <optional>
#include <span>
#include <vector>

#include "devcert/core.hpp"

namespace devcert {

// Componentwise intersection; nullopt when any component is empty.
std::optional<Box> box_intersect(const Box& a, const Box& b);

// Same test without materializing the intersection.
bool boxes_meet(const Box& a, const Box& b);

// b ∩ [center - r, center + r] per continuous coordinate. A categorical
// coordinate is pinned to the center's category when r < 1 and left free
// otherwise: switching category flips two one-hot coordinates by 1, so the
// l_inf distance between distinct categories is exactly 1.
std::optional<Box> clip_box_to_ball(const Box& b, const Point& center, double r);

// The l_inf ball around `center`, clipped to the feature bounds.
Box ball_box(const FeatureSpace& space, const Point& center, double r);

enum class NormPolicy {
  kExact,        // p in {1, 2} raises kUnsupportedNorm
  kBoundingBox,  // p in {1, 2} is replaced by the enclosing l_inf ball
};

struct MeetResult {
  bool nonempty = false;
  std::vector<std::size_t> witness_ball_ids;  // balls (or points) meeting the box
};

MeetResult box_meets_certset(const FeatureSpace& space, const Box& b, const CertificationSet& set,
                             NormPolicy policy = NormPolicy::kExact);

// max of w^T x over the l_p ball of radius r around `center`:
// w^T center + r * ||w||_q with 1/p + 1/q = 1.
double linear_max_over_lp_ball(std::span<const double> w, std::span<const double> center, double r, Norm p);

// The regions a certification set contributes inside `region`: the region
// itself for the full space, one degenerate box per contained point for a
// finite set, and one clipped box per meeting ball for a ball union (enclosing
// l_inf balls when p in {1, 2}). Ball/point ids are returned alongside.
struct ClippedRegion {
  Box box;
  std::size_t ball_id = 0;  // meaningless for the full space
};
std::vector<ClippedRegion> clip_to_certset(const FeatureSpace& space, const Box& region,
                                           const CertificationSet& set);

// True when `b` lies inside some ball (l_inf) or equals some point of `set`,
// or inside the feature bounds for the full space. `tolerance` absorbs
// round-off from unit conversions.
bool box_inside_certset(const FeatureSpace& space, const Box& b, const CertificationSet& set,
                        double tolerance = 0.0);

}  // namespace devcert
