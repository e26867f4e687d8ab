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

#include "devcert/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace devcert {

namespace {

void require_same_shape(const Box& a, const Box& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::kSchemaMismatch, "boxes over different feature spaces");
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a.categorical(j) != b.categorical(j)) {
      throw Error(ErrorKind::kSchemaMismatch, "feature kinds differ between boxes");
    }
  }
}

Interval expand(const Interval& iv, double tol) {
  return Interval{iv.lo - tol, iv.hi + tol, false, false};
}

}  // namespace

std::optional<Box> box_intersect(const Box& a, const Box& b) {
  require_same_shape(a, b);
  Box out = a;
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a.categorical(j)) {
      out.categories(j) = a.categories(j).intersect(b.categories(j));
      if (out.categories(j).empty()) return std::nullopt;
    } else {
      out.interval(j) = a.interval(j).intersect(b.interval(j));
      if (out.interval(j).empty()) return std::nullopt;
    }
  }
  return out;
}

bool boxes_meet(const Box& a, const Box& b) {
  require_same_shape(a, b);
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a.categorical(j) ? !a.categories(j).meets(b.categories(j)) : !a.interval(j).meets(b.interval(j))) {
      return false;
    }
  }
  return true;
}

std::optional<Box> clip_box_to_ball(const Box& b, const Point& center, double r) {
  if (center.size() != b.size()) throw Error(ErrorKind::kSchemaMismatch, "center arity mismatch");
  if (!(r >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "radius must be >= 0");
  Box out = b;
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b.categorical(j)) {
      if (r < 1.0) {
        auto c = static_cast<std::size_t>(center[j]);
        if (!b.categories(j).contains(c)) return std::nullopt;
        out.categories(j) = CategorySet::single(b.categories(j).universe(), c);
      } else if (b.categories(j).empty()) {
        return std::nullopt;
      }
    } else {
      out.interval(j) = b.interval(j).intersect(Interval::closed(center[j] - r, center[j] + r));
      if (out.interval(j).empty()) return std::nullopt;
    }
  }
  return out;
}

Box ball_box(const FeatureSpace& space, const Point& center, double r) {
  auto clipped = clip_box_to_ball(Box::full(space), center, r);
  if (!clipped) throw Error(ErrorKind::kSchemaMismatch, "ball center outside the feature space");
  return *clipped;
}

MeetResult box_meets_certset(const FeatureSpace& space, const Box& b, const CertificationSet& set,
                             NormPolicy policy) {
  MeetResult result;
  if (b.empty()) return result;
  if (std::holds_alternative<FullSpace>(set)) {
    result.nonempty = boxes_meet(b, Box::full(space));
    return result;
  }
  if (const auto* finite = std::get_if<FiniteSet>(&set)) {
    for (std::size_t i = 0; i < finite->points.size(); ++i) {
      if (b.contains(finite->points[i])) result.witness_ball_ids.push_back(i);
    }
  } else {
    const auto& balls = std::get<BallUnion>(set);
    if (balls.norm != Norm::kLinf && balls.radius > 0.0 && policy == NormPolicy::kExact) {
      throw Error(ErrorKind::kUnsupportedNorm, "exact box tests need an l_inf ball union");
    }
    for (std::size_t i = 0; i < balls.centers.size(); ++i) {
      auto clipped = clip_box_to_ball(b, balls.centers[i], balls.radius);
      if (clipped && boxes_meet(*clipped, Box::full(space))) result.witness_ball_ids.push_back(i);
    }
  }
  result.nonempty = !result.witness_ball_ids.empty();
  return result;
}

double linear_max_over_lp_ball(std::span<const double> w, std::span<const double> center, double r, Norm p) {
  if (w.size() != center.size()) throw Error(ErrorKind::kSchemaMismatch, "weight/center arity mismatch");
  if (!(r >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "radius must be >= 0");
  double base = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) base += w[i] * center[i];
  double dual = 0.0;
  switch (p) {
    case Norm::kLinf:  // dual norm l_1
      for (double wi : w) dual += std::abs(wi);
      break;
    case Norm::kL2:
      for (double wi : w) dual += wi * wi;
      dual = std::sqrt(dual);
      break;
    case Norm::kL1:  // dual norm l_inf
      for (double wi : w) dual = std::max(dual, std::abs(wi));
      break;
    default:
      throw Error(ErrorKind::kUnsupportedNorm, "norm must be 1, 2 or inf");
  }
  return base + r * dual;
}

std::vector<ClippedRegion> clip_to_certset(const FeatureSpace& space, const Box& region,
                                           const CertificationSet& set) {
  std::vector<ClippedRegion> out;
  if (std::holds_alternative<FullSpace>(set)) {
    if (auto b = box_intersect(region, Box::full(space))) out.push_back({std::move(*b), 0});
    return out;
  }
  if (const auto* finite = std::get_if<FiniteSet>(&set)) {
    for (std::size_t i = 0; i < finite->points.size(); ++i) {
      if (region.contains(finite->points[i])) out.push_back({Box::point(space, finite->points[i]), i});
    }
    return out;
  }
  const auto& balls = std::get<BallUnion>(set);
  Box full = Box::full(space);
  for (std::size_t i = 0; i < balls.centers.size(); ++i) {
    auto clipped = clip_box_to_ball(region, balls.centers[i], balls.radius);
    if (!clipped) continue;
    if (auto inside = box_intersect(*clipped, full)) out.push_back({std::move(*inside), i});
  }
  return out;
}

bool box_inside_certset(const FeatureSpace& space, const Box& b, const CertificationSet& set, double tolerance) {
  auto inside = [&](const Box& outer) {
    if (b.size() != outer.size()) return false;
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (b.categorical(j)) {
        if (!b.categories(j).subset_of(outer.categories(j))) return false;
      } else if (!Interval::closed(b.interval(j).lo, b.interval(j).hi)
                      .subset_of(expand(outer.interval(j), tolerance))) {
        return false;
      }
    }
    return true;
  };
  if (std::holds_alternative<FullSpace>(set)) return inside(Box::full(space));
  if (const auto* finite = std::get_if<FiniteSet>(&set)) {
    return std::any_of(finite->points.begin(), finite->points.end(),
                       [&](const Point& p) { return inside(Box::point(space, p)); });
  }
  const auto& balls = std::get<BallUnion>(set);
  return std::any_of(balls.centers.begin(), balls.centers.end(),
                     [&](const Point& c) { return inside(ball_box(space, c, balls.radius)); });
}

}  // namespace devcert
