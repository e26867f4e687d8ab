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

#include "devcert/certify_tree.hpp"

#include <algorithm>
#include <chrono>
#include <map>

#include "devcert/geometry.hpp"

namespace devcert {

namespace {

constexpr double kTieTolerance = 1e-12;

struct FilteredLeaf {
  std::size_t index;
  std::vector<std::size_t> witnesses;  // sorted; unused for the full space
};

std::vector<FilteredLeaf> filter_leaves(const DecisionTree& tree, const CertificationSet& set) {
  std::vector<FilteredLeaf> out;
  for (std::size_t i = 0; i < tree.leaves().size(); ++i) {
    auto meet = box_meets_certset(tree.space(), tree.leaves()[i].region, set, NormPolicy::kBoundingBox);
    if (meet.nonempty) out.push_back({i, std::move(meet.witness_ball_ids)});
  }
  return out;
}

// Region of an edge restricted to one witness ball (or point).
Box clip_to_witness(const FeatureSpace& space, const Box& region, const CertificationSet& set, std::size_t ball) {
  if (const auto* finite = std::get_if<FiniteSet>(&set)) return Box::point(space, finite->points[ball]);
  if (const auto* balls = std::get_if<BallUnion>(&set)) {
    if (auto b = clip_box_to_ball(region, balls->centers[ball], balls->radius)) return *b;
  }
  return region;
}

bool witness_meets(const FeatureSpace& space, const Box& region, const CertificationSet& set, std::size_t ball) {
  if (const auto* finite = std::get_if<FiniteSet>(&set)) return region.contains(finite->points[ball]);
  const auto& balls = std::get<BallUnion>(set);
  auto clipped = clip_box_to_ball(region, balls.centers[ball], balls.radius);
  return clipped && boxes_meet(*clipped, Box::full(space));
}

std::vector<LeafPairEdge> edges_impl(const DecisionTree& f, const DecisionTree& f0, const DeviationFn& d,
                                     const CertificationSet& set) {
  if (!(f.space() == f0.space())) throw Error(ErrorKind::kSchemaMismatch, "trees use different feature spaces");
  validate_certset(f.space(), set);
  const auto left = filter_leaves(f, set);
  const auto right = filter_leaves(f0, set);
  const bool full = std::holds_alternative<FullSpace>(set);
  const FeatureSpace& space = f.space();

  std::vector<LeafPairEdge> edges;
  std::vector<std::size_t> common;
  for (const auto& l : left) {
    const Leaf& leaf = f.leaves()[l.index];
    for (const auto& m : right) {
      const Leaf& ref = f0.leaves()[m.index];
      if (!boxes_meet(leaf.region, ref.region)) continue;
      auto region = box_intersect(leaf.region, ref.region);
      LeafPairEdge edge{l.index, m.index, std::move(*region), {}, 0.0};
      if (!full) {
        common.clear();
        std::set_intersection(l.witnesses.begin(), l.witnesses.end(), m.witnesses.begin(), m.witnesses.end(),
                              std::back_inserter(common));
        if (common.empty()) continue;
        for (std::size_t ball : common) {
          if (witness_meets(space, edge.region, set, ball)) edge.witness_ball_ids.push_back(ball);
        }
        if (edge.witness_ball_ids.empty()) continue;
      }
      edge.deviation = d(leaf.value, ref.value);
      edges.push_back(std::move(edge));
    }
  }
  return edges;
}

CertResult certify_exact(const DecisionTree& f, const DecisionTree& f0, const DeviationFn& d,
                         const CertificationSet& set) {
  auto start = std::chrono::steady_clock::now();
  auto edges = edges_impl(f, f0, d, set);
  if (edges.empty()) throw Error(ErrorKind::kEmptyCertSet, "no leaf pair meets the certification set");

  CertResult result;
  result.stats.edges_evaluated = edges.size();
  double best = -kInf;
  double smax = -kInf;
  double smin = kInf;
  for (const auto& e : edges) {
    best = std::max(best, e.deviation);
    double diff = f.leaves()[e.model_leaf].value - f0.leaves()[e.reference_leaf].value;
    smax = std::max(smax, diff);
    smin = std::min(smin, diff);
  }
  result.lower = result.upper = best;
  result.exact = true;
  result.signed_max = smax;
  result.signed_min = smin;

  std::map<std::size_t, ReferenceLeafSummary> per_leaf;
  for (const auto& e : edges) {
    double y = f.leaves()[e.model_leaf].value;
    double y0 = f0.leaves()[e.reference_leaf].value;
    Box clipped = e.witness_ball_ids.empty() ? e.region
                                             : clip_to_witness(f.space(), e.region, set, e.witness_ball_ids.front());
    if (e.deviation >= best - kTieTolerance) {
      result.maximizers.push_back({clipped, e.deviation, y, y0, e.model_leaf, e.reference_leaf, e.witness_ball_ids});
    }
    auto [it, inserted] = per_leaf.try_emplace(e.reference_leaf);
    auto& s = it->second;
    if (inserted) {
      s.leaf = e.reference_leaf;
      s.leaf_region = f0.leaves()[e.reference_leaf].region;
      s.reference_score = y0;
      s.min_model_score = s.max_model_score = y;
      s.max_deviation = e.deviation;
      s.maximizer = std::move(clipped);
      continue;
    }
    s.min_model_score = std::min(s.min_model_score, y);
    s.max_model_score = std::max(s.max_model_score, y);
    if (e.deviation > s.max_deviation) {
      s.max_deviation = e.deviation;
      s.maximizer = std::move(clipped);
    }
  }
  for (auto& [m, s] : per_leaf) result.per_reference_leaf.push_back(std::move(s));
  result.stats.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace

std::vector<LeafPairEdge> enumerate_edges(const DecisionTree& f, const DecisionTree& f0, const DeviationFn& d,
                                          const CertificationSet& set) {
  return edges_impl(f, f0, d, set);
}

CertResult certify_tree_tree(const DecisionTree& f, const DecisionTree& f0, const DeviationFn& d,
                             const CertificationSet& set) {
  return certify_with_norm_relaxation(set, [&](const CertificationSet& s) { return certify_exact(f, f0, d, s); });
}

std::vector<ReferenceLeafSummary> breakdown_by_reference_leaf(const DecisionTree& f, const DecisionTree& f0,
                                                              const DeviationFn& d, const CertificationSet& set) {
  return certify_tree_tree(f, f0, d, set).per_reference_leaf;
}

}  // namespace devcert
