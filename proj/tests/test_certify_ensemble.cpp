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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>

#include "devcert/certify_ensemble.hpp"
#include "devcert/certify_tree.hpp"
#include "support/oracles.hpp"
#include "support/random_models.hpp"

using namespace devcert;
using devcert::testing::Rng;

namespace {

FeatureSpace unit_space(std::size_t d) {
  Rng rng(0);
  return devcert::testing::random_space(rng, {d, 0, 3, false});
}

// Best objective over every completion of `s`, by exhaustive extension.
double best_completion(const LeafGraph& g, const SearchState& s, const TreeEnsemble& f, const DeviationFn& d,
                       CliqueObjective objective) {
  if (s.complete()) return clique_value(g, s, f, d, objective);
  double best = -kInf;
  for (std::size_t p = 0; p < g.partites.size(); ++p) {
    if (s.chosen[p]) continue;
    for (std::size_t v : g.partites[p]) {
      if (auto next = extend(g, s, v)) best = std::max(best, best_completion(g, *next, f, d, objective));
    }
    break;
  }
  return best;
}

}  // namespace

TEST_CASE("two stumps and a constant give five vertices") {
  FeatureSpace s = unit_space(1);
  TreeEnsemble f({DecisionTree::stump(s, 0, 0.5, 0.0, 1.0), DecisionTree::stump(s, 0, 0.5, 0.0, 1.0)},
                 Aggregation::kMean, PostLink::kIdentity);
  LeafGraph g = build_leaf_graph(f, DecisionTree::constant(s, 0.0), FullSpace{});
  REQUIRE(g.vertices.size() == 5);
  for (std::size_t u = 0; u < 5; ++u) {
    for (std::size_t v = 0; v < 5; ++v) {
      const auto& a = g.vertices[u];
      const auto& b = g.vertices[v];
      bool expected = a.partite != b.partite &&
                      (a.tree == f.trees().size() || b.tree == f.trees().size() || a.leaf == b.leaf);
      CHECK(g.adjacent(u, v) == expected);
    }
  }
  // The one-leaf reference is searched first.
  CHECK(g.reference_partite == 0);
}

TEST_CASE("adjacency equals independent box intersection") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {2, 1, 3, true});
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 3, 6);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 5);
    LeafGraph g = build_leaf_graph(f, f0, FullSpace{});
    for (std::size_t u = 0; u < g.vertices.size(); ++u) {
      for (std::size_t v = 0; v < g.vertices.size(); ++v) {
        const Box& a = g.vertices[u].region;
        const Box& b = g.vertices[v].region;
        bool meet = g.vertices[u].partite != g.vertices[v].partite;
        for (std::size_t j = 0; j < space.size() && meet; ++j) {
          if (space.categorical(j)) {
            bool shared = false;
            for (std::size_t c = 0; c < space.num_categories(j); ++c) {
              shared = shared || (a.categories(j).contains(c) && b.categories(j).contains(c));
            }
            meet = shared;
          } else {
            const Interval& x = a.interval(j);
            const Interval& y = b.interval(j);
            double lo = std::max(x.lo, y.lo);
            double hi = std::min(x.hi, y.hi);
            bool lo_open = (x.lo == lo && x.lo_open) || (y.lo == lo && y.lo_open);
            bool hi_open = (x.hi == hi && x.hi_open) || (y.hi == hi && y.hi_open);
            meet = lo < hi || (lo == hi && !lo_open && !hi_open);
          }
        }
        CHECK(g.adjacent(u, v) == meet);
      }
    }
  }
}

TEST_CASE("stump ensemble against zero") {
  FeatureSpace s = unit_space(1);
  TreeEnsemble f({DecisionTree::stump(s, 0, 0.5, 0.0, 1.0), DecisionTree::stump(s, 0, 0.3, 0.0, 1.0)},
                 Aggregation::kMean, PostLink::kIdentity);
  CertResult r = certify_ensemble_vs_tree(f, DecisionTree::constant(s, 0.0), DeviationFn::abs_diff(), FullSpace{});
  CHECK(r.exact);
  CHECK(r.upper == 1.0);
  REQUIRE(r.maximizers.size() == 1);
  const Interval& iv = r.maximizers[0].region.interval(0);
  CHECK(iv.lo == 0.5);
  CHECK(iv.lo_open);
  CHECK(iv.hi == 1.0);
  CHECK(*r.signed_max == 1.0);
  CHECK(*r.signed_min == 0.0);
}

TEST_CASE("a one-tree ensemble agrees with the tree certifier") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, 1, 3, true});
    DecisionTree t = devcert::testing::random_tree(rng, space, 10);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 10);
    TreeEnsemble f({t}, Aggregation::kSum, PostLink::kIdentity);
    CertificationSet set = trial % 2 == 0 ? CertificationSet{FullSpace{}}
                                          : CertificationSet{BallUnion{devcert::testing::random_points(rng, space, 3),
                                                                       0.5, Norm::kLinf}};
    auto d = DeviationFn::power_diff(2.0);
    CHECK(certify_ensemble_vs_tree(f, f0, d, set).upper == doctest::Approx(certify_tree_tree(t, f0, d, set).upper));
  }
}

TEST_CASE("heuristic bounds every completion") {
  Rng rng(7);
  for (int trial = 0; trial < 30; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {2, 1, 3, true});
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 1 + rng() % 4, 5);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 1 + rng() % 5);
    LeafGraph g = build_leaf_graph(f, f0, FullSpace{});
    auto d = DeviationFn::abs_diff();
    SearchState root = initial_state(g, space);
    // Walk a few random partial cliques and compare.
    for (int walk = 0; walk < 10; ++walk) {
      SearchState s = root;
      std::size_t depth = rng() % (g.partites.size() + 1);
      for (std::size_t p = 0; p < depth; ++p) {
        const auto& part = g.partites[p];
        auto next = extend(g, s, part[rng() % part.size()]);
        if (!next) break;
        s = *next;
      }
      for (auto objective : {CliqueObjective::kDeviation, CliqueObjective::kMaxSigned, CliqueObjective::kMinSigned}) {
        double best = best_completion(g, s, f, d, objective);
        if (best == -kInf) {
          // Some uncovered partite may still have compatible leaves; the
          // bound is then finite but there is no completion to compare with.
          continue;
        }
        CHECK(heuristic_bound(g, s, f, d, objective) >= best - 1e-12);
        if (s.complete()) CHECK(heuristic_bound(g, s, f, d, objective) == clique_value(g, s, f, d, objective));
      }
    }
  }
}

TEST_CASE("heuristic with one uncovered partite is exact") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {2, 0, 3, true});
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 2, 5);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 4);
    LeafGraph g = build_leaf_graph(f, f0, FullSpace{});
    SearchState s = initial_state(g, space);
    for (std::size_t p = 0; p + 1 < g.partites.size(); ++p) {
      auto next = extend(g, s, g.partites[p][rng() % g.partites[p].size()]);
      if (!next) break;
      s = *next;
    }
    if (s.covered + 1 != g.partites.size()) continue;
    auto d = DeviationFn::abs_diff();
    double best = best_completion(g, s, f, d, CliqueObjective::kDeviation);
    if (best == -kInf) {
      CHECK_THROWS_AS(heuristic_bound(g, s, f, d), Error);
      continue;
    }
    CHECK(heuristic_bound(g, s, f, d) == best);
  }
}

TEST_CASE("random ensembles match clique enumeration") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, trial % 2 == 0 ? 0u : 1u, 3, true});
    Aggregation agg = trial % 3 == 0 ? Aggregation::kSum : Aggregation::kMean;
    PostLink post = trial % 4 == 1 ? PostLink::kSigmoid : PostLink::kIdentity;
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 1 + rng() % 4, 5, agg, post);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 1 + rng() % 5);
    CertificationSet set = FullSpace{};
    if (trial % 3 == 1) set = BallUnion{devcert::testing::random_points(rng, space, 4), 0.3, Norm::kLinf};
    if (trial % 3 == 2) set = FiniteSet{devcert::testing::random_points(rng, space, 6)};
    DeviationFn d = trial % 2 == 0 ? DeviationFn::abs_diff() : devcert::testing::random_monotone_deviation(rng);
    auto oracle = devcert::testing::clique_oracle(f, f0, d, set);
    CertResult r = certify_ensemble_vs_tree(f, f0, d, set);
    CHECK(r.exact);
    CHECK(std::abs(r.upper - oracle.max_deviation) <= 1e-9);
    if (r.signed_max) {
      CHECK(std::abs(*r.signed_max - oracle.signed_max) <= 1e-9);
      CHECK(std::abs(*r.signed_min - oracle.signed_min) <= 1e-9);
      CHECK(r.upper == doctest::Approx(std::max(std::abs(*r.signed_max), std::abs(*r.signed_min))));
    }
  }
}

TEST_CASE("anytime bounds bracket the exact value") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, 0, 3, true});
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 4, 5);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 5);
    auto d = DeviationFn::abs_diff();
    double exact = devcert::testing::clique_oracle(f, f0, d, FullSpace{}).max_deviation;
    std::vector<BoundsSnapshot> snaps;
    EnsembleOptions options;
    options.observer = [&](const BoundsSnapshot& s) { snaps.push_back(s); };
    certify_ensemble_vs_tree(f, f0, d, FullSpace{}, options);
    REQUIRE_FALSE(snaps.empty());
    for (std::size_t i = 0; i < snaps.size(); ++i) {
      CHECK(snaps[i].lower <= exact + 1e-12);
      CHECK(snaps[i].upper >= exact - 1e-12);
      if (i > 0) {
        CHECK(snaps[i].lower >= snaps[i - 1].lower);
        CHECK(snaps[i].upper <= snaps[i - 1].upper);
      }
    }
  }
}

TEST_CASE("budget expiry still yields a sound interval") {
  Rng rng(15);
  FeatureSpace space = devcert::testing::random_space(rng, {3, 0, 3, true});
  TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 4, 6);
  DecisionTree f0 = devcert::testing::random_tree(rng, space, 5);
  auto d = DeviationFn::abs_diff();
  double exact = devcert::testing::clique_oracle(f, f0, d, FullSpace{}).max_deviation;
  for (std::uint64_t limit : {1u, 3u, 10u, 30u}) {
    EnsembleOptions options;
    options.node_limit = limit;
    CertResult r = certify_ensemble_vs_tree(f, f0, d, FullSpace{}, options);
    CHECK(r.lower <= exact + 1e-12);
    CHECK(r.upper >= exact - 1e-12);
    if (r.budget_expired) CHECK_FALSE(r.exact);
  }
}

TEST_CASE("pruning never completes more cliques than exist") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, 0, 3, true});
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 4, 6);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 5);
    std::uint64_t all = devcert::testing::count_cliques(f, f0);
    EnsembleOptions off;
    off.prune = false;
    auto d = DeviationFn::custom([](double y, double y0) { return std::max(y - y0, 0.0); }, {true, false, false},
                                 "excess");
    CertResult unpruned = certify_ensemble_vs_tree(f, f0, d, FullSpace{}, off);
    CertResult pruned = certify_ensemble_vs_tree(f, f0, d, FullSpace{});
    CHECK(unpruned.stats.cliques_completed == all);
    CHECK(pruned.stats.cliques_completed <= all);
    CHECK(pruned.upper == unpruned.upper);
  }
}

TEST_CASE("parallel search agrees with the single worker") {
  Rng rng(19);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, 1, 3, true});
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 5, 6);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 6);
    EnsembleOptions options;
    options.threads = 4;
    auto d = DeviationFn::abs_diff();
    CHECK(certify_ensemble_vs_tree(f, f0, d, FullSpace{}, options).upper ==
          certify_ensemble_vs_tree(f, f0, d, FullSpace{}).upper);
  }
}

TEST_CASE("nested certification sets give nested ensemble values") {
  Rng rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {2, 1, 3, true});
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, 3, 6);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 6);
    auto centers = devcert::testing::random_points(rng, space, 3);
    auto d = DeviationFn::abs_diff();
    double prev = certify_ensemble_vs_tree(f, f0, d, FiniteSet{centers}).upper;
    for (double r : {0.0, 0.2, 0.6, 2.0}) {
      double v = certify_ensemble_vs_tree(f, f0, d, BallUnion{centers, r, Norm::kLinf}).upper;
      CHECK(v >= prev - 1e-12);
      prev = v;
    }
    CHECK(certify_ensemble_vs_tree(f, f0, d, FullSpace{}).upper >= prev - 1e-12);
  }
}
