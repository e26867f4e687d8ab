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

#include "devcert/geometry.hpp"
#include "devcert/models.hpp"
#include "support/random_models.hpp"

using namespace devcert;
using devcert::testing::Rng;

namespace {

FeatureSpace unit_space(std::size_t d) {
  Rng rng(0);
  return devcert::testing::random_space(rng, {d, 0, 3, false});
}

Condition le(std::size_t j, double t) { return {j, Condition::Op::kLessEqual, t, {}}; }
Condition gt(std::size_t j, double t) { return {j, Condition::Op::kGreater, t, {}}; }

// A random single-feature condition on a lattice threshold.
Condition random_condition(Rng& rng, const FeatureSpace& space) {
  std::size_t j = std::uniform_int_distribution<std::size_t>(0, space.size() - 1)(rng);
  if (space.categorical(j)) {
    CategorySet s(space.num_categories(j));
    for (std::size_t c = 0; c < space.num_categories(j); ++c) {
      if (rng() % 2 == 0) s.insert(c);
    }
    return {j, Condition::Op::kIn, 0.0, s};
  }
  Interval b = space.normalized_bounds(j);
  double t = b.lo + (b.hi - b.lo) * static_cast<double>(1 + rng() % 15) / 16.0;
  return rng() % 2 == 0 ? le(j, t) : gt(j, t);
}

}  // namespace

TEST_CASE("predict examples") {
  FeatureSpace s1 = unit_space(1);
  auto stump = DecisionTree::stump(s1, 0, 0.5, 0.2, 0.8);
  CHECK(stump.predict({0.3}) == 0.2);
  CHECK(stump.predict({0.5}) == 0.2);
  CHECK(stump.predict({0.7}) == 0.8);

  FeatureSpace s2 = unit_space(2);
  AdditiveModel glm(s2, 0.0, {{0, LinearShape{1.0}}, {1, LinearShape{2.0}}}, Link::kIdentity);
  CHECK(glm.predict({1.0, 1.0}) == 3.0);

  TreeEnsemble forest({DecisionTree::stump(s1, 0, 0.5, 0.0, 1.0), DecisionTree::stump(s1, 0, 0.3, 0.0, 1.0)},
                      Aggregation::kMean, PostLink::kIdentity);
  CHECK(forest.predict({0.4}) == 0.5);
}

TEST_CASE("predict rejects points of the wrong arity") {
  FeatureSpace s1 = unit_space(1);
  Model m = DecisionTree::stump(s1, 0, 0.5, 0.2, 0.8);
  try {
    predict(m, {0.1, 0.2});
    FAIL("expected SchemaMismatch");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSchemaMismatch);
  }
}

TEST_CASE("rule list conversion examples") {
  FeatureSpace s = unit_space(2);
  RuleList two(s, {{{le(0, 0.3)}, 1.0}, {{gt(1, 0.6)}, 2.0}}, 3.0);
  DecisionTree t = rulelist_to_tree(two);
  CHECK(t.num_leaves() == 3);
  CHECK(t.predict({0.2, 0.9}) == 1.0);
  CHECK(t.predict({0.4, 0.9}) == 2.0);
  CHECK(t.predict({0.4, 0.1}) == 3.0);

  RuleList only_default(s, {}, 0.25);
  DecisionTree c = rulelist_to_tree(only_default);
  CHECK(c.num_leaves() == 1);
  CHECK(c.predict({0.9, 0.9}) == 0.25);

  RuleList multi(s, {{{le(0, 0.3), le(1, 0.3)}, 1.0}}, 0.0);
  try {
    rulelist_to_tree(multi);
    FAIL("expected UnsupportedCondition");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupportedCondition);
  }
}

TEST_CASE("rule ensemble conversion examples") {
  FeatureSpace s = unit_space(2);
  RuleEnsemble re(s, 0.1, {{{gt(0, 0.0), le(1, 1.0)}, 0.7}, {{le(0, 0.5)}, -0.2}});
  TreeEnsemble e = ruleensemble_to_ensemble(re);
  REQUIRE(e.trees().size() == 2);
  CHECK(e.trees()[0].num_leaves() == 3);
  CHECK(e.trees()[1].num_leaves() == 2);
  CHECK(e.aggregation() == Aggregation::kSum);
  CHECK(e.predict({0.4, 0.5}) == doctest::Approx(0.1 + 0.7 - 0.2).epsilon(1e-15));
  CHECK(e.predict({0.0, 0.5}) == doctest::Approx(0.1 - 0.2).epsilon(1e-15));
}

TEST_CASE("conversions preserve predictions on random points") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, 1, 4, true});
    std::vector<Rule> rules;
    for (int i = 0; i < 5; ++i) rules.push_back({{random_condition(rng, space)}, devcert::testing::random_value(rng)});
    RuleList rl(space, rules, -1.0);
    DecisionTree t = rulelist_to_tree(rl);
    CHECK(t.num_leaves() == 6);

    std::vector<WeightedRule> weighted;
    for (int i = 0; i < 4; ++i) {
      WeightedRule w;
      std::size_t degree = 1 + rng() % 3;
      for (std::size_t k = 0; k < degree; ++k) w.antecedent.push_back(random_condition(rng, space));
      w.weight = devcert::testing::random_value(rng) - 0.5;
      weighted.push_back(w);
    }
    RuleEnsemble re(space, 0.3, weighted);
    TreeEnsemble e = ruleensemble_to_ensemble(re);
    for (std::size_t k = 0; k < weighted.size(); ++k) {
      CHECK(e.trees()[k].num_leaves() == weighted[k].antecedent.size() + 1);
    }
    for (int i = 0; i < 500; ++i) {
      Point x = devcert::testing::random_point(rng, space);
      CHECK(t.predict(x) == rl.predict(x));
      CHECK(std::abs(e.predict(x) - re.predict(x)) <= 1e-12);
    }
  }
}

TEST_CASE("leaf regions partition the space") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {2, 1, 3, true});
    DecisionTree t = devcert::testing::random_tree(rng, space, 12);
    CHECK_FALSE(validate_partition(space, t.leaves()).has_value());
    for (int i = 0; i < 500; ++i) {
      Point x = devcert::testing::random_point(rng, space);
      int hits = 0;
      for (const auto& leaf : t.leaves()) hits += leaf.region.contains(x) ? 1 : 0;
      CHECK(hits == 1);
      CHECK(t.leaves()[t.leaf_index(x)].region.contains(x));
      CHECK(t.lookup_leaf(x) == t.leaf_index(x));
    }
  }
}

TEST_CASE("validate_partition reports overlaps and gaps") {
  FeatureSpace s = unit_space(1);
  Box left = Box::full(s);
  left.interval(0) = {0.0, 0.6, false, false};
  Box right = Box::full(s);
  right.interval(0) = {0.4, 1.0, true, false};
  auto overlap = validate_partition(s, {{left, 0.0}, {right, 1.0}});
  REQUIRE(overlap.has_value());
  CHECK(overlap->find("overlap") != std::string::npos);

  right.interval(0) = {0.7, 1.0, true, false};
  CHECK(validate_partition(s, {{left, 0.0}, {right, 1.0}}).has_value());

  right.interval(0) = {0.6, 1.0, true, false};
  CHECK_FALSE(validate_partition(s, {{left, 0.0}, {right, 1.0}}).has_value());
  CHECK_THROWS_AS(DecisionTree::from_leaves(s, {{left, 0.0}}), Error);
}

TEST_CASE("additive prediction does not depend on term order") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, 2, 3, true});
    AdditiveModel f = devcert::testing::random_gam(rng, space, {6, true, Link::kLogit});
    std::vector<Term> terms = f.terms();
    std::shuffle(terms.begin(), terms.end(), rng);
    AdditiveModel g(space, f.intercept(), terms, f.link());
    for (int i = 0; i < 200; ++i) {
      Point x = devcert::testing::random_point(rng, space);
      CHECK(std::abs(f.predict(x) - g.predict(x)) <= 1e-12);
    }
  }
}

TEST_CASE("mean ensemble predictions stay within the leaf value range") {
  Rng rng(13);
  for (int trial = 0; trial < 20; ++trial) {
    FeatureSpace space = devcert::testing::random_space(rng, {3, 1, 3, true});
    TreeEnsemble e = devcert::testing::random_ensemble(rng, space, 4, 8);
    double lo = kInf;
    double hi = -kInf;
    for (const auto& t : e.trees()) {
      for (const auto& leaf : t.leaves()) {
        lo = std::min(lo, leaf.value);
        hi = std::max(hi, leaf.value);
      }
    }
    for (int i = 0; i < 200; ++i) {
      double y = e.predict(devcert::testing::random_point(rng, space));
      CHECK(y >= lo - 1e-12);
      CHECK(y <= hi + 1e-12);
    }
  }
}

TEST_CASE("piecewise-constant pieces are closed on the left") {
  FeatureSpace s = unit_space(1);
  Term t{0, PiecewiseConstantShape{{0.5}, {0.1, 0.4}}};
  CHECK(t.eval(0.49) == 0.1);
  CHECK(t.eval(0.5) == 0.4);
  CHECK(t.eval(1.0) == 0.4);
}

TEST_CASE("tree_leaves_meeting examples") {
  Rng rng(31);
  FeatureSpace space = unit_space(2);
  DecisionTree t = devcert::testing::random_tree(rng, space, 10);
  std::vector<std::size_t> all(t.num_leaves());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  CHECK(tree_leaves_meeting(t, FullSpace{}) == all);

  Point x{0.37, 0.81};
  CHECK(tree_leaves_meeting(t, FiniteSet{{x}}) == std::vector<std::size_t>{t.leaf_index(x)});

  // Leaves within 0.1 (l_inf) of the center, found on a dense grid that
  // includes the ball faces.
  Point c{0.42, 0.55};
  const int n = 400;
  std::vector<bool> seen(t.num_leaves(), false);
  for (int i = 0; i <= n; ++i) {
    for (int k = 0; k <= n; ++k) {
      Point p{c[0] - 0.1 + 0.2 * i / n, c[1] - 0.1 + 0.2 * k / n};
      if (p[0] < 0 || p[0] > 1 || p[1] < 0 || p[1] > 1) continue;
      seen[t.leaf_index(p)] = true;
    }
  }
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i]) expected.push_back(i);
  }
  CHECK(tree_leaves_meeting(t, BallUnion{{c}, 0.1, Norm::kLinf}) == expected);
}
