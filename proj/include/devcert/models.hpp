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

// Model classes: decision trees, rule lists, additive models (GLM/GAM), tree
// ensembles and rule ensembles, all over normalized coordinates.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "devcert/core.hpp"

namespace devcert {

struct Leaf {
  Box region;
  double value = 0.0;
};

// Internal node: continuous features go left when x <= threshold,
// categorical features go left when x is in left_categories.
struct SplitNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  CategorySet left_categories;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaves only

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const SplitNode&, const SplitNode&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;

  // Node 0 is the root. Leaves are flattened in depth-first, left-first order.
  static DecisionTree from_nodes(FeatureSpace space, std::vector<SplitNode> nodes);
  // Leaf regions must partition the feature space (see validate_partition).
  static DecisionTree from_leaves(FeatureSpace space, std::vector<Leaf> leaves);
  static DecisionTree constant(FeatureSpace space, double value);
  static DecisionTree stump(FeatureSpace space, std::size_t feature, double threshold, double left, double right);

  double predict(const Point& x) const;
  // Root-to-leaf descent when the structure is known, otherwise first leaf
  // whose region contains x.
  std::size_t leaf_index(const Point& x) const;
  // First leaf whose region contains x, ignoring structure.
  std::optional<std::size_t> lookup_leaf(const Point& x) const;

  const FeatureSpace& space() const { return space_; }
  const std::vector<Leaf>& leaves() const { return leaves_; }
  std::size_t num_leaves() const { return leaves_.size(); }
  bool has_structure() const { return !nodes_.empty(); }
  const std::vector<SplitNode>& nodes() const { return nodes_; }

  template <typename Fn>
  DecisionTree map_values(Fn fn) const {
    DecisionTree out = *this;
    for (auto& leaf : out.leaves_) leaf.value = fn(leaf.value);
    for (auto& node : out.nodes_) {
      if (node.is_leaf()) node.value = fn(node.value);
    }
    return out;
  }

  friend bool operator==(const DecisionTree& a, const DecisionTree& b);

 private:
  FeatureSpace space_;
  std::vector<SplitNode> nodes_;
  std::vector<Leaf> leaves_;
  std::vector<int> node_leaf_;  // node id -> leaf index (or -1)
};

// Returns a description of the first violation, if any: leaves outside the
// space, overlapping leaves (intersections of positive measure), or leaves
// that fail to cover the space (total volume short of the space's volume).
std::optional<std::string> validate_partition(const FeatureSpace& space, const std::vector<Leaf>& leaves);

// Single-feature predicate.
struct Condition {
  enum class Op { kLessEqual, kGreater, kIn };
  std::size_t feature = 0;
  Op op = Op::kLessEqual;
  double threshold = 0.0;
  CategorySet categories;

  bool holds(const Point& x) const;
  Condition negated() const;
  friend bool operator==(const Condition&, const Condition&) = default;
};

struct Rule {
  std::vector<Condition> conditions;  // conjunction
  double output = 0.0;
  friend bool operator==(const Rule&, const Rule&) = default;
};

class RuleList {
 public:
  RuleList() = default;
  RuleList(FeatureSpace space, std::vector<Rule> rules, double default_output);

  double predict(const Point& x) const;
  const FeatureSpace& space() const { return space_; }
  const std::vector<Rule>& rules() const { return rules_; }
  double default_output() const { return default_output_; }
  friend bool operator==(const RuleList&, const RuleList&) = default;

 private:
  FeatureSpace space_;
  std::vector<Rule> rules_;
  double default_output_ = 0.0;
};

struct WeightedRule {
  std::vector<Condition> antecedent;
  double weight = 0.0;
  friend bool operator==(const WeightedRule&, const WeightedRule&) = default;
};

class RuleEnsemble {
 public:
  RuleEnsemble() = default;
  RuleEnsemble(FeatureSpace space, double intercept, std::vector<WeightedRule> rules);

  double predict(const Point& x) const;
  const FeatureSpace& space() const { return space_; }
  double intercept() const { return intercept_; }
  const std::vector<WeightedRule>& rules() const { return rules_; }
  friend bool operator==(const RuleEnsemble&, const RuleEnsemble&) = default;

 private:
  FeatureSpace space_;
  double intercept_ = 0.0;
  std::vector<WeightedRule> rules_;
};

enum class Link { kIdentity, kLogit, kLog };

const char* to_string(Link link);
// g^{-1}
double link_inverse(Link link, double eta);
// g
double link_apply(Link link, double y);

struct LinearShape {
  double weight = 0.0;
  friend bool operator==(const LinearShape&, const LinearShape&) = default;
};

// values[i] applies on [breakpoints[i-1], breakpoints[i]), with the first and
// last pieces extending to the feature bounds.
struct PiecewiseConstantShape {
  std::vector<double> breakpoints;
  std::vector<double> values;
  friend bool operator==(const PiecewiseConstantShape&, const PiecewiseConstantShape&) = default;
};

struct CategoryTableShape {
  std::vector<double> values;  // indexed by category
  friend bool operator==(const CategoryTableShape&, const CategoryTableShape&) = default;
};

using Shape = std::variant<LinearShape, PiecewiseConstantShape, CategoryTableShape>;

struct Term {
  std::size_t feature = 0;
  Shape shape;
  double eval(double x) const;
  friend bool operator==(const Term&, const Term&) = default;
};

class AdditiveModel {
 public:
  AdditiveModel() = default;
  AdditiveModel(FeatureSpace space, double intercept, std::vector<Term> terms, Link link);

  // intercept + sum_j f_j(x_j)
  double link_score(const Point& x) const;
  double predict(const Point& x) const { return link_inverse(link_, link_score(x)); }

  const FeatureSpace& space() const { return space_; }
  double intercept() const { return intercept_; }
  const std::vector<Term>& terms() const { return terms_; }
  Link link() const { return link_; }
  bool all_linear() const;

  AdditiveModel with_link(Link link) const;
  // Term-wise difference this - other with identity link.
  AdditiveModel minus(const AdditiveModel& other) const;

  friend bool operator==(const AdditiveModel&, const AdditiveModel&) = default;

 private:
  FeatureSpace space_;
  double intercept_ = 0.0;
  std::vector<Term> terms_;
  Link link_ = Link::kIdentity;
};

enum class Aggregation { kMean, kSum };
enum class PostLink { kIdentity, kSigmoid };

const char* to_string(Aggregation agg);
const char* to_string(PostLink link);

class TreeEnsemble {
 public:
  TreeEnsemble() = default;
  TreeEnsemble(std::vector<DecisionTree> trees, Aggregation aggregation, PostLink post_link, double intercept = 0.0);

  double predict(const Point& x) const;
  // post_link(intercept + aggregate) for a given sum of per-tree leaf values.
  double score_from_sum(double leaf_sum) const;

  const FeatureSpace& space() const { return trees_.front().space(); }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  Aggregation aggregation() const { return aggregation_; }
  PostLink post_link() const { return post_link_; }
  double intercept() const { return intercept_; }
  TreeEnsemble with_post_link(PostLink link) const;
  friend bool operator==(const TreeEnsemble&, const TreeEnsemble&) = default;

 private:
  std::vector<DecisionTree> trees_;
  Aggregation aggregation_ = Aggregation::kMean;
  PostLink post_link_ = PostLink::kIdentity;
  double intercept_ = 0.0;
};

using Model = std::variant<DecisionTree, RuleList, AdditiveModel, TreeEnsemble, RuleEnsemble>;

Prediction predict(const Model& model, const Point& x);
const FeatureSpace& model_space(const Model& model);
const char* model_kind(const Model& model);

// One-sided tree equivalent to a rule list of single-feature rules.
DecisionTree rulelist_to_tree(const RuleList& rl);
// One one-sided tree per rule, summed, plus the intercept.
TreeEnsemble ruleensemble_to_ensemble(const RuleEnsemble& re);

// Indices of the leaves whose region meets the certification set (l_inf
// bounding balls are used for p in {1, 2}).
std::vector<std::size_t> tree_leaves_meeting(const DecisionTree& tree, const CertificationSet& set);

}  // namespace devcert
