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

#include "devcert/models.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <sstream>

#include "devcert/geometry.hpp"

namespace devcert {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

void check_condition(const FeatureSpace& space, const Condition& c) {
  if (c.feature >= space.size()) throw Error(ErrorKind::kSchemaError, "condition references unknown feature");
  bool cat = space.categorical(c.feature);
  if (c.op == Condition::Op::kIn) {
    if (!cat) throw Error(ErrorKind::kSchemaError, "'in' condition on continuous feature '" + space[c.feature].name + "'");
    if (c.categories.universe() != space.num_categories(c.feature)) {
      throw Error(ErrorKind::kSchemaError, "category set size mismatch for '" + space[c.feature].name + "'");
    }
  } else {
    if (cat) {
      throw Error(ErrorKind::kSchemaError, "threshold condition on categorical feature '" + space[c.feature].name + "'");
    }
    if (!std::isfinite(c.threshold)) throw Error(ErrorKind::kSchemaError, "non-finite threshold");
  }
}

bool conjunction_holds(const std::vector<Condition>& conds, const Point& x) {
  return std::all_of(conds.begin(), conds.end(), [&](const Condition& c) { return c.holds(x); });
}

// Per-dimension measure used by the partition check; dimensions whose full
// range is degenerate carry no measure.
bool positive_overlap(const Box& a, const Box& b, const Box& full) {
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a.categorical(j)) {
      if (!a.categories(j).meets(b.categories(j))) return false;
    } else if (full.interval(j).width() > 0) {
      double lo = std::max(a.interval(j).lo, b.interval(j).lo);
      double hi = std::min(a.interval(j).hi, b.interval(j).hi);
      if (!(lo < hi)) return false;
    } else if (!a.interval(j).meets(b.interval(j))) {
      return false;
    }
  }
  return true;
}

double measure(const Box& b, const Box& full) {
  if (b.empty()) return 0.0;
  double m = 1.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    if (b.categorical(j)) {
      m *= static_cast<double>(b.categories(j).count());
    } else if (full.interval(j).width() > 0) {
      auto iv = b.interval(j).intersect(full.interval(j));
      m *= iv.width();
    }
  }
  return m;
}

}  // namespace

// ------------------------------------------------------------ DecisionTree

DecisionTree DecisionTree::from_nodes(FeatureSpace space, std::vector<SplitNode> nodes) {
  if (nodes.empty()) throw Error(ErrorKind::kSchemaError, "tree has no nodes");
  const int n = static_cast<int>(nodes.size());
  std::vector<int> parents(nodes.size(), 0);
  for (int i = 0; i < n; ++i) {
    const auto& node = nodes[i];
    if (node.is_leaf()) {
      if (!std::isfinite(node.value)) throw Error(ErrorKind::kSchemaError, "non-finite leaf value");
      continue;
    }
    if (static_cast<std::size_t>(node.feature) >= space.size()) {
      throw Error(ErrorKind::kSchemaError, "node " + std::to_string(i) + " splits on unknown feature");
    }
    if (node.left <= 0 || node.right <= 0 || node.left >= n || node.right >= n || node.left == node.right) {
      throw Error(ErrorKind::kSchemaError, "node " + std::to_string(i) + " has invalid children");
    }
    ++parents[node.left];
    ++parents[node.right];
    if (space.categorical(node.feature)) {
      if (node.left_categories.universe() != space.num_categories(node.feature)) {
        throw Error(ErrorKind::kSchemaError, "node " + std::to_string(i) + " category set size mismatch");
      }
    } else if (!std::isfinite(node.threshold)) {
      throw Error(ErrorKind::kSchemaError, "node " + std::to_string(i) + " has non-finite threshold");
    }
  }
  if (parents[0] != 0) throw Error(ErrorKind::kSchemaError, "root node must not be a child");
  for (int i = 1; i < n; ++i) {
    if (parents[i] != 1) throw Error(ErrorKind::kSchemaError, "node " + std::to_string(i) + " is not a tree node");
  }

  DecisionTree tree;
  tree.space_ = std::move(space);
  tree.nodes_ = std::move(nodes);
  tree.node_leaf_.assign(tree.nodes_.size(), -1);
  // Iterative DFS (left first); parent counts above rule out cycles reachable
  // from the root, and unreachable nodes would have no parent.
  struct Frame {
    int node;
    Box region;
  };
  std::vector<Frame> stack{{0, Box::full(tree.space_)}};
  std::size_t visited = 0;
  while (!stack.empty()) {
    Frame frame = std::move(stack.back());
    stack.pop_back();
    if (++visited > tree.nodes_.size()) throw Error(ErrorKind::kSchemaError, "tree contains a cycle");
    const auto& node = tree.nodes_[frame.node];
    if (node.is_leaf()) {
      tree.node_leaf_[frame.node] = static_cast<int>(tree.leaves_.size());
      tree.leaves_.push_back({std::move(frame.region), node.value});
      continue;
    }
    Box left = frame.region;
    Box right = std::move(frame.region);
    auto f = static_cast<std::size_t>(node.feature);
    if (tree.space_.categorical(f)) {
      left.categories(f) = left.categories(f).intersect(node.left_categories);
      right.categories(f) = right.categories(f).intersect(node.left_categories.complement());
    } else {
      left.interval(f) = left.interval(f).intersect(Interval{-kInf, node.threshold, false, false});
      right.interval(f) = right.interval(f).intersect(Interval{node.threshold, kInf, true, false});
    }
    stack.push_back({node.right, std::move(right)});
    stack.push_back({node.left, std::move(left)});
  }
  if (visited != tree.nodes_.size()) throw Error(ErrorKind::kSchemaError, "tree has unreachable nodes");
  return tree;
}

DecisionTree DecisionTree::from_leaves(FeatureSpace space, std::vector<Leaf> leaves) {
  if (leaves.empty()) throw Error(ErrorKind::kSchemaError, "tree has no leaves");
  for (const auto& leaf : leaves) {
    if (!std::isfinite(leaf.value)) throw Error(ErrorKind::kSchemaError, "non-finite leaf value");
  }
  if (auto violation = validate_partition(space, leaves)) throw Error(ErrorKind::kSchemaError, *violation);
  DecisionTree tree;
  tree.space_ = std::move(space);
  tree.leaves_ = std::move(leaves);
  return tree;
}

DecisionTree DecisionTree::constant(FeatureSpace space, double value) {
  SplitNode leaf;
  leaf.value = value;
  return from_nodes(std::move(space), {leaf});
}

DecisionTree DecisionTree::stump(FeatureSpace space, std::size_t feature, double threshold, double left,
                                 double right) {
  SplitNode root;
  root.feature = static_cast<int>(feature);
  root.threshold = threshold;
  root.left = 1;
  root.right = 2;
  SplitNode l;
  l.value = left;
  SplitNode r;
  r.value = right;
  return from_nodes(std::move(space), {root, l, r});
}

std::optional<std::size_t> DecisionTree::lookup_leaf(const Point& x) const {
  for (std::size_t i = 0; i < leaves_.size(); ++i) {
    if (leaves_[i].region.contains(x)) return i;
  }
  return std::nullopt;
}

std::size_t DecisionTree::leaf_index(const Point& x) const {
  if (x.size() != space_.size()) throw Error(ErrorKind::kSchemaMismatch, "point arity mismatch");
  if (nodes_.empty()) {
    auto leaf = lookup_leaf(x);
    if (!leaf) throw Error(ErrorKind::kSchemaMismatch, "point outside every leaf");
    return *leaf;
  }
  int id = 0;
  while (!nodes_[id].is_leaf()) {
    const auto& node = nodes_[id];
    bool go_left = space_.categorical(node.feature)
                       ? node.left_categories.contains(static_cast<std::size_t>(x[node.feature]))
                       : x[node.feature] <= node.threshold;
    id = go_left ? node.left : node.right;
  }
  return static_cast<std::size_t>(node_leaf_[id]);
}

double DecisionTree::predict(const Point& x) const { return leaves_[leaf_index(x)].value; }

bool operator==(const DecisionTree& a, const DecisionTree& b) {
  if (!(a.space_ == b.space_) || a.nodes_ != b.nodes_ || a.leaves_.size() != b.leaves_.size()) return false;
  for (std::size_t i = 0; i < a.leaves_.size(); ++i) {
    if (!(a.leaves_[i].region == b.leaves_[i].region) || a.leaves_[i].value != b.leaves_[i].value) return false;
  }
  return true;
}

std::optional<std::string> validate_partition(const FeatureSpace& space, const std::vector<Leaf>& leaves) {
  Box full = Box::full(space);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const Box& r = leaves[i].region;
    if (r.size() != space.size()) return "leaf " + std::to_string(i) + " has wrong arity";
    for (std::size_t j = 0; j < r.size(); ++j) {
      if (r.categorical(j) != space.categorical(j)) return "leaf " + std::to_string(i) + " feature kind mismatch";
    }
    if (!r.subset_of(full)) return "leaf " + std::to_string(i) + " extends outside the feature space";
  }
  for (std::size_t a = 0; a < leaves.size(); ++a) {
    if (leaves[a].region.empty()) continue;
    for (std::size_t b = a + 1; b < leaves.size(); ++b) {
      if (leaves[b].region.empty()) continue;
      if (positive_overlap(leaves[a].region, leaves[b].region, full)) {
        return "partition invariant violated: leaves " + std::to_string(a) + " and " + std::to_string(b) +
               " overlap";
      }
    }
  }
  double total = 0.0;
  for (const auto& leaf : leaves) total += measure(leaf.region, full);
  double target = measure(full, full);
  if (std::abs(total - target) > 1e-9 * std::max(1.0, target)) {
    std::ostringstream msg;
    msg << "partition invariant violated: leaves cover measure " << total << " of " << target;
    return msg.str();
  }
  return std::nullopt;
}

// --------------------------------------------------------------- Rule lists

bool Condition::holds(const Point& x) const {
  switch (op) {
    case Op::kLessEqual: return x[feature] <= threshold;
    case Op::kGreater: return x[feature] > threshold;
    case Op::kIn: return categories.contains(static_cast<std::size_t>(x[feature]));
  }
  return false;
}

Condition Condition::negated() const {
  Condition c = *this;
  switch (op) {
    case Op::kLessEqual: c.op = Op::kGreater; break;
    case Op::kGreater: c.op = Op::kLessEqual; break;
    case Op::kIn: c.categories = categories.complement(); break;
  }
  return c;
}

RuleList::RuleList(FeatureSpace space, std::vector<Rule> rules, double default_output)
    : space_(std::move(space)), rules_(std::move(rules)), default_output_(default_output) {
  for (const auto& rule : rules_) {
    for (const auto& c : rule.conditions) check_condition(space_, c);
    if (!std::isfinite(rule.output)) throw Error(ErrorKind::kSchemaError, "non-finite rule output");
  }
  if (!std::isfinite(default_output_)) throw Error(ErrorKind::kSchemaError, "non-finite default output");
}

double RuleList::predict(const Point& x) const {
  if (x.size() != space_.size()) throw Error(ErrorKind::kSchemaMismatch, "point arity mismatch");
  for (const auto& rule : rules_) {
    if (conjunction_holds(rule.conditions, x)) return rule.output;
  }
  return default_output_;
}

RuleEnsemble::RuleEnsemble(FeatureSpace space, double intercept, std::vector<WeightedRule> rules)
    : space_(std::move(space)), intercept_(intercept), rules_(std::move(rules)) {
  for (const auto& rule : rules_) {
    for (const auto& c : rule.antecedent) check_condition(space_, c);
    if (!std::isfinite(rule.weight)) throw Error(ErrorKind::kSchemaError, "non-finite rule weight");
  }
}

double RuleEnsemble::predict(const Point& x) const {
  if (x.size() != space_.size()) throw Error(ErrorKind::kSchemaMismatch, "point arity mismatch");
  double total = intercept_;
  for (const auto& rule : rules_) {
    if (conjunction_holds(rule.antecedent, x)) total += rule.weight;
  }
  return total;
}

DecisionTree rulelist_to_tree(const RuleList& rl) {
  std::vector<SplitNode> nodes;
  // Each rule adds a split whose "condition true" child is a leaf and whose
  // other child continues the chain.
  auto add_leaf = [&nodes](double value) {
    SplitNode leaf;
    leaf.value = value;
    nodes.push_back(leaf);
    return static_cast<int>(nodes.size() - 1);
  };
  std::vector<std::pair<int, bool>> pending;  // (split node, chain goes left)
  // The first node created is the root, so node 0 is always the root.
  auto attach = [&](int child) {
    if (pending.empty()) return;
    auto [parent, left] = pending.back();
    pending.pop_back();
    (left ? nodes[parent].left : nodes[parent].right) = child;
  };
  bool terminated = false;
  for (const auto& rule : rl.rules()) {
    if (rule.conditions.size() > 1) {
      throw Error(ErrorKind::kUnsupportedCondition, "rule list conversion needs single-feature rules");
    }
    if (rule.conditions.empty()) {
      attach(add_leaf(rule.output));
      terminated = true;
      break;
    }
    const Condition& c = rule.conditions.front();
    nodes.push_back(SplitNode{});
    int split = static_cast<int>(nodes.size() - 1);
    attach(split);
    nodes[split].feature = static_cast<int>(c.feature);
    int leaf = add_leaf(rule.output);
    switch (c.op) {
      case Condition::Op::kLessEqual:
        nodes[split].threshold = c.threshold;
        nodes[split].left = leaf;
        pending.push_back({split, false});
        break;
      case Condition::Op::kGreater:
        nodes[split].threshold = c.threshold;
        nodes[split].right = leaf;
        pending.push_back({split, true});
        break;
      case Condition::Op::kIn:
        nodes[split].left_categories = c.categories;
        nodes[split].left = leaf;
        pending.push_back({split, false});
        break;
    }
  }
  if (!terminated) attach(add_leaf(rl.default_output()));

  return DecisionTree::from_nodes(rl.space(), std::move(nodes));
}

TreeEnsemble ruleensemble_to_ensemble(const RuleEnsemble& re) {
  std::vector<DecisionTree> trees;
  for (const auto& rule : re.rules()) {
    std::vector<Rule> chain;
    for (const auto& c : rule.antecedent) chain.push_back(Rule{{c.negated()}, 0.0});
    trees.push_back(rulelist_to_tree(RuleList(re.space(), std::move(chain), rule.weight)));
  }
  if (trees.empty()) trees.push_back(DecisionTree::constant(re.space(), 0.0));
  return TreeEnsemble(std::move(trees), Aggregation::kSum, PostLink::kIdentity, re.intercept());
}

std::vector<std::size_t> tree_leaves_meeting(const DecisionTree& tree, const CertificationSet& set) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tree.leaves().size(); ++i) {
    if (box_meets_certset(tree.space(), tree.leaves()[i].region, set, NormPolicy::kBoundingBox).nonempty) {
      out.push_back(i);
    }
  }
  return out;
}

// ---------------------------------------------------------- Additive models

const char* to_string(Link link) {
  switch (link) {
    case Link::kIdentity: return "identity";
    case Link::kLogit: return "logit";
    case Link::kLog: return "log";
  }
  return "?";
}

double link_inverse(Link link, double eta) {
  switch (link) {
    case Link::kIdentity: return eta;
    case Link::kLogit: return sigmoid(eta);
    case Link::kLog: return std::exp(eta);
  }
  return eta;
}

double link_apply(Link link, double y) {
  switch (link) {
    case Link::kIdentity: return y;
    case Link::kLogit: return std::log(y / (1.0 - y));
    case Link::kLog: return std::log(y);
  }
  return y;
}

double Term::eval(double x) const {
  if (const auto* lin = std::get_if<LinearShape>(&shape)) return lin->weight * x;
  if (const auto* pwc = std::get_if<PiecewiseConstantShape>(&shape)) {
    auto idx = std::upper_bound(pwc->breakpoints.begin(), pwc->breakpoints.end(), x) - pwc->breakpoints.begin();
    return pwc->values[static_cast<std::size_t>(idx)];
  }
  const auto& table = std::get<CategoryTableShape>(shape);
  return table.values.at(static_cast<std::size_t>(x));
}

AdditiveModel::AdditiveModel(FeatureSpace space, double intercept, std::vector<Term> terms, Link link)
    : space_(std::move(space)), intercept_(intercept), terms_(std::move(terms)), link_(link) {
  if (!std::isfinite(intercept_)) throw Error(ErrorKind::kSchemaError, "non-finite intercept");
  for (const auto& term : terms_) {
    if (term.feature >= space_.size()) throw Error(ErrorKind::kSchemaError, "term references unknown feature");
    const std::string& name = space_[term.feature].name;
    bool cat = space_.categorical(term.feature);
    if (const auto* lin = std::get_if<LinearShape>(&term.shape)) {
      if (cat) throw Error(ErrorKind::kSchemaError, "linear term on categorical feature '" + name + "'");
      if (!std::isfinite(lin->weight)) throw Error(ErrorKind::kSchemaError, "non-finite weight for '" + name + "'");
    } else if (const auto* pwc = std::get_if<PiecewiseConstantShape>(&term.shape)) {
      if (cat) throw Error(ErrorKind::kSchemaError, "piecewise term on categorical feature '" + name + "'");
      if (pwc->values.size() != pwc->breakpoints.size() + 1) {
        throw Error(ErrorKind::kSchemaError, "piecewise term for '" + name + "' needs one more value than breakpoints");
      }
      Interval bounds = space_.normalized_bounds(term.feature);
      for (std::size_t i = 0; i < pwc->breakpoints.size(); ++i) {
        double b = pwc->breakpoints[i];
        if (!std::isfinite(b) || b < bounds.lo || b > bounds.hi) {
          throw Error(ErrorKind::kSchemaError, "breakpoint outside bounds for '" + name + "'");
        }
        if (i > 0 && !(pwc->breakpoints[i - 1] < b)) {
          throw Error(ErrorKind::kSchemaError, "breakpoints not strictly ascending for '" + name + "'");
        }
      }
      for (double v : pwc->values) {
        if (!std::isfinite(v)) throw Error(ErrorKind::kSchemaError, "non-finite piece value for '" + name + "'");
      }
    } else {
      const auto& table = std::get<CategoryTableShape>(term.shape);
      if (!cat) throw Error(ErrorKind::kSchemaError, "category table on continuous feature '" + name + "'");
      if (table.values.size() != space_.num_categories(term.feature)) {
        throw Error(ErrorKind::kSchemaError, "category table size mismatch for '" + name + "'");
      }
      for (double v : table.values) {
        if (!std::isfinite(v)) throw Error(ErrorKind::kSchemaError, "non-finite table value for '" + name + "'");
      }
    }
  }
}

double AdditiveModel::link_score(const Point& x) const {
  if (x.size() != space_.size()) throw Error(ErrorKind::kSchemaMismatch, "point arity mismatch");
  double eta = intercept_;
  for (const auto& term : terms_) eta += term.eval(x[term.feature]);
  return eta;
}

bool AdditiveModel::all_linear() const {
  return std::all_of(terms_.begin(), terms_.end(),
                     [](const Term& t) { return std::holds_alternative<LinearShape>(t.shape); });
}

AdditiveModel AdditiveModel::with_link(Link link) const {
  AdditiveModel out = *this;
  out.link_ = link;
  return out;
}

AdditiveModel AdditiveModel::minus(const AdditiveModel& other) const {
  if (!(space_ == other.space_)) throw Error(ErrorKind::kSchemaMismatch, "additive models over different spaces");
  std::vector<Term> terms = terms_;
  for (Term t : other.terms_) {
    std::visit(
        [](auto& shape) {
          using S = std::decay_t<decltype(shape)>;
          if constexpr (std::is_same_v<S, LinearShape>) {
            shape.weight = -shape.weight;
          } else {
            for (auto& v : shape.values) v = -v;
          }
        },
        t.shape);
    terms.push_back(std::move(t));
  }
  return AdditiveModel(space_, intercept_ - other.intercept_, std::move(terms), Link::kIdentity);
}

// ----------------------------------------------------------- Tree ensembles

const char* to_string(Aggregation agg) { return agg == Aggregation::kMean ? "mean" : "sum"; }
const char* to_string(PostLink link) { return link == PostLink::kIdentity ? "identity" : "sigmoid"; }

TreeEnsemble::TreeEnsemble(std::vector<DecisionTree> trees, Aggregation aggregation, PostLink post_link,
                           double intercept)
    : trees_(std::move(trees)), aggregation_(aggregation), post_link_(post_link), intercept_(intercept) {
  if (trees_.empty()) throw Error(ErrorKind::kSchemaError, "ensemble needs at least one tree");
  for (const auto& t : trees_) {
    if (!(t.space() == trees_.front().space())) {
      throw Error(ErrorKind::kSchemaError, "ensemble trees use different feature spaces");
    }
  }
  if (!std::isfinite(intercept_)) throw Error(ErrorKind::kSchemaError, "non-finite intercept");
}

double TreeEnsemble::score_from_sum(double leaf_sum) const {
  double agg = aggregation_ == Aggregation::kMean ? leaf_sum / static_cast<double>(trees_.size()) : leaf_sum;
  double z = intercept_ + agg;
  return post_link_ == PostLink::kSigmoid ? sigmoid(z) : z;
}

double TreeEnsemble::predict(const Point& x) const {
  double sum = 0.0;
  for (const auto& t : trees_) sum += t.predict(x);
  return score_from_sum(sum);
}

TreeEnsemble TreeEnsemble::with_post_link(PostLink link) const {
  TreeEnsemble out = *this;
  out.post_link_ = link;
  return out;
}

// -------------------------------------------------------------- Model sum

Prediction predict(const Model& model, const Point& x) {
  check_point(model_space(model), x);
  return std::visit([&](const auto& m) { return Prediction::Score(m.predict(x)); }, model);
}

const FeatureSpace& model_space(const Model& model) {
  return std::visit([](const auto& m) -> const FeatureSpace& { return m.space(); }, model);
}

const char* model_kind(const Model& model) {
  switch (model.index()) {
    case 0: return "decision_tree";
    case 1: return "rule_list";
    case 2: return "additive";
    case 3: return "tree_ensemble";
    case 4: return "rule_ensemble";
  }
  return "?";
}

}  // namespace devcert
