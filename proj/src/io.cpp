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

#include "devcert/io.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace devcert {

using nlohmann::json;

namespace {

[[noreturn]] void schema_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::kSchemaError, (path.empty() ? std::string("/") : path) + ": " + what);
}

// A JSON object whose every field must be consumed; leftovers are reported as
// unknown fields.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) schema_error(path_, "expected an object");
  }

  std::string at(std::string_view key) const { return path_ + "/" + std::string(key); }

  const json* find(const char* key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.insert(key);
    return &*it;
  }
  const json& get(const char* key) {
    const json* v = find(key);
    if (!v) schema_error(at(key), "missing required field");
    return *v;
  }
  double number(const char* key) { return as_number(get(key), at(key)); }
  double number_or(const char* key, double fallback) {
    const json* v = find(key);
    return v ? as_number(*v, at(key)) : fallback;
  }
  std::string string(const char* key) { return as_string(get(key), at(key)); }
  std::string string_or(const char* key, const std::string& fallback) {
    const json* v = find(key);
    return v ? as_string(*v, at(key)) : fallback;
  }
  bool boolean_or(const char* key, bool fallback) {
    const json* v = find(key);
    if (!v) return fallback;
    if (!v->is_boolean()) schema_error(at(key), "expected a boolean");
    return v->get<bool>();
  }
  const json& array(const char* key) {
    const json& v = get(key);
    if (!v.is_array()) schema_error(at(key), "expected an array");
    return v;
  }

  void done() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) schema_error(at(it.key()), "unknown field '" + it.key() + "'");
    }
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) schema_error(path, "expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) schema_error(path, "expected a finite number");
    return d;
  }
  static std::string as_string(const json& v, const std::string& path) {
    if (!v.is_string()) schema_error(path, "expected a string");
    return v.get<std::string>();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

std::size_t feature_ref(const FeatureSpace& space, const json& v, const std::string& path) {
  std::string name = Fields::as_string(v, path);
  auto j = space.find(name);
  if (!j) schema_error(path, "unknown feature '" + name + "'");
  return *j;
}

CategorySet category_set(const FeatureSpace& space, std::size_t j, const json& v, const std::string& path) {
  if (!v.is_array()) schema_error(path, "expected an array of category names");
  CategorySet set(space.num_categories(j));
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::string name = Fields::as_string(v[i], path + "/" + std::to_string(i));
    auto idx = std::find(space[j].categories().categories.begin(), space[j].categories().categories.end(), name);
    if (idx == space[j].categories().categories.end()) {
      schema_error(path + "/" + std::to_string(i), "unknown category '" + name + "' of '" + space[j].name + "'");
    }
    set.insert(static_cast<std::size_t>(idx - space[j].categories().categories.begin()));
  }
  return set;
}

json category_names(const FeatureSpace& space, std::size_t j, const CategorySet& set) {
  json out = json::array();
  for (std::size_t c : set.members()) out.push_back(space[j].categories().categories[c]);
  return out;
}

// Schema errors raised by model constructors are re-labelled with the path.
template <typename Fn>
auto at_path(const std::string& path, Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kSchemaError) schema_error(path, e.what());
    throw;
  }
}

FeatureSpace parse_space(const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array of features");
  std::vector<FeatureSpec> specs;
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::string p = path + "/" + std::to_string(i);
    Fields f(j[i], p);
    FeatureSpec spec;
    spec.name = f.string("name");
    std::string kind = f.string("kind");
    if (kind == "continuous") {
      ContinuousSpec c;
      c.lo = f.number("lo");
      c.hi = f.number("hi");
      c.mean = f.number_or("mean", 0.0);
      c.std = f.number_or("std", 1.0);
      spec.kind = c;
    } else if (kind == "categorical") {
      CategoricalSpec c;
      const json& cats = f.array("categories");
      for (std::size_t k = 0; k < cats.size(); ++k) {
        c.categories.push_back(Fields::as_string(cats[k], f.at("categories") + "/" + std::to_string(k)));
      }
      spec.kind = c;
    } else {
      schema_error(f.at("kind"), "expected 'continuous' or 'categorical'");
    }
    f.done();
    specs.push_back(std::move(spec));
  }
  return at_path(path, [&] { return FeatureSpace(std::move(specs)); });
}

json space_to_json(const FeatureSpace& space) {
  json out = json::array();
  for (const auto& spec : space.features()) {
    json f;
    f["name"] = spec.name;
    if (spec.categorical()) {
      f["kind"] = "categorical";
      f["categories"] = spec.categories().categories;
    } else {
      const auto& c = spec.continuous();
      f["kind"] = "continuous";
      f["lo"] = c.lo;
      f["hi"] = c.hi;
      f["mean"] = c.mean;
      f["std"] = c.std;
    }
    out.push_back(std::move(f));
  }
  return out;
}

Condition parse_condition(const FeatureSpace& space, const json& j, const std::string& path) {
  Fields f(j, path);
  Condition c;
  c.feature = feature_ref(space, f.get("feature"), f.at("feature"));
  std::string op = f.string("op");
  if (op == "<=") {
    c.op = Condition::Op::kLessEqual;
    c.threshold = f.number("threshold");
  } else if (op == ">") {
    c.op = Condition::Op::kGreater;
    c.threshold = f.number("threshold");
  } else if (op == "in") {
    c.op = Condition::Op::kIn;
    if (!space.categorical(c.feature)) schema_error(f.at("op"), "'in' needs a categorical feature");
    c.categories = category_set(space, c.feature, f.get("categories"), f.at("categories"));
  } else {
    schema_error(f.at("op"), "expected '<=', '>' or 'in'");
  }
  if (op != "in" && space.categorical(c.feature)) schema_error(f.at("op"), "threshold on a categorical feature");
  f.done();
  return c;
}

json condition_to_json(const FeatureSpace& space, const Condition& c) {
  json out;
  out["feature"] = space[c.feature].name;
  switch (c.op) {
    case Condition::Op::kLessEqual:
      out["op"] = "<=";
      out["threshold"] = c.threshold;
      break;
    case Condition::Op::kGreater:
      out["op"] = ">";
      out["threshold"] = c.threshold;
      break;
    case Condition::Op::kIn:
      out["op"] = "in";
      out["categories"] = category_names(space, c.feature, c.categories);
      break;
  }
  return out;
}

std::vector<Condition> parse_conditions(const FeatureSpace& space, const json& j, const std::string& path) {
  if (!j.is_array()) schema_error(path, "expected an array of conditions");
  std::vector<Condition> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(parse_condition(space, j[i], path + "/" + std::to_string(i)));
  return out;
}

Box parse_region(const FeatureSpace& space, const json& j, const std::string& path) {
  Fields f(j, path);
  Box box = Box::full(space);
  for (std::size_t k = 0; k < space.size(); ++k) {
    const char* name = space[k].name.c_str();
    const json* v = f.find(name);
    if (!v) continue;
    if (space.categorical(k)) {
      box.categories(k) = category_set(space, k, *v, f.at(name));
      continue;
    }
    Fields iv(*v, f.at(name));
    Interval bounds = space.normalized_bounds(k);
    box.interval(k) = {iv.number_or("lo", bounds.lo), iv.number_or("hi", bounds.hi), iv.boolean_or("lo_open", false),
                       iv.boolean_or("hi_open", false)};
    iv.done();
  }
  f.done();
  return box;
}

json region_to_json(const FeatureSpace& space, const Box& box) {
  json out = json::object();
  for (std::size_t k = 0; k < space.size(); ++k) {
    if (space.categorical(k)) {
      out[space[k].name] = category_names(space, k, box.categories(k));
      continue;
    }
    const Interval& iv = box.interval(k);
    json i;
    i["lo"] = iv.lo;
    i["hi"] = iv.hi;
    if (iv.lo_open) i["lo_open"] = true;
    if (iv.hi_open) i["hi_open"] = true;
    out[space[k].name] = std::move(i);
  }
  return out;
}

// Tree body: either "nodes" (split structure) or "leaves" (boxes).
DecisionTree parse_tree_body(const FeatureSpace& space, Fields& f) {
  const json* nodes = f.find("nodes");
  const json* leaves = f.find("leaves");
  if ((nodes != nullptr) == (leaves != nullptr)) schema_error(f.at("nodes"), "give exactly one of 'nodes' or 'leaves'");
  if (nodes) {
    if (!nodes->is_array()) schema_error(f.at("nodes"), "expected an array");
    std::vector<SplitNode> parsed;
    for (std::size_t i = 0; i < nodes->size(); ++i) {
      std::string p = f.at("nodes") + "/" + std::to_string(i);
      Fields n((*nodes)[i], p);
      SplitNode node;
      if (const json* value = n.find("value")) {
        node.value = Fields::as_number(*value, n.at("value"));
      } else {
        node.feature = static_cast<int>(feature_ref(space, n.get("feature"), n.at("feature")));
        auto j = static_cast<std::size_t>(node.feature);
        if (space.categorical(j)) {
          node.left_categories = category_set(space, j, n.get("left_categories"), n.at("left_categories"));
        } else {
          node.threshold = n.number("threshold");
        }
        double left = n.number("left");
        double right = n.number("right");
        if (left != std::floor(left) || right != std::floor(right) || left < 0 || right < 0) {
          schema_error(p, "child ids must be non-negative integers");
        }
        node.left = static_cast<int>(left);
        node.right = static_cast<int>(right);
      }
      n.done();
      parsed.push_back(std::move(node));
    }
    return at_path(f.at("nodes"), [&] { return DecisionTree::from_nodes(space, std::move(parsed)); });
  }
  if (!leaves->is_array()) schema_error(f.at("leaves"), "expected an array");
  std::vector<Leaf> parsed;
  for (std::size_t i = 0; i < leaves->size(); ++i) {
    std::string p = f.at("leaves") + "/" + std::to_string(i);
    Fields l((*leaves)[i], p);
    Leaf leaf;
    leaf.region = parse_region(space, l.get("region"), l.at("region"));
    leaf.value = l.number("value");
    l.done();
    parsed.push_back(std::move(leaf));
  }
  return at_path(f.at("leaves"), [&] { return DecisionTree::from_leaves(space, std::move(parsed)); });
}

void tree_body_to_json(const FeatureSpace& space, const DecisionTree& tree, json& out) {
  if (tree.has_structure()) {
    json nodes = json::array();
    for (const auto& node : tree.nodes()) {
      json n;
      if (node.is_leaf()) {
        n["value"] = node.value;
      } else {
        auto j = static_cast<std::size_t>(node.feature);
        n["feature"] = space[j].name;
        if (space.categorical(j)) {
          n["left_categories"] = category_names(space, j, node.left_categories);
        } else {
          n["threshold"] = node.threshold;
        }
        n["left"] = node.left;
        n["right"] = node.right;
      }
      nodes.push_back(std::move(n));
    }
    out["nodes"] = std::move(nodes);
    return;
  }
  json leaves = json::array();
  for (const auto& leaf : tree.leaves()) {
    json l;
    l["region"] = region_to_json(space, leaf.region);
    l["value"] = leaf.value;
    leaves.push_back(std::move(l));
  }
  out["leaves"] = std::move(leaves);
}

template <typename T>
T parse_enum(Fields& f, const char* key, const std::vector<std::pair<const char*, T>>& options, T fallback) {
  const json* v = f.find(key);
  if (!v) return fallback;
  std::string s = Fields::as_string(*v, f.at(key));
  for (const auto& [name, value] : options) {
    if (s == name) return value;
  }
  std::string allowed;
  for (const auto& [name, value] : options) allowed += std::string(allowed.empty() ? "" : ", ") + name;
  schema_error(f.at(key), "unknown value '" + s + "' (expected " + allowed + ")");
}

Shape parse_shape(const FeatureSpace& space, std::size_t feature, Fields& t) {
  std::string kind = t.string("shape");
  if (kind == "linear") return LinearShape{t.number("weight")};
  if (kind == "piecewise_constant") {
    PiecewiseConstantShape s;
    const json& b = t.array("breakpoints");
    for (std::size_t i = 0; i < b.size(); ++i) {
      s.breakpoints.push_back(Fields::as_number(b[i], t.at("breakpoints") + "/" + std::to_string(i)));
    }
    const json& v = t.array("values");
    for (std::size_t i = 0; i < v.size(); ++i) {
      s.values.push_back(Fields::as_number(v[i], t.at("values") + "/" + std::to_string(i)));
    }
    return s;
  }
  if (kind == "category_table") {
    if (!space.categorical(feature)) schema_error(t.at("shape"), "category table on a continuous feature");
    Fields values(t.get("values"), t.at("values"));
    CategoryTableShape s;
    for (const auto& name : space[feature].categories().categories) s.values.push_back(values.number(name.c_str()));
    values.done();
    return s;
  }
  schema_error(t.at("shape"), "expected 'linear', 'piecewise_constant' or 'category_table'");
}

json shape_to_json(const FeatureSpace& space, std::size_t feature, const Shape& shape) {
  json out;
  if (const auto* lin = std::get_if<LinearShape>(&shape)) {
    out["shape"] = "linear";
    out["weight"] = lin->weight;
  } else if (const auto* pwc = std::get_if<PiecewiseConstantShape>(&shape)) {
    out["shape"] = "piecewise_constant";
    out["breakpoints"] = pwc->breakpoints;
    out["values"] = pwc->values;
  } else {
    const auto& table = std::get<CategoryTableShape>(shape);
    out["shape"] = "category_table";
    json values = json::object();
    for (std::size_t c = 0; c < table.values.size(); ++c) {
      values[space[feature].categories().categories[c]] = table.values[c];
    }
    out["values"] = std::move(values);
  }
  return out;
}

const std::vector<std::pair<const char*, OutputKind>> kOutputs = {{"score", OutputKind::kScore},
                                                                   {"probability", OutputKind::kProbability}};
const std::vector<std::pair<const char*, Link>> kLinks = {
    {"identity", Link::kIdentity}, {"logit", Link::kLogit}, {"log", Link::kLog}};
const std::vector<std::pair<const char*, Aggregation>> kAggregations = {{"mean", Aggregation::kMean},
                                                                        {"sum", Aggregation::kSum}};
const std::vector<std::pair<const char*, PostLink>> kPostLinks = {{"identity", PostLink::kIdentity},
                                                                  {"sigmoid", PostLink::kSigmoid}};

Model parse_payload(const FeatureSpace& space, const json& j, const std::string& path, OutputKind& output) {
  Fields f(j, path);
  std::string type = f.string("type");
  Model model;
  if (type == "decision_tree") {
    output = parse_enum(f, "output", kOutputs, OutputKind::kScore);
    model = parse_tree_body(space, f);
  } else if (type == "rule_list") {
    output = parse_enum(f, "output", kOutputs, OutputKind::kScore);
    const json& rules = f.array("rules");
    std::vector<Rule> parsed;
    for (std::size_t i = 0; i < rules.size(); ++i) {
      std::string p = f.at("rules") + "/" + std::to_string(i);
      Fields r(rules[i], p);
      Rule rule;
      rule.conditions = parse_conditions(space, r.get("conditions"), r.at("conditions"));
      rule.output = r.number("output");
      r.done();
      parsed.push_back(std::move(rule));
    }
    double fallback = f.number("default");
    model = at_path(path, [&] { return RuleList(space, std::move(parsed), fallback); });
  } else if (type == "additive") {
    Link link = parse_enum(f, "link", kLinks, Link::kIdentity);
    double intercept = f.number_or("intercept", 0.0);
    const json& terms = f.array("terms");
    std::vector<Term> parsed;
    for (std::size_t i = 0; i < terms.size(); ++i) {
      std::string p = f.at("terms") + "/" + std::to_string(i);
      Fields t(terms[i], p);
      Term term;
      term.feature = feature_ref(space, t.get("feature"), t.at("feature"));
      term.shape = parse_shape(space, term.feature, t);
      t.done();
      parsed.push_back(std::move(term));
    }
    model = at_path(path, [&] { return AdditiveModel(space, intercept, std::move(parsed), link); });
    output = link == Link::kIdentity ? OutputKind::kScore : OutputKind::kProbability;
  } else if (type == "tree_ensemble") {
    output = parse_enum(f, "output", kOutputs, OutputKind::kScore);
    Aggregation agg = parse_enum(f, "aggregation", kAggregations, Aggregation::kMean);
    PostLink post = parse_enum(f, "post_link", kPostLinks, PostLink::kIdentity);
    double intercept = f.number_or("intercept", 0.0);
    const json& trees = f.array("trees");
    std::vector<DecisionTree> parsed;
    for (std::size_t i = 0; i < trees.size(); ++i) {
      Fields t(trees[i], f.at("trees") + "/" + std::to_string(i));
      parsed.push_back(parse_tree_body(space, t));
      t.done();
    }
    model = at_path(path, [&] { return TreeEnsemble(std::move(parsed), agg, post, intercept); });
  } else if (type == "rule_ensemble") {
    output = parse_enum(f, "output", kOutputs, OutputKind::kScore);
    double intercept = f.number_or("intercept", 0.0);
    const json& rules = f.array("rules");
    std::vector<WeightedRule> parsed;
    for (std::size_t i = 0; i < rules.size(); ++i) {
      std::string p = f.at("rules") + "/" + std::to_string(i);
      Fields r(rules[i], p);
      WeightedRule rule;
      rule.antecedent = parse_conditions(space, r.get("antecedent"), r.at("antecedent"));
      rule.weight = r.number("weight");
      r.done();
      parsed.push_back(std::move(rule));
    }
    model = at_path(path, [&] { return RuleEnsemble(space, intercept, std::move(parsed)); });
  } else {
    schema_error(f.at("type"), "unknown model type '" + type + "'");
  }
  f.done();
  return model;
}

const char* output_name(OutputKind k) { return k == OutputKind::kScore ? "score" : "probability"; }

json payload_to_json(const ModelFile& file) {
  const FeatureSpace& space = file.space;
  json out;
  out["type"] = model_kind(file.model);
  if (const auto* tree = std::get_if<DecisionTree>(&file.model)) {
    out["output"] = output_name(file.output);
    tree_body_to_json(space, *tree, out);
  } else if (const auto* rl = std::get_if<RuleList>(&file.model)) {
    out["output"] = output_name(file.output);
    json rules = json::array();
    for (const auto& rule : rl->rules()) {
      json conds = json::array();
      for (const auto& c : rule.conditions) conds.push_back(condition_to_json(space, c));
      rules.push_back({{"conditions", std::move(conds)}, {"output", rule.output}});
    }
    out["rules"] = std::move(rules);
    out["default"] = rl->default_output();
  } else if (const auto* am = std::get_if<AdditiveModel>(&file.model)) {
    out["link"] = to_string(am->link());
    out["intercept"] = am->intercept();
    json terms = json::array();
    for (const auto& term : am->terms()) {
      json t = shape_to_json(space, term.feature, term.shape);
      t["feature"] = space[term.feature].name;
      terms.push_back(std::move(t));
    }
    out["terms"] = std::move(terms);
  } else if (const auto* te = std::get_if<TreeEnsemble>(&file.model)) {
    out["output"] = output_name(file.output);
    out["aggregation"] = to_string(te->aggregation());
    out["post_link"] = to_string(te->post_link());
    out["intercept"] = te->intercept();
    json trees = json::array();
    for (const auto& tree : te->trees()) {
      json t = json::object();
      tree_body_to_json(space, tree, t);
      trees.push_back(std::move(t));
    }
    out["trees"] = std::move(trees);
  } else {
    const auto& re = std::get<RuleEnsemble>(file.model);
    out["output"] = output_name(file.output);
    out["intercept"] = re.intercept();
    json rules = json::array();
    for (const auto& rule : re.rules()) {
      json conds = json::array();
      for (const auto& c : rule.antecedent) conds.push_back(condition_to_json(space, c));
      rules.push_back({{"antecedent", std::move(conds)}, {"weight", rule.weight}});
    }
    out["rules"] = std::move(rules);
  }
  return out;
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t column = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return {line, column};
}

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    auto [line, column] = line_and_column(text, e.byte == 0 ? 0 : e.byte - 1);
    throw Error(ErrorKind::kParseError,
                "line " + std::to_string(line) + ", column " + std::to_string(column) + ": malformed JSON");
  }
}

double parse_number_cell(const std::string& cell, std::size_t row, const std::string& column) {
  try {
    std::size_t used = 0;
    double v = std::stod(cell, &used);
    if (used == cell.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  throw Error(ErrorKind::kParseError,
              "row " + std::to_string(row) + ", column '" + column + "': expected a number, got '" + cell + "'");
}

}  // namespace

// ------------------------------------------------------------- Model files

ModelFile parse_model(std::string_view text) {
  json j = parse_json(text);
  Fields top(j, "");
  const json& version = top.get("format_version");
  if (!version.is_number_integer()) schema_error("/format_version", "expected an integer");
  if (version.get<int>() != kFormatVersion) {
    throw Error(ErrorKind::kVersionError, "unsupported format_version " + version.dump() + " (this build reads " +
                                              std::to_string(kFormatVersion) + ")");
  }
  ModelFile file;
  file.space = parse_space(top.get("feature_space"), "/feature_space");
  file.model = parse_payload(file.space, top.get("model"), "/model", file.output);
  if (const json* meta = top.find("metadata")) {
    Fields m(*meta, "/metadata");
    file.metadata.name = m.string_or("name", "");
    file.metadata.source = m.string_or("source", "");
    file.metadata.notes = m.string_or("notes", "");
    m.done();
  }
  top.done();
  return file;
}

json model_to_json(const ModelFile& file) {
  json out;
  out["format_version"] = kFormatVersion;
  out["feature_space"] = space_to_json(file.space);
  out["model"] = payload_to_json(file);
  json meta = json::object();
  if (!file.metadata.name.empty()) meta["name"] = file.metadata.name;
  if (!file.metadata.source.empty()) meta["source"] = file.metadata.source;
  if (!file.metadata.notes.empty()) meta["notes"] = file.metadata.notes;
  out["metadata"] = std::move(meta);
  return out;
}

std::string serialize_model(const ModelFile& file) { return model_to_json(file).dump(2) + "\n"; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kParseError, "cannot read '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kInvalidArgument, "cannot write '" + path + "'");
  out << contents;
}

ModelFile load_model(const std::string& path) {
  try {
    return parse_model(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

void save_model(const ModelFile& file, const std::string& path) { write_file(path, serialize_model(file)); }

// ---------------------------------------------------------------------- CSV

CsvTable parse_csv(std::string_view text) {
  CsvTable table;
  std::vector<std::vector<std::string>> lines;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  auto end_row = [&] {
    row.push_back(cell);
    cell.clear();
    bool blank = row.size() == 1 && row[0].empty();
    if (!blank) lines.push_back(std::move(row));
    row.clear();
    any = false;
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    char ch = text[i];
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
      continue;
    }
    any = true;
    if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(cell);
      cell.clear();
    } else if (ch == '\n') {
      end_row();
    } else if (ch != '\r') {
      cell += ch;
    }
  }
  if (quoted) throw Error(ErrorKind::kParseError, "unterminated quoted CSV field");
  if (any || !cell.empty() || !row.empty()) end_row();
  if (lines.empty()) throw Error(ErrorKind::kParseError, "CSV has no header");
  table.header = std::move(lines.front());
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].size() != table.header.size()) {
      throw Error(ErrorKind::kParseError, "row " + std::to_string(r) + " has " + std::to_string(lines[r].size()) +
                                              " fields, header has " + std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(lines[r]));
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  try {
    return parse_csv(read_file(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

PointSet points_from_csv(const CsvTable& table, const FeatureSpace& space, const std::string& label_column) {
  std::vector<std::size_t> columns(space.size());
  for (std::size_t j = 0; j < space.size(); ++j) {
    auto it = std::find(table.header.begin(), table.header.end(), space[j].name);
    if (it == table.header.end()) {
      throw Error(ErrorKind::kParseError, "missing column '" + space[j].name + "'");
    }
    columns[j] = static_cast<std::size_t>(it - table.header.begin());
  }
  std::optional<std::size_t> label_idx;
  if (!label_column.empty()) {
    auto it = std::find(table.header.begin(), table.header.end(), label_column);
    if (it == table.header.end()) throw Error(ErrorKind::kParseError, "missing label column '" + label_column + "'");
    label_idx = static_cast<std::size_t>(it - table.header.begin());
  }
  PointSet out;
  if (label_idx) out.labels.emplace();
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    RawPoint raw;
    for (std::size_t j = 0; j < space.size(); ++j) {
      const std::string& cell = row[columns[j]];
      if (space.categorical(j)) {
        const auto& cats = space[j].categories().categories;
        if (std::find(cats.begin(), cats.end(), cell) == cats.end()) {
          throw Error(ErrorKind::kParseError, "row " + std::to_string(r + 1) + ", column '" + space[j].name +
                                                  "': unknown category '" + cell + "'");
        }
        raw.emplace_back(cell);
      } else {
        raw.emplace_back(parse_number_cell(cell, r + 1, space[j].name));
      }
    }
    Point p = normalize_point(space, raw);
    try {
      check_point(space, p);
    } catch (const Error& e) {
      throw Error(e.kind(), "row " + std::to_string(r + 1) + ": " + e.what());
    }
    out.points.push_back(std::move(p));
    out.raw.push_back(std::move(raw));
    if (label_idx) {
      double v = parse_number_cell(row[*label_idx], r + 1, label_column);
      if (v == 1.0) {
        out.labels->push_back(1);
      } else if (v == -1.0 || v == 0.0) {
        out.labels->push_back(-1);
      } else {
        throw Error(ErrorKind::kParseError,
                    "row " + std::to_string(r + 1) + ", column '" + label_column + "': labels must be 1, 0 or -1");
      }
    }
  }
  return out;
}

PointSet load_points(const std::string& path, const FeatureSpace& space, const std::string& label_column) {
  try {
    return points_from_csv(read_csv(path), space, label_column);
  } catch (const Error& e) {
    throw Error(e.kind(), path + ": " + e.what());
  }
}

Dataset load_dataset(const std::string& csv_path, const std::string& manifest_path) {
  json manifest = parse_json(read_file(manifest_path));
  Fields top(manifest, "");
  const json& columns = top.array("columns");
  std::optional<CsvTable> training;
  if (const json* split = top.find("training_split")) {
    std::filesystem::path p = std::filesystem::path(manifest_path).parent_path() /
                              Fields::as_string(*split, "/training_split");
    training = read_csv(p.string());
  }
  top.done();

  auto training_column = [&](const std::string& name) {
    const auto& header = training->header;
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw Error(ErrorKind::kParseError, "training split lacks column '" + name + "'");
    std::vector<std::string> cells;
    for (const auto& row : training->rows) cells.push_back(row[static_cast<std::size_t>(it - header.begin())]);
    return cells;
  };

  std::vector<FeatureSpec> specs;
  std::string label_column;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    std::string path = "/columns/" + std::to_string(i);
    Fields c(columns[i], path);
    std::string name = c.string("name");
    std::string kind = c.string("kind");
    if (kind == "label") {
      label_column = name;
    } else if (kind == "categorical") {
      CategoricalSpec spec;
      if (const json* cats = c.find("categories")) {
        for (std::size_t k = 0; k < cats->size(); ++k) {
          spec.categories.push_back(Fields::as_string((*cats)[k], c.at("categories") + "/" + std::to_string(k)));
        }
      } else if (training) {
        std::set<std::string> seen;
        for (auto& v : training_column(name)) seen.insert(v);
        spec.categories.assign(seen.begin(), seen.end());
      } else {
        throw Error(ErrorKind::kMissingStats, "column '" + name + "' declares no categories and no training split");
      }
      specs.push_back({name, spec});
    } else if (kind == "continuous") {
      const char* keys[] = {"lo", "hi", "mean", "std"};
      std::optional<double> stats[4];
      for (int k = 0; k < 4; ++k) {
        if (const json* v = c.find(keys[k])) stats[k] = Fields::as_number(*v, c.at(keys[k]));
      }
      bool complete = stats[0] && stats[1] && stats[2] && stats[3];
      if (!complete) {
        if (!training) {
          throw Error(ErrorKind::kMissingStats, "column '" + name + "' lacks statistics and no training split");
        }
        std::vector<double> values;
        std::size_t row = 0;
        for (auto& cell : training_column(name)) values.push_back(parse_number_cell(cell, ++row, name));
        if (values.empty()) throw Error(ErrorKind::kMissingStats, "training split is empty");
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= static_cast<double>(values.size());
        double var = 0.0;
        for (double v : values) var += (v - mean) * (v - mean);
        double sd = std::sqrt(var / static_cast<double>(values.size()));
        auto [mn, mx] = std::minmax_element(values.begin(), values.end());
        if (!stats[0]) stats[0] = *mn;
        if (!stats[1]) stats[1] = *mx;
        if (!stats[2]) stats[2] = mean;
        if (!stats[3]) stats[3] = sd > 0.0 ? sd : 1.0;
      }
      specs.push_back({name, ContinuousSpec{*stats[0], *stats[1], *stats[2], *stats[3]}});
    } else {
      schema_error(c.at("kind"), "expected 'continuous', 'categorical' or 'label'");
    }
    c.done();
  }
  Dataset out;
  out.space = at_path("/columns", [&] { return FeatureSpace(std::move(specs)); });
  out.data = load_points(csv_path, out.space, label_column);
  return out;
}

// ---------------------------------------------------------------- Cert sets

CertSetSpec parse_certset(const std::string& spec, const FeatureSpace& space) {
  CertSetSpec out;
  out.text = spec;
  if (spec == "full") {
    out.set = FullSpace{};
    return out;
  }
  auto bad = [&](const std::string& why) -> Error {
    return Error(ErrorKind::kInvalidArgument, "certification set '" + spec + "': " + why);
  };
  if (spec.rfind("points:", 0) == 0) {
    std::string path = spec.substr(7);
    if (path.empty()) throw bad("missing file");
    out.file_contents = read_file(path);
    out.set = FiniteSet{load_points(path, space).points};
    return out;
  }
  if (spec.rfind("balls:", 0) != 0) throw bad("expected full, points:FILE or balls:FILE:r=R[:p=P]");
  std::string rest = spec.substr(6);
  std::optional<double> radius;
  Norm norm = Norm::kLinf;
  // Options are peeled off the end so the path may contain ':'.
  while (true) {
    auto colon = rest.rfind(':');
    if (colon == std::string::npos) break;
    std::string option = rest.substr(colon + 1);
    if (option.rfind("r=", 0) == 0) {
      std::string v = option.substr(2);
      if (v == "inf") {
        radius = kInf;
      } else {
        try {
          std::size_t used = 0;
          radius = std::stod(v, &used);
          if (used != v.size()) throw bad("bad radius");
        } catch (const std::logic_error&) {
          throw bad("bad radius '" + v + "'");
        }
      }
    } else if (option.rfind("p=", 0) == 0) {
      std::string v = option.substr(2);
      if (v == "1") {
        norm = Norm::kL1;
      } else if (v == "2") {
        norm = Norm::kL2;
      } else if (v == "inf") {
        norm = Norm::kLinf;
      } else {
        throw bad("p must be 1, 2 or inf");
      }
    } else {
      break;
    }
    rest = rest.substr(0, colon);
  }
  if (!radius) throw bad("missing r=R");
  if (!(*radius >= 0.0)) throw bad("radius must be >= 0");
  if (rest.empty()) throw bad("missing file");
  out.file_contents = read_file(rest);
  auto points = load_points(rest, space).points;
  if (std::isinf(*radius)) {
    out.set = FullSpace{};
  } else {
    out.set = BallUnion{std::move(points), *radius, norm};
  }
  return out;
}

// -------------------------------------------------------------------- Boxes

json box_to_json(const FeatureSpace& space, const Box& box) {
  json out = json::object();
  for (std::size_t j = 0; j < space.size(); ++j) {
    if (space.categorical(j)) {
      out[space[j].name] = category_names(space, j, box.categories(j));
      continue;
    }
    const Interval& iv = box.interval(j);
    json i;
    i["lo"] = space.denormalize_value(j, iv.lo);
    i["hi"] = space.denormalize_value(j, iv.hi);
    i["lo_open"] = iv.lo_open;
    i["hi_open"] = iv.hi_open;
    out[space[j].name] = std::move(i);
  }
  return out;
}

Box box_from_json(const FeatureSpace& space, const json& j) {
  Fields f(j, "");
  Box box = Box::full(space);
  for (std::size_t k = 0; k < space.size(); ++k) {
    const char* name = space[k].name.c_str();
    const json& v = f.get(name);
    if (space.categorical(k)) {
      box.categories(k) = category_set(space, k, v, f.at(name));
      continue;
    }
    Fields iv(v, f.at(name));
    box.interval(k) = {space.normalize_value(k, iv.number("lo")), space.normalize_value(k, iv.number("hi")),
                       iv.boolean_or("lo_open", false), iv.boolean_or("hi_open", false)};
    iv.done();
  }
  f.done();
  return box;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

}  // namespace devcert
