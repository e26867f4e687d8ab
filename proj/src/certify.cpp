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

#include "devcert/certify.hpp"

#include <cmath>

#include "devcert/certify_additive.hpp"
#include "devcert/certify_tree.hpp"

namespace devcert {

const char* to_string(Scale scale) { return scale == Scale::kProbability ? "prob" : "link"; }

namespace {

DecisionTree tree_on_scale(DecisionTree tree, OutputKind output, Scale scale) {
  if (scale == Scale::kProbability || output == OutputKind::kScore) return tree;
  for (const auto& leaf : tree.leaves()) {
    if (!(leaf.value > 0.0 && leaf.value < 1.0)) {
      throw Error(ErrorKind::kInvalidArgument,
                  "link scale needs leaf probabilities strictly inside (0, 1); found " + std::to_string(leaf.value));
    }
  }
  return tree.map_values([](double p) { return std::log(p / (1.0 - p)); });
}

TreeEnsemble ensemble_on_scale(const TreeEnsemble& e, OutputKind output, Scale scale) {
  if (scale == Scale::kProbability) return e;
  if (e.post_link() == PostLink::kSigmoid) return e.with_post_link(PostLink::kIdentity);
  if (output == OutputKind::kProbability) {
    throw Error(ErrorKind::kInvalidArgument,
                "an ensemble of averaged probabilities has no additive link scale; use --scale prob");
  }
  return e;
}

// Swapping roles turns model - reference into its negation.
void unswap(CertResult& r) {
  std::optional<double> smax = r.signed_min ? std::optional<double>(-*r.signed_min) : std::nullopt;
  std::optional<double> smin = r.signed_max ? std::optional<double>(-*r.signed_max) : std::nullopt;
  r.signed_max = smax;
  r.signed_min = smin;
  for (auto& m : r.maximizers) {
    std::swap(m.model_score, m.reference_score);
    std::swap(m.model_leaf, m.reference_leaf);
  }
  // The breakdown was grouped by the wrong model's leaves.
  r.per_reference_leaf.clear();
}

}  // namespace

ScaledModel rescale(const ModelFile& file, Scale scale) {
  return std::visit(
      [&](const auto& m) -> ScaledModel {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, DecisionTree>) {
          return {tree_on_scale(m, file.output, scale)};
        } else if constexpr (std::is_same_v<T, RuleList>) {
          return {tree_on_scale(rulelist_to_tree(m), file.output, scale)};
        } else if constexpr (std::is_same_v<T, AdditiveModel>) {
          return {scale == Scale::kLink ? m.with_link(Link::kIdentity) : m};
        } else if constexpr (std::is_same_v<T, TreeEnsemble>) {
          return {ensemble_on_scale(m, file.output, scale)};
        } else {
          return {ensemble_on_scale(ruleensemble_to_ensemble(m), file.output, scale)};
        }
      },
      file.model);
}

std::optional<DecisionTree> as_tree(const ScaledModel& m) {
  if (const auto* tree = std::get_if<DecisionTree>(&m.model)) return *tree;
  if (const auto* e = std::get_if<TreeEnsemble>(&m.model); e && e->trees().size() == 1) {
    return e->trees().front().map_values([&](double v) { return e->score_from_sum(v); });
  }
  return std::nullopt;
}

CertifyOutcome certify_pair(const ModelFile& model, const ModelFile& reference, const DeviationFn& d,
                            const CertificationSet& set, Scale scale, const EnsembleOptions& options) {
  if (!(model.space == reference.space)) {
    throw Error(ErrorKind::kSchemaMismatch, "model and reference declare different feature spaces");
  }
  validate_certset(model.space, set);
  ScaledModel f = rescale(model, scale);
  ScaledModel f0 = rescale(reference, scale);
  auto f_tree = as_tree(f);
  auto f0_tree = as_tree(f0);
  const auto* f_add = std::get_if<AdditiveModel>(&f.model);
  const auto* f0_add = std::get_if<AdditiveModel>(&f0.model);
  const auto* f_ens = std::get_if<TreeEnsemble>(&f.model);
  const auto* f0_ens = std::get_if<TreeEnsemble>(&f0.model);

  CertifyOutcome out;
  if (f_tree && f0_tree) {
    out.certifier = "tree-tree";
    out.result = certify_tree_tree(*f_tree, *f0_tree, d, set);
    return out;
  }
  if (f_add && f0_tree) {
    out.certifier = "additive-tree";
    out.result = certify_additive_vs_tree(*f_add, *f0_tree, d, set);
    return out;
  }
  if (f_add && f0_add) {
    out.certifier = "additive-additive";
    out.result = certify_additive_vs_additive(*f_add, *f0_add, d, set);
    return out;
  }
  if (f_ens && f0_tree) {
    out.certifier = "ensemble-tree";
    out.result = certify_ensemble_vs_tree(*f_ens, *f0_tree, d, set, options);
    return out;
  }
  if (f_tree && (f0_add || f0_ens)) {
    if (!d.symmetric()) {
      throw Error(ErrorKind::kUnsupportedPair, std::string("tree-like model against ") + model_kind(reference.model) +
                                                   " reference needs a symmetric deviation function");
    }
    out.swapped = true;
    if (f0_add) {
      out.certifier = "additive-tree";
      out.result = certify_additive_vs_tree(*f0_add, *f_tree, d, set);
    } else {
      out.certifier = "ensemble-tree";
      out.result = certify_ensemble_vs_tree(*f0_ens, *f_tree, d, set, options);
    }
    unswap(out.result);
    return out;
  }
  throw Error(ErrorKind::kUnsupportedPair, std::string("no certifier for model ") + model_kind(model.model) +
                                               " against reference " + model_kind(reference.model));
}

}  // namespace devcert
