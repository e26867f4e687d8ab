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

// Chooses the certifier for a (model, reference) pair and brings both onto
// the requested comparison scale.

#include <optional>
#include <string>

#include "devcert/certify_ensemble.hpp"
#include "devcert/io.hpp"

namespace devcert {

// kProbability compares model outputs as stored (g^{-1} applied for additive
// models and sigmoid ensembles); kLink compares link-scale scores.
enum class Scale { kProbability, kLink };

const char* to_string(Scale scale);

// A model rewritten on one scale. Rule lists become trees and rule ensembles
// become tree ensembles, so certifiers only see three classes.
struct ScaledModel {
  std::variant<DecisionTree, AdditiveModel, TreeEnsemble> model;
};

// Throws kInvalidArgument when the scale cannot be honoured (a probability
// tree with a leaf outside (0, 1) on the link scale, or an ensemble that
// averages probabilities).
ScaledModel rescale(const ModelFile& file, Scale scale);

// The tree-like view of a scaled model, if it has one. A single-tree ensemble
// counts as a tree.
std::optional<DecisionTree> as_tree(const ScaledModel& m);

struct CertifyOutcome {
  std::string certifier;  // e.g. "tree-tree", "additive-tree", "ensemble-tree"
  bool swapped = false;   // roles exchanged (symmetric D only)
  CertResult result;
};

// Throws kSchemaMismatch when the feature spaces differ and kUnsupportedPair
// for combinations without a certifier.
CertifyOutcome certify_pair(const ModelFile& model, const ModelFile& reference, const DeviationFn& d,
                            const CertificationSet& set, Scale scale = Scale::kProbability,
                            const EnsembleOptions& options = {});

}  // namespace devcert
