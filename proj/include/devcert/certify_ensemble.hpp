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

// Anytime bounds on the maximum deviation between a tree ensemble and a
// reference tree. Every combination of one leaf per tree (plus one reference
// leaf) with a common non-empty region is a clique of the leaf-intersection
// graph; a depth-first branch-and-bound search over partial cliques keeps a
// primal bound (best clique) and a dual bound (best heuristic on the
// unexplored frontier).

#include <boost/dynamic_bitset.hpp>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "devcert/cert_result.hpp"
#include "devcert/models.hpp"

namespace devcert {

using Bitset = boost::dynamic_bitset<>;

struct LeafVertex {
  std::size_t partite = 0;
  std::size_t tree = 0;  // ensemble tree index; trees().size() for the reference
  std::size_t leaf = 0;
  Box region;
  double value = 0.0;
  Bitset witnesses;  // balls (or points) meeting the region; empty for the full space
};

struct LeafGraph {
  std::vector<LeafVertex> vertices;
  // Vertex ids per partite, partites in search order (fewest leaves first).
  std::vector<std::vector<std::size_t>> partites;
  std::size_t reference_partite = 0;
  std::vector<Bitset> adjacency;  // adjacency[u][v] iff regions meet
  std::size_t num_witnesses = 0;
  bool full_space = true;

  bool adjacent(std::size_t u, std::size_t v) const { return adjacency[u][v]; }
};

// Leaves not meeting the set are dropped (enclosing l_inf balls for p in
// {1, 2}). Throws kEmptyCertSet when a tree loses every leaf.
LeafGraph build_leaf_graph(const TreeEnsemble& f, const DecisionTree& f0, const CertificationSet& set);

// A partial clique.
struct SearchState {
  std::vector<std::optional<std::size_t>> chosen;  // vertex per partite
  Bitset compatible;                               // adjacent to every chosen vertex
  Box running_box;                                 // intersection of chosen regions
  Bitset witnesses;                                // balls meeting running_box
  double leaf_sum = 0.0;                           // ensemble leaves only
  std::optional<double> reference_value;
  std::size_t covered = 0;

  bool complete() const { return covered == chosen.size(); }
};

SearchState initial_state(const LeafGraph& g, const FeatureSpace& space);
// nullopt when the vertex is not compatible with the state.
std::optional<SearchState> extend(const LeafGraph& g, const SearchState& s, std::size_t vertex);

// Quantity a search maximizes. kMinSigned maximizes -(score - y0).
enum class CliqueObjective { kDeviation, kMaxSigned, kMinSigned };

// Objective value of a complete clique.
double clique_value(const LeafGraph& g, const SearchState& s, const TreeEnsemble& f, const DeviationFn& d,
                    CliqueObjective objective = CliqueObjective::kDeviation);

// Upper bound on the objective over all completions of `s`: every uncovered
// tree contributes its extreme leaf among those compatible with `s` alone.
// Throws kInfeasible when some uncovered partite has no compatible leaf.
double heuristic_bound(const LeafGraph& g, const SearchState& s, const TreeEnsemble& f, const DeviationFn& d,
                       CliqueObjective objective = CliqueObjective::kDeviation);

struct BoundsSnapshot {
  std::uint64_t step = 0;
  double lower = -kInf;
  double upper = kInf;
};

struct EnsembleOptions {
  // Both limits take effect only once some complete clique has been found.
  double time_limit_seconds = kInf;
  std::uint64_t node_limit = UINT64_MAX;
  bool prune = true;
  // Called after every expansion and every primal improvement; single worker only.
  std::function<void(const BoundsSnapshot&)> observer;
  unsigned threads = 1;
};

// Monotone D: difference-type D runs a maximizing and a minimizing search of
// score - y0 and combines them; other monotone D is searched directly.
// A result whose budget ran out has budget_expired set and exact unset.
CertResult certify_ensemble_vs_tree(const TreeEnsemble& f, const DecisionTree& f0, const DeviationFn& d,
                                    const CertificationSet& set, const EnsembleOptions& options = {});

}  // namespace devcert
