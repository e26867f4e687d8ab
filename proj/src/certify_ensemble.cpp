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

#include "devcert/certify_ensemble.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <thread>

#include "devcert/geometry.hpp"

namespace devcert {

namespace {

using Clock = std::chrono::steady_clock;

Bitset witness_bits(const std::vector<std::size_t>& ids, std::size_t n) {
  Bitset bits(n);
  for (std::size_t i : ids) bits.set(i);
  return bits;
}

struct PartiteRange {
  std::size_t count = 0;
  double lo = kInf;
  double hi = -kInf;
};

bool usable(const LeafGraph& g, const SearchState& s, std::size_t v) {
  return s.compatible[v] && (g.full_space || s.witnesses.intersects(g.vertices[v].witnesses));
}

// Compatible leaves of every uncovered partite; covered partites stay empty.
std::vector<PartiteRange> partite_ranges(const LeafGraph& g, const SearchState& s) {
  std::vector<PartiteRange> out(g.partites.size());
  for (std::size_t p = 0; p < g.partites.size(); ++p) {
    if (s.chosen[p]) continue;
    for (std::size_t v : g.partites[p]) {
      if (!usable(g, s, v)) continue;
      auto& r = out[p];
      ++r.count;
      r.lo = std::min(r.lo, g.vertices[v].value);
      r.hi = std::max(r.hi, g.vertices[v].value);
    }
  }
  return out;
}

// -inf when some uncovered partite has no compatible leaf.
double bound_from_ranges(const LeafGraph& g, const SearchState& s, const std::vector<PartiteRange>& ranges,
                         const TreeEnsemble& f, const DeviationFn& d, CliqueObjective objective) {
  double lo = s.leaf_sum;
  double hi = s.leaf_sum;
  double y0_lo = s.reference_value.value_or(kInf);
  double y0_hi = s.reference_value.value_or(-kInf);
  for (std::size_t p = 0; p < g.partites.size(); ++p) {
    if (s.chosen[p]) continue;
    const auto& r = ranges[p];
    if (r.count == 0) return -kInf;
    if (p == g.reference_partite) {
      y0_lo = r.lo;
      y0_hi = r.hi;
    } else {
      lo += r.lo;
      hi += r.hi;
    }
  }
  const double score_lo = f.score_from_sum(lo);
  const double score_hi = f.score_from_sum(hi);
  switch (objective) {
    case CliqueObjective::kMaxSigned:
      return score_hi - y0_lo;
    case CliqueObjective::kMinSigned:
      return y0_hi - score_lo;
    case CliqueObjective::kDeviation:
      break;
  }
  // Monotone D is maximal at an end of [score_lo, score_hi] for fixed y0.
  if (s.reference_value) return std::max(d(score_lo, *s.reference_value), d(score_hi, *s.reference_value));
  double best = -kInf;
  for (std::size_t v : g.partites[g.reference_partite]) {
    if (!usable(g, s, v)) continue;
    double y0 = g.vertices[v].value;
    best = std::max({best, d(score_lo, y0), d(score_hi, y0)});
  }
  return best;
}

struct Child {
  double bound = -kInf;
  std::size_t vertex = 0;
  SearchState state;
};

struct Frame {
  std::vector<Child> children;  // descending bound, then ascending vertex
  std::size_t cursor = 0;

  double next_bound() const { return cursor < children.size() ? children[cursor].bound : -kInf; }
};

class Budget {
 public:
  Budget(double seconds, std::uint64_t nodes) : start_(Clock::now()), seconds_(seconds), nodes_(nodes) {}

  // Counts one expansion; true once a limit is hit.
  bool charge() {
    std::uint64_t n = used_.fetch_add(1) + 1;
    if (n > nodes_) expired_ = true;
    if (!expired_ && (n & 63) == 0 && seconds_ < kInf) {
      if (std::chrono::duration<double>(Clock::now() - start_).count() > seconds_) expired_ = true;
    }
    return expired_;
  }
  bool expired() const { return expired_; }
  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

 private:
  Clock::time_point start_;
  double seconds_;
  std::uint64_t nodes_;
  std::atomic<std::uint64_t> used_{0};
  std::atomic<bool> expired_{false};
};

// Best clique found so far, shared between workers.
class Primal {
 public:
  double value() const { return value_.load(); }

  void offer(double v, const SearchState& s) {
    std::lock_guard<std::mutex> lock(mutex_);
    if (v <= value_.load()) return;
    value_.store(v);
    incumbent_ = s;
  }
  const std::optional<SearchState>& incumbent() const { return incumbent_; }

 private:
  std::atomic<double> value_{-kInf};
  std::mutex mutex_;
  std::optional<SearchState> incumbent_;
};

class CliqueSearch {
 public:
  CliqueSearch(const LeafGraph& g, const TreeEnsemble& f, const DeviationFn& d, CliqueObjective objective,
               const EnsembleOptions& options, Budget& budget)
      : g_(g), f_(f), d_(d), objective_(objective), options_(options), budget_(budget) {}

  struct Outcome {
    double lower = -kInf;
    double upper = kInf;
    bool exhausted = false;
    std::optional<SearchState> incumbent;
    SearchStats stats;
  };

  using StepFn = std::function<void(double lower, double upper)>;

  double root_bound(const SearchState& root) const {
    return bound_from_ranges(g_, root, partite_ranges(g_, root), f_, d_, objective_);
  }

  Outcome run(const SearchState& root, const StepFn& on_step) {
    Outcome out;
    Primal primal;
    double root_h = root_bound(root);
    if (root_h == -kInf) {
      out.exhausted = true;
      return out;
    }
    SearchStats stats;
    Frame top = expand(root, stats);
    ++stats.nodes_expanded;
    budget_.charge();

    unsigned threads = options_.threads == 0 ? 1 : options_.threads;
    double frontier = -kInf;
    if (threads <= 1 || top.children.size() < 2) {
      std::vector<Frame> stack;
      stack.push_back(std::move(top));
      double reported_upper = root_h;
      auto step = [&] {
        if (!on_step) return;
        reported_upper = std::min(reported_upper, std::max(primal.value(), frontier_of(stack)));
        on_step(primal.value(), reported_upper);
      };
      step();
      dfs(stack, primal, stats, step);
      frontier = frontier_of(stack);
    } else {
      frontier = run_parallel(std::move(top), primal, stats, threads);
    }

    out.stats = stats;
    out.incumbent = primal.incumbent();
    out.lower = primal.value();
    out.exhausted = !budget_.expired() || frontier == -kInf;
    out.upper = out.exhausted ? out.lower : std::max(out.lower, frontier);
    // Pruned branches never beat the primal, so an exhausted search is exact.
    return out;
  }

 private:
  static double frontier_of(const std::vector<Frame>& stack) {
    double best = -kInf;
    for (const auto& frame : stack) best = std::max(best, frame.next_bound());
    return best;
  }

  Frame expand(const SearchState& s, SearchStats& stats) const {
    Frame frame;
    auto ranges = partite_ranges(g_, s);
    std::size_t pick = g_.partites.size();
    for (std::size_t p = 0; p < g_.partites.size(); ++p) {
      if (s.chosen[p]) continue;
      if (ranges[p].count == 0) return frame;
      if (pick == g_.partites.size() || ranges[p].count < ranges[pick].count) pick = p;
    }
    for (std::size_t v : g_.partites[pick]) {
      if (!usable(g_, s, v)) continue;
      auto child = extend(g_, s, v);
      if (!child) continue;
      ++stats.heuristic_evals;
      double h = child->complete() ? clique_value(g_, *child, f_, d_, objective_)
                                   : bound_from_ranges(g_, *child, partite_ranges(g_, *child), f_, d_, objective_);
      if (h == -kInf) continue;
      frame.children.push_back({h, v, std::move(*child)});
    }
    std::sort(frame.children.begin(), frame.children.end(), [](const Child& a, const Child& b) {
      return a.bound != b.bound ? a.bound > b.bound : a.vertex < b.vertex;
    });
    return frame;
  }

  template <typename Step>
  void dfs(std::vector<Frame>& stack, Primal& primal, SearchStats& stats, Step&& step) {
    // Limits apply once a clique is known, so the reported lower bound is
    // always attained by some point.
    auto out_of_budget = [&] { return budget_.expired() && primal.value() > -kInf; };
    while (!stack.empty()) {
      if (out_of_budget()) return;
      Frame& frame = stack.back();
      if (frame.cursor == frame.children.size()) {
        stack.pop_back();
        continue;
      }
      if (options_.prune && frame.children[frame.cursor].bound <= primal.value()) {
        // Children are sorted, so every remaining sibling is dominated too.
        frame.cursor = frame.children.size();
        continue;
      }
      Child& child = frame.children[frame.cursor++];
      if (child.state.complete()) {
        ++stats.cliques_completed;
        primal.offer(child.bound, child.state);
        step();
        continue;
      }
      Frame next = expand(child.state, stats);
      ++stats.nodes_expanded;
      stack.push_back(std::move(next));
      budget_.charge();
      if (out_of_budget()) {
        step();
        return;
      }
      step();
    }
  }

  // Root children are handed out one at a time; each worker explores whole
  // subtrees with a private stack. Returns the bound of unexplored work.
  double run_parallel(Frame top, Primal& primal, SearchStats& stats, unsigned threads) {
    std::atomic<std::size_t> next{0};
    std::mutex merge;
    double frontier = -kInf;
    auto worker = [&] {
      SearchStats local;
      double local_frontier = -kInf;
      while (!(budget_.expired() && primal.value() > -kInf)) {
        std::size_t i = next.fetch_add(1);
        if (i >= top.children.size()) break;
        Child& child = top.children[i];
        if (options_.prune && child.bound <= primal.value()) continue;
        if (child.state.complete()) {
          ++local.cliques_completed;
          primal.offer(child.bound, child.state);
          continue;
        }
        std::vector<Frame> stack;
        Frame single;
        single.children.push_back(child);
        stack.push_back(std::move(single));
        dfs(stack, primal, local, [] {});
        local_frontier = std::max(local_frontier, frontier_of(stack));
      }
      std::lock_guard<std::mutex> lock(merge);
      frontier = std::max(frontier, local_frontier);
      stats.nodes_expanded += local.nodes_expanded;
      stats.cliques_completed += local.cliques_completed;
      stats.heuristic_evals += local.heuristic_evals;
    };
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    for (std::size_t i = std::min(next.load(), top.children.size()); i < top.children.size(); ++i) {
      frontier = std::max(frontier, top.children[i].bound);
    }
    return frontier;
  }

  const LeafGraph& g_;
  const TreeEnsemble& f_;
  const DeviationFn& d_;
  CliqueObjective objective_;
  const EnsembleOptions& options_;
  Budget& budget_;
};

Maximizer clique_maximizer(const LeafGraph& g, const SearchState& s, const TreeEnsemble& f,
                           const CertificationSet& set, double deviation) {
  Maximizer m;
  m.deviation = deviation;
  m.region = s.running_box;
  for (std::size_t i = s.witnesses.find_first(); i != Bitset::npos; i = s.witnesses.find_next(i)) {
    m.witness_ball_ids.push_back(i);
  }
  if (!m.witness_ball_ids.empty()) {
    std::size_t first = m.witness_ball_ids.front();
    if (const auto* finite = std::get_if<FiniteSet>(&set)) {
      m.region = Box::point(f.space(), finite->points[first]);
    } else if (const auto* balls = std::get_if<BallUnion>(&set)) {
      if (auto clipped = clip_box_to_ball(s.running_box, balls->centers[first], balls->radius)) m.region = *clipped;
    }
  }
  m.model_score = f.score_from_sum(s.leaf_sum);
  m.reference_score = s.reference_value;
  if (auto ref = s.chosen[g.reference_partite]) m.reference_leaf = g.vertices[*ref].leaf;
  return m;
}

void add_stats(SearchStats& into, const SearchStats& from) {
  into.nodes_expanded += from.nodes_expanded;
  into.cliques_completed += from.cliques_completed;
  into.heuristic_evals += from.heuristic_evals;
}

CertResult certify_exact(const TreeEnsemble& f, const DecisionTree& f0, const DeviationFn& d,
                         const CertificationSet& set, const EnsembleOptions& options) {
  Budget budget(options.time_limit_seconds, options.node_limit);
  LeafGraph g = build_leaf_graph(f, f0, set);
  SearchState root = initial_state(g, f.space());
  CertResult result;
  std::uint64_t step = 0;
  double best_lower = -kInf;
  double best_upper = kInf;
  auto emit = [&](double lower, double upper) {
    if (!options.observer) return;
    best_lower = std::max(best_lower, lower);
    best_upper = std::min(best_upper, upper);
    options.observer({++step, best_lower, best_upper});
  };

  if (!d.difference()) {
    CliqueSearch search(g, f, d, CliqueObjective::kDeviation, options, budget);
    auto out = search.run(root, emit);
    if (!out.incumbent && out.exhausted) {
      throw Error(ErrorKind::kEmptyCertSet, "no leaf combination meets the certification set");
    }
    result.lower = out.lower;
    result.upper = out.upper;
    result.exact = out.exhausted;
    add_stats(result.stats, out.stats);
    if (out.incumbent) result.maximizers.push_back(clique_maximizer(g, *out.incumbent, f, set, out.lower));
  } else {
    // Delta ranges over [min_lo, max_hi]; max D = max(phi(min Delta), phi(max Delta)).
    CliqueSearch up(g, f, d, CliqueObjective::kMaxSigned, options, budget);
    CliqueSearch down(g, f, d, CliqueObjective::kMinSigned, options, budget);
    double max_lo = -kInf;
    double max_hi = up.root_bound(root);
    double min_lo = -down.root_bound(root);
    double min_hi = kInf;
    auto phi = [&](double delta) { return std::isfinite(delta) ? d.of_difference(delta) : -kInf; };
    auto combined = [&] {
      double lower = std::max(phi(max_lo), phi(min_hi));
      double upper = std::max(d.of_difference(max_hi), d.of_difference(min_lo));
      emit(lower, std::max(lower, upper));
    };
    auto up_out = up.run(root, [&](double lower, double upper) {
      max_lo = lower;
      max_hi = upper;
      combined();
    });
    max_lo = up_out.lower;
    max_hi = up_out.upper;
    if (!up_out.incumbent && up_out.exhausted) {
      throw Error(ErrorKind::kEmptyCertSet, "no leaf combination meets the certification set");
    }
    CliqueSearch::Outcome down_out;
    if (!budget.expired()) {
      down_out = down.run(root, [&](double lower, double upper) {
        min_hi = -lower;
        min_lo = -upper;
        combined();
      });
      min_hi = -down_out.lower;
      min_lo = -down_out.upper;
    }
    add_stats(result.stats, up_out.stats);
    add_stats(result.stats, down_out.stats);
    result.lower = std::max(phi(max_lo), phi(min_hi));
    result.upper = std::max(result.lower, std::max(d.of_difference(max_hi), d.of_difference(min_lo)));
    result.exact = up_out.exhausted && down_out.exhausted;
    if (result.exact) {
      result.upper = result.lower;
      result.signed_max = max_lo;
      result.signed_min = min_hi;
    }
    bool down_wins = down_out.incumbent && phi(min_hi) > phi(max_lo);
    const auto& winner = down_wins ? down_out.incumbent : up_out.incumbent;
    if (winner) result.maximizers.push_back(clique_maximizer(g, *winner, f, set, result.lower));
  }
  result.budget_expired = !result.exact;
  result.stats.wall_seconds = budget.elapsed();
  return result;
}

}  // namespace

LeafGraph build_leaf_graph(const TreeEnsemble& f, const DecisionTree& f0, const CertificationSet& set) {
  const FeatureSpace& space = f.space();
  if (!(space == f0.space())) throw Error(ErrorKind::kSchemaMismatch, "ensemble and reference use different spaces");
  validate_certset(space, set);
  LeafGraph g;
  g.full_space = std::holds_alternative<FullSpace>(set);
  g.num_witnesses = certset_points(set).size();

  // Reference first, then ensemble trees; a stable sort by size keeps that
  // order among equally sized trees.
  std::vector<const DecisionTree*> trees{&f0};
  std::vector<std::size_t> tree_ids{f.trees().size()};
  for (std::size_t k = 0; k < f.trees().size(); ++k) {
    trees.push_back(&f.trees()[k]);
    tree_ids.push_back(k);
  }
  std::vector<std::vector<LeafVertex>> kept(trees.size());
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const auto& leaves = trees[t]->leaves();
    for (std::size_t l = 0; l < leaves.size(); ++l) {
      auto meet = box_meets_certset(space, leaves[l].region, set, NormPolicy::kBoundingBox);
      if (!meet.nonempty) continue;
      kept[t].push_back({0, tree_ids[t], l, leaves[l].region, leaves[l].value,
                         witness_bits(meet.witness_ball_ids, g.num_witnesses)});
    }
    if (kept[t].empty()) throw Error(ErrorKind::kEmptyCertSet, "a tree has no leaf meeting the certification set");
  }
  std::vector<std::size_t> order(trees.size());
  for (std::size_t t = 0; t < order.size(); ++t) order[t] = t;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return kept[a].size() < kept[b].size(); });

  for (std::size_t p = 0; p < order.size(); ++p) {
    std::size_t t = order[p];
    if (t == 0) g.reference_partite = p;
    g.partites.emplace_back();
    for (auto& v : kept[t]) {
      v.partite = p;
      g.partites.back().push_back(g.vertices.size());
      g.vertices.push_back(std::move(v));
    }
  }
  const std::size_t n = g.vertices.size();
  g.adjacency.assign(n, Bitset(n));
  for (std::size_t u = 0; u < n; ++u) {
    for (std::size_t v = u + 1; v < n; ++v) {
      if (g.vertices[u].partite == g.vertices[v].partite) continue;
      if (boxes_meet(g.vertices[u].region, g.vertices[v].region)) {
        g.adjacency[u].set(v);
        g.adjacency[v].set(u);
      }
    }
  }
  return g;
}

SearchState initial_state(const LeafGraph& g, const FeatureSpace& space) {
  SearchState s;
  s.chosen.assign(g.partites.size(), std::nullopt);
  s.compatible = Bitset(g.vertices.size());
  s.compatible.set();
  s.running_box = Box::full(space);
  s.witnesses = Bitset(g.num_witnesses);
  s.witnesses.set();
  return s;
}

std::optional<SearchState> extend(const LeafGraph& g, const SearchState& s, std::size_t vertex) {
  const LeafVertex& v = g.vertices.at(vertex);
  if (s.chosen[v.partite] || !s.compatible[vertex]) return std::nullopt;
  auto box = box_intersect(s.running_box, v.region);
  if (!box) return std::nullopt;
  SearchState out;
  if (!g.full_space) {
    // Boxes, l_inf balls and points satisfy the pairwise (Helly) property
    // per coordinate, so intersecting witness sets stays exact.
    out.witnesses = s.witnesses & v.witnesses;
    if (out.witnesses.none()) return std::nullopt;
  }
  out.chosen = s.chosen;
  out.chosen[v.partite] = vertex;
  out.compatible = s.compatible & g.adjacency[vertex];
  out.running_box = std::move(*box);
  out.leaf_sum = s.leaf_sum;
  out.reference_value = s.reference_value;
  if (v.partite == g.reference_partite) {
    out.reference_value = v.value;
  } else {
    out.leaf_sum += v.value;
  }
  out.covered = s.covered + 1;
  return out;
}

double clique_value(const LeafGraph& g, const SearchState& s, const TreeEnsemble& f, const DeviationFn& d,
                    CliqueObjective objective) {
  if (!s.complete()) throw Error(ErrorKind::kInvalidArgument, "clique is incomplete");
  (void)g;
  double score = f.score_from_sum(s.leaf_sum);
  double y0 = *s.reference_value;
  switch (objective) {
    case CliqueObjective::kMaxSigned:
      return score - y0;
    case CliqueObjective::kMinSigned:
      return y0 - score;
    case CliqueObjective::kDeviation:
      break;
  }
  return d(score, y0);
}

double heuristic_bound(const LeafGraph& g, const SearchState& s, const TreeEnsemble& f, const DeviationFn& d,
                       CliqueObjective objective) {
  if (s.complete()) return clique_value(g, s, f, d, objective);
  double h = bound_from_ranges(g, s, partite_ranges(g, s), f, d, objective);
  if (h == -kInf) throw Error(ErrorKind::kInfeasible, "an uncovered tree has no compatible leaf");
  return h;
}

CertResult certify_ensemble_vs_tree(const TreeEnsemble& f, const DecisionTree& f0, const DeviationFn& d,
                                    const CertificationSet& set, const EnsembleOptions& options) {
  if (!d.monotone()) {
    throw Error(ErrorKind::kAssumptionViolated, "deviation '" + d.name() + "' is not declared monotone");
  }
  return certify_with_norm_relaxation(set, [&](const CertificationSet& s) { return certify_exact(f, f0, d, s, options); });
}

}  // namespace devcert
