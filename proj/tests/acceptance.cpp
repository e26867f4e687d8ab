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

// Acceptance suite: one line per criterion, non-zero exit if any fails.
//
// Every exact certifier is compared against an independent brute-force
// oracle from tests/support; timing criteria measure the certifier only.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "devcert/blackbox.hpp"
#include "devcert/certify.hpp"
#include "devcert/certify_additive.hpp"
#include "devcert/certify_ensemble.hpp"
#include "devcert/certify_tree.hpp"
#include "devcert/io.hpp"
#include "support/oracles.hpp"
#include "support/random_models.hpp"

namespace fs = std::filesystem;
using namespace devcert;
using devcert::testing::Rng;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// ------------------------------------------------------------- criteria

Outcome tree_tree_exactness() {
  Rng rng(1001);
  double worst = 0.0;
  double certify_seconds = 0.0;
  auto t0 = Clock::now();
  for (int i = 0; i < 200; ++i) {
    std::size_t d = pick(rng, 1, 3);
    std::size_t cat = d > 1 ? pick(rng, 0, 1) : 0;
    FeatureSpace space = devcert::testing::random_space(rng, {d - cat, cat, 3, true});
    DecisionTree f = devcert::testing::random_tree(rng, space, pick(rng, 1, 16));
    DecisionTree f0 = devcert::testing::random_tree(rng, space, pick(rng, 1, 16));
    CertificationSet set = FullSpace{};
    if (i % 2 == 1) {
      double r = std::uniform_real_distribution<double>(0.0, 1.5)(rng);
      set = BallUnion{devcert::testing::random_points(rng, space, pick(rng, 1, 5)), r, Norm::kLinf};
    }
    auto dev = i % 3 == 0 ? DeviationFn::power_diff(2.0) : DeviationFn::abs_diff();
    auto c0 = Clock::now();
    CertResult got = certify_tree_tree(f, f0, dev, set);
    certify_seconds += seconds_since(c0);
    double oracle = devcert::testing::grid_oracle(f, f0, dev, set, {&f, &f0}).max_deviation;
    if (!got.exact || got.lower != got.upper) worst = kInf;
    worst = std::max(worst, std::abs(got.upper - oracle));
  }
  double total = seconds_since(t0);
  return {worst <= 1e-12 && total < 30.0,
          "max |error| " + fmt(worst) + ", certify " + fmt(certify_seconds) + " s, with oracle " + fmt(total) + " s"};
}

Outcome leaf_pair_scale() {
  Rng rng(1002);
  FeatureSpace space = devcert::testing::random_space(rng, {6, 0, 3, true});
  DecisionTree f = devcert::testing::random_tree(rng, space, 1000);
  DecisionTree f0 = devcert::testing::random_tree(rng, space, 1000);
  auto t0 = Clock::now();
  CertResult r = certify_tree_tree(f, f0, DeviationFn::abs_diff(), FullSpace{});
  double secs = seconds_since(t0);
  bool ok = f.num_leaves() == 1000 && f0.num_leaves() == 1000 && r.exact && secs < 1.0 &&
            r.stats.edges_evaluated <= 1000000;
  return {ok, "L = " + std::to_string(f.num_leaves()) + ", L0 = " + std::to_string(f0.num_leaves()) + ", " +
                  std::to_string(r.stats.edges_evaluated) + " edges, " + fmt(secs) + " s"};
}

Outcome additive_exactness() {
  Rng rng(1003);
  double worst = 0.0;
  double certify_seconds = 0.0;
  for (int i = 0; i < 200; ++i) {
    std::size_t d = pick(rng, 1, 4);
    std::size_t cat = d > 1 ? pick(rng, 0, 1) : 0;
    FeatureSpace space = devcert::testing::random_space(rng, {d - cat, cat, 3, true});
    auto centers = devcert::testing::random_points(rng, space, 20);
    double radii[] = {0.0, 0.2, 1.5};
    BallUnion set{centers, radii[i % 3], Norm::kLinf};
    auto dev = DeviationFn::abs_diff();
    double got = 0.0;
    double oracle = 0.0;
    auto c0 = Clock::now();
    if (i % 2 == 0) {
      AdditiveModel f = devcert::testing::random_gam(rng, space, {8, false, Link::kLogit});
      DecisionTree f0 = devcert::testing::random_tree(rng, space, pick(rng, 1, 8));
      c0 = Clock::now();
      got = certify_additive_vs_tree(f, f0, dev, set).upper;
      certify_seconds += seconds_since(c0);
      oracle = devcert::testing::gam_tree_oracle(f, f0, dev, set).max_deviation;
    } else {
      AdditiveModel f = devcert::testing::random_gam(rng, space, {8, false, Link::kIdentity});
      AdditiveModel f0 = devcert::testing::random_gam(rng, space, {8, false, Link::kIdentity});
      c0 = Clock::now();
      got = certify_additive_vs_additive(f, f0, dev, set).upper;
      certify_seconds += seconds_since(c0);
      oracle = devcert::testing::gam_gam_oracle(f, f0, dev, set).max_deviation;
    }
    worst = std::max(worst, std::abs(got - oracle));
  }
  return {worst <= 1e-9 && certify_seconds < 60.0,
          "max |error| " + fmt(worst) + ", certify " + fmt(certify_seconds) + " s"};
}

struct EnsembleInstance {
  TreeEnsemble f;
  DecisionTree f0;
  DeviationFn d;
  CertificationSet set;
};

std::vector<EnsembleInstance> ensemble_instances() {
  Rng rng(1004);
  std::vector<EnsembleInstance> out;
  for (int i = 0; i < 100; ++i) {
    std::size_t d = pick(rng, 1, 3);
    std::size_t cat = d > 1 ? pick(rng, 0, 1) : 0;
    FeatureSpace space = devcert::testing::random_space(rng, {d - cat, cat, 3, true});
    Aggregation agg = i % 2 == 0 ? Aggregation::kMean : Aggregation::kSum;
    PostLink post = i % 4 == 3 ? PostLink::kSigmoid : PostLink::kIdentity;
    TreeEnsemble f = devcert::testing::random_ensemble(rng, space, pick(rng, 1, 4), 5, agg, post);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, pick(rng, 1, 5));
    CertificationSet set = FullSpace{};
    if (i % 3 == 1) set = BallUnion{devcert::testing::random_points(rng, space, 4), 0.4, Norm::kLinf};
    if (i % 3 == 2) set = FiniteSet{devcert::testing::random_points(rng, space, 6)};
    DeviationFn dev = i % 5 == 4 ? devcert::testing::random_monotone_deviation(rng) : DeviationFn::abs_diff();
    out.push_back({std::move(f), std::move(f0), dev, set});
  }
  return out;
}

Outcome ensemble_exactness() {
  double worst = 0.0;
  int inexact = 0;
  for (const auto& inst : ensemble_instances()) {
    CertResult r = certify_ensemble_vs_tree(inst.f, inst.f0, inst.d, inst.set);
    double oracle = devcert::testing::clique_oracle(inst.f, inst.f0, inst.d, inst.set).max_deviation;
    if (!r.exact) ++inexact;
    worst = std::max(worst, std::abs(r.upper - oracle));
  }
  return {worst <= 1e-9 && inexact == 0, "max |error| " + fmt(worst) + ", inexact results " + std::to_string(inexact)};
}

Outcome anytime_soundness() {
  std::uint64_t steps = 0;
  std::uint64_t violations = 0;
  for (const auto& inst : ensemble_instances()) {
    double exact = devcert::testing::clique_oracle(inst.f, inst.f0, inst.d, inst.set).max_deviation;
    std::vector<BoundsSnapshot> snaps;
    EnsembleOptions options;
    options.observer = [&](const BoundsSnapshot& s) { snaps.push_back(s); };
    certify_ensemble_vs_tree(inst.f, inst.f0, inst.d, inst.set, options);
    for (std::size_t i = 0; i < snaps.size(); ++i) {
      ++steps;
      bool ok = snaps[i].lower <= exact + 1e-12 && exact <= snaps[i].upper + 1e-12;
      if (i > 0) ok = ok && snaps[i].lower >= snaps[i - 1].lower && snaps[i].upper <= snaps[i - 1].upper;
      if (!ok) ++violations;
    }
  }
  return {violations == 0 && steps > 0,
          std::to_string(steps) + " recorded steps, " + std::to_string(violations) + " violations"};
}

Outcome pruning_effectiveness() {
  std::vector<double> ratios;
  for (int seed = 0; seed < 20; ++seed) {
    Rng rng(2000 + static_cast<std::uint64_t>(seed));
    FeatureSpace space = devcert::testing::random_space(rng, {4, 0, 3, true});
    std::vector<DecisionTree> trees;
    for (int k = 0; k < 6; ++k) trees.push_back(devcert::testing::random_tree(rng, space, 10));
    TreeEnsemble f(std::move(trees), Aggregation::kSum, PostLink::kIdentity);
    DecisionTree f0 = devcert::testing::random_tree(rng, space, 10);
    CertResult r = certify_ensemble_vs_tree(f, f0, DeviationFn::abs_diff(), FullSpace{});
    double all = static_cast<double>(devcert::testing::count_cliques(f, f0));
    ratios.push_back(static_cast<double>(r.stats.cliques_completed) / all);
  }
  double m = median(ratios);
  return {m < 0.2, "median completed / exhaustive cliques " + fmt(m)};
}

Outcome monotone_sweep() {
  struct Pair {
    const char* model;
    const char* reference;
    const char* centers;
  };
  const Pair pairs[] = {{"stump.json", "constant.json", "centers_unit.csv"},
                        {"gam.json", "reference_tree.json", "applicants.csv"},
                        {"glm.json", "glm_reference.json", "applicants.csv"},
                        {"forest.json", "reference_tree.json", "applicants.csv"},
                        {"rulelist.json", "reference_tree.json", "applicants.csv"},
                        {"ruleensemble.json", "reference_tree.json", "applicants.csv"}};
  const std::string dir = DEVCERT_FIXTURES;
  int violations = 0;
  std::ostringstream detail;
  for (const auto& p : pairs) {
    ModelFile f = load_model(dir + "/" + p.model);
    ModelFile f0 = load_model(dir + "/" + p.reference);
    std::vector<Point> centers = load_points(dir + "/" + p.centers, f.space).points;
    auto dev = DeviationFn::abs_diff();
    double finite = certify_pair(f, f0, dev, FiniteSet{centers}).result.upper;
    double prev = finite;
    std::vector<double> values;
    for (double r : {0.0, 0.1, 0.2, 0.5, 1.0}) {
      CertResult res = certify_pair(f, f0, dev, BallUnion{centers, r, Norm::kLinf}).result;
      if (res.lower < prev - 1e-12 || res.upper < finite - 1e-12) ++violations;
      prev = res.lower;
      values.push_back(res.upper);
    }
    double full = certify_pair(f, f0, dev, FullSpace{}).result.lower;
    if (full < prev - 1e-12) ++violations;
    values.push_back(full);
    detail << p.model << " [";
    for (std::size_t i = 0; i < values.size(); ++i) detail << (i ? " " : "") << fmt(values[i]);
    detail << "] ";
  }
  return {violations == 0, std::to_string(violations) + " violations; " + detail.str()};
}

Outcome two_sided_extremization() {
  Rng rng(1005);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::size_t d = pick(rng, 1, 4);
    std::size_t cat = d > 1 ? pick(rng, 0, 1) : 0;
    FeatureSpace space = devcert::testing::random_space(rng, {d - cat, cat, 3, true});
    Link link = i % 2 == 0 ? Link::kLogit : Link::kIdentity;
    AdditiveModel f = devcert::testing::random_gam(rng, space, {8, false, link});
    double y0 = link == Link::kLogit ? 0.05 + 0.9 * devcert::testing::random_value(rng)
                                     : 2.0 * devcert::testing::random_value(rng) - 1.0;
    DeviationFn dev = devcert::testing::random_monotone_deviation(rng);
    double got = certify_additive_vs_constant(f, y0, dev, Box::full(space)).upper;
    double oracle = devcert::testing::gam_constant_oracle(f, y0, dev);
    worst = std::max(worst, std::abs(got - oracle) / std::max(1.0, std::abs(oracle)));
  }
  return {worst <= 1e-9, "max relative error " + fmt(worst)};
}

Outcome difference_smoothness() {
  Rng rng(1006);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uint64_t pairs = 0;
  std::uint64_t violations = 0;
  double tightest = kInf;
  for (int i = 0; i < 50; ++i) {
    std::size_t d = pick(rng, 1, 4);
    std::size_t cat = d > 1 ? pick(rng, 0, 1) : 0;
    FeatureSpace space = devcert::testing::random_space(rng, {d - cat, cat, 3, true});
    Box region = Box::full(space);
    // h_k(x) = c_k * l(x, a_k)^beta_k is c_k-Hoelder of order beta_k for the
    // normalized metric l, which is bounded by 1.
    double c0 = 0.05 + 2.0 * u(rng), c1 = 0.05 + 2.0 * u(rng);
    double b0 = 0.1 + 0.9 * u(rng), b1 = 0.1 + 0.9 * u(rng);
    Point a0 = devcert::testing::random_point(rng, space);
    Point a1 = devcert::testing::random_point(rng, space);
    double s0 = u(rng) < 0.5 ? -1.0 : 1.0, s1 = u(rng) < 0.5 ? -1.0 : 1.0;
    auto h = [&](const Point& x) {
      return s0 * c0 * std::pow(normalized_distance(region, x, a0), b0) -
             s1 * c1 * std::pow(normalized_distance(region, x, a1), b1);
    };
    Smoothness s = combine_lipschitz(c0, b0, c1, b1);
    for (int k = 0; k < 100000; ++k) {
      Point x = devcert::testing::random_point(rng, space);
      Point y = k % 4 == 0 ? x : devcert::testing::random_point(rng, space);
      if (k % 4 == 0) {
        // Nearby pairs stress small distances, where beta matters most.
        for (std::size_t j = 0; j < space.size(); ++j) {
          if (!space.categorical(j)) {
            Interval b = space.normalized_bounds(j);
            y[j] = std::clamp(x[j] + (b.hi - b.lo) * 1e-3 * (2.0 * u(rng) - 1.0), b.lo, b.hi);
          }
        }
      }
      double bound = s.c * std::pow(normalized_distance(region, x, y), s.beta);
      double gap = bound - std::abs(h(x) - h(y));
      tightest = std::min(tightest, gap);
      ++pairs;
      if (gap < -1e-9) ++violations;
    }
  }
  return {violations == 0, std::to_string(pairs) + " pairs, " + std::to_string(violations) +
                               " violations, smallest slack " + fmt(tightest)};
}

// Delta linear on each leaf box of a random tree, so every cell maximum is
// known in closed form.
struct PiecewiseLinear {
  FeatureSpace space;
  DecisionTree cells;
  std::vector<double> offset;
  std::vector<std::vector<double>> slope;
  double sup = -kInf;

  double operator()(const Point& x) const {
    std::size_t i = cells.leaf_index(x);
    const Box& b = cells.leaves()[i].region;
    double v = offset[i];
    for (std::size_t j = 0; j < x.size(); ++j) v += slope[i][j] * (x[j] - 0.5 * (b.interval(j).lo + b.interval(j).hi));
    return v;
  }
};

PiecewiseLinear random_piecewise_linear(Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  PiecewiseLinear p;
  p.space = devcert::testing::random_space(rng, {2, 0, 3, false});
  p.cells = devcert::testing::random_tree(rng, p.space, 8);
  for (const auto& leaf : p.cells.leaves()) {
    double a = u(rng);
    std::vector<double> w{4.0 * u(rng), 4.0 * u(rng)};
    double top = a;
    for (std::size_t j = 0; j < 2; ++j) top += std::abs(w[j]) * 0.5 * leaf.region.interval(j).width();
    p.offset.push_back(a);
    p.slope.push_back(w);
    p.sup = std::max(p.sup, top);
  }
  return p;
}

Outcome blackbox_regimes() {
  // Piecewise-constant differences: one query per cell is exact.
  Rng rng(1007);
  int exact_failures = 0;
  for (int i = 0; i < 20; ++i) {
    FeatureSpace space = devcert::testing::random_space(rng, {2, 1, 3, true});
    DecisionTree f = devcert::testing::random_tree(rng, space, pick(rng, 2, 10));
    DecisionTree f0 = devcert::testing::random_tree(rng, space, pick(rng, 2, 10));
    PartitionSpec spec = partition_from_trees(f, f0);
    OptRun run = partitioned_maximize([&](const Point& x) { return f.predict(x) - f0.predict(x); }, space, spec,
                                      spec.num_pairs);
    double exact = *certify_tree_tree(f, f0, DeviationFn::abs_diff(), FullSpace{}).signed_max;
    if (std::abs(run.best_value - exact) > 1e-12 || run.queries_used != spec.num_pairs) ++exact_failures;
  }

  // Piecewise-linear differences: partition-aware vs plain search. The
  // verdict uses q = 160; the other budgets are reported for context.
  std::ostringstream regrets;
  bool regret_ok = true;
  for (std::uint64_t budget : {40, 160, 640}) {
    Rng problems(1009);
    std::vector<double> partitioned;
    std::vector<double> plain;
    for (int i = 0; i < 20; ++i) {
      PiecewiseLinear p = random_piecewise_linear(problems);
      PartitionSpec spec;
      double global_c = 0.0;
      for (std::size_t k = 0; k < p.cells.num_leaves(); ++k) {
        const Box& b = p.cells.leaves()[k].region;
        spec.cells.push_back(b);
        // Each edge is rescaled to [0, 1] within the cell.
        double c = 0.0;
        for (std::size_t j = 0; j < 2; ++j) c += std::abs(p.slope[k][j]) * b.interval(j).width();
        spec.smoothness.push_back({c, 1.0});
        global_c = std::max(global_c, std::abs(p.offset[k]) + c);
      }
      spec.num_pairs = spec.cells.size();
      // Across cells Delta jumps, so no constant is valid for the plain
      // search; it gets one covering the largest jump plus cell variation.
      HooOptions global;
      global.smoothness = {2.0 * global_c, 1.0};
      OptRun a = partitioned_maximize(std::cref(p), p.space, spec, budget);
      OptRun b = hoo_maximize(std::cref(p), p.space, Box::full(p.space), budget, global);
      partitioned.push_back(p.sup - a.best_value);
      plain.push_back(p.sup - b.best_value);
    }
    double mp = median(partitioned);
    double mu = median(plain);
    if (budget == 160) regret_ok = mp <= mu;
    regrets << "; q = " << budget << " median regret partitioned " << fmt(mp) << " vs plain " << fmt(mu);
  }
  return {exact_failures == 0 && regret_ok,
          "piecewise-constant misses " + std::to_string(exact_failures) + "/20" + regrets.str()};
}

Outcome robust_accuracy_check() {
  Rng rng(1008);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int mismatches = 0;
  int checks = 0;
  for (int i = 0; i < 60; ++i) {
    std::size_t d = pick(rng, 1, 10);
    std::size_t cat = d > 2 ? pick(rng, 0, 2) : 0;
    FeatureSpace space = devcert::testing::random_space(rng, {d - cat, cat, 3, true});
    std::vector<Term> terms;
    for (std::size_t j = 0; j < d; ++j) {
      if (space.categorical(j)) {
        CategoryTableShape t;
        for (std::size_t c = 0; c < space.num_categories(j); ++c) t.values.push_back(u(rng));
        terms.push_back({j, t});
      } else {
        terms.push_back({j, LinearShape{u(rng)}});
      }
    }
    AdditiveModel f(space, 0.5 * u(rng), terms, Link::kLogit);
    for (int k = 0; k < 20; ++k) {
      Point x = devcert::testing::random_point(rng, space);
      int label = rng() % 2 == 0 ? 1 : -1;
      for (double eps : {0.0, 0.1}) {
        ++checks;
        if (robust_loss_additive(f, x, label, eps) != devcert::testing::corner_robust_loss(f, x, label, eps, 0.0)) {
          ++mismatches;
        }
      }
    }
  }
  return {mismatches == 0, std::to_string(checks) + " points, " + std::to_string(mismatches) + " mismatches"};
}

// Runs the CLI and returns its stdout, or an empty string on a launch error.
std::string run_cli(const std::string& args, int* code) {
  std::string cmd = std::string(DEVCERT_CLI) + " " + args + " 2>/dev/null";
  std::string out;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return out;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
  int status = pclose(pipe);
  *code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return out;
}

// JSON documents lose their single timing field; other text is kept as is.
std::string canonical(const std::string& text) {
  std::istringstream lines(text);
  std::string line;
  std::string out;
  auto strip = [](std::string s) {
    try {
      auto j = nlohmann::json::parse(s);
      if (j.is_object()) j.erase("timing");
      return j.dump();
    } catch (const nlohmann::json::exception&) {
      return s;
    }
  };
  std::string whole = strip(text);
  if (whole != text) return whole;
  while (std::getline(lines, line)) {
    // Pretty-printed reports put the wall-clock reading on its own line.
    if (line.find("\"wall_seconds\"") != std::string::npos) continue;
    out += strip(line) + "\n";
  }
  return out;
}

Outcome determinism() {
  const std::string dir = DEVCERT_FIXTURES;
  fs::path scratch = fs::temp_directory_path() / "devcert_acceptance";
  fs::create_directories(scratch);
  auto fx = [&](const std::string& name) { return dir + "/" + name; };
  auto pair = [&](const std::string& m, const std::string& r) { return "--model " + fx(m) + " --reference " + fx(r); };
  const std::string balls = " --certset balls:" + fx("applicants.csv") + ":r=0.5";

  struct Command {
    std::string args;
    std::vector<std::string> files;  // side outputs to compare as well
  };
  std::vector<Command> commands = {
      {"certify " + pair("stump.json", "constant.json"), {}},
      {"certify " + pair("gam.json", "reference_tree.json") + balls + " --top-k 3", {}},
      {"certify " + pair("glm.json", "glm_reference.json") + " --certset balls:" + fx("applicants.csv") + ":r=0.3:p=2",
       {}},
      {"certify " + pair("forest.json", "reference_tree.json") + balls, {}},
      {"certify " + pair("forest.json", "reference_tree.json") + " --stream", {}},
      {"certify " + pair("rulelist.json", "reference_tree.json") + " --certset points:" + fx("applicants.csv"), {}},
      {"certify " + pair("ruleensemble.json", "reference_tree.json") + " --scale link", {}},
      {"sweep " + pair("gam.json", "reference_tree.json") + " --centers " + fx("applicants.csv") + " --svg " +
           (scratch / "s.svg").string() + " --report " + (scratch / "s.json").string(),
       {(scratch / "s.svg").string(), (scratch / "s.json").string()}},
      {"breakdown " + pair("gam.json", "reference_tree.json") + balls, {}},
      {"breakdown " + pair("rulelist.json", "reference_tree.json"), {}},
      {"contrib " + pair("gam.json", "reference_tree.json") + balls, {}},
      {"contrib " + pair("glm.json", "glm_reference.json") + " --json", {}},
      {"robust-acc --model " + fx("glm.json") + " --data " + fx("applicants.csv") + " --labels approved --eps 0,0.1",
       {}},
      {"blackbox " + pair("rulelist.json", "reference_tree.json") + " --partition from-models --budget 200", {}},
      {"blackbox " + pair("gam.json", "glm.json") + " --budget 100", {}},
      {"convert --from ruleensemble --in " + fx("ruleensemble.json"), {}},
      {"validate " + fx("stump.json") + " " + fx("forest.json") + " --data " + fx("applicants.csv") + " --manifest " +
           fx("applicants.manifest.json"),
       {}},
  };
  int differing = 0;
  int failed = 0;
  std::string which;
  for (const auto& c : commands) {
    std::string outputs[2];
    int codes[2] = {-1, -1};
    for (int k = 0; k < 2; ++k) {
      outputs[k] = canonical(run_cli(c.args, &codes[k]));
      for (const auto& f : c.files) outputs[k] += "\n" + canonical(read_file(f));
    }
    if (codes[0] != 0) {
      ++failed;
      which += " [exit " + std::to_string(codes[0]) + ": " + c.args.substr(0, c.args.find(' ')) + "]";
    }
    if (outputs[0] != outputs[1] || codes[0] != codes[1]) {
      ++differing;
      which += " [differs: " + c.args.substr(0, c.args.find(' ')) + "]";
    }
  }
  return {differing == 0 && failed == 0, std::to_string(commands.size()) + " commands, " + std::to_string(differing) +
                                             " differing, " + std::to_string(failed) + " failing" + which};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const Criterion criteria[] = {
      {"tree-tree exactness (200 instances, tol 1e-12, < 30 s)", tree_tree_exactness},
      {"leaf-pair scale (L = L0 = 1000, exact, < 1 s, <= 1e6 edges)", leaf_pair_scale},
      {"additive certifiers (200 instances, tol 1e-9, < 60 s)", additive_exactness},
      {"ensemble exactness (100 instances, tol 1e-9)", ensemble_exactness},
      {"anytime soundness (every recorded step)", anytime_soundness},
      {"pruning effectiveness (K = 6, L = 10, median < 20%)", pruning_effectiveness},
      {"monotone radius sweep on fixture pairs", monotone_sweep},
      {"two-sided extremization (100 monotone D, tol 1e-9)", two_sided_extremization},
      {"difference smoothness (50 pairs x 1e5 samples)", difference_smoothness},
      {"black-box regimes (exact at q = pi, median regret)", blackbox_regimes},
      {"robust accuracy vs corner enumeration", robust_accuracy_check},
      {"CLI determinism (two runs, timing field removed)", determinism},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    Outcome o;
    auto t0 = Clock::now();
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " | " << o.detail << " | " << fmt(seconds_since(t0))
              << " s" << std::endl;
    if (!o.pass) ++failures;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
