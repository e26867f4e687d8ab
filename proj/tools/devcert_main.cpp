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

// devcert: command-line front end.
//
// Exit codes: 0 success, 1 usage or unsupported request, 2 unreadable or
// invalid input files, 3 a certifier assumption does not hold, 4 the search
// budget ran out (the bounded report is still written).

#include <CLI11.hpp>
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "devcert/blackbox.hpp"
#include "devcert/certify.hpp"
#include "devcert/certify_additive.hpp"
#include "devcert/report.hpp"

using namespace devcert;
using nlohmann::json;

namespace {

constexpr int kExitBudget = 4;

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kParseError:
    case ErrorKind::kSchemaError:
    case ErrorKind::kVersionError:
    case ErrorKind::kSchemaMismatch:
    case ErrorKind::kMissingStats:
      return 2;
    case ErrorKind::kAssumptionViolated:
    case ErrorKind::kAbstainUnconfigured:
    case ErrorKind::kUnsupportedNorm:
      return 3;
    default:
      return 1;
  }
}

DeviationFn parse_deviation(const std::string& spec) {
  if (spec == "abs") return DeviationFn::abs_diff();
  if (spec.rfind("pow:", 0) == 0) {
    try {
      std::size_t used = 0;
      double p = std::stod(spec.substr(4), &used);
      if (used == spec.size() - 4 && p > 0.0) return DeviationFn::power_diff(p);
    } catch (const std::logic_error&) {
    }
  }
  throw Error(ErrorKind::kInvalidArgument, "deviation must be 'abs' or 'pow:P' with P > 0, got '" + spec + "'");
}

Scale parse_scale(const std::string& s) { return s == "link" ? Scale::kLink : Scale::kProbability; }

unsigned thread_count() {
  const char* env = std::getenv("DEVCERT_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n < 1) throw Error(ErrorKind::kInvalidArgument, "DEVCERT_THREADS must be a positive integer");
  return static_cast<unsigned>(n);
}

void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    write_file(path, text);
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// Digest over every input byte that can change a report.
class Digest {
 public:
  Digest& add(std::string_view bytes) {
    h_ = fnv1a64(bytes, h_);
    h_ = fnv1a64(std::string_view("\x1f", 1), h_);
    return *this;
  }
  std::string str() const { return "fnv1a64:" + hex64(h_); }

 private:
  std::uint64_t h_ = fnv1a64("");
};

json conventions() {
  return {{"units", "regions in raw feature units; radii in normalized (standardized) units"},
          {"splits", "x <= t goes left; left pieces are (.., t], right pieces (t, ..]"},
          {"categorical_balls", "an l_inf ball of radius r < 1 pins categorical features, r >= 1 frees them"},
          {"relaxed_norm", "l_1 / l_2 balls: upper bound from the enclosing l_inf balls, lower bound from centers"}};
}

double wall_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// Inputs shared by every certify-style command.
struct PairArgs {
  std::string model;
  std::string reference;
  std::string certset = "full";
  std::string deviation = "abs";
  std::string scale = "prob";

  void add_to(CLI::App* cmd) {
    cmd->add_option("--model", model, "Model under assessment (JSON ModelFile)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--reference", reference, "Reference model (JSON ModelFile)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--certset", certset, "full | points:FILE.csv | balls:FILE.csv:r=R[:p=1|2|inf]")
        ->capture_default_str();
    cmd->add_option("--deviation", deviation, "abs | pow:P")->capture_default_str();
    cmd->add_option("--scale", scale, "Comparison scale")->check(CLI::IsMember({"prob", "link"}))->capture_default_str();
  }
};

struct LoadedPair {
  ModelFile model;
  ModelFile reference;
  CertSetSpec certset;
  DeviationFn d;
  Scale scale;
  Digest digest;
  json inputs;
};

LoadedPair load_pair(const PairArgs& a) {
  std::string model_text = read_file(a.model);
  std::string reference_text = read_file(a.reference);
  LoadedPair p{load_model(a.model), load_model(a.reference), {}, parse_deviation(a.deviation), parse_scale(a.scale),
               {}, {}};
  p.certset = parse_certset(a.certset, p.model.space);
  p.digest.add(model_text).add(reference_text).add(a.certset).add(p.certset.file_contents).add(a.deviation).add(a.scale);
  p.inputs = {{"model", a.model},   {"reference", a.reference}, {"certset", a.certset},
              {"deviation", a.deviation}, {"scale", a.scale},  {"digest", p.digest.str()}};
  return p;
}

// The additive model whose extremization produced the maximizers, with the
// sense that produced maximizer `m`.
std::optional<std::pair<AdditiveModel, Sense>> contribution_source(const LoadedPair& p, const CertifyOutcome& out,
                                                                   const Maximizer& m) {
  ScaledModel f = rescale(p.model, p.scale);
  ScaledModel f0 = rescale(p.reference, p.scale);
  double model_score = m.model_score.value_or(0.0);
  double reference_score = m.reference_score.value_or(0.0);
  if (out.certifier == "additive-tree") {
    if (out.swapped) {
      return std::pair{std::get<AdditiveModel>(f0.model), reference_score >= model_score ? Sense::kMax : Sense::kMin};
    }
    return std::pair{std::get<AdditiveModel>(f.model), model_score >= reference_score ? Sense::kMax : Sense::kMin};
  }
  if (out.certifier == "additive-additive") {
    const auto& a = std::get<AdditiveModel>(f.model);
    const auto& b = std::get<AdditiveModel>(f0.model);
    return std::pair{a.minus(b), model_score >= reference_score ? Sense::kMax : Sense::kMin};
  }
  return std::nullopt;
}

std::vector<double> parse_radii(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "inf") {
      out.push_back(kInf);
      continue;
    }
    try {
      std::size_t used = 0;
      double r = std::stod(item, &used);
      if (used != item.size() || r < 0.0) throw std::invalid_argument("radius");
      out.push_back(r);
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::kInvalidArgument, "bad radius '" + item + "'");
    }
  }
  if (out.empty()) throw Error(ErrorKind::kInvalidArgument, "no radii given");
  return out;
}

Norm parse_norm(const std::string& s) {
  if (s == "1") return Norm::kL1;
  if (s == "2") return Norm::kL2;
  return Norm::kLinf;
}

json raw_point_json(const FeatureSpace& space, const Point& x) {
  json out = json::object();
  RawPoint raw = denormalize_point(space, x);
  for (std::size_t j = 0; j < space.size(); ++j) {
    std::visit([&](const auto& v) { out[space[j].name] = v; }, raw[j]);
  }
  return out;
}

// ------------------------------------------------------------------ commands

struct CertifyArgs : PairArgs {
  double time_limit = kInf;
  std::uint64_t node_limit = UINT64_MAX;
  std::size_t top_k = 6;
  bool stream = false;
  std::string out;
};

int run_certify(const CertifyArgs& a) {
  auto start = std::chrono::steady_clock::now();
  LoadedPair p = load_pair(a);
  EnsembleOptions options;
  options.time_limit_seconds = a.time_limit;
  options.node_limit = a.node_limit;
  options.threads = a.stream ? 1 : thread_count();
  BoundsSnapshot last{0, -kInf - 1.0, kInf};
  if (a.stream) {
    options.observer = [&](const BoundsSnapshot& s) {
      if (s.lower == last.lower && s.upper == last.upper) return;
      last = s;
      json line = {{"step", s.step}, {"lower", s.lower}, {"upper", s.upper}};
      std::cout << line.dump() << "\n" << std::flush;
    };
  }
  CertifyOutcome outcome = certify_pair(p.model, p.reference, p.d, p.certset.set, p.scale, options);

  json report = result_to_json(p.model.space, p.certset.set, outcome.result);
  report["command"] = "certify";
  report["inputs"] = p.inputs;
  report["certifier"] = outcome.certifier;
  report["swapped"] = outcome.swapped;
  report["conventions"] = conventions();
  json contributions = json::array();
  if (!outcome.result.maximizers.empty()) {
    const Maximizer& m = outcome.result.maximizers.front();
    if (auto src = contribution_source(p, outcome, m)) {
      contributions = contributions_to_json(p.model.space, feature_contributions(src->first, m.region, src->second),
                                            a.top_k);
    }
  }
  report["feature_contributions"] = std::move(contributions);
  report["timing"] = {{"wall_seconds", wall_since(start)}};
  emit(a.out, dump(report));
  return outcome.result.budget_expired ? kExitBudget : 0;
}

struct SweepArgs : PairArgs {
  std::string centers;
  std::string radii = "0,0.1,0.2,0.5,1,inf";
  std::string norm = "inf";
  double time_limit = kInf;
  std::size_t top_k = 6;
  std::string out;
  std::string svg;
  std::string report;
};

int run_sweep(const SweepArgs& a) {
  PairArgs base = a;
  base.certset = "full";
  LoadedPair p = load_pair(base);
  p.inputs.erase("certset");
  const FeatureSpace& space = p.model.space;
  std::vector<Point> centers = load_points(a.centers, space).points;
  p.digest.add(read_file(a.centers)).add(a.radii).add(a.norm);
  EnsembleOptions options;
  options.time_limit_seconds = a.time_limit;
  options.threads = thread_count();

  std::vector<SweepRow> rows;
  json table = json::array();
  std::map<std::size_t, double> contribution_sum;
  std::size_t contribution_runs = 0;
  bool expired = false;
  for (double r : parse_radii(a.radii)) {
    CertificationSet set = std::isinf(r) ? CertificationSet{FullSpace{}}
                                         : CertificationSet{BallUnion{centers, r, parse_norm(a.norm)}};
    CertifyOutcome outcome = certify_pair(p.model, p.reference, p.d, set, p.scale, options);
    const CertResult& res = outcome.result;
    expired = expired || res.budget_expired;
    rows.push_back({r, res.lower, res.upper, res.exact});
    json row = {{"r", std::isinf(r) ? json("inf") : json(r)},
                {"lower", res.lower},
                {"upper", res.upper},
                {"exact", res.exact},
                {"certifier", outcome.certifier}};
    if (!res.maximizers.empty()) {
      const Maximizer& m = res.maximizers.front();
      row["maximizer"] = box_to_text(space, m.region);
      if (auto src = contribution_source(p, outcome, m)) {
        auto contributions = feature_contributions(src->first, m.region, src->second);
        for (const auto& c : contributions) contribution_sum[c.feature] += c.contribution;
        ++contribution_runs;
        row["contributions"] = contributions_to_json(space, contributions, a.top_k);
      }
    }
    table.push_back(std::move(row));
  }
  emit(a.out, sweep_csv(rows));
  if (!a.svg.empty()) write_file(a.svg, sweep_svg(rows, "maximum deviation against radius"));
  if (!a.report.empty()) {
    // Features ranked by their contribution averaged over the radii.
    std::vector<std::pair<std::size_t, double>> avg;
    for (auto [j, s] : contribution_sum) avg.emplace_back(j, s / static_cast<double>(contribution_runs));
    std::stable_sort(avg.begin(), avg.end(),
                     [](const auto& x, const auto& y) { return std::abs(x.second) > std::abs(y.second); });
    json ranking = json::array();
    for (std::size_t i = 0; i < std::min(a.top_k, avg.size()); ++i) {
      ranking.push_back({{"rank", i + 1}, {"feature", space[avg[i].first].name}, {"mean_contribution", avg[i].second}});
    }
    json report = {{"command", "sweep"},       {"inputs", p.inputs},         {"centers", a.centers},
                   {"norm", a.norm},           {"rows", std::move(table)},   {"average_ranking", std::move(ranking)},
                   {"conventions", conventions()}};
    report["inputs"]["digest"] = p.digest.str();
    write_file(a.report, dump(report));
  }
  return expired ? kExitBudget : 0;
}

struct BreakdownArgs : PairArgs {
  std::string out;
};

int run_breakdown(const BreakdownArgs& a) {
  LoadedPair p = load_pair(a);
  EnsembleOptions options;
  options.threads = thread_count();
  CertifyOutcome outcome = certify_pair(p.model, p.reference, p.d, p.certset.set, p.scale, options);
  if (outcome.certifier != "tree-tree" && outcome.certifier != "additive-tree") {
    throw Error(ErrorKind::kUnsupportedPair, "breakdown needs a tree reference and a tree-like or additive model");
  }
  if (outcome.swapped) {
    throw Error(ErrorKind::kUnsupportedPair, "breakdown groups by reference leaves; pass the tree as --reference");
  }
  emit(a.out, breakdown_csv(p.model.space, outcome.result.per_reference_leaf));
  return 0;
}

struct ContribArgs : PairArgs {
  std::size_t top_k = 6;
  std::size_t maximizer = 0;
  std::string sense = "auto";
  bool as_json = false;
  std::string out;
};

int run_contrib(const ContribArgs& a) {
  LoadedPair p = load_pair(a);
  CertifyOutcome outcome = certify_pair(p.model, p.reference, p.d, p.certset.set, p.scale);
  const auto& ms = outcome.result.maximizers;
  if (a.maximizer >= ms.size()) {
    throw Error(ErrorKind::kInvalidArgument, "maximizer index " + std::to_string(a.maximizer) + " out of range (" +
                                                 std::to_string(ms.size()) + " maximizers)");
  }
  auto src = contribution_source(p, outcome, ms[a.maximizer]);
  if (!src) throw Error(ErrorKind::kUnsupportedPair, "feature contributions need an additive model");
  Sense sense = a.sense == "max" ? Sense::kMax : a.sense == "min" ? Sense::kMin : src->second;
  auto rows = feature_contributions(src->first, ms[a.maximizer].region, sense);
  if (a.as_json) {
    json report = {{"command", "contrib"},
                   {"inputs", p.inputs},
                   {"deviation", outcome.result.lower},
                   {"sense", sense == Sense::kMax ? "max" : "min"},
                   {"maximizer", box_to_text(p.model.space, ms[a.maximizer].region)},
                   {"contributions", contributions_to_json(p.model.space, rows, a.top_k)}};
    emit(a.out, dump(report));
  } else {
    std::string text = "deviation " + format_number(outcome.result.lower) + " (" +
                       (sense == Sense::kMax ? "max" : "min") + " of " + outcome.certifier + ")\n" +
                       "region: " + box_to_text(p.model.space, ms[a.maximizer].region) + "\n\n" +
                       contributions_table(p.model.space, rows, a.top_k);
    emit(a.out, text);
  }
  return 0;
}

struct RobustArgs {
  std::string model;
  std::string data;
  std::string labels;
  std::string eps = "0,0.1";
  double threshold = 0.0;
  std::string out;
};

int run_robust(const RobustArgs& a) {
  ModelFile file = load_model(a.model);
  const auto* f = std::get_if<AdditiveModel>(&file.model);
  if (!f) throw Error(ErrorKind::kUnsupportedPair, "robust-acc needs an additive model");
  PointSet data = load_points(a.data, file.space, a.labels);
  Digest digest;
  digest.add(read_file(a.model)).add(read_file(a.data)).add(a.labels).add(a.eps).add(format_number(a.threshold));
  json results = json::array();
  for (double eps : parse_radii(a.eps)) {
    results.push_back({{"eps", std::isinf(eps) ? json("inf") : json(eps)},
                       {"robust_accuracy", robust_accuracy(*f, data.points, *data.labels, eps, a.threshold)}});
  }
  json report = {{"command", "robust-acc"},
                 {"inputs",
                  {{"model", a.model},
                   {"data", a.data},
                   {"labels", a.labels},
                   {"threshold", a.threshold},
                   {"digest", digest.str()}}},
                 {"n", data.points.size()},
                 {"results", std::move(results)},
                 {"conventions", {{"eps", "l_inf radius in normalized units; link-scale threshold"}}}};
  emit(a.out, dump(report));
  return 0;
}

struct BlackboxArgs {
  std::string oracle;
  std::string model;
  std::string reference;
  std::string space_file;
  std::uint64_t budget = 200;
  std::string partition = "none";
  double c = 1.0;
  double beta = 1.0;
  double exploration = 1.0;
  bool noisy = false;
  std::string out;
};

int run_blackbox(const BlackboxArgs& a) {
  auto start = std::chrono::steady_clock::now();
  std::optional<ModelFile> f;
  std::optional<ModelFile> f0;
  Digest digest;
  if (!a.model.empty()) {
    f = load_model(a.model);
    digest.add(read_file(a.model));
  }
  if (!a.reference.empty()) {
    f0 = load_model(a.reference);
    digest.add(read_file(a.reference));
  }
  FeatureSpace space;
  if (!a.space_file.empty()) {
    space = load_model(a.space_file).space;
    digest.add(read_file(a.space_file));
  } else if (f) {
    space = f->space;
  } else {
    throw Error(ErrorKind::kInvalidArgument, "blackbox needs --space or --model to fix the feature space");
  }
  if (f && f0 && !(f->space == f0->space)) throw Error(ErrorKind::kSchemaMismatch, "models use different spaces");

  std::unique_ptr<ProcessOracle> process;
  Oracle delta;
  if (!a.oracle.empty()) {
    process = std::make_unique<ProcessOracle>(a.oracle, space);
    delta = [&](const Point& x) { return (*process)(x); };
  } else {
    if (!f || !f0) throw Error(ErrorKind::kInvalidArgument, "without --oracle, give --model and --reference");
    delta = [&](const Point& x) { return *predict(f->model, x).score - *predict(f0->model, x).score; };
  }
  digest.add(a.oracle).add(a.partition).add(std::to_string(a.budget));
  digest.add(format_number(a.c)).add(format_number(a.beta)).add(format_number(a.exploration)).add(a.noisy ? "1" : "0");

  HooOptions options;
  options.smoothness = {a.c, a.beta};
  options.exploration = a.exploration;
  options.deterministic = !a.noisy;
  OptRun run;
  json partition_info = nullptr;
  if (a.partition == "from-models") {
    if (!f || !f0) throw Error(ErrorKind::kInvalidArgument, "--partition from-models needs --model and --reference");
    auto t = as_tree(rescale(*f, Scale::kProbability));
    auto t0 = as_tree(rescale(*f0, Scale::kProbability));
    if (!t || !t0) throw Error(ErrorKind::kUnsupportedPair, "--partition from-models needs two tree-like models");
    PartitionSpec partition = partition_from_trees(*t, *t0);
    partition_info = {{"cells", partition.cells.size()}, {"pi", partition.num_pairs}};
    run = partitioned_maximize(delta, space, partition, a.budget, options);
  } else {
    run = hoo_maximize(delta, space, Box::full(space), a.budget, options);
  }
  json report = {{"command", "blackbox"},
                 {"inputs",
                  {{"oracle", a.oracle},
                   {"model", a.model},
                   {"reference", a.reference},
                   {"budget", a.budget},
                   {"partition", a.partition},
                   {"digest", digest.str()}}},
                 {"smoothness", {{"c", a.c}, {"beta", a.beta}}},
                 {"mode", a.noisy ? "noisy" : "deterministic"},
                 {"partition", partition_info},
                 {"queries_used", run.queries_used},
                 {"best_value", run.best_value},
                 {"best_point", raw_point_json(space, run.best_point)},
                 {"regret_curve", run.regret_curve},
                 {"timing", {{"wall_seconds", wall_since(start)}}}};
  emit(a.out, dump(report));
  return 0;
}

struct ConvertArgs {
  std::string from;
  std::string in;
  std::string out;
};

int run_convert(const ConvertArgs& a) {
  ModelFile file = load_model(a.in);
  ModelFile converted = file;
  if (a.from == "rulelist") {
    const auto* rl = std::get_if<RuleList>(&file.model);
    if (!rl) throw Error(ErrorKind::kInvalidArgument, a.in + " holds a " + model_kind(file.model) + ", not a rule_list");
    converted.model = rulelist_to_tree(*rl);
  } else {
    const auto* re = std::get_if<RuleEnsemble>(&file.model);
    if (!re) {
      throw Error(ErrorKind::kInvalidArgument, a.in + " holds a " + model_kind(file.model) + ", not a rule_ensemble");
    }
    converted.model = ruleensemble_to_ensemble(*re);
  }
  std::string note = std::string("converted from ") + model_kind(file.model);
  converted.metadata.notes = file.metadata.notes.empty() ? note : file.metadata.notes + "; " + note;
  emit(a.out, serialize_model(converted));
  return 0;
}

struct ValidateArgs {
  std::vector<std::string> files;
  std::string data;
  std::string manifest;
};

int run_validate(const ValidateArgs& a) {
  json results = json::array();
  int code = 0;
  auto record_error = [&](json& entry, const Error& e) {
    entry["ok"] = false;
    entry["error_kind"] = to_string(e.kind());
    entry["error"] = e.what();
    if (code == 0) code = exit_code(e.kind());
  };
  for (const auto& path : a.files) {
    json entry = {{"path", path}};
    try {
      ModelFile file = load_model(path);
      entry["ok"] = true;
      entry["model_type"] = model_kind(file.model);
      entry["features"] = file.space.size();
      if (const auto* tree = std::get_if<DecisionTree>(&file.model)) {
        entry["leaves"] = tree->num_leaves();
        if (auto violation = validate_partition(file.space, tree->leaves())) {
          record_error(entry, Error(ErrorKind::kSchemaError, "partition invariant violated: " + *violation));
        }
      } else if (const auto* e = std::get_if<TreeEnsemble>(&file.model)) {
        entry["trees"] = e->trees().size();
      }
    } catch (const Error& e) {
      record_error(entry, e);
    }
    results.push_back(std::move(entry));
  }
  if (!a.manifest.empty()) {
    json entry = {{"path", a.data}, {"manifest", a.manifest}};
    try {
      Dataset ds = load_dataset(a.data, a.manifest);
      entry["ok"] = true;
      entry["rows"] = ds.data.points.size();
      entry["features"] = ds.space.size();
      entry["labels"] = ds.data.labels.has_value();
    } catch (const Error& e) {
      record_error(entry, e);
    }
    results.push_back(std::move(entry));
  }
  std::cout << dump({{"command", "validate"}, {"results", std::move(results)}, {"ok", code == 0}});
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"devcert: worst-case deviation between a model and a reference model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "devcert 0.1.0");

  CertifyArgs certify;
  auto* cmd_certify = app.add_subcommand("certify", "Bound the maximum deviation over a certification set");
  certify.add_to(cmd_certify);
  cmd_certify->add_option("--time-limit", certify.time_limit, "Ensemble search time limit in seconds");
  cmd_certify->add_option("--node-limit", certify.node_limit, "Ensemble search node limit");
  cmd_certify->add_option("--top-k", certify.top_k, "Feature contributions to report")->capture_default_str();
  cmd_certify->add_flag("--stream", certify.stream, "Print one JSON line per bound improvement (ensembles)");
  cmd_certify->add_option("--out", certify.out, "Write the report here instead of stdout");

  SweepArgs sweep;
  auto* cmd_sweep = app.add_subcommand("sweep", "Maximum deviation over a range of ball radii");
  sweep.add_to(cmd_sweep);
  cmd_sweep->remove_option(cmd_sweep->get_option("--certset"));
  cmd_sweep->add_option("--centers", sweep.centers, "Ball centers (CSV)")->required()->check(CLI::ExistingFile);
  cmd_sweep->add_option("--radii", sweep.radii, "Comma-separated radii; 'inf' is the full space")
      ->capture_default_str();
  cmd_sweep->add_option("--norm", sweep.norm, "Ball norm")->check(CLI::IsMember({"1", "2", "inf"}))
      ->capture_default_str();
  cmd_sweep->add_option("--time-limit", sweep.time_limit, "Per-radius ensemble time limit in seconds");
  cmd_sweep->add_option("--top-k", sweep.top_k, "Features in the averaged ranking")->capture_default_str();
  cmd_sweep->add_option("--out", sweep.out, "CSV destination (default stdout)");
  cmd_sweep->add_option("--svg", sweep.svg, "Also write an SVG plot");
  cmd_sweep->add_option("--report", sweep.report, "Also write a JSON report with per-radius maximizers");

  BreakdownArgs breakdown;
  auto* cmd_breakdown = app.add_subcommand("breakdown", "Maximum deviation per reference leaf (CSV)");
  breakdown.add_to(cmd_breakdown);
  cmd_breakdown->add_option("--out", breakdown.out, "CSV destination (default stdout)");

  ContribArgs contrib;
  auto* cmd_contrib = app.add_subcommand("contrib", "Feature contributions at a maximizer of an additive model");
  contrib.add_to(cmd_contrib);
  cmd_contrib->add_option("--top-k", contrib.top_k, "Rows to print")->capture_default_str();
  cmd_contrib->add_option("--maximizer", contrib.maximizer, "Index into the reported maximizers")
      ->capture_default_str();
  cmd_contrib->add_option("--sense", contrib.sense, "Extremization sense")
      ->check(CLI::IsMember({"auto", "max", "min"}))
      ->capture_default_str();
  cmd_contrib->add_flag("--json", contrib.as_json, "JSON instead of a table");
  cmd_contrib->add_option("--out", contrib.out, "Destination (default stdout)");

  RobustArgs robust;
  auto* cmd_robust = app.add_subcommand("robust-acc", "Robust accuracy of an additive classifier");
  cmd_robust->add_option("--model", robust.model, "Additive ModelFile")->required()->check(CLI::ExistingFile);
  cmd_robust->add_option("--data", robust.data, "Labelled points (CSV)")->required()->check(CLI::ExistingFile);
  cmd_robust->add_option("--labels", robust.labels, "Label column (values 1/0 or 1/-1)")->required();
  cmd_robust->add_option("--eps", robust.eps, "Comma-separated l_inf radii")->capture_default_str();
  cmd_robust->add_option("--threshold", robust.threshold, "Decision threshold on the link scale")
      ->capture_default_str();
  cmd_robust->add_option("--out", robust.out, "Destination (default stdout)");

  BlackboxArgs blackbox;
  auto* cmd_blackbox = app.add_subcommand("blackbox", "Query-based maximization of model - reference");
  cmd_blackbox->add_option("--oracle", blackbox.oracle, "Command answering one JSON point per line");
  cmd_blackbox->add_option("--model", blackbox.model, "Model f (in-process oracle or partition source)")
      ->check(CLI::ExistingFile);
  cmd_blackbox->add_option("--reference", blackbox.reference, "Reference f0")->check(CLI::ExistingFile);
  cmd_blackbox->add_option("--space", blackbox.space_file, "ModelFile whose feature space is searched")
      ->check(CLI::ExistingFile);
  cmd_blackbox->add_option("--budget", blackbox.budget, "Query budget")->capture_default_str();
  cmd_blackbox->add_option("--partition", blackbox.partition, "none | from-models")
      ->check(CLI::IsMember({"none", "from-models"}))
      ->capture_default_str();
  cmd_blackbox->add_option("--c", blackbox.c, "Smoothness constant")->capture_default_str();
  cmd_blackbox->add_option("--beta", blackbox.beta, "Smoothness order in (0, 1]")->capture_default_str();
  cmd_blackbox->add_option("--exploration", blackbox.exploration, "Confidence-width constant (noisy mode)")
      ->capture_default_str();
  cmd_blackbox->add_flag("--noisy", blackbox.noisy, "Treat oracle answers as noisy");
  cmd_blackbox->add_option("--out", blackbox.out, "Destination (default stdout)");

  ConvertArgs convert;
  auto* cmd_convert = app.add_subcommand("convert", "Rule list to tree, rule ensemble to tree ensemble");
  cmd_convert->add_option("--from", convert.from, "Input kind")
      ->required()
      ->check(CLI::IsMember({"rulelist", "ruleensemble"}));
  cmd_convert->add_option("--in", convert.in, "Input ModelFile")->required()->check(CLI::ExistingFile);
  cmd_convert->add_option("--out", convert.out, "Destination (default stdout)");

  ValidateArgs validate;
  auto* cmd_validate = app.add_subcommand("validate", "Check model files (and optionally a dataset) for validity");
  cmd_validate->add_option("files", validate.files, "ModelFiles to check");
  cmd_validate->add_option("--data", validate.data, "Dataset CSV")->check(CLI::ExistingFile);
  cmd_validate->add_option("--manifest", validate.manifest, "Dataset manifest")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*cmd_certify) return run_certify(certify);
    if (*cmd_sweep) return run_sweep(sweep);
    if (*cmd_breakdown) return run_breakdown(breakdown);
    if (*cmd_contrib) return run_contrib(contrib);
    if (*cmd_robust) return run_robust(robust);
    if (*cmd_blackbox) return run_blackbox(blackbox);
    if (*cmd_convert) return run_convert(convert);
    if (*cmd_validate) {
      if (validate.files.empty() && validate.manifest.empty()) {
        std::cerr << "validate: nothing to check\n";
        return 1;
      }
      if (validate.manifest.empty() != validate.data.empty()) {
        std::cerr << "validate: --data and --manifest go together\n";
        return 1;
      }
      return run_validate(validate);
    }
  } catch (const Error& e) {
    std::cerr << "devcert: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "devcert: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
