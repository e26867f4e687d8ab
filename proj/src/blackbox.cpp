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

#include "devcert/blackbox.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "devcert/certify_tree.hpp"
#include "devcert/geometry.hpp"

namespace devcert {

namespace {

double cell_diameter(const Box& region, const Box& cell, std::size_t* longest = nullptr) {
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t j = 0; j < cell.size(); ++j) {
    double len;
    if (cell.categorical(j)) {
      len = cell.categories(j).count() > 1 ? 1.0 : 0.0;
    } else {
      double full = region.interval(j).width();
      len = full > 0.0 ? cell.interval(j).width() / full : 0.0;
    }
    if (len > best) {
      best = len;
      arg = j;
    }
  }
  if (longest) *longest = arg;
  return best;
}

std::pair<Box, Box> bisect(const Box& cell, std::size_t j) {
  Box left = cell;
  Box right = cell;
  if (cell.categorical(j)) {
    auto members = cell.categories(j).members();
    std::size_t half = (members.size() + 1) / 2;
    for (std::size_t i = 0; i < members.size(); ++i) (i < half ? right : left).categories(j).erase(members[i]);
  } else {
    const Interval& iv = cell.interval(j);
    double mid = iv.midpoint();
    left.interval(j) = {iv.lo, mid, iv.lo_open, false};
    right.interval(j) = {mid, iv.hi, true, iv.hi_open};
  }
  return {std::move(left), std::move(right)};
}

double volume(const Box& b) {
  double v = 1.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    v *= b.categorical(j) ? static_cast<double>(b.categories(j).count()) : b.interval(j).width();
  }
  return v;
}

class Hoo {
 public:
  Hoo(const Oracle& delta, const Box& region, const HooOptions& options)
      : delta_(delta), region_(region), options_(options) {}

  OptRun run(std::uint64_t budget) {
    add_node(region_);
    while (run_.queries_used < budget) {
      std::vector<std::size_t> path{0};
      std::size_t n = 0;
      while (true) {
        Node& node = nodes_[n];
        if (!node.splittable) {
          // The best-scored cell is a single known point.
          if (options_.deterministic) return finish();
          observe(n, query(node.center));
          break;
        }
        int slot = node.child[0] < 0 ? 0 : node.child[1] < 0 ? 1 : -1;
        if (slot >= 0) {
          std::size_t longest = 0;
          cell_diameter(region_, node.cell, &longest);
          auto halves = bisect(node.cell, longest);
          std::size_t id = add_node(slot == 0 ? halves.first : halves.second);
          nodes_[n].child[slot] = static_cast<int>(id);
          path.push_back(id);
          break;
        }
        const Node& a = nodes_[static_cast<std::size_t>(node.child[0])];
        const Node& b = nodes_[static_cast<std::size_t>(node.child[1])];
        n = static_cast<std::size_t>(b.bound > a.bound ? node.child[1] : node.child[0]);
        path.push_back(n);
      }
      // The last node on the path has already recorded the new observation.
      double latest = nodes_[path.back()].last;
      for (std::size_t i = 0; i + 1 < path.size(); ++i) observe(path[i], latest);
      for (auto it = path.rbegin(); it != path.rend(); ++it) refresh(*it);
    }
    return finish();
  }

 private:
  struct Node {
    Box cell;
    Point center;
    double own = 0.0;   // value at the center
    double last = 0.0;  // latest observation in the subtree
    double sum = 0.0;
    std::uint64_t count = 0;
    double diameter = 0.0;
    bool splittable = false;
    int child[2] = {-1, -1};
    double bound = kInf;
  };

  double query(const Point& x) {
    double v = delta_(x);
    if (!std::isfinite(v)) throw Error(ErrorKind::kOracleFailure, "oracle returned a non-finite value");
    ++run_.queries_used;
    if (v > run_.best_value) {
      run_.best_value = v;
      run_.best_point = x;
    }
    run_.regret_curve.push_back(run_.best_value);
    return v;
  }

  std::size_t add_node(const Box& cell) {
    Node node;
    node.cell = cell;
    node.center = cell.representative();
    node.diameter = cell_diameter(region_, cell);
    node.splittable = node.diameter > 0.0;
    nodes_.push_back(std::move(node));
    std::size_t id = nodes_.size() - 1;
    double v = query(nodes_[id].center);
    nodes_[id].own = v;
    observe(id, v);
    refresh(id);
    return id;
  }

  void observe(std::size_t id, double v) {
    Node& node = nodes_[id];
    node.last = v;
    node.sum += v;
    ++node.count;
  }

  void refresh(std::size_t id) {
    Node& node = nodes_[id];
    const auto& s = options_.smoothness;
    double smooth = s.c == 0.0 ? 0.0 : s.c * std::pow(node.diameter, s.beta);
    double upper;
    if (options_.deterministic) {
      upper = node.own + smooth;
    } else {
      double n = static_cast<double>(std::max<std::uint64_t>(run_.queries_used, 1));
      double width = options_.exploration * std::sqrt(2.0 * std::log(std::max(n, 1.0)) / node.count);
      upper = node.sum / node.count + width + smooth;
    }
    double children = kInf;
    if (node.splittable && node.child[0] >= 0 && node.child[1] >= 0) {
      children = std::max(nodes_[static_cast<std::size_t>(node.child[0])].bound,
                          nodes_[static_cast<std::size_t>(node.child[1])].bound);
    }
    node.bound = std::min(upper, children);
  }

  OptRun finish() { return std::move(run_); }

  const Oracle& delta_;
  Box region_;
  HooOptions options_;
  std::vector<Node> nodes_;
  OptRun run_;
};

}  // namespace

OptRun hoo_maximize(const Oracle& delta, const FeatureSpace& space, const Box& region, std::uint64_t budget,
                    const HooOptions& options) {
  if (budget < 1) throw Error(ErrorKind::kInvalidArgument, "query budget must be at least 1");
  const auto& s = options.smoothness;
  if (!(s.c >= 0.0) || !(s.beta > 0.0 && s.beta <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "smoothness needs c >= 0 and beta in (0, 1]");
  }
  auto bounded = box_intersect(region, Box::full(space));
  if (!bounded) throw Error(ErrorKind::kEmptyRegion, "search region misses the feature space");
  return Hoo(delta, *bounded, options).run(budget);
}

PartitionSpec partition_from_trees(const DecisionTree& f, const DecisionTree& f0) {
  PartitionSpec spec;
  for (auto& edge : enumerate_edges(f, f0, DeviationFn::abs_diff(), FullSpace{})) {
    spec.cells.push_back(std::move(edge.region));
    spec.smoothness.push_back({0.0, 1.0});
  }
  spec.num_pairs = spec.cells.size();
  return spec;
}

OptRun partitioned_maximize(const Oracle& delta, const FeatureSpace& space, const PartitionSpec& partition,
                            std::uint64_t budget, const HooOptions& options) {
  const std::size_t pi = partition.cells.size();
  if (pi == 0) throw Error(ErrorKind::kInvalidArgument, "partition has no cells");
  if (partition.smoothness.size() != pi) throw Error(ErrorKind::kInvalidArgument, "one smoothness per cell needed");
  if (budget < pi) {
    throw Error(ErrorKind::kBudgetTooSmall,
                "budget " + std::to_string(budget) + " is below the " + std::to_string(pi) + " partition cells");
  }
  std::vector<std::uint64_t> share(pi, 1);
  std::vector<std::size_t> smooth_cells;
  for (std::size_t i = 0; i < pi; ++i) {
    if (partition.smoothness[i].c > 0.0) smooth_cells.push_back(i);
  }
  if (!smooth_cells.empty()) {
    std::uint64_t spare = budget - (pi - smooth_cells.size());
    std::uint64_t base = spare / smooth_cells.size();
    std::uint64_t extra = spare % smooth_cells.size();
    std::stable_sort(smooth_cells.begin(), smooth_cells.end(), [&](std::size_t a, std::size_t b) {
      return volume(partition.cells[a]) > volume(partition.cells[b]);
    });
    for (std::size_t k = 0; k < smooth_cells.size(); ++k) share[smooth_cells[k]] = base + (k < extra ? 1 : 0);
  }

  OptRun out;
  for (std::size_t i = 0; i < pi; ++i) {
    HooOptions cell_options = options;
    cell_options.smoothness = partition.smoothness[i];
    OptRun cell = hoo_maximize(delta, space, partition.cells[i], share[i], cell_options);
    for (double v : cell.regret_curve) out.regret_curve.push_back(std::max(v, out.best_value));
    out.queries_used += cell.queries_used;
    if (cell.best_value > out.best_value) {
      out.best_value = cell.best_value;
      out.best_point = std::move(cell.best_point);
    }
  }
  return out;
}

Smoothness combine_lipschitz(double c0, double beta0, double c1, double beta1) {
  if (!(c0 >= 0.0 && c1 >= 0.0) || !(beta0 > 0.0 && beta0 <= 1.0) || !(beta1 > 0.0 && beta1 <= 1.0)) {
    throw Error(ErrorKind::kInvalidArgument, "smoothness needs c >= 0 and beta in (0, 1]");
  }
  return {2.0 * std::max(c0, c1), std::min(beta0, beta1)};
}

double normalized_distance(const Box& region, const Point& x, const Point& y) {
  double best = 0.0;
  for (std::size_t j = 0; j < region.size(); ++j) {
    if (region.categorical(j)) {
      if (x[j] != y[j]) best = std::max(best, 1.0);
      continue;
    }
    double w = region.interval(j).width();
    if (w > 0.0) best = std::max(best, std::abs(x[j] - y[j]) / w);
  }
  return best;
}

// ------------------------------------------------------------ ProcessOracle

struct ProcessOracle::Impl {
  FeatureSpace space;
  pid_t pid = -1;
  FILE* to_child = nullptr;
  FILE* from_child = nullptr;
};

ProcessOracle::ProcessOracle(std::string command, FeatureSpace space) : impl_(std::make_unique<Impl>()) {
  impl_->space = std::move(space);
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) throw Error(ErrorKind::kOracleFailure, "cannot create pipes");
  signal(SIGPIPE, SIG_IGN);
  pid_t pid = fork();
  if (pid < 0) throw Error(ErrorKind::kOracleFailure, "cannot fork oracle process");
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  impl_->pid = pid;
  impl_->to_child = fdopen(in_pipe[1], "w");
  impl_->from_child = fdopen(out_pipe[0], "r");
}

ProcessOracle::~ProcessOracle() {
  if (impl_->to_child) fclose(impl_->to_child);
  if (impl_->from_child) fclose(impl_->from_child);
  if (impl_->pid > 0) {
    int status = 0;
    waitpid(impl_->pid, &status, 0);
  }
}

double ProcessOracle::operator()(const Point& x) {
  nlohmann::json request = nlohmann::json::array();
  for (const auto& v : denormalize_point(impl_->space, x)) {
    if (const auto* d = std::get_if<double>(&v)) {
      request.push_back(*d);
    } else {
      request.push_back(std::get<std::string>(v));
    }
  }
  std::string line = request.dump() + "\n";
  if (fputs(line.c_str(), impl_->to_child) == EOF || fflush(impl_->to_child) != 0) {
    throw Error(ErrorKind::kOracleFailure, "oracle process closed its input");
  }
  char buffer[256];
  if (!fgets(buffer, sizeof buffer, impl_->from_child)) {
    throw Error(ErrorKind::kOracleFailure, "oracle process produced no answer");
  }
  char* end = nullptr;
  double v = std::strtod(buffer, &end);
  while (end && (*end == ' ' || *end == '\n' || *end == '\r' || *end == '\t')) ++end;
  if (end == buffer || (end && *end != '\0') || !std::isfinite(v)) {
    throw Error(ErrorKind::kOracleFailure, "oracle answer is not a finite number: " + std::string(buffer));
  }
  return v;
}

}  // namespace devcert
