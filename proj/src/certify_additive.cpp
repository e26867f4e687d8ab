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

#include "devcert/certify_additive.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <unordered_map>

#include "devcert/geometry.hpp"

namespace devcert {

namespace {

constexpr double kTieTolerance = 1e-12;

// All terms on one feature merged into a single shape. Continuous features
// become offset[i] + slope * x on piece i = [breaks[i-1], breaks[i]);
// categorical features become one table.
struct FeatureForm {
  bool has_terms = false;
  bool categorical = false;
  std::vector<double> breaks;
  std::vector<double> offsets{0.0};
  double slope = 0.0;
  std::vector<double> table;
};

struct OneDim {
  double value = 0.0;
  Interval interval;
  CategorySet categories;
  std::uint64_t segments = 0;
};

class CompiledAdditive {
 public:
  explicit CompiledAdditive(const AdditiveModel& f) : model_(&f), full_(Box::full(f.space())) {
    const FeatureSpace& space = f.space();
    forms_.resize(space.size());
    for (std::size_t j = 0; j < space.size(); ++j) {
      forms_[j].categorical = space.categorical(j);
      if (forms_[j].categorical) forms_[j].table.assign(space.num_categories(j), 0.0);
    }
    for (const auto& term : f.terms()) {
      auto& form = forms_[term.feature];
      form.has_terms = true;
      if (const auto* pwc = std::get_if<PiecewiseConstantShape>(&term.shape)) {
        form.breaks.insert(form.breaks.end(), pwc->breakpoints.begin(), pwc->breakpoints.end());
      }
    }
    for (auto& form : forms_) {
      std::sort(form.breaks.begin(), form.breaks.end());
      form.breaks.erase(std::unique(form.breaks.begin(), form.breaks.end()), form.breaks.end());
      form.offsets.assign(form.breaks.size() + 1, 0.0);
    }
    for (const auto& term : f.terms()) {
      auto& form = forms_[term.feature];
      if (const auto* lin = std::get_if<LinearShape>(&term.shape)) {
        form.slope += lin->weight;
      } else if (const auto* table = std::get_if<CategoryTableShape>(&term.shape)) {
        for (std::size_t c = 0; c < table->values.size(); ++c) form.table[c] += table->values[c];
      } else {
        // Merged pieces refine the term's pieces; evaluate at each left end.
        for (std::size_t i = 0; i < form.offsets.size(); ++i) {
          double x = i == 0 ? -kInf : form.breaks[i - 1];
          form.offsets[i] += term.eval(x);
        }
      }
    }
  }

  const AdditiveModel& model() const { return *model_; }
  const std::vector<FeatureForm>& forms() const { return forms_; }

  Extremum extremize(const Box& region, Sense sense) const {
    auto clipped = box_intersect(region, full_);
    if (!clipped) throw Error(ErrorKind::kEmptyRegion, "extremization region misses the feature space");
    const double sign = sense == Sense::kMax ? 1.0 : -1.0;
    Extremum out;
    out.argmax = *clipped;
    out.per_feature.assign(forms_.size(), 0.0);
    out.value = model_->intercept();
    for (std::size_t j = 0; j < forms_.size(); ++j) {
      const auto& form = forms_[j];
      if (!form.has_terms) continue;
      OneDim best = form.categorical ? over_categories(form, clipped->categories(j), sign)
                                     : over_interval(form, clipped->interval(j), sign);
      out.per_feature[j] = best.value;
      out.value += best.value;
      out.segment_evaluations += best.segments;
      if (form.categorical) {
        out.argmax.categories(j) = best.categories;
      } else {
        out.argmax.interval(j) = best.interval;
      }
    }
    return out;
  }

 private:
  static OneDim over_interval(const FeatureForm& form, const Interval& range, double sign) {
    OneDim best;
    bool found = false;
    for (std::size_t i = 0; i < form.offsets.size(); ++i) {
      Interval piece{i == 0 ? -kInf : form.breaks[i - 1], i == form.breaks.size() ? kInf : form.breaks[i], false,
                     i != form.breaks.size()};
      Interval part = range.intersect(piece);
      if (part.empty()) continue;
      ++best.segments;
      double value;
      Interval arg;
      if (form.slope == 0.0) {
        value = form.offsets[i];
        arg = part;
      } else {
        double x = sign * form.slope > 0.0 ? part.hi : part.lo;
        value = form.offsets[i] + form.slope * x;
        arg = Interval::closed(x, x);
      }
      if (!found || sign * value > sign * best.value) {
        best.value = value;
        best.interval = arg;
        found = true;
      } else if (value == best.value && form.slope == 0.0 && best.interval.hi == arg.lo) {
        // Adjacent plateau at the same level: one contiguous argmax interval.
        best.interval.hi = arg.hi;
        best.interval.hi_open = arg.hi_open;
      }
    }
    return best;
  }

  static OneDim over_categories(const FeatureForm& form, const CategorySet& cats, double sign) {
    OneDim best;
    best.categories = CategorySet(cats.universe());
    bool found = false;
    for (std::size_t c : cats.members()) {
      ++best.segments;
      double value = form.table[c];
      if (!found || sign * value > sign * best.value) {
        best.value = value;
        best.categories = CategorySet::single(cats.universe(), c);
        found = true;
      } else if (value == best.value) {
        best.categories.insert(c);
      }
    }
    return best;
  }

  const AdditiveModel* model_;
  Box full_;
  std::vector<FeatureForm> forms_;
};

void require_monotone(const DeviationFn& d) {
  if (!d.monotone()) {
    throw Error(ErrorKind::kAssumptionViolated, "deviation '" + d.name() + "' is not declared monotone");
  }
}

double elapsed_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// One extremization pair over one region, mapped to the output scale.
struct Candidate {
  double deviation = 0.0;
  Box argmax;
  double model_score = 0.0;
  double reference_score = 0.0;
  std::optional<std::size_t> reference_leaf;
  std::vector<std::size_t> witnesses;
};

void collect_maximizers(CertResult& result, const std::vector<Candidate>& candidates) {
  double best = -kInf;
  for (const auto& c : candidates) best = std::max(best, c.deviation);
  result.lower = result.upper = best;
  result.exact = true;
  for (const auto& c : candidates) {
    if (c.deviation < best - kTieTolerance) continue;
    Maximizer m;
    m.region = c.argmax;
    m.deviation = c.deviation;
    m.model_score = c.model_score;
    m.reference_score = c.reference_score;
    m.reference_leaf = c.reference_leaf;
    m.witness_ball_ids = c.witnesses;
    result.maximizers.push_back(std::move(m));
  }
}

// Distinct clipped regions of `region`, each with every ball that produced it.
std::vector<std::pair<Box, std::vector<std::size_t>>> distinct_regions(const FeatureSpace& space, const Box& region,
                                                                       const CertificationSet& set) {
  std::vector<std::pair<Box, std::vector<std::size_t>>> out;
  std::unordered_map<Box, std::size_t, BoxHash> seen;
  const bool full = std::holds_alternative<FullSpace>(set);
  for (auto& piece : clip_to_certset(space, region, set)) {
    auto [it, inserted] = seen.try_emplace(piece.box, out.size());
    if (inserted) out.push_back({std::move(piece.box), {}});
    if (!full) out[it->second].second.push_back(piece.ball_id);
  }
  return out;
}

CertResult vs_tree_exact(const CompiledAdditive& cf, const DecisionTree& f0, const DeviationFn& d,
                         const CertificationSet& set) {
  auto start = std::chrono::steady_clock::now();
  const AdditiveModel& f = cf.model();
  validate_certset(f.space(), set);
  CertResult result;
  std::vector<Candidate> candidates;
  for (std::size_t m = 0; m < f0.leaves().size(); ++m) {
    const Leaf& leaf = f0.leaves()[m];
    auto regions = distinct_regions(f.space(), leaf.region, set);
    if (regions.empty()) continue;
    ReferenceLeafSummary summary;
    summary.leaf = m;
    summary.leaf_region = leaf.region;
    summary.reference_score = leaf.value;
    summary.min_model_score = kInf;
    summary.max_model_score = -kInf;
    summary.max_deviation = -kInf;
    for (auto& [box, witnesses] : regions) {
      for (Sense sense : {Sense::kMax, Sense::kMin}) {
        Extremum e = cf.extremize(box, sense);
        ++result.stats.extremizations;
        result.stats.segment_evaluations += e.segment_evaluations;
        double y = link_inverse(f.link(), e.value);
        double dev = d(y, leaf.value);
        summary.min_model_score = std::min(summary.min_model_score, y);
        summary.max_model_score = std::max(summary.max_model_score, y);
        if (dev > summary.max_deviation) {
          summary.max_deviation = dev;
          summary.maximizer = e.argmax;
        }
        candidates.push_back({dev, std::move(e.argmax), y, leaf.value, m, witnesses});
      }
      ++result.stats.edges_evaluated;
    }
    result.per_reference_leaf.push_back(std::move(summary));
  }
  if (candidates.empty()) throw Error(ErrorKind::kEmptyCertSet, "no reference leaf meets the certification set");
  collect_maximizers(result, candidates);
  double smax = -kInf;
  double smin = kInf;
  for (const auto& c : candidates) {
    smax = std::max(smax, c.model_score - c.reference_score);
    smin = std::min(smin, c.model_score - c.reference_score);
  }
  result.signed_max = smax;
  result.signed_min = smin;
  result.stats.wall_seconds = elapsed_since(start);
  return result;
}

CertResult vs_additive_exact(const CompiledAdditive& diff, const DeviationFn& d, const CertificationSet& set) {
  auto start = std::chrono::steady_clock::now();
  const FeatureSpace& space = diff.model().space();
  validate_certset(space, set);
  CertResult result;
  std::vector<Candidate> candidates;
  double smax = -kInf;
  double smin = kInf;
  for (auto& [box, witnesses] : distinct_regions(space, Box::full(space), set)) {
    for (Sense sense : {Sense::kMax, Sense::kMin}) {
      Extremum e = diff.extremize(box, sense);
      ++result.stats.extremizations;
      result.stats.segment_evaluations += e.segment_evaluations;
      if (sense == Sense::kMax) {
        smax = std::max(smax, e.value);
      } else {
        smin = std::min(smin, e.value);
      }
      candidates.push_back({d.of_difference(e.value), std::move(e.argmax), e.value, 0.0, std::nullopt, witnesses});
    }
    ++result.stats.edges_evaluated;
  }
  if (candidates.empty()) throw Error(ErrorKind::kEmptyCertSet, "certification set is empty");
  collect_maximizers(result, candidates);
  result.signed_max = smax;
  result.signed_min = smin;
  result.stats.wall_seconds = elapsed_since(start);
  return result;
}

// Closed form for a difference that is linear in continuous features, over
// l_1 / l_2 balls lying inside the bounds. nullopt when it does not apply.
std::optional<CertResult> vs_additive_closed_form(const CompiledAdditive& diff, const DeviationFn& d,
                                                  const BallUnion& balls) {
  const FeatureSpace& space = diff.model().space();
  std::vector<std::size_t> cont;
  std::vector<double> w;
  double base = diff.model().intercept();
  for (std::size_t j = 0; j < space.size(); ++j) {
    const auto& form = diff.forms()[j];
    if (form.categorical) {
      if (form.has_terms) return std::nullopt;
      continue;
    }
    if (!form.breaks.empty()) return std::nullopt;
    cont.push_back(j);
    w.push_back(form.slope);
    base += form.offsets[0];
  }
  for (const auto& c : balls.centers) {
    for (std::size_t j : cont) {
      Interval b = space.normalized_bounds(j);
      if (c[j] - balls.radius < b.lo || c[j] + balls.radius > b.hi) return std::nullopt;
    }
  }

  auto start = std::chrono::steady_clock::now();
  CertResult result;
  std::vector<Candidate> candidates;
  double smax = -kInf;
  double smin = kInf;
  std::vector<double> center(cont.size());
  for (std::size_t i = 0; i < balls.centers.size(); ++i) {
    const Point& c = balls.centers[i];
    for (std::size_t k = 0; k < cont.size(); ++k) center[k] = c[cont[k]];
    for (Sense sense : {Sense::kMax, Sense::kMin}) {
      const double sign = sense == Sense::kMax ? 1.0 : -1.0;
      std::vector<double> sw(w.size());
      for (std::size_t k = 0; k < w.size(); ++k) sw[k] = sign * w[k];
      double value = base + sign * linear_max_over_lp_ball(sw, center, balls.radius, balls.norm);
      // Maximizing point of sw^T x on the ball.
      Point x = c;
      if (balls.norm == Norm::kL2) {
        double norm = 0.0;
        for (double v : sw) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > 0.0) {
          for (std::size_t k = 0; k < cont.size(); ++k) x[cont[k]] += balls.radius * sw[k] / norm;
        }
      } else if (!sw.empty()) {
        std::size_t top = 0;
        for (std::size_t k = 1; k < sw.size(); ++k) {
          if (std::abs(sw[k]) > std::abs(sw[top])) top = k;
        }
        if (sw[top] != 0.0) x[cont[top]] += balls.radius * (sw[top] > 0.0 ? 1.0 : -1.0);
      }
      ++result.stats.extremizations;
      result.stats.segment_evaluations += cont.size();
      smax = std::max(smax, value);
      smin = std::min(smin, value);
      candidates.push_back({d.of_difference(value), Box::point(space, x), value, 0.0, std::nullopt, {i}});
    }
    ++result.stats.edges_evaluated;
  }
  if (candidates.empty()) throw Error(ErrorKind::kEmptyCertSet, "certification set is empty");
  collect_maximizers(result, candidates);
  result.signed_max = smax;
  result.signed_min = smin;
  result.stats.wall_seconds = elapsed_since(start);
  return result;
}

int robust_loss_compiled(const CompiledAdditive& cf, const Point& x, int label, double eps, double threshold) {
  if (label != 1 && label != -1) throw Error(ErrorKind::kInvalidArgument, "labels must be +1 or -1");
  if (!(eps >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "eps must be >= 0");
  const FeatureSpace& space = cf.model().space();
  check_point(space, x);
  Box ball = ball_box(space, x, eps);
  if (label == 1) return cf.extremize(ball, Sense::kMin).value <= threshold ? 1 : 0;
  return cf.extremize(ball, Sense::kMax).value > threshold ? 1 : 0;
}

}  // namespace

Extremum extremize_additive(const AdditiveModel& f, const Box& region, Sense sense) {
  if (region.size() != f.space().size()) throw Error(ErrorKind::kSchemaMismatch, "region arity mismatch");
  return CompiledAdditive(f).extremize(region, sense);
}

CertResult certify_additive_vs_constant(const AdditiveModel& f, double y0, const DeviationFn& d, const Box& region) {
  require_monotone(d);
  auto start = std::chrono::steady_clock::now();
  CompiledAdditive cf(f);
  CertResult result;
  std::vector<Candidate> candidates;
  for (Sense sense : {Sense::kMax, Sense::kMin}) {
    Extremum e = cf.extremize(region, sense);
    ++result.stats.extremizations;
    result.stats.segment_evaluations += e.segment_evaluations;
    double y = link_inverse(f.link(), e.value);
    (sense == Sense::kMax ? result.signed_max : result.signed_min) = y - y0;
    candidates.push_back({d(y, y0), std::move(e.argmax), y, y0, std::nullopt, {}});
  }
  collect_maximizers(result, candidates);
  result.stats.wall_seconds = elapsed_since(start);
  return result;
}

CertResult certify_additive_vs_tree(const AdditiveModel& f, const DecisionTree& f0, const DeviationFn& d,
                                    const CertificationSet& set) {
  require_monotone(d);
  if (!(f.space() == f0.space())) throw Error(ErrorKind::kSchemaMismatch, "models use different feature spaces");
  CompiledAdditive cf(f);
  return certify_with_norm_relaxation(set, [&](const CertificationSet& s) { return vs_tree_exact(cf, f0, d, s); });
}

CertResult certify_additive_vs_additive(const AdditiveModel& f, const AdditiveModel& f0, const DeviationFn& d,
                                        const CertificationSet& set) {
  if (f.link() != Link::kIdentity || f0.link() != Link::kIdentity) {
    throw Error(ErrorKind::kAssumptionViolated, "additive-vs-additive needs identity links on both models");
  }
  if (!d.difference() || !d.monotone()) {
    throw Error(ErrorKind::kAssumptionViolated,
                "deviation '" + d.name() + "' must be monotone and depend on y - y0 only");
  }
  AdditiveModel diff_model = f.minus(f0);
  CompiledAdditive diff(diff_model);
  if (certset_needs_relaxation(set)) {
    validate_certset(diff_model.space(), set);
    if (auto exact = vs_additive_closed_form(diff, d, std::get<BallUnion>(set))) return *exact;
  }
  return certify_with_norm_relaxation(set, [&](const CertificationSet& s) { return vs_additive_exact(diff, d, s); });
}

std::vector<FeatureContribution> feature_contributions(const AdditiveModel& f, const Box& region, Sense sense) {
  if (region.size() != f.space().size()) throw Error(ErrorKind::kSchemaMismatch, "region arity mismatch");
  Extremum e = CompiledAdditive(f).extremize(region, sense);
  std::vector<FeatureContribution> out;
  for (std::size_t j = 0; j < f.space().size(); ++j) {
    FeatureContribution c;
    c.feature = j;
    c.contribution = e.per_feature[j];
    c.categorical = f.space().categorical(j);
    if (c.categorical) {
      c.categories = e.argmax.categories(j);
    } else {
      c.interval = e.argmax.interval(j);
    }
    out.push_back(std::move(c));
  }
  std::stable_sort(out.begin(), out.end(), [](const FeatureContribution& a, const FeatureContribution& b) {
    return std::abs(a.contribution) > std::abs(b.contribution);
  });
  return out;
}

int robust_loss_additive(const AdditiveModel& f, const Point& x, int label, double eps, double threshold) {
  return robust_loss_compiled(CompiledAdditive(f), x, label, eps, threshold);
}

double robust_accuracy(const AdditiveModel& f, const std::vector<Point>& points, const std::vector<int>& labels,
                       double eps, double threshold) {
  if (points.size() != labels.size()) throw Error(ErrorKind::kInvalidArgument, "points/labels size mismatch");
  if (points.empty()) throw Error(ErrorKind::kInvalidArgument, "robust accuracy needs at least one point");
  CompiledAdditive cf(f);
  std::size_t losses = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    losses += static_cast<std::size_t>(robust_loss_compiled(cf, points[i], labels[i], eps, threshold));
  }
  return 1.0 - static_cast<double>(losses) / static_cast<double>(points.size());
}

}  // namespace devcert
