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

#include "devcert/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <set>
#include <sstream>

namespace devcert {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kSchemaMismatch: return "SchemaMismatch";
    case ErrorKind::kAbstainUnconfigured: return "AbstainUnconfigured";
    case ErrorKind::kUnsupportedNorm: return "UnsupportedNorm";
    case ErrorKind::kUnsupportedCondition: return "UnsupportedCondition";
    case ErrorKind::kEmptyCertSet: return "EmptyCertSet";
    case ErrorKind::kEmptyRegion: return "EmptyRegion";
    case ErrorKind::kAssumptionViolated: return "AssumptionViolated";
    case ErrorKind::kInfeasible: return "Infeasible";
    case ErrorKind::kOracleFailure: return "OracleFailure";
    case ErrorKind::kBudgetTooSmall: return "BudgetTooSmall";
    case ErrorKind::kParseError: return "ParseError";
    case ErrorKind::kSchemaError: return "SchemaError";
    case ErrorKind::kVersionError: return "VersionError";
    case ErrorKind::kMissingStats: return "MissingStats";
    case ErrorKind::kUnsupportedPair: return "UnsupportedPair";
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

// ---------------------------------------------------------------- Interval

Interval Interval::intersect(const Interval& other) const {
  Interval out;
  if (lo > other.lo) {
    out.lo = lo;
    out.lo_open = lo_open;
  } else if (other.lo > lo) {
    out.lo = other.lo;
    out.lo_open = other.lo_open;
  } else {
    out.lo = lo;
    out.lo_open = lo_open || other.lo_open;
  }
  if (hi < other.hi) {
    out.hi = hi;
    out.hi_open = hi_open;
  } else if (other.hi < hi) {
    out.hi = other.hi;
    out.hi_open = other.hi_open;
  } else {
    out.hi = hi;
    out.hi_open = hi_open || other.hi_open;
  }
  return out;
}

bool Interval::meets(const Interval& other) const {
  // Inlined form of !intersect(other).empty() without building the result.
  double l = lo;
  bool lopen = lo_open;
  if (other.lo > l) {
    l = other.lo;
    lopen = other.lo_open;
  } else if (other.lo == l) {
    lopen = lopen || other.lo_open;
  }
  double h = hi;
  bool hopen = hi_open;
  if (other.hi < h) {
    h = other.hi;
    hopen = other.hi_open;
  } else if (other.hi == h) {
    hopen = hopen || other.hi_open;
  }
  return l < h || (l == h && !lopen && !hopen);
}

bool Interval::subset_of(const Interval& other) const {
  if (empty()) return true;
  bool lo_ok = lo > other.lo || (lo == other.lo && (lo_open || !other.lo_open));
  bool hi_ok = hi < other.hi || (hi == other.hi && (hi_open || !other.hi_open));
  return lo_ok && hi_ok;
}

// ------------------------------------------------------------- CategorySet

CategorySet::CategorySet(std::size_t universe, bool all)
    : universe_(universe), words_((universe + 63) / 64, 0) {
  if (all) {
    for (std::size_t c = 0; c < universe; ++c) insert(c);
  }
}

CategorySet CategorySet::single(std::size_t universe, std::size_t member) {
  CategorySet s(universe);
  s.insert(member);
  return s;
}

bool CategorySet::contains(std::size_t c) const {
  return c < universe_ && ((words_[c / 64] >> (c % 64)) & 1u);
}

void CategorySet::insert(std::size_t c) {
  if (c >= universe_) throw Error(ErrorKind::kSchemaMismatch, "category index out of range");
  words_[c / 64] |= std::uint64_t{1} << (c % 64);
}

void CategorySet::erase(std::size_t c) {
  if (c < universe_) words_[c / 64] &= ~(std::uint64_t{1} << (c % 64));
}

std::size_t CategorySet::count() const {
  std::size_t n = 0;
  for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
  return n;
}

std::vector<std::size_t> CategorySet::members() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < universe_; ++c) {
    if (contains(c)) out.push_back(c);
  }
  return out;
}

std::optional<std::size_t> CategorySet::first() const {
  for (std::size_t c = 0; c < universe_; ++c) {
    if (contains(c)) return c;
  }
  return std::nullopt;
}

CategorySet CategorySet::intersect(const CategorySet& other) const {
  if (universe_ != other.universe_) throw Error(ErrorKind::kSchemaMismatch, "category universes differ");
  CategorySet out = *this;
  for (std::size_t i = 0; i < words_.size(); ++i) out.words_[i] &= other.words_[i];
  return out;
}

CategorySet CategorySet::complement() const {
  CategorySet out(universe_);
  for (std::size_t c = 0; c < universe_; ++c) {
    if (!contains(c)) out.insert(c);
  }
  return out;
}

bool CategorySet::meets(const CategorySet& other) const {
  for (std::size_t i = 0; i < words_.size() && i < other.words_.size(); ++i) {
    if (words_[i] & other.words_[i]) return true;
  }
  return false;
}

bool CategorySet::subset_of(const CategorySet& other) const {
  for (std::size_t i = 0; i < words_.size(); ++i) {
    std::uint64_t o = i < other.words_.size() ? other.words_[i] : 0;
    if (words_[i] & ~o) return false;
  }
  return true;
}

std::size_t CategorySet::hash() const {
  std::size_t h = universe_ * 0x9e3779b97f4a7c15ULL;
  for (auto w : words_) h ^= std::hash<std::uint64_t>{}(w) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  return h;
}

// ------------------------------------------------------------ FeatureSpace

FeatureSpace::FeatureSpace(std::vector<FeatureSpec> features) : features_(std::move(features)) {
  std::set<std::string> names;
  for (const auto& f : features_) {
    if (f.name.empty()) throw Error(ErrorKind::kSchemaError, "feature with empty name");
    if (!names.insert(f.name).second) {
      throw Error(ErrorKind::kSchemaError, "duplicate feature name '" + f.name + "'");
    }
    if (f.categorical()) {
      const auto& cats = f.categories().categories;
      if (cats.empty()) throw Error(ErrorKind::kSchemaError, "feature '" + f.name + "' has no categories");
      std::set<std::string> seen(cats.begin(), cats.end());
      if (seen.size() != cats.size()) {
        throw Error(ErrorKind::kSchemaError, "feature '" + f.name + "' has duplicate categories");
      }
    } else {
      const auto& c = f.continuous();
      if (!(c.lo <= c.hi) || !std::isfinite(c.lo) || !std::isfinite(c.hi)) {
        throw Error(ErrorKind::kSchemaError, "feature '" + f.name + "' needs finite lo <= hi");
      }
      if (!(c.std > 0.0) || !std::isfinite(c.mean) || !std::isfinite(c.std)) {
        throw Error(ErrorKind::kSchemaError, "feature '" + f.name + "' needs finite mean and std > 0");
      }
    }
  }
}

std::optional<std::size_t> FeatureSpace::find(std::string_view name) const {
  for (std::size_t j = 0; j < features_.size(); ++j) {
    if (features_[j].name == name) return j;
  }
  return std::nullopt;
}

std::size_t FeatureSpace::index_of(std::string_view name) const {
  auto j = find(name);
  if (!j) throw Error(ErrorKind::kSchemaMismatch, "unknown feature '" + std::string(name) + "'");
  return *j;
}

std::size_t FeatureSpace::num_categories(std::size_t j) const {
  return features_[j].categorical() ? features_[j].categories().categories.size() : 0;
}

std::size_t FeatureSpace::category_index(std::size_t j, std::string_view category) const {
  const auto& cats = features_[j].categories().categories;
  auto it = std::find(cats.begin(), cats.end(), category);
  if (it == cats.end()) {
    throw Error(ErrorKind::kSchemaMismatch,
                "unknown category '" + std::string(category) + "' for feature '" + features_[j].name + "'");
  }
  return static_cast<std::size_t>(it - cats.begin());
}

Interval FeatureSpace::normalized_bounds(std::size_t j) const {
  if (categorical(j)) {
    return Interval::closed(0.0, static_cast<double>(num_categories(j)) - 1.0);
  }
  const auto& c = features_[j].continuous();
  return Interval::closed((c.lo - c.mean) / c.std, (c.hi - c.mean) / c.std);
}

double FeatureSpace::normalize_value(std::size_t j, double raw) const {
  const auto& c = features_[j].continuous();
  return (raw - c.mean) / c.std;
}

double FeatureSpace::denormalize_value(std::size_t j, double z) const {
  const auto& c = features_[j].continuous();
  return z * c.std + c.mean;
}

Point normalize_point(const FeatureSpace& space, const RawPoint& raw) {
  if (raw.size() != space.size()) {
    throw Error(ErrorKind::kSchemaMismatch, "point has " + std::to_string(raw.size()) + " values, expected " +
                                                std::to_string(space.size()));
  }
  Point p(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) {
    if (space.categorical(j)) {
      const auto* s = std::get_if<std::string>(&raw[j]);
      if (!s) throw Error(ErrorKind::kSchemaMismatch, "feature '" + space[j].name + "' expects a category");
      p[j] = static_cast<double>(space.category_index(j, *s));
    } else {
      const auto* v = std::get_if<double>(&raw[j]);
      if (!v) throw Error(ErrorKind::kSchemaMismatch, "feature '" + space[j].name + "' expects a number");
      p[j] = space.normalize_value(j, *v);
    }
  }
  return p;
}

RawPoint denormalize_point(const FeatureSpace& space, const Point& point) {
  if (point.size() != space.size()) throw Error(ErrorKind::kSchemaMismatch, "point arity mismatch");
  RawPoint raw(point.size());
  for (std::size_t j = 0; j < point.size(); ++j) {
    if (space.categorical(j)) {
      auto idx = static_cast<std::size_t>(point[j]);
      if (idx >= space.num_categories(j)) throw Error(ErrorKind::kSchemaMismatch, "category index out of range");
      raw[j] = space[j].categories().categories[idx];
    } else {
      raw[j] = space.denormalize_value(j, point[j]);
    }
  }
  return raw;
}

std::vector<double> one_hot_encode(const FeatureSpace& space, const Point& point) {
  if (point.size() != space.size()) throw Error(ErrorKind::kSchemaMismatch, "point arity mismatch");
  std::vector<double> out;
  for (std::size_t j = 0; j < point.size(); ++j) {
    if (space.categorical(j)) {
      for (std::size_t c = 0; c < space.num_categories(j); ++c) {
        out.push_back(static_cast<double>(c) == point[j] ? 1.0 : 0.0);
      }
    } else {
      out.push_back(point[j]);
    }
  }
  return out;
}

void check_point(const FeatureSpace& space, const Point& point) {
  if (point.size() != space.size()) {
    throw Error(ErrorKind::kSchemaMismatch, "point has " + std::to_string(point.size()) + " coordinates, expected " +
                                                std::to_string(space.size()));
  }
  for (std::size_t j = 0; j < point.size(); ++j) {
    if (space.categorical(j)) {
      double c = point[j];
      if (c < 0 || c != std::floor(c) || c >= static_cast<double>(space.num_categories(j))) {
        throw Error(ErrorKind::kSchemaMismatch, "invalid category index for feature '" + space[j].name + "'");
      }
    } else {
      // Normalization round-off must not reject points exactly on a bound.
      Interval b = space.normalized_bounds(j);
      double slack = 1e-12 * std::max(1.0, std::max(std::abs(b.lo), std::abs(b.hi)));
      if (!std::isfinite(point[j]) || point[j] < b.lo - slack || point[j] > b.hi + slack) {
        throw Error(ErrorKind::kSchemaMismatch, "coordinate of feature '" + space[j].name + "' outside bounds");
      }
    }
  }
}

// --------------------------------------------------------------------- Box

Box Box::full(const FeatureSpace& space) {
  Box b;
  b.parts_.resize(space.size());
  for (std::size_t j = 0; j < space.size(); ++j) {
    auto& part = b.parts_[j];
    part.categorical = space.categorical(j);
    if (part.categorical) {
      part.categories = CategorySet(space.num_categories(j), true);
      part.interval = space.normalized_bounds(j);
    } else {
      part.interval = space.normalized_bounds(j);
    }
  }
  return b;
}

Box Box::point(const FeatureSpace& space, const Point& p) {
  check_point(space, p);
  Box b = full(space);
  for (std::size_t j = 0; j < space.size(); ++j) {
    if (b.categorical(j)) {
      b.parts_[j].categories = CategorySet::single(space.num_categories(j), static_cast<std::size_t>(p[j]));
    } else {
      b.parts_[j].interval = Interval::closed(p[j], p[j]);
    }
  }
  return b;
}

bool Box::empty() const {
  for (const auto& part : parts_) {
    if (part.categorical ? part.categories.empty() : part.interval.empty()) return true;
  }
  return false;
}

bool Box::contains(const Point& p) const {
  if (p.size() != parts_.size()) return false;
  for (std::size_t j = 0; j < parts_.size(); ++j) {
    const auto& part = parts_[j];
    if (part.categorical) {
      if (p[j] < 0 || !part.categories.contains(static_cast<std::size_t>(p[j]))) return false;
    } else if (!part.interval.contains(p[j])) {
      return false;
    }
  }
  return true;
}

bool Box::subset_of(const Box& other) const {
  if (empty()) return true;
  if (other.size() != size()) return false;
  for (std::size_t j = 0; j < parts_.size(); ++j) {
    const auto& a = parts_[j];
    const auto& b = other.parts_[j];
    if (a.categorical != b.categorical) return false;
    if (a.categorical ? !a.categories.subset_of(b.categories) : !a.interval.subset_of(b.interval)) return false;
  }
  return true;
}

Point Box::representative() const {
  Point p(parts_.size());
  for (std::size_t j = 0; j < parts_.size(); ++j) {
    const auto& part = parts_[j];
    if (part.categorical) {
      p[j] = static_cast<double>(part.categories.first().value_or(0));
    } else {
      p[j] = part.interval.midpoint();
    }
  }
  return p;
}

std::size_t Box::hash() const {
  std::size_t h = parts_.size();
  auto mix = [&h](std::size_t v) { h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2); };
  for (const auto& part : parts_) {
    if (part.categorical) {
      mix(part.categories.hash());
    } else {
      mix(std::hash<double>{}(part.interval.lo));
      mix(std::hash<double>{}(part.interval.hi));
      mix(static_cast<std::size_t>(part.interval.lo_open) * 2 + static_cast<std::size_t>(part.interval.hi_open));
    }
  }
  return h;
}

// --------------------------------------------------------- CertificationSet

const char* to_string(Norm norm) {
  switch (norm) {
    case Norm::kL1: return "1";
    case Norm::kL2: return "2";
    case Norm::kLinf: return "inf";
  }
  return "?";
}

void validate_certset(const FeatureSpace& space, const CertificationSet& set) {
  if (const auto* balls = std::get_if<BallUnion>(&set)) {
    if (!(balls->radius >= 0.0)) throw Error(ErrorKind::kInvalidArgument, "ball radius must be >= 0");
  }
  for (const auto& p : certset_points(set)) check_point(space, p);
}

const std::vector<Point>& certset_points(const CertificationSet& set) {
  static const std::vector<Point> kNone;
  if (const auto* f = std::get_if<FiniteSet>(&set)) return f->points;
  if (const auto* b = std::get_if<BallUnion>(&set)) return b->centers;
  return kNone;
}

bool certset_needs_relaxation(const CertificationSet& set) {
  const auto* b = std::get_if<BallUnion>(&set);
  return b && b->norm != Norm::kLinf && b->radius > 0.0;
}

// -------------------------------------------------------------- Prediction

Prediction Prediction::Score(double value) {
  if (!std::isfinite(value)) throw Error(ErrorKind::kInvalidArgument, "score must be finite");
  return Prediction{value};
}

// ------------------------------------------------------------- DeviationFn

DeviationFn DeviationFn::abs_diff() {
  DeviationFn d;
  d.kind_ = Kind::kAbs;
  d.props_ = {true, true, true};
  d.name_ = "abs";
  return d;
}

DeviationFn DeviationFn::power_diff(double p) {
  if (!(p > 0.0) || !std::isfinite(p)) throw Error(ErrorKind::kInvalidArgument, "power must be > 0");
  DeviationFn d;
  d.kind_ = Kind::kPower;
  d.power_ = p;
  d.props_ = {true, true, true};
  std::ostringstream name;
  name << "pow:" << p;
  d.name_ = name.str();
  return d;
}

DeviationFn DeviationFn::custom(std::function<double(double, double)> evaluator, Properties properties,
                                std::string name) {
  if (!evaluator) throw Error(ErrorKind::kInvalidArgument, "custom deviation needs an evaluator");
  DeviationFn d;
  d.kind_ = Kind::kCustom;
  d.evaluator_ = std::move(evaluator);
  d.props_ = properties;
  d.name_ = std::move(name);
  return d;
}

DeviationFn DeviationFn::with_abstain(double value) const {
  if (!(value > 0.0) || !(value < declared_max_)) {
    throw Error(ErrorKind::kInvalidArgument, "abstain value must lie strictly between 0 and the maximum of D");
  }
  DeviationFn d = *this;
  d.abstain_ = value;
  return d;
}

DeviationFn DeviationFn::with_declared_max(double value) const {
  if (!(value > 0.0)) throw Error(ErrorKind::kInvalidArgument, "declared maximum must be > 0");
  if (abstain_ && !(*abstain_ < value)) {
    throw Error(ErrorKind::kInvalidArgument, "declared maximum must exceed the abstain value");
  }
  DeviationFn d = *this;
  d.declared_max_ = value;
  return d;
}

double DeviationFn::operator()(double y, double y0) const {
  switch (kind_) {
    case Kind::kAbs: return std::abs(y - y0);
    case Kind::kPower: return std::pow(std::abs(y - y0), power_);
    case Kind::kCustom: return evaluator_(y, y0);
  }
  return 0.0;
}

double deviation(const DeviationFn& d, const Prediction& a, const Prediction& b) {
  if (a.abstains() || b.abstains()) {
    if (!d.abstain_value()) {
      throw Error(ErrorKind::kAbstainUnconfigured, "a model abstained but D has no abstain value");
    }
    return *d.abstain_value();
  }
  return d(*a.score, *b.score);
}

double SumDeviation::operator()(std::span<const double> y, std::span<const double> y0) const {
  if (y.size() != parts_.size() || y0.size() != parts_.size()) {
    throw Error(ErrorKind::kSchemaMismatch, "output dimension mismatch");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < parts_.size(); ++k) total += parts_[k](y[k], y0[k]);
  return total;
}

}  // namespace devcert
