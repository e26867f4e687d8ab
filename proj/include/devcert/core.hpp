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

// Shared vocabulary: feature spaces, boxes, certification sets, deviation
// functions and predictions.
//
// Every certifier works in normalized coordinates: a continuous feature x is
// represented by (x - mean) / std, a categorical feature by the index of its
// category. Raw values only appear at the io boundary.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace devcert {

enum class ErrorKind {
  kSchemaMismatch,
  kAbstainUnconfigured,
  kUnsupportedNorm,
  kUnsupportedCondition,
  kEmptyCertSet,
  kEmptyRegion,
  kAssumptionViolated,
  kInfeasible,
  kOracleFailure,
  kBudgetTooSmall,
  kParseError,
  kSchemaError,
  kVersionError,
  kMissingStats,
  kUnsupportedPair,
  kInvalidArgument,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// A real interval. Endpoints are closed unless flagged open. Tree splits
// "x <= t" produce (.., t] on the left and (t, ..] on the right, so sibling
// leaves share no point and intersections only report regions that contain
// actual inputs.
struct Interval {
  double lo = -kInf;
  double hi = kInf;
  bool lo_open = false;
  bool hi_open = false;

  static Interval closed(double lo, double hi) { return {lo, hi, false, false}; }

  bool empty() const { return lo > hi || (lo == hi && (lo_open || hi_open)); }
  bool contains(double x) const {
    return (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
  }
  double width() const { return empty() ? 0.0 : hi - lo; }
  double midpoint() const { return 0.5 * (lo + hi); }
  Interval intersect(const Interval& other) const;
  bool meets(const Interval& other) const;
  bool subset_of(const Interval& other) const;

  friend bool operator==(const Interval&, const Interval&) = default;
};

// A subset of the categories of one categorical feature.
class CategorySet {
 public:
  CategorySet() = default;
  explicit CategorySet(std::size_t universe, bool all = false);
  static CategorySet single(std::size_t universe, std::size_t member);

  std::size_t universe() const { return universe_; }
  bool contains(std::size_t c) const;
  void insert(std::size_t c);
  void erase(std::size_t c);
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool full() const { return count() == universe_; }
  std::vector<std::size_t> members() const;
  std::optional<std::size_t> first() const;

  CategorySet intersect(const CategorySet& other) const;
  CategorySet complement() const;
  bool meets(const CategorySet& other) const;
  bool subset_of(const CategorySet& other) const;

  std::size_t hash() const;
  friend bool operator==(const CategorySet&, const CategorySet&) = default;

 private:
  std::size_t universe_ = 0;
  std::vector<std::uint64_t> words_;
};

struct ContinuousSpec {
  double lo = 0.0;  // raw units
  double hi = 1.0;
  double mean = 0.0;
  double std = 1.0;
  friend bool operator==(const ContinuousSpec&, const ContinuousSpec&) = default;
};

struct CategoricalSpec {
  std::vector<std::string> categories;
  friend bool operator==(const CategoricalSpec&, const CategoricalSpec&) = default;
};

struct FeatureSpec {
  std::string name;
  std::variant<ContinuousSpec, CategoricalSpec> kind;

  bool categorical() const { return std::holds_alternative<CategoricalSpec>(kind); }
  const ContinuousSpec& continuous() const { return std::get<ContinuousSpec>(kind); }
  const CategoricalSpec& categories() const { return std::get<CategoricalSpec>(kind); }
  friend bool operator==(const FeatureSpec&, const FeatureSpec&) = default;
};

// Normalized coordinates, one per feature (category index for categoricals).
using Point = std::vector<double>;
using RawValue = std::variant<double, std::string>;
using RawPoint = std::vector<RawValue>;

class FeatureSpace {
 public:
  FeatureSpace() = default;
  // Throws kSchemaError when an invariant is violated.
  explicit FeatureSpace(std::vector<FeatureSpec> features);

  std::size_t size() const { return features_.size(); }
  const FeatureSpec& operator[](std::size_t j) const { return features_[j]; }
  const std::vector<FeatureSpec>& features() const { return features_; }

  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  bool categorical(std::size_t j) const { return features_[j].categorical(); }
  std::size_t num_categories(std::size_t j) const;
  std::size_t category_index(std::size_t j, std::string_view category) const;

  // Bounds of feature j in normalized coordinates.
  Interval normalized_bounds(std::size_t j) const;
  double normalize_value(std::size_t j, double raw) const;
  double denormalize_value(std::size_t j, double z) const;

  friend bool operator==(const FeatureSpace&, const FeatureSpace&) = default;

 private:
  std::vector<FeatureSpec> features_;
};

Point normalize_point(const FeatureSpace& space, const RawPoint& raw);
RawPoint denormalize_point(const FeatureSpace& space, const Point& point);
// Expands categorical coordinates into one-hot blocks.
std::vector<double> one_hot_encode(const FeatureSpace& space, const Point& point);
// Throws kSchemaMismatch unless the point has the right arity, valid category
// indices and lies inside the feature bounds.
void check_point(const FeatureSpace& space, const Point& point);

// Axis-aligned Cartesian region: an interval per continuous feature and a
// category set per categorical feature.
class Box {
 public:
  Box() = default;
  static Box full(const FeatureSpace& space);
  static Box point(const FeatureSpace& space, const Point& p);

  std::size_t size() const { return parts_.size(); }
  bool categorical(std::size_t j) const { return parts_[j].categorical; }
  const Interval& interval(std::size_t j) const { return parts_[j].interval; }
  Interval& interval(std::size_t j) { return parts_[j].interval; }
  const CategorySet& categories(std::size_t j) const { return parts_[j].categories; }
  CategorySet& categories(std::size_t j) { return parts_[j].categories; }

  bool empty() const;
  bool contains(const Point& p) const;
  bool subset_of(const Box& other) const;
  // Some point of the box (midpoints and first categories).
  Point representative() const;
  std::size_t hash() const;

  friend bool operator==(const Box&, const Box&) = default;

 private:
  struct Component {
    bool categorical = false;
    Interval interval;
    CategorySet categories;
    friend bool operator==(const Component&, const Component&) = default;
  };
  std::vector<Component> parts_;
};

struct BoxHash {
  std::size_t operator()(const Box& b) const { return b.hash(); }
};

enum class Norm { kL1, kL2, kLinf };

const char* to_string(Norm norm);

struct FullSpace {};
struct FiniteSet {
  std::vector<Point> points;
};
struct BallUnion {
  std::vector<Point> centers;
  double radius = 0.0;  // normalized units
  Norm norm = Norm::kLinf;
};

using CertificationSet = std::variant<FullSpace, FiniteSet, BallUnion>;

// Checks radius >= 0 and that every point/center lies in the feature bounds.
void validate_certset(const FeatureSpace& space, const CertificationSet& set);

// Points or centers of a finite set / ball union; empty for the full space.
const std::vector<Point>& certset_points(const CertificationSet& set);

// Ball unions are validated through the bounding l_inf ball for p in {1, 2}.
bool certset_needs_relaxation(const CertificationSet& set);

struct Prediction {
  std::optional<double> score;  // empty means abstain

  static Prediction Score(double value);
  static Prediction Abstain() { return Prediction{}; }
  bool abstains() const { return !score.has_value(); }
};

// D(y, y0): a non-negative deviation between a model score and a reference
// score, with declared structural properties.
class DeviationFn {
 public:
  struct Properties {
    bool monotone = false;    // zero on the diagonal, grows away from y0
    bool difference = false;  // depends on y - y0 only
    bool symmetric = false;
  };

  static DeviationFn abs_diff();
  static DeviationFn power_diff(double p);
  static DeviationFn custom(std::function<double(double, double)> evaluator,
                            Properties properties, std::string name = "custom");

  // Returns a copy that maps any abstention to `value`. The value must lie
  // strictly between 0 and the declared maximum.
  DeviationFn with_abstain(double value) const;
  DeviationFn with_declared_max(double value) const;

  double operator()(double y, double y0) const;
  // phi(delta) = D(delta, 0); only meaningful when `difference` holds.
  double of_difference(double delta) const { return (*this)(delta, 0.0); }

  const Properties& properties() const { return props_; }
  bool monotone() const { return props_.monotone; }
  bool difference() const { return props_.difference; }
  bool symmetric() const { return props_.symmetric; }
  std::optional<double> abstain_value() const { return abstain_; }
  double declared_max() const { return declared_max_; }
  const std::string& name() const { return name_; }

 private:
  enum class Kind { kAbs, kPower, kCustom };
  Kind kind_ = Kind::kAbs;
  double power_ = 1.0;
  std::function<double(double, double)> evaluator_;
  Properties props_;
  std::optional<double> abstain_;
  double declared_max_ = kInf;
  std::string name_ = "abs";
};

// D applied to two predictions, honouring abstention.
double deviation(const DeviationFn& d, const Prediction& a, const Prediction& b);

// Separable multi-output deviation: sum of per-output scalar deviations.
class SumDeviation {
 public:
  explicit SumDeviation(std::vector<DeviationFn> parts) : parts_(std::move(parts)) {}
  double operator()(std::span<const double> y, std::span<const double> y0) const;

 private:
  std::vector<DeviationFn> parts_;
};

}  // namespace devcert
