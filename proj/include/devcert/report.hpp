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

// Rendering of certification results: JSON reports, breakdown CSV, radius
// sweep CSV/SVG and contribution tables. Regions are always emitted in raw
// feature units. Nothing here reads the clock, so equal inputs give equal
// bytes; callers add wall time in a separate "timing" field.

#include <json.hpp>
#include <string>
#include <vector>

#include "devcert/certify_additive.hpp"
#include "devcert/io.hpp"

namespace devcert {

// Human-readable raw-unit rendering, e.g. "age in (30, 45]; color in {red}".
// Unrestricted features are omitted; the full box renders as "everything".
std::string box_to_text(const FeatureSpace& space, const Box& box);

// lower, upper, exact, flags, signed extremes, maximizers (each re-checked
// for membership after a round trip through raw units), the per-reference-
// leaf table and search counters.
nlohmann::json result_to_json(const FeatureSpace& space, const CertificationSet& set, const CertResult& result);

nlohmann::json contributions_to_json(const FeatureSpace& space, const std::vector<FeatureContribution>& rows,
                                     std::size_t top_k);
// Fixed-width table with one row per feature: rank, feature, contribution,
// extremizing values.
std::string contributions_table(const FeatureSpace& space, const std::vector<FeatureContribution>& rows,
                                std::size_t top_k);

std::string breakdown_csv(const FeatureSpace& space, const std::vector<ReferenceLeafSummary>& rows);

struct SweepRow {
  double radius = 0.0;  // kInf for the full space
  double lower = 0.0;
  double upper = 0.0;
  bool exact = false;
};

std::string sweep_csv(const std::vector<SweepRow>& rows);
// Standalone SVG line plot of lower and upper against radius, radii evenly
// spaced on the horizontal axis; the data table is embedded as <desc>.
std::string sweep_svg(const std::vector<SweepRow>& rows, const std::string& title);

// Shortest decimal that round-trips through strtod.
std::string format_number(double v);

}  // namespace devcert
