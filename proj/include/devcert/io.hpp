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

// Interchange formats: JSON model files, CSV point files with an optional
// JSON manifest, and the certification-set spec grammar.
//
// Model parameters (thresholds, breakpoints, weights, leaf boxes) are stored
// in normalized coordinates z = (x - mean) / std. Feature bounds and the
// normalization statistics are stored in raw units.

#include <cstdint>
#include <json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "devcert/models.hpp"

namespace devcert {

inline constexpr int kFormatVersion = 1;

// What the leaf / rule outputs of a tree-like model mean.
enum class OutputKind { kScore, kProbability };

struct ModelMetadata {
  std::string name;
  std::string source;
  std::string notes;
  friend bool operator==(const ModelMetadata&, const ModelMetadata&) = default;
};

struct ModelFile {
  FeatureSpace space;
  Model model;
  OutputKind output = OutputKind::kScore;
  ModelMetadata metadata;

  friend bool operator==(const ModelFile& a, const ModelFile& b) {
    return a.space == b.space && a.model == b.model && a.output == b.output && a.metadata == b.metadata;
  }
};

// Throws kParseError (with line and column), kVersionError, or kSchemaError
// naming the offending field by JSON pointer.
ModelFile parse_model(std::string_view text);
nlohmann::json model_to_json(const ModelFile& file);
std::string serialize_model(const ModelFile& file);
ModelFile load_model(const std::string& path);
void save_model(const ModelFile& file, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Comma-separated, first line is the header, double quotes escape commas.
CsvTable parse_csv(std::string_view text);
CsvTable read_csv(const std::string& path);

struct PointSet {
  std::vector<Point> points;  // normalized
  std::vector<RawPoint> raw;
  std::optional<std::vector<int>> labels;  // +1 / -1
};

// Rows of `table` as points of `space`; columns are matched by feature name
// and extra columns are ignored. Labels in {1, -1} or {1, 0} are read from
// `label_column` when given. Throws kParseError naming row and column.
PointSet points_from_csv(const CsvTable& table, const FeatureSpace& space, const std::string& label_column = "");
PointSet load_points(const std::string& path, const FeatureSpace& space, const std::string& label_column = "");

struct Dataset {
  FeatureSpace space;
  PointSet data;
};

// The manifest lists every column as continuous (lo, hi, mean, std),
// categorical (categories) or label. Missing statistics are computed from
// "training_split" (a CSV path relative to the manifest); without it they
// raise kMissingStats.
Dataset load_dataset(const std::string& csv_path, const std::string& manifest_path);

// `full`, `points:FILE.csv`, or `balls:FILE.csv:r=R[:p=1|2|inf]`. A radius
// of `inf` means the full space.
struct CertSetSpec {
  std::string text;
  CertificationSet set;
  std::string file_contents;  // for digests
};
CertSetSpec parse_certset(const std::string& spec, const FeatureSpace& space);

// Raw-unit rendering of a normalized box: intervals per continuous feature,
// category names per categorical feature.
nlohmann::json box_to_json(const FeatureSpace& space, const Box& box);
// Inverse of box_to_json.
Box box_from_json(const FeatureSpace& space, const nlohmann::json& j);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 14695981039346656037ULL);
std::string hex64(std::uint64_t value);

}  // namespace devcert
