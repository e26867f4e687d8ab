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

#include "devcert/report.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <sstream>

#include "devcert/geometry.hpp"

namespace devcert {

using nlohmann::json;

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json optional_index(const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); }

// JSON has no infinity; unbounded interval ends become null.
json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string values_text(const FeatureSpace& space, const FeatureContribution& c) {
  if (c.categorical) {
    std::string out = "{";
    for (std::size_t k : c.categories.members()) {
      if (out.size() > 1) out += ", ";
      out += space[c.feature].categories().categories[k];
    }
    return out + "}";
  }
  double lo = space.denormalize_value(c.feature, c.interval.lo);
  double hi = space.denormalize_value(c.feature, c.interval.hi);
  if (lo == hi) return format_number(lo);
  return "[" + format_number(lo) + ", " + format_number(hi) + "]";
}

std::string radius_text(double r) { return std::isinf(r) ? "inf" : format_number(r); }

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string box_to_text(const FeatureSpace& space, const Box& box) {
  std::vector<std::string> parts;
  for (std::size_t j = 0; j < space.size(); ++j) {
    if (space.categorical(j)) {
      const CategorySet& s = box.categories(j);
      if (s.full()) continue;
      std::string p = space[j].name + " in {";
      bool first = true;
      for (std::size_t k : s.members()) {
        p += (first ? "" : ", ") + space[j].categories().categories[k];
        first = false;
      }
      parts.push_back(p + "}");
      continue;
    }
    const Interval& iv = box.interval(j);
    Interval bounds = space.normalized_bounds(j);
    if (iv.lo <= bounds.lo && iv.hi >= bounds.hi && !iv.lo_open && !iv.hi_open) continue;
    double lo = space.denormalize_value(j, iv.lo);
    double hi = space.denormalize_value(j, iv.hi);
    if (lo == hi) {
      parts.push_back(space[j].name + " = " + format_number(lo));
    } else {
      parts.push_back(space[j].name + " in " + (iv.lo_open ? "(" : "[") + format_number(lo) + ", " +
                      format_number(hi) + (iv.hi_open ? ")" : "]"));
    }
  }
  if (parts.empty()) return "everything";
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : "; ") + p;
  return out;
}

json result_to_json(const FeatureSpace& space, const CertificationSet& set, const CertResult& r) {
  json out;
  out["lower"] = r.lower;
  out["upper"] = r.upper;
  out["exact"] = r.exact;
  out["relaxed_norm"] = r.relaxed_norm;
  out["budget_expired"] = r.budget_expired;
  out["signed_max"] = optional_number(r.signed_max);
  out["signed_min"] = optional_number(r.signed_min);

  // Relaxed l_1 / l_2 results report boxes of the enclosing l_inf balls.
  CertificationSet membership = set;
  if (auto* balls = std::get_if<BallUnion>(&membership)) balls->norm = Norm::kLinf;
  json maximizers = json::array();
  for (const auto& m : r.maximizers) {
    json raw = box_to_json(space, m.region);
    json j;
    j["region"] = raw;
    j["description"] = box_to_text(space, m.region);
    j["deviation"] = m.deviation;
    j["model_score"] = optional_number(m.model_score);
    j["reference_score"] = optional_number(m.reference_score);
    j["model_leaf"] = optional_index(m.model_leaf);
    j["reference_leaf"] = optional_index(m.reference_leaf);
    j["witnesses"] = m.witness_ball_ids;
    j["inside_certset"] = box_inside_certset(space, box_from_json(space, raw), membership, 1e-9);
    maximizers.push_back(std::move(j));
  }
  out["maximizers"] = std::move(maximizers);

  json leaves = json::array();
  for (const auto& s : r.per_reference_leaf) {
    json j;
    j["leaf"] = s.leaf;
    j["leaf_region"] = box_to_text(space, s.leaf_region);
    j["reference_score"] = s.reference_score;
    j["min_model_score"] = s.min_model_score;
    j["max_model_score"] = s.max_model_score;
    j["max_deviation"] = s.max_deviation;
    j["maximizer"] = box_to_text(space, s.maximizer);
    leaves.push_back(std::move(j));
  }
  out["per_reference_leaf"] = std::move(leaves);

  out["stats"] = {{"edges_evaluated", r.stats.edges_evaluated},
                  {"extremizations", r.stats.extremizations},
                  {"segment_evaluations", r.stats.segment_evaluations},
                  {"nodes_expanded", r.stats.nodes_expanded},
                  {"cliques_completed", r.stats.cliques_completed},
                  {"heuristic_evals", r.stats.heuristic_evals}};
  return out;
}

json contributions_to_json(const FeatureSpace& space, const std::vector<FeatureContribution>& rows,
                           std::size_t top_k) {
  json out = json::array();
  for (std::size_t i = 0; i < std::min(top_k, rows.size()); ++i) {
    const auto& c = rows[i];
    json j;
    j["rank"] = i + 1;
    j["feature"] = space[c.feature].name;
    j["contribution"] = c.contribution;
    if (c.categorical) {
      json cats = json::array();
      for (std::size_t k : c.categories.members()) cats.push_back(space[c.feature].categories().categories[k]);
      j["categories"] = std::move(cats);
    } else {
      j["lo"] = finite_or_null(space.denormalize_value(c.feature, c.interval.lo));
      j["hi"] = finite_or_null(space.denormalize_value(c.feature, c.interval.hi));
    }
    out.push_back(std::move(j));
  }
  return out;
}

std::string contributions_table(const FeatureSpace& space, const std::vector<FeatureContribution>& rows,
                                std::size_t top_k) {
  std::size_t n = std::min(top_k, rows.size());
  std::vector<std::array<std::string, 4>> cells;
  cells.push_back({"rank", "feature", "contribution", "values"});
  for (std::size_t i = 0; i < n; ++i) {
    cells.push_back({std::to_string(i + 1), space[rows[i].feature].name, format_number(rows[i].contribution),
                     values_text(space, rows[i])});
  }
  std::array<std::size_t, 4> width{};
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < 4; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < 4; ++c) {
      out << cells[r][c];
      if (c + 1 < 4) out << std::string(width[c] - cells[r][c].size() + 2, ' ');
    }
    out << "\n";
    if (r == 0) {
      for (std::size_t c = 0; c < 4; ++c) out << std::string(width[c], '-') << (c + 1 < 4 ? "  " : "");
      out << "\n";
    }
  }
  return out.str();
}

std::string breakdown_csv(const FeatureSpace& space, const std::vector<ReferenceLeafSummary>& rows) {
  std::ostringstream out;
  out << "leaf,leaf_region,reference_score,min_model_score,max_model_score,max_deviation,maximizer\n";
  for (const auto& s : rows) {
    out << s.leaf << "," << csv_quote(box_to_text(space, s.leaf_region)) << "," << format_number(s.reference_score)
        << "," << format_number(s.min_model_score) << "," << format_number(s.max_model_score) << ","
        << format_number(s.max_deviation) << "," << csv_quote(box_to_text(space, s.maximizer)) << "\n";
  }
  return out.str();
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream out;
  out << "r,lower,upper,exact\n";
  for (const auto& row : rows) {
    out << radius_text(row.radius) << "," << format_number(row.lower) << "," << format_number(row.upper) << ","
        << (row.exact ? "true" : "false") << "\n";
  }
  return out.str();
}

std::string sweep_svg(const std::vector<SweepRow>& rows, const std::string& title) {
  const double width = 640;
  const double height = 400;
  const double left = 70;
  const double right = 20;
  const double top = 40;
  const double bottom = 50;
  double ymax = 0.0;
  for (const auto& row : rows) ymax = std::max({ymax, row.lower, std::isfinite(row.upper) ? row.upper : row.lower});
  if (ymax <= 0.0) ymax = 1.0;
  auto x_at = [&](std::size_t i) {
    double span = width - left - right;
    return rows.size() < 2 ? left + span / 2 : left + span * static_cast<double>(i) / static_cast<double>(rows.size() - 1);
  };
  auto y_at = [&](double v) { return top + (height - top - bottom) * (1.0 - std::min(v, ymax) / ymax); };
  auto polyline = [&](bool upper, const char* color) {
    std::string pts;
    for (std::size_t i = 0; i < rows.size(); ++i) {
      double v = upper ? rows[i].upper : rows[i].lower;
      pts += (pts.empty() ? "" : " ") + format_number(x_at(i)) + "," + format_number(y_at(v));
    }
    return "  <polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"2\" points=\"" + pts +
           "\"/>\n";
  };

  std::ostringstream out;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n"
      << "  <title>" << xml_escape(title) << "</title>\n"
      << "  <desc>" << xml_escape(sweep_csv(rows)) << "</desc>\n"
      << "  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "  <text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"14\">" << xml_escape(title) << "</text>\n"
      << "  <line x1=\"" << left << "\" y1=\"" << height - bottom << "\" x2=\"" << width - right << "\" y2=\""
      << height - bottom << "\" stroke=\"black\"/>\n"
      << "  <line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << height - bottom
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    double v = ymax * t / 4.0;
    out << "  <text x=\"" << left - 6 << "\" y=\"" << format_number(y_at(v) + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << format_number(v) << "</text>\n";
  }
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << "  <text x=\"" << format_number(x_at(i)) << "\" y=\"" << height - bottom + 18
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << radius_text(rows[i].radius)
        << "</text>\n";
  }
  out << "  <text x=\"" << (left + width - right) / 2 << "\" y=\"" << height - 10
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">radius r</text>\n";
  out << polyline(true, "#d62728") << polyline(false, "#1f77b4");
  out << "  <text x=\"" << width - right - 90 << "\" y=\"" << top + 10
      << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\">upper</text>\n"
      << "  <text x=\"" << width - right - 90 << "\" y=\"" << top + 24
      << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#1f77b4\">lower</text>\n"
      << "</svg>\n";
  return out.str();
}

}  // namespace devcert
