/*
 * Copyright 2026 The mmlime Authors.
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

// Global report exports: JSON, CSV and one static SVG bar chart per class.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmlime/global_agg.hpp"
#include "mmlime/json_io.hpp"

namespace mmlime::io {

struct ReportView {
  const agg::GlobalReport* report = nullptr;
  std::size_t top_k = 10;
  bool collapse_segments = false;
};

inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline Json report_to_json(const ReportView& view) {
  const auto& r = *view.report;
  Json classes = Json::array();
  for (std::size_t row = 0; row < r.classes.size(); ++row) {
    Json features = Json::array();
    for (const auto& f : agg::top_k(r, r.classes[row].index, view.top_k, view.collapse_segments)) {
      Json jf;
      jf["modality"] = std::string(to_string(f.modality));
      jf["key"] = f.key;
      jf["importance"] = f.importance;
      jf["support"] = f.support;
      jf["entropy"] = std::isnan(f.entropy) ? Json(nullptr) : Json(f.entropy);
      features.push_back(std::move(jf));
    }
    Json jc;
    jc["index"] = r.classes[row].index;
    jc["name"] = r.classes[row].name;
    jc["n_instances"] = r.class_sizes[row];
    jc["features"] = std::move(features);
    classes.push_back(std::move(jc));
  }
  Json j;
  j["method"] = std::string(agg::to_string(r.method));
  j["top_k"] = view.top_k;
  j["collapse_segments"] = view.collapse_segments;
  std::size_t total = 0;
  for (auto s : r.class_sizes) total += s;
  j["n_instances"] = total;
  j["classes"] = std::move(classes);
  return j;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string report_to_csv(const ReportView& view) {
  const auto& r = *view.report;
  std::string out = "class,modality,feature_key,importance,support,entropy\n";
  for (const auto& cls : r.classes) {
    for (const auto& f : agg::top_k(r, cls.index, view.top_k, view.collapse_segments)) {
      out += csv_field(cls.name) + ',' + std::string(to_string(f.modality)) + ',' + csv_field(f.key) + ',' +
             format_double(f.importance) + ',' + std::to_string(f.support) + ',' +
             (std::isnan(f.entropy) ? std::string() : format_double(f.entropy)) + '\n';
    }
  }
  return out;
}

inline std::string xml_escape(const std::string& s) {
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

inline constexpr const char* kTextColor = "#1f77b4";
inline constexpr const char* kAudioColor = "#ff7f0e";

// Horizontal bars, largest at the top, colored by modality.
inline std::string class_chart_svg(const ReportView& view, const ClassLabel& cls) {
  const auto ranked = agg::top_k(*view.report, cls.index, view.top_k, view.collapse_segments);
  constexpr int kWidth = 640, kLabelWidth = 200, kBarArea = 340, kRow = 24, kTop = 40, kLegend = 28;
  const int height = kTop + static_cast<int>(ranked.size()) * kRow + kLegend + 10;
  double max_v = 0.0;
  for (const auto& f : ranked) max_v = std::max(max_v, f.importance);

  char buf[512];
  std::string svg;
  std::snprintf(buf, sizeof buf,
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n",
                kWidth, height, kWidth, height);
  svg += buf;
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  std::snprintf(buf, sizeof buf,
                "<text x=\"10\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" font-weight=\"bold\">");
  svg += buf;
  svg += xml_escape(cls.name) + " (" + std::string(agg::to_string(view.report->method)) + ")</text>\n";

  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& f = ranked[i];
    const int y = kTop + static_cast<int>(i) * kRow;
    const double len = max_v > 0.0 ? f.importance / max_v * kBarArea : 0.0;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">",
                  kLabelWidth - 6, y + 15);
    svg += buf;
    svg += xml_escape(f.key) + "</text>\n";
    std::snprintf(buf, sizeof buf, "<rect x=\"%d\" y=\"%d\" width=\"%.2f\" height=\"%d\" fill=\"%s\"/>\n",
                  kLabelWidth, y + 3, len, kRow - 6, f.modality == Modality::Audio ? kAudioColor : kTextColor);
    svg += buf;
    std::snprintf(buf, sizeof buf,
                  "<text x=\"%.2f\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\">%.4g</text>\n",
                  kLabelWidth + len + 4, y + 15, f.importance);
    svg += buf;
  }
  const int ly = kTop + static_cast<int>(ranked.size()) * kRow + 8;
  std::snprintf(buf, sizeof buf,
                "<rect x=\"%d\" y=\"%d\" width=\"12\" height=\"12\" fill=\"%s\"/>"
                "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\">text</text>\n"
                "<rect x=\"%d\" y=\"%d\" width=\"12\" height=\"12\" fill=\"%s\"/>"
                "<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\">audio</text>\n",
                kLabelWidth, ly, kTextColor, kLabelWidth + 16, ly + 11, kLabelWidth + 70, ly, kAudioColor,
                kLabelWidth + 86, ly + 11);
  svg += buf;
  svg += "</svg>\n";
  return svg;
}

// Safe file stem for ids and class names.
inline std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c == '-' ||
                    c == '_' || c == '.';
    out += ok ? c : '_';
  }
  if (out.empty() || out == "." || out == "..") out = "_" + out;
  return out;
}

}  // namespace mmlime::io
