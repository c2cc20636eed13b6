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

// JSON forms of feature spaces, masks and local explanations. Schemas live in
// schemas/*.schema.json.
//
//   feature: {"modality": "text", "key": "love"}
//            {"modality": "audio", "key": {"segment": 3, "source": "vocals"}}

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "json.hpp"
#include "mmlime/core.hpp"
#include "mmlime/lime_engine.hpp"

namespace mmlime::io {

using Json = nlohmann::ordered_json;

inline Json feature_to_json(const FeatureDescriptor& f) {
  Json j;
  j["modality"] = std::string(to_string(f.modality));
  if (f.is_audio()) {
    j["key"] = Json{{"segment", f.segment}, {"source", f.name}};
  } else {
    j["key"] = f.name;
  }
  return j;
}

template <typename J>
FeatureDescriptor feature_from_json(const J& j) {
  const Modality m = modality_from_string(j.at("modality").template get<std::string>());
  const auto& key = j.at("key");
  if (m == Modality::Audio) {
    return FeatureDescriptor::audio(key.at("segment").template get<std::size_t>(),
                                    key.at("source").template get<std::string>());
  }
  return FeatureDescriptor::text(key.template get<std::string>());
}

inline Json label_to_json(const ClassLabel& c) { return Json{{"index", c.index}, {"name", c.name}}; }

template <typename J>
ClassLabel label_from_json(const J& j) {
  return ClassLabel{j.at("index").template get<std::size_t>(), j.at("name").template get<std::string>()};
}

inline Json feature_space_to_json(const FeatureSpace& space) {
  Json features = Json::array();
  for (const auto& f : space) features.push_back(feature_to_json(f));
  return Json{{"d", space.size()}, {"features", std::move(features)}};
}

inline FeatureSpace feature_space_from_json(const Json& j) {
  std::vector<AudioFeatureKey> audio;
  std::vector<std::string> text;
  for (const auto& f : j.at("features")) {
    const auto d = feature_from_json(f);
    if (d.is_audio()) {
      if (!text.empty()) throw ValidationError("feature space lists audio after text features");
      audio.push_back({d.segment, d.name});
    } else {
      text.push_back(d.name);
    }
  }
  auto space = canonical_feature_order(audio, text);
  if (j.contains("d") && j.at("d").get<std::size_t>() != space.size()) {
    throw ValidationError("feature space 'd' does not match its feature list");
  }
  return space;
}

inline Json mask_to_json(const BinaryMask& m) { return m.to_string(); }
inline BinaryMask mask_from_json(const Json& j) { return BinaryMask::from_string(j.get<std::string>()); }

inline Json explanation_to_json(const lime::LocalExplanation& e) {
  Json features = Json::array();
  for (const auto& fw : e.ranked()) {
    Json f = feature_to_json(fw.feature);
    f["weight"] = fw.weight;
    features.push_back(std::move(f));
  }
  Json j;
  j["instance_id"] = e.instance_id;
  j["class"] = label_to_json(e.target);
  j["intercept"] = e.intercept;
  j["r_squared"] = e.r_squared;
  j["n_samples"] = e.n_samples;
  j["seed"] = e.seed;
  j["predicted_class"] = label_to_json(e.predicted_class);
  j["predicted_probability"] = e.predicted_probability;
  j["features"] = std::move(features);
  return j;
}

// Feature weights come back in file order (ranked), not canonical order.
inline lime::LocalExplanation explanation_from_json(const nlohmann::json& j) {
  try {
    lime::LocalExplanation e;
    e.instance_id = j.at("instance_id").get<std::string>();
    e.target = label_from_json(j.at("class"));
    e.intercept = j.at("intercept").get<double>();
    e.r_squared = j.at("r_squared").get<double>();
    e.n_samples = j.at("n_samples").get<std::size_t>();
    e.seed = j.at("seed").get<std::uint64_t>();
    e.predicted_class = label_from_json(j.at("predicted_class"));
    e.predicted_probability = j.value("predicted_probability", 0.0);
    for (const auto& f : j.at("features")) {
      e.weights.push_back({feature_from_json(f), f.at("weight").get<double>()});
    }
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed explanation JSON: ") + ex.what());
  }
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes to a temporary sibling and renames it into place, so readers never
// observe a partially written file.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  thread_local std::mt19937_64 gen{std::random_device{}()};
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid()) + "." + std::to_string(gen());
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at '" + path.string() + "'");
  }
}

}  // namespace mmlime::io
