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

// Audio interpretable features: the waveform is separated into sources once,
// then cut into contiguous time segments. Each (segment, source) cell is one
// feature; masking a cell replaces it with silence.

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <limits>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "mmlime/core.hpp"
#include "mmlime/detail/base64.hpp"
#include "mmlime/detail/subprocess.hpp"
#include "mmlime/hpss.hpp"
#include "mmlime/wav.hpp"

namespace mmlime::audio {

inline constexpr std::size_t kDefaultSegments = 10;

using SegmentBounds = std::vector<std::pair<std::size_t, std::size_t>>;

// k spans of floor(n/k) samples; the last span absorbs the remainder.
inline SegmentBounds segment_bounds(std::size_t n_samples, std::size_t n_segments = kDefaultSegments) {
  if (n_segments == 0) throw ValidationError("number of segments must be at least 1");
  if (n_samples < n_segments) {
    throw ValidationError("cannot split " + std::to_string(n_samples) + " samples into " +
                          std::to_string(n_segments) + " segments");
  }
  const std::size_t span = n_samples / n_segments;
  SegmentBounds out;
  out.reserve(n_segments);
  for (std::size_t s = 0; s < n_segments; ++s) {
    const std::size_t start = s * span;
    const std::size_t end = (s + 1 == n_segments) ? n_samples : start + span;
    out.emplace_back(start, end);
  }
  return out;
}

enum class SeparatorKind { Null, Hpss, Stems, External };

inline const std::vector<std::string>& default_stem_sources() {
  static const std::vector<std::string> kNames{"vocals", "drums", "bass", "other"};
  return kNames;
}

struct SeparatorSpec {
  SeparatorKind kind = SeparatorKind::Null;
  std::vector<std::string> source_names{"mix"};
  HpssConfig hpss;
  std::filesystem::path stems_dir;
  std::vector<std::string> command;
  std::chrono::milliseconds timeout{std::chrono::minutes(5)};

  static SeparatorSpec null() { return {}; }

  static SeparatorSpec harmonic_percussive(HpssConfig cfg = {}) {
    SeparatorSpec s;
    s.kind = SeparatorKind::Hpss;
    s.source_names = {"harmonic", "percussive"};
    s.hpss = cfg;
    return s;
  }

  static SeparatorSpec stems(std::filesystem::path dir,
                             std::vector<std::string> names = default_stem_sources()) {
    SeparatorSpec s;
    s.kind = SeparatorKind::Stems;
    s.source_names = std::move(names);
    s.stems_dir = std::move(dir);
    return s;
  }

  static SeparatorSpec external(std::vector<std::string> command,
                                std::vector<std::string> names = default_stem_sources()) {
    SeparatorSpec s;
    s.kind = SeparatorKind::External;
    s.source_names = std::move(names);
    s.command = std::move(command);
    return s;
  }

  void validate() const {
    if (source_names.empty()) throw ValidationError("separator needs at least one source name");
    std::set<std::string> seen;
    for (const auto& n : source_names) {
      if (n.empty() || n.find('@') != std::string::npos || n.find('/') != std::string::npos) {
        throw ValidationError("invalid source name '" + n + "'");
      }
      if (!seen.insert(n).second) throw ValidationError("duplicate source name '" + n + "'");
    }
    if (kind == SeparatorKind::Hpss) hpss.validate();
    if (kind == SeparatorKind::External && command.empty()) {
      throw ValidationError("external separator needs a command");
    }
  }
};

struct Decomposition {
  std::vector<std::string> source_names;
  SegmentBounds bounds;
  // Cell (segment, source) lives at segment * n_sources() + source.
  std::vector<std::vector<float>> components;
  int sample_rate = 0;
  std::size_t length = 0;
  // Stems only: energy of (mix - sum of stems) relative to the mix, in dB.
  std::optional<double> residual_db;

  std::size_t n_segments() const { return bounds.size(); }
  std::size_t n_sources() const { return source_names.size(); }
  std::size_t n_cells() const { return components.size(); }

  const std::vector<float>& cell(std::size_t segment, std::size_t source) const {
    return components[segment * n_sources() + source];
  }

  std::vector<AudioFeatureKey> feature_keys() const {
    std::vector<AudioFeatureKey> keys;
    keys.reserve(n_cells());
    for (std::size_t s = 0; s < n_segments(); ++s) {
      for (const auto& name : source_names) keys.push_back(AudioFeatureKey{s, name});
    }
    return keys;
  }
};

struct StemSet {
  std::vector<std::vector<float>> sources;
  int sample_rate = 0;
};

// Reads <dir>/<name>.wav for every source name, in order.
inline StemSet load_stems(const std::filesystem::path& dir, std::span<const std::string> names) {
  StemSet out;
  for (const auto& name : names) {
    const auto path = dir / (name + ".wav");
    if (!std::filesystem::exists(path)) {
      throw ValidationError("missing stem for source '" + name + "' (expected " + path.string() + ")");
    }
    MonoAudio a = load_wav(path);
    if (!out.sources.empty()) {
      if (a.samples.size() != out.sources.front().size()) {
        throw ValidationError("stem '" + name + "' has " + std::to_string(a.samples.size()) +
                              " samples, expected " + std::to_string(out.sources.front().size()));
      }
      if (a.sample_rate != out.sample_rate) {
        throw ValidationError("stem '" + name + "' has sample rate " +
                              std::to_string(a.sample_rate) + ", expected " +
                              std::to_string(out.sample_rate));
      }
    }
    out.sample_rate = a.sample_rate;
    out.sources.push_back(std::move(a.samples));
  }
  return out;
}

struct StemResidual {
  double l2 = 0.0;  // ||mix - sum||
  double db = -std::numeric_limits<double>::infinity();
};

inline StemResidual stem_residual(std::span<const float> mix,
                                  const std::vector<std::vector<float>>& stems) {
  double res = 0.0, ref = 0.0;
  for (std::size_t t = 0; t < mix.size(); ++t) {
    double sum = 0.0;
    for (const auto& s : stems) sum += s[t];
    const double e = static_cast<double>(mix[t]) - sum;
    res += e * e;
    ref += static_cast<double>(mix[t]) * mix[t];
  }
  StemResidual r;
  r.l2 = std::sqrt(res);
  if (res > 0.0) {
    r.db = ref > 0.0 ? 10.0 * std::log10(res / ref) : std::numeric_limits<double>::infinity();
  }
  return r;
}

// Runs an external separator process for one waveform. Protocol: one request
// line {"sample_rate", "audio_b64"}, one response line {"sources": {name: b64}}.
inline std::vector<std::vector<float>> run_external_separator(std::span<const float> waveform,
                                                              int sample_rate,
                                                              const SeparatorSpec& spec) {
  mmlime::detail::ChildProcess child(spec.command);
  nlohmann::json request{{"sample_rate", sample_rate},
                         {"audio_b64", mmlime::detail::encode_pcm_f32(waveform)}};
  const std::string line = child.exchange(request.dump() + "\n", 1, spec.timeout).front();

  nlohmann::json response;
  try {
    response = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("external separator sent malformed JSON: " + std::string(e.what()));
  }
  if (response.contains("error")) {
    throw IoError("external separator failed: " + response["error"].dump());
  }
  if (!response.contains("sources") || !response["sources"].is_object()) {
    throw FormatError("external separator response lacks a 'sources' object");
  }
  std::vector<std::vector<float>> out;
  for (const auto& name : spec.source_names) {
    if (!response["sources"].contains(name) || !response["sources"][name].is_string()) {
      throw ValidationError("external separator did not return source '" + name + "'");
    }
    auto samples = mmlime::detail::decode_pcm_f32(response["sources"][name].get<std::string>());
    if (samples.size() != waveform.size()) {
      throw ValidationError("external separator source '" + name + "' has " +
                            std::to_string(samples.size()) + " samples, expected " +
                            std::to_string(waveform.size()));
    }
    out.push_back(std::move(samples));
  }
  return out;
}

// Separates the full waveform once, then slices every source by segment.
inline Decomposition decompose(std::span<const float> waveform, int sample_rate,
                               const SeparatorSpec& separator,
                               std::size_t n_segments = kDefaultSegments) {
  separator.validate();
  if (waveform.empty()) throw ValidationError("cannot decompose empty audio");
  if (sample_rate <= 0) throw ValidationError("sample rate must be positive");

  Decomposition d;
  d.source_names = separator.source_names;
  d.sample_rate = sample_rate;
  d.length = waveform.size();
  d.bounds = segment_bounds(waveform.size(), n_segments);

  std::vector<std::vector<float>> sources;
  switch (separator.kind) {
    case SeparatorKind::Null:
      if (separator.source_names.size() != 1) {
        throw ValidationError("the null separator has exactly one source");
      }
      sources.emplace_back(waveform.begin(), waveform.end());
      break;
    case SeparatorKind::Hpss: {
      if (separator.source_names.size() != 2) {
        throw ValidationError("the HPSS separator has exactly two sources");
      }
      auto r = hpss_separate(waveform, separator.hpss);
      sources.push_back(std::move(r.harmonic));
      sources.push_back(std::move(r.percussive));
      break;
    }
    case SeparatorKind::Stems: {
      auto stems = load_stems(separator.stems_dir, separator.source_names);
      if (stems.sample_rate != sample_rate) {
        throw ValidationError("stems in '" + separator.stems_dir.string() + "' have sample rate " +
                              std::to_string(stems.sample_rate) + ", mix has " +
                              std::to_string(sample_rate));
      }
      if (stems.sources.front().size() != waveform.size()) {
        throw ValidationError("stems in '" + separator.stems_dir.string() + "' have " +
                              std::to_string(stems.sources.front().size()) +
                              " samples, mix has " + std::to_string(waveform.size()));
      }
      d.residual_db = stem_residual(waveform, stems.sources).db;
      sources = std::move(stems.sources);
      break;
    }
    case SeparatorKind::External:
      sources = run_external_separator(waveform, sample_rate, separator);
      break;
  }

  d.components.reserve(d.bounds.size() * sources.size());
  for (const auto& [start, end] : d.bounds) {
    for (const auto& src : sources) {
      d.components.emplace_back(src.begin() + static_cast<std::ptrdiff_t>(start),
                                src.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  return d;
}

// Sum of the unmasked cells; masked cells contribute silence. The submask is
// segment-major, matching the canonical feature order.
inline std::vector<float> reconstruct(const Decomposition& d, const BinaryMask& audio_submask) {
  if (audio_submask.size() != d.n_cells()) {
    throw ValidationError("audio mask length " + std::to_string(audio_submask.size()) +
                          " does not match " + std::to_string(d.n_cells()) + " audio features");
  }
  std::vector<float> out(d.length, 0.0f);
  const std::size_t n_src = d.n_sources();
  for (std::size_t s = 0; s < d.n_segments(); ++s) {
    float* dst = out.data() + d.bounds[s].first;
    for (std::size_t k = 0; k < n_src; ++k) {
      if (!audio_submask[s * n_src + k]) continue;
      const auto& cell = d.components[s * n_src + k];
      for (std::size_t t = 0; t < cell.size(); ++t) dst[t] += cell[t];
    }
  }
  return out;
}

}  // namespace mmlime::audio
