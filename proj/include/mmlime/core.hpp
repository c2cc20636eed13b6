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

// Shared domain types: labels, interpretable feature identity, feature
// spaces and binary perturbation masks.

#pragma once

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mmlime {

// ---------------------------------------------------------------------------
// Errors. Every failure surfaced by the library derives from Error so callers
// can map categories onto exit codes.

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments, violated preconditions, inconsistent inputs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Unsupported or corrupt file contents (e.g. WAV codec).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Missing files, unreadable directories, failed writes.
class IoError : public Error {
 public:
  using Error::Error;
};

// Ill-conditioned linear algebra.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Class labels.

struct ClassLabel {
  std::size_t index = 0;
  std::string name;

  friend bool operator==(const ClassLabel&, const ClassLabel&) = default;
};

// Dense, name-unique label set 0..n-1.
class LabelSet {
 public:
  LabelSet() = default;

  explicit LabelSet(std::vector<std::string> names) {
    for (std::size_t i = 0; i < names.size(); ++i) {
      for (std::size_t k = 0; k < i; ++k) {
        if (names[k] == names[i]) {
          throw ValidationError("duplicate class label name '" + names[i] + "'");
        }
      }
      labels_.push_back(ClassLabel{i, names[i]});
    }
  }

  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  const ClassLabel& at(std::size_t index) const {
    if (index >= labels_.size()) {
      throw ValidationError("class index " + std::to_string(index) + " out of range (" +
                            std::to_string(labels_.size()) + " classes)");
    }
    return labels_[index];
  }

  std::optional<std::size_t> find(std::string_view name) const {
    for (const auto& l : labels_) {
      if (l.name == name) return l.index;
    }
    return std::nullopt;
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(labels_.size());
    for (const auto& l : labels_) out.push_back(l.name);
    return out;
  }

  auto begin() const { return labels_.begin(); }
  auto end() const { return labels_.end(); }

  friend bool operator==(const LabelSet&, const LabelSet&) = default;

 private:
  std::vector<ClassLabel> labels_;
};

// ---------------------------------------------------------------------------
// Feature identity.

enum class Modality { Audio, Text };

inline std::string_view to_string(Modality m) {
  return m == Modality::Audio ? "audio" : "text";
}

inline Modality modality_from_string(std::string_view s) {
  if (s == "audio") return Modality::Audio;
  if (s == "text") return Modality::Text;
  throw ValidationError("unknown modality '" + std::string(s) + "'");
}

// One interpretable feature. Text features are keyed by a cleaned word; audio
// features by (segment index, source name). Equality of keys is cross-instance
// feature identity.
//
// The defaulted ordering (audio before text, then segment, then name) is the
// global canonical order used when features from many instances are pooled.
struct FeatureDescriptor {
  Modality modality = Modality::Text;
  std::size_t segment = 0;  // audio only
  std::string name;         // word for text, source name for audio

  static FeatureDescriptor text(std::string word) {
    return FeatureDescriptor{Modality::Text, 0, std::move(word)};
  }
  static FeatureDescriptor audio(std::size_t segment, std::string source) {
    return FeatureDescriptor{Modality::Audio, segment, std::move(source)};
  }

  bool is_audio() const { return modality == Modality::Audio; }

  // "love" for text, "vocals@seg3" for audio.
  std::string key_string() const {
    if (!is_audio()) return name;
    return name + "@seg" + std::to_string(segment);
  }

  friend bool operator==(const FeatureDescriptor&, const FeatureDescriptor&) = default;
  friend std::strong_ordering operator<=>(const FeatureDescriptor& a,
                                          const FeatureDescriptor& b) {
    if (auto c = a.modality <=> b.modality; c != 0) return c;
    if (a.is_audio()) {
      if (auto c = a.segment <=> b.segment; c != 0) return c;
    }
    return a.name.compare(b.name) <=> 0;
  }
};

struct AudioFeatureKey {
  std::size_t segment = 0;
  std::string source;
};

// Ordered list of the features of one instance. Audio features come first
// (segment-major, sources in separator order), then text features in order of
// first occurrence in the lyrics.
class FeatureSpace {
 public:
  FeatureSpace() = default;

  std::size_t size() const { return descriptors_.size(); }
  bool empty() const { return descriptors_.empty(); }
  std::size_t audio_count() const { return n_audio_; }
  std::size_t text_count() const { return descriptors_.size() - n_audio_; }

  const FeatureDescriptor& operator[](std::size_t i) const { return descriptors_[i]; }
  const std::vector<FeatureDescriptor>& descriptors() const { return descriptors_; }

  std::optional<std::size_t> index_of(const FeatureDescriptor& d) const {
    auto it = index_.find(d);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  auto begin() const { return descriptors_.begin(); }
  auto end() const { return descriptors_.end(); }

  friend bool operator==(const FeatureSpace& a, const FeatureSpace& b) {
    return a.descriptors_ == b.descriptors_;
  }

 private:
  friend FeatureSpace canonical_feature_order(std::span<const AudioFeatureKey>,
                                              std::span<const std::string>);

  std::vector<FeatureDescriptor> descriptors_;
  std::map<FeatureDescriptor, std::size_t> index_;
  std::size_t n_audio_ = 0;
};

inline FeatureSpace canonical_feature_order(std::span<const AudioFeatureKey> audio,
                                            std::span<const std::string> text) {
  std::vector<AudioFeatureKey> sorted(audio.begin(), audio.end());
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const auto& a, const auto& b) { return a.segment < b.segment; });

  FeatureSpace space;
  auto push = [&space](FeatureDescriptor d) {
    auto [it, inserted] = space.index_.emplace(d, space.descriptors_.size());
    if (!inserted) {
      throw ValidationError("duplicate feature '" + d.key_string() + "' (" +
                            std::string(to_string(d.modality)) + ")");
    }
    space.descriptors_.push_back(std::move(d));
  };
  for (const auto& a : sorted) {
    if (a.source.empty()) throw ValidationError("audio feature with empty source name");
    push(FeatureDescriptor::audio(a.segment, a.source));
  }
  space.n_audio_ = space.descriptors_.size();
  for (const auto& w : text) {
    if (w.empty()) throw ValidationError("text feature with empty word");
    push(FeatureDescriptor::text(w));
  }
  return space;
}

// ---------------------------------------------------------------------------
// Binary masks. A set bit keeps the feature; the all-ones mask reproduces the
// original instance.

class BinaryMask {
 public:
  BinaryMask() = default;
  explicit BinaryMask(std::size_t d, bool value = true) : bits_(d, value ? 1 : 0) {}
  explicit BinaryMask(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) {
      if (b > 1) throw ValidationError("mask bits must be 0 or 1");
    }
  }

  static BinaryMask ones(std::size_t d) { return BinaryMask(d, true); }
  static BinaryMask zeros(std::size_t d) { return BinaryMask(d, false); }

  // Parses "101101".
  static BinaryMask from_string(std::string_view s) {
    std::vector<std::uint8_t> bits;
    bits.reserve(s.size());
    for (char c : s) {
      if (c != '0' && c != '1') {
        throw ValidationError("mask string may contain only '0' and '1'");
      }
      bits.push_back(c == '1' ? 1 : 0);
    }
    return BinaryMask(std::move(bits));
  }

  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) {
      if (bits_[i]) s[i] = '1';
    }
    return s;
  }

  std::size_t size() const { return bits_.size(); }
  bool operator[](std::size_t i) const { return bits_[i] != 0; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }

  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
  }
  bool all() const { return count() == bits_.size(); }
  bool none() const { return count() == 0; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  BinaryMask slice(std::size_t first, std::size_t count) const {
    return BinaryMask(std::vector<std::uint8_t>(bits_.begin() + static_cast<std::ptrdiff_t>(first),
                                                bits_.begin() + static_cast<std::ptrdiff_t>(first + count)));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

struct SplitMask {
  BinaryMask audio;
  BinaryMask text;
};

// Partitions a mask by modality, preserving canonical order.
inline SplitMask split_mask(const BinaryMask& mask, const FeatureSpace& space) {
  if (mask.size() != space.size()) {
    throw ValidationError("mask length " + std::to_string(mask.size()) +
                          " does not match feature space size " + std::to_string(space.size()));
  }
  return SplitMask{mask.slice(0, space.audio_count()),
                   mask.slice(space.audio_count(), space.text_count())};
}

// ---------------------------------------------------------------------------
// Instances and predictions.

struct MultimodalInstance {
  std::string id;
  std::string lyrics;
  std::vector<float> audio;
  int sample_rate = 44100;

  void validate() const {
    if (sample_rate <= 0) {
      throw ValidationError("instance '" + id + "': sample rate must be positive");
    }
    if (lyrics.empty() && audio.empty()) {
      throw ValidationError("instance '" + id + "': both lyrics and audio are empty");
    }
  }
};

inline constexpr double kProbabilitySumTolerance = 1e-6;

struct PredictionVector {
  std::vector<double> probabilities;

  std::size_t argmax() const {
    return static_cast<std::size_t>(
        std::max_element(probabilities.begin(), probabilities.end()) - probabilities.begin());
  }

  void validate(std::size_t n_classes, double tolerance = kProbabilitySumTolerance) const {
    if (probabilities.size() != n_classes) {
      throw ValidationError("prediction has " + std::to_string(probabilities.size()) +
                            " entries, expected " + std::to_string(n_classes));
    }
    double sum = 0.0;
    for (double p : probabilities) {
      if (!(p >= 0.0)) throw ValidationError("prediction has a negative or NaN probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw ValidationError("prediction probabilities sum to " + std::to_string(sum));
    }
  }
};

}  // namespace mmlime
