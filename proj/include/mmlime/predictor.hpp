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

// Black-box classifier contract and the built-in toy models used as test
// oracles. Every model returns full probability vectors.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "mmlime/core.hpp"
#include "mmlime/detail/fft.hpp"
#include "mmlime/text_features.hpp"

namespace mmlime::predict {

enum class PredictorErrorKind {
  Failure,           // the model reported an error for a request
  HandshakeTimeout,
  Timeout,
  MalformedJson,
  LengthMismatch,
  NotNormalized,
  UnknownId,
  ProcessExited,
};

inline std::string_view to_string(PredictorErrorKind k) {
  switch (k) {
    case PredictorErrorKind::Failure: return "failure";
    case PredictorErrorKind::HandshakeTimeout: return "handshake-timeout";
    case PredictorErrorKind::Timeout: return "timeout";
    case PredictorErrorKind::MalformedJson: return "malformed-json";
    case PredictorErrorKind::LengthMismatch: return "length-mismatch";
    case PredictorErrorKind::NotNormalized: return "not-normalized";
    case PredictorErrorKind::UnknownId: return "unknown-id";
    case PredictorErrorKind::ProcessExited: return "process-exited";
  }
  return "unknown";
}

class PredictorError : public Error {
 public:
  PredictorError(PredictorErrorKind kind, const std::string& message,
                 std::optional<std::size_t> batch_position = std::nullopt,
                 std::optional<long long> request_id = std::nullopt)
      : Error("predictor " + std::string(to_string(kind)) + ": " + message),
        kind_(kind),
        batch_position_(batch_position),
        request_id_(request_id) {}

  PredictorErrorKind kind() const { return kind_; }
  // Index within the batch passed to predict_batch, when attributable.
  std::optional<std::size_t> batch_position() const { return batch_position_; }
  std::optional<long long> request_id() const { return request_id_; }

 private:
  PredictorErrorKind kind_;
  std::optional<std::size_t> batch_position_;
  std::optional<long long> request_id_;
};

struct PredictRequest {
  std::string_view lyrics;
  std::span<const float> audio;
  int sample_rate = 0;
};

// Deterministic batch classifier. Output i answers request i.
class Predictor {
 public:
  virtual ~Predictor() = default;
  virtual const LabelSet& labels() const = 0;
  virtual std::vector<PredictionVector> predict_batch(std::span<const PredictRequest> batch) = 0;

  std::size_t n_classes() const { return labels().size(); }
};

inline std::vector<PredictionVector> predict_batch(Predictor& model,
                                                   std::span<const PredictRequest> batch) {
  if (batch.empty()) throw ValidationError("predict_batch needs a non-empty batch");
  auto out = model.predict_batch(batch);
  if (out.size() != batch.size()) {
    throw PredictorError(PredictorErrorKind::LengthMismatch,
                         "model returned " + std::to_string(out.size()) + " predictions for " +
                             std::to_string(batch.size()) + " requests");
  }
  return out;
}

inline std::vector<double> softmax(std::span<const double> scores, double tau) {
  std::vector<double> p(scores.size());
  if (scores.empty()) return p;
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    p[i] = std::exp((scores[i] - top) / tau);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline constexpr double kDefaultTau = 1.0;

inline void check_tau(double tau) {
  if (!(tau > 0.0)) throw ValidationError("softmax temperature must be positive");
}

// Always returns the same probability vector.
class ConstantPredictor final : public Predictor {
 public:
  ConstantPredictor(LabelSet labels, std::vector<double> probabilities)
      : labels_(std::move(labels)), p_{std::move(probabilities)} {
    p_.validate(labels_.size());
  }

  static ConstantPredictor uniform(LabelSet labels) {
    const std::size_t n = labels.size();
    return ConstantPredictor(std::move(labels), std::vector<double>(n, 1.0 / static_cast<double>(n)));
  }

  const LabelSet& labels() const override { return labels_; }
  std::vector<PredictionVector> predict_batch(std::span<const PredictRequest> batch) override {
    return std::vector<PredictionVector>(batch.size(), p_);
  }

 private:
  LabelSet labels_;
  PredictionVector p_;
};

// Class score = number of class-keyword occurrences in the cleaned lyrics;
// probabilities = softmax(score / tau).
class LexiconToyModel final : public Predictor {
 public:
  LexiconToyModel(LabelSet labels, std::vector<std::vector<std::string>> keywords,
                  double tau = kDefaultTau)
      : labels_(std::move(labels)), tau_(tau) {
    check_tau(tau);
    if (keywords.size() != labels_.size()) {
      throw ValidationError("lexicon toy needs one keyword list per class");
    }
    for (std::size_t c = 0; c < keywords.size(); ++c) {
      for (const auto& kw : keywords[c]) {
        const auto toks = text::clean_tokens(kw);
        if (toks.size() != 1) {
          throw ValidationError("lexicon keyword '" + kw + "' is not a single word");
        }
        auto& classes = keyword_classes_[toks.front()];
        if (std::find(classes.begin(), classes.end(), c) == classes.end()) classes.push_back(c);
      }
    }
  }

  const LabelSet& labels() const override { return labels_; }

  std::vector<double> scores(std::string_view lyrics) const {
    std::vector<double> s(labels_.size(), 0.0);
    for (const auto& tok : text::clean_tokens(lyrics)) {
      auto it = keyword_classes_.find(tok);
      if (it == keyword_classes_.end()) continue;
      for (std::size_t c : it->second) s[c] += 1.0;
    }
    return s;
  }

  std::vector<PredictionVector> predict_batch(std::span<const PredictRequest> batch) override {
    std::vector<PredictionVector> out;
    out.reserve(batch.size());
    for (const auto& req : batch) out.push_back({softmax(scores(req.lyrics), tau_)});
    return out;
  }

 private:
  LabelSet labels_;
  double tau_;
  std::unordered_map<std::string, std::vector<std::size_t>> keyword_classes_;
};

struct FrequencyBand {
  double low_hz = 0.0;
  double high_hz = 0.0;
};

// Class score = fraction of the waveform's spectral energy inside the class
// band, from the magnitude FFT of the whole waveform; probabilities =
// softmax(score / tau). Silent or empty audio scores zero everywhere.
class BandEnergyToyModel final : public Predictor {
 public:
  BandEnergyToyModel(LabelSet labels, std::vector<FrequencyBand> bands, double tau = kDefaultTau)
      : labels_(std::move(labels)), bands_(std::move(bands)), tau_(tau) {
    check_tau(tau);
    if (bands_.size() != labels_.size()) {
      throw ValidationError("band-energy toy needs one band per class");
    }
    for (const auto& b : bands_) {
      if (!(b.low_hz >= 0.0) || !(b.high_hz >= b.low_hz)) {
        throw ValidationError("band-energy toy bands need 0 <= low <= high");
      }
    }
  }

  const LabelSet& labels() const override { return labels_; }

  std::vector<double> scores(std::span<const float> audio, int sample_rate) const {
    std::vector<double> s(labels_.size(), 0.0);
    if (audio.size() < 2 || sample_rate <= 0) return s;
    mmlime::detail::RealFft fft(audio.size());
    auto in = fft.real();
    for (std::size_t t = 0; t < audio.size(); ++t) in[t] = audio[t];
    fft.forward();
    const auto spec = fft.spectrum();
    const std::size_t n = audio.size();
    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(n);
    double total = 0.0;
    std::vector<double> power(spec.size());
    for (std::size_t k = 0; k < spec.size(); ++k) {
      // One-sided spectrum: interior bins stand for their mirror image too.
      const bool edge = k == 0 || (n % 2 == 0 && k == n / 2);
      power[k] = std::norm(spec[k]) * (edge ? 1.0 : 2.0);
      total += power[k];
    }
    if (!(total > 0.0)) return s;
    for (std::size_t c = 0; c < bands_.size(); ++c) {
      const auto lo = static_cast<std::size_t>(std::ceil(bands_[c].low_hz / bin_hz));
      const auto hi = std::min(spec.size() - 1,
                               static_cast<std::size_t>(std::floor(bands_[c].high_hz / bin_hz)));
      double e = 0.0;
      for (std::size_t k = lo; k <= hi && k < spec.size(); ++k) e += power[k];
      s[c] = e / total;
    }
    return s;
  }

  std::vector<PredictionVector> predict_batch(std::span<const PredictRequest> batch) override {
    std::vector<PredictionVector> out;
    out.reserve(batch.size());
    for (const auto& req : batch) out.push_back({softmax(scores(req.audio, req.sample_rate), tau_)});
    return out;
  }

 private:
  LabelSet labels_;
  std::vector<FrequencyBand> bands_;
  double tau_;
};

// alpha * text + (1 - alpha) * audio, renormalized.
class FusedToyModel final : public Predictor {
 public:
  FusedToyModel(std::shared_ptr<Predictor> text_model, std::shared_ptr<Predictor> audio_model,
                double alpha)
      : text_(std::move(text_model)), audio_(std::move(audio_model)), alpha_(alpha) {
    if (!text_ || !audio_) throw ValidationError("fused toy needs both component models");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("fused toy alpha must be in [0, 1]");
    if (!(text_->labels() == audio_->labels())) {
      throw ValidationError("fused toy component models disagree on labels");
    }
  }

  const LabelSet& labels() const override { return text_->labels(); }

  std::vector<PredictionVector> predict_batch(std::span<const PredictRequest> batch) override {
    if (alpha_ == 1.0) return text_->predict_batch(batch);
    if (alpha_ == 0.0) return audio_->predict_batch(batch);
    auto t = text_->predict_batch(batch);
    auto a = audio_->predict_batch(batch);
    for (std::size_t i = 0; i < t.size(); ++i) {
      auto& p = t[i].probabilities;
      double sum = 0.0;
      for (std::size_t c = 0; c < p.size(); ++c) {
        p[c] = alpha_ * p[c] + (1.0 - alpha_) * a[i].probabilities[c];
        sum += p[c];
      }
      for (auto& v : p) v /= sum;
    }
    return t;
  }

 private:
  std::shared_ptr<Predictor> text_;
  std::shared_ptr<Predictor> audio_;
  double alpha_;
};

// Builds a toy from a JSON parameter document:
//   {"labels": [...], "tau": 1.0,
//    "keywords": {"<label>": ["word", ...]},     lexicon / fused
//    "bands": {"<label>": [low_hz, high_hz]},    band / fused
//    "alpha": 0.5}                               fused
inline std::shared_ptr<Predictor> make_toy_model(std::string_view kind, const nlohmann::json& params) {
  try {
    if (!params.contains("labels")) throw ValidationError("toy parameters need 'labels'");
    LabelSet labels(params.at("labels").get<std::vector<std::string>>());
    if (labels.empty()) throw ValidationError("toy parameters need at least one label");
    const double tau = params.value("tau", kDefaultTau);

    auto lexicon = [&] {
      std::vector<std::vector<std::string>> kw(labels.size());
      if (params.contains("keywords")) {
        for (const auto& [name, words] : params.at("keywords").items()) {
          auto idx = labels.find(name);
          if (!idx) throw ValidationError("keywords given for unknown label '" + name + "'");
          kw[*idx] = words.get<std::vector<std::string>>();
        }
      }
      return std::make_shared<LexiconToyModel>(labels, std::move(kw), tau);
    };
    auto band = [&] {
      std::vector<FrequencyBand> bands(labels.size());
      if (params.contains("bands")) {
        for (const auto& [name, range] : params.at("bands").items()) {
          auto idx = labels.find(name);
          if (!idx) throw ValidationError("band given for unknown label '" + name + "'");
          const auto r = range.get<std::vector<double>>();
          if (r.size() != 2) throw ValidationError("band for '" + name + "' must be [low, high]");
          bands[*idx] = FrequencyBand{r[0], r[1]};
        }
      }
      return std::make_shared<BandEnergyToyModel>(labels, std::move(bands), tau);
    };

    if (kind == "lexicon") return lexicon();
    if (kind == "band") return band();
    if (kind == "fused") return std::make_shared<FusedToyModel>(lexicon(), band(), params.value("alpha", 0.5));
    throw ValidationError("unknown toy model '" + std::string(kind) + "' (lexicon, band, fused)");
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid toy parameters: " + std::string(e.what()));
  }
}

}  // namespace mmlime::predict
