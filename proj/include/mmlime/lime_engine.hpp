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

// Local explanations: sample presence/absence masks over the instance's
// interpretable features, render and score every perturbed instance with the
// black box, and fit one proximity-weighted ridge surrogate per target class.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmlime/audio_features.hpp"
#include "mmlime/core.hpp"
#include "mmlime/predictor.hpp"
#include "mmlime/text_features.hpp"

namespace mmlime::lime {

enum class ModalitySelector { Text, Audio, Multimodal };

inline std::string_view to_string(ModalitySelector m) {
  switch (m) {
    case ModalitySelector::Text: return "text";
    case ModalitySelector::Audio: return "audio";
    case ModalitySelector::Multimodal: return "multimodal";
  }
  return "multimodal";
}

inline ModalitySelector modality_selector_from_string(std::string_view s) {
  if (s == "text") return ModalitySelector::Text;
  if (s == "audio") return ModalitySelector::Audio;
  if (s == "multimodal") return ModalitySelector::Multimodal;
  throw ValidationError("unknown modality selector '" + std::string(s) + "' (text, audio, multimodal)");
}

// Perturbation budgets per explained modality.
inline constexpr std::size_t kDefaultSamplesText = 2500;
inline constexpr std::size_t kDefaultSamplesAudio = 2000;
inline constexpr std::size_t kDefaultSamplesMultimodal = 5000;

enum class SamplingMode {
  Bernoulli,   // independent Bernoulli(p) bits, plus the unperturbed mask first
  Exhaustive,  // all 2^d masks, unperturbed first; n_samples is ignored
};

inline constexpr std::size_t kMaxExhaustiveFeatures = 24;

struct LimeConfig {
  std::size_t n_samples = kDefaultSamplesMultimodal;
  double inclusion_prob = 0.5;
  double kernel_width = 0.25;
  double ridge = 1.0;
  std::uint64_t seed = 0;
  SamplingMode sampling = SamplingMode::Bernoulli;
  // Perturbed instances rendered and sent to the model at a time.
  std::size_t batch_size = 32;

  static LimeConfig defaults_for(ModalitySelector m) {
    LimeConfig c;
    c.n_samples = m == ModalitySelector::Text    ? kDefaultSamplesText
                  : m == ModalitySelector::Audio ? kDefaultSamplesAudio
                                                 : kDefaultSamplesMultimodal;
    return c;
  }

  void validate() const {
    if (n_samples < 2) throw ValidationError("n_samples must be at least 2");
    if (!(inclusion_prob > 0.0 && inclusion_prob < 1.0)) {
      throw ValidationError("inclusion probability must be in (0, 1)");
    }
    if (!(kernel_width > 0.0)) throw ValidationError("kernel width must be positive");
    if (!(ridge >= 0.0)) throw ValidationError("ridge penalty must be >= 0");
    if (batch_size == 0) throw ValidationError("batch size must be at least 1");
  }
};

// ---------------------------------------------------------------------------
// Sampling and proximity.

// First mask is all ones; the remaining n-1 draw every bit independently with
// P(1) = p from a 64-bit Mersenne Twister seeded with `seed`. Uniforms are
// built from the top 53 bits so the stream is identical on every platform.
inline std::vector<BinaryMask> sample_masks(std::size_t d, std::size_t n, double p, std::uint64_t seed) {
  if (d == 0) throw ValidationError("cannot sample masks over zero features");
  if (n < 2) throw ValidationError("need at least 2 samples");
  if (!(p > 0.0 && p < 1.0)) throw ValidationError("inclusion probability must be in (0, 1)");
  std::mt19937_64 gen(seed);
  std::vector<BinaryMask> masks;
  masks.reserve(n);
  masks.push_back(BinaryMask::ones(d));
  for (std::size_t i = 1; i < n; ++i) {
    BinaryMask m(d, false);
    for (std::size_t j = 0; j < d; ++j) {
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      m.set(j, u < p);
    }
    masks.push_back(std::move(m));
  }
  return masks;
}

// All 2^d masks: all-ones first, then every other mask in increasing binary
// order (bit j of the counter is feature j).
inline std::vector<BinaryMask> enumerate_masks(std::size_t d) {
  if (d == 0) throw ValidationError("cannot enumerate masks over zero features");
  if (d > kMaxExhaustiveFeatures) {
    throw ValidationError("exhaustive sampling supports at most " +
                          std::to_string(kMaxExhaustiveFeatures) + " features, got " + std::to_string(d));
  }
  const std::uint64_t total = std::uint64_t{1} << d;
  std::vector<BinaryMask> masks;
  masks.reserve(total);
  masks.push_back(BinaryMask::ones(d));
  for (std::uint64_t code = 0; code + 1 < total; ++code) {
    BinaryMask m(d, false);
    for (std::size_t j = 0; j < d; ++j) m.set(j, (code >> j) & 1U);
    masks.push_back(std::move(m));
  }
  return masks;
}

// Cosine distance between the mask and the all-ones vector, 1 - sqrt(k/d);
// the all-zeros mask has distance 1.
inline double mask_distance(const BinaryMask& mask) {
  if (mask.size() == 0) throw ValidationError("empty mask");
  const std::size_t k = mask.count();
  if (k == 0) return 1.0;
  return 1.0 - std::sqrt(static_cast<double>(k) / static_cast<double>(mask.size()));
}

// exp(-D^2 / sigma^2).
inline double proximity_weight(const BinaryMask& mask, double kernel_width) {
  if (!(kernel_width > 0.0)) throw ValidationError("kernel width must be positive");
  const double dist = mask_distance(mask);
  return std::exp(-(dist * dist) / (kernel_width * kernel_width));
}

// ---------------------------------------------------------------------------
// Weighted ridge surrogate.

struct RidgeFit {
  double intercept = 0.0;
  std::vector<double> coefficients;

  double predict(const BinaryMask& z) const {
    double v = intercept;
    for (std::size_t j = 0; j < coefficients.size(); ++j) {
      if (z[j]) v += coefficients[j];
    }
    return v;
  }
};

// Factorizes the penalized weighted normal equations
//   [sum w    sum w z^T       ] [b0]   [sum w y  ]
//   [sum w z  sum w z z^T + lI] [b ] = [sum w z y]
// once, so several targets over the same design share the work. The intercept
// is not penalized.
class RidgeSolver {
 public:
  RidgeSolver(std::span<const BinaryMask> design, std::span<const double> weights, double lambda)
      : design_(design), weights_(weights) {
    if (design.size() < 2) throw ValidationError("ridge fit needs at least 2 samples");
    if (weights.size() != design.size()) {
      throw ValidationError("ridge fit: " + std::to_string(weights.size()) + " weights for " +
                            std::to_string(design.size()) + " samples");
    }
    if (!(lambda >= 0.0)) throw ValidationError("ridge penalty must be >= 0");
    d_ = design.front().size();
    double total = 0.0;
    for (std::size_t i = 0; i < design.size(); ++i) {
      if (design[i].size() != d_) throw ValidationError("ridge fit: design rows differ in length");
      if (!(weights[i] >= 0.0)) throw ValidationError("ridge fit: sample weights must be >= 0");
      total += weights[i];
    }
    if (!(total > 0.0)) throw ValidationError("ridge fit: sample weights are all zero");

    const std::size_t m = d_ + 1;
    std::vector<double> a(m * m, 0.0);
    std::vector<std::size_t> ones;
    ones.reserve(d_);
    for (std::size_t i = 0; i < design.size(); ++i) {
      const double w = weights[i];
      if (w == 0.0) continue;
      ones.clear();
      for (std::size_t j = 0; j < d_; ++j) {
        if (design[i][j]) ones.push_back(j + 1);
      }
      a[0] += w;
      for (std::size_t x = 0; x < ones.size(); ++x) {
        const std::size_t r = ones[x];
        a[r] += w;  // row 0
        for (std::size_t y = x; y < ones.size(); ++y) a[r * m + ones[y]] += w;
      }
    }
    // Mirror the upper triangle and add the penalty.
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t c = r + 1; c < m; ++c) a[c * m + r] = a[r * m + c];
    }
    for (std::size_t j = 1; j < m; ++j) a[j * m + j] += lambda;

    // Cholesky, lower triangle in place.
    double max_diag = 0.0;
    for (std::size_t j = 0; j < m; ++j) max_diag = std::max(max_diag, a[j * m + j]);
    const double tiny = 1e-12 * max_diag;
    for (std::size_t j = 0; j < m; ++j) {
      double s = a[j * m + j];
      for (std::size_t k = 0; k < j; ++k) s -= a[j * m + k] * a[j * m + k];
      if (!(s > tiny)) {
        throw NumericalError("weighted ridge normal equations are singular" +
                             std::string(lambda == 0.0 ? "; use a ridge penalty > 0" : ""));
      }
      const double l = std::sqrt(s);
      a[j * m + j] = l;
      for (std::size_t i = j + 1; i < m; ++i) {
        double t = a[i * m + j];
        for (std::size_t k = 0; k < j; ++k) t -= a[i * m + k] * a[j * m + k];
        a[i * m + j] = t / l;
      }
    }
    chol_ = std::move(a);
  }

  std::size_t n_features() const { return d_; }

  RidgeFit solve(std::span<const double> y) const {
    if (y.size() != design_.size()) {
      throw ValidationError("ridge fit: " + std::to_string(y.size()) + " targets for " +
                            std::to_string(design_.size()) + " samples");
    }
    const std::size_t m = d_ + 1;
    std::vector<double> rhs(m, 0.0);
    for (std::size_t i = 0; i < design_.size(); ++i) {
      const double wy = weights_[i] * y[i];
      if (wy == 0.0) continue;
      rhs[0] += wy;
      for (std::size_t j = 0; j < d_; ++j) {
        if (design_[i][j]) rhs[j + 1] += wy;
      }
    }
    // L u = rhs, then L^T beta = u.
    for (std::size_t i = 0; i < m; ++i) {
      double s = rhs[i];
      for (std::size_t k = 0; k < i; ++k) s -= chol_[i * m + k] * rhs[k];
      rhs[i] = s / chol_[i * m + i];
    }
    for (std::size_t i = m; i-- > 0;) {
      double s = rhs[i];
      for (std::size_t k = i + 1; k < m; ++k) s -= chol_[k * m + i] * rhs[k];
      rhs[i] = s / chol_[i * m + i];
    }
    RidgeFit fit;
    fit.intercept = rhs[0];
    fit.coefficients.assign(rhs.begin() + 1, rhs.end());
    return fit;
  }

 private:
  std::span<const BinaryMask> design_;
  std::span<const double> weights_;
  std::size_t d_ = 0;
  std::vector<double> chol_;
};

// Minimizes sum_i w_i (y_i - b0 - z_i . b)^2 + lambda |b|^2.
inline RidgeFit fit_weighted_ridge(std::span<const BinaryMask> design, std::span<const double> y,
                                   std::span<const double> weights, double lambda) {
  return RidgeSolver(design, weights, lambda).solve(y);
}

// Weighted coefficient of determination of the surrogate on its own samples.
// A target with no weighted variance counts as perfectly explained.
inline double weighted_r_squared(std::span<const BinaryMask> design, std::span<const double> y,
                                 std::span<const double> weights, const RidgeFit& fit) {
  double sw = 0.0, swy = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sw += weights[i];
    swy += weights[i] * y[i];
  }
  const double mean = swy / sw;
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - fit.predict(design[i]);
    ss_res += weights[i] * r * r;
    ss_tot += weights[i] * (y[i] - mean) * (y[i] - mean);
  }
  if (ss_tot <= 1e-24 * sw) return 1.0;
  return 1.0 - ss_res / ss_tot;
}

// ---------------------------------------------------------------------------
// Local explanations.

struct FeatureWeight {
  FeatureDescriptor feature;
  double weight = 0.0;
};

struct LocalExplanation {
  std::string instance_id;
  ClassLabel target;
  double intercept = 0.0;
  // One entry per feature, in the instance's canonical feature order.
  std::vector<FeatureWeight> weights;
  double r_squared = 0.0;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  ClassLabel predicted_class;
  double predicted_probability = 0.0;

  // By descending |weight|; ties keep canonical order.
  std::vector<FeatureWeight> ranked() const {
    std::vector<FeatureWeight> out = weights;
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
      return std::abs(a.weight) > std::abs(b.weight);
    });
    return out;
  }
};

struct ExplainOptions {
  LimeConfig lime;
  ModalitySelector modality = ModalitySelector::Multimodal;
  std::size_t n_segments = audio::kDefaultSegments;
  // Empty: explain the class predicted for the unperturbed instance.
  std::vector<std::size_t> target_classes;
  // When only one modality is explained, the other is passed to the model
  // unchanged by default, or removed entirely when this is set.
  bool blank_unexplained_modality = false;
};

// An instance broken into interpretable features, ready to render perturbations.
class PerturbationRenderer {
 public:
  PerturbationRenderer(const MultimodalInstance& instance, const audio::SeparatorSpec& separator,
                       const ExplainOptions& options)
      : sample_rate_(instance.sample_rate) {
    instance.validate();
    const bool want_text = options.modality != ModalitySelector::Audio;
    const bool want_audio = options.modality != ModalitySelector::Text;

    if (want_text) {
      text_ = text::clean_and_tokenize(instance.lyrics);
    } else if (!options.blank_unexplained_modality) {
      fixed_lyrics_ = instance.lyrics;
    }
    if (want_audio) {
      if (!instance.audio.empty()) {
        decomposition_ = audio::decompose(instance.audio, instance.sample_rate, separator, options.n_segments);
      }
    } else if (!options.blank_unexplained_modality) {
      fixed_audio_ = instance.audio;
    }

    const auto audio_keys = decomposition_ ? decomposition_->feature_keys() : std::vector<AudioFeatureKey>{};
    space_ = canonical_feature_order(audio_keys, text_.word_types);
    if (space_.empty()) {
      throw ValidationError("instance '" + instance.id + "' has no interpretable features for modality '" +
                            std::string(to_string(options.modality)) + "'");
    }
  }

  PerturbationRenderer(FeatureSpace space, text::TextFeaturization text,
                       std::optional<audio::Decomposition> decomposition, int sample_rate)
      : space_(std::move(space)),
        text_(std::move(text)),
        decomposition_(std::move(decomposition)),
        sample_rate_(sample_rate) {}

  const FeatureSpace& space() const { return space_; }
  const text::TextFeaturization& text() const { return text_; }
  const std::optional<audio::Decomposition>& decomposition() const { return decomposition_; }
  int sample_rate() const { return sample_rate_; }

  struct Rendered {
    std::string lyrics;
    std::vector<float> audio;
  };

  Rendered render(const BinaryMask& mask) const {
    const auto parts = split_mask(mask, space_);
    Rendered r;
    r.lyrics = text_.empty() ? fixed_lyrics_ : text::render_masked_lyrics(text_, parts.text);
    r.audio = decomposition_ ? audio::reconstruct(*decomposition_, parts.audio) : fixed_audio_;
    return r;
  }

 private:
  FeatureSpace space_;
  text::TextFeaturization text_;
  std::optional<audio::Decomposition> decomposition_;
  std::string fixed_lyrics_;
  std::vector<float> fixed_audio_;
  int sample_rate_ = 0;
};

struct PerturbationSet {
  std::vector<BinaryMask> masks;
  std::vector<double> proximity_weights;
  // targets[i] is the model output for masks[i].
  std::vector<PredictionVector> targets;
};

inline PerturbationSet perturb_and_query(const PerturbationRenderer& renderer, predict::Predictor& model,
                                         const LimeConfig& config) {
  config.validate();
  const std::size_t d = renderer.space().size();
  PerturbationSet set;
  set.masks = config.sampling == SamplingMode::Exhaustive
                  ? enumerate_masks(d)
                  : sample_masks(d, config.n_samples, config.inclusion_prob, config.seed);
  set.proximity_weights.reserve(set.masks.size());
  for (const auto& m : set.masks) set.proximity_weights.push_back(proximity_weight(m, config.kernel_width));
  set.proximity_weights.front() = 1.0;

  set.targets.reserve(set.masks.size());
  const std::size_t n_classes = model.n_classes();
  for (std::size_t start = 0; start < set.masks.size(); start += config.batch_size) {
    const std::size_t n = std::min(config.batch_size, set.masks.size() - start);
    std::vector<PerturbationRenderer::Rendered> rendered;
    rendered.reserve(n);
    for (std::size_t i = 0; i < n; ++i) rendered.push_back(renderer.render(set.masks[start + i]));
    std::vector<predict::PredictRequest> batch;
    batch.reserve(n);
    for (const auto& r : rendered) batch.push_back({r.lyrics, r.audio, renderer.sample_rate()});

    std::vector<PredictionVector> out;
    try {
      out = predict::predict_batch(model, batch);
    } catch (const predict::PredictorError& e) {
      const std::string where = e.batch_position()
                                    ? "sample " + std::to_string(start + *e.batch_position())
                                    : "samples " + std::to_string(start) + ".." + std::to_string(start + n - 1);
      throw predict::PredictorError(e.kind(), where + ": " + e.what(),
                                    e.batch_position() ? std::optional<std::size_t>(start + *e.batch_position())
                                                       : std::nullopt,
                                    e.request_id());
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
      try {
        out[i].validate(n_classes);
      } catch (const ValidationError& e) {
        throw predict::PredictorError(predict::PredictorErrorKind::NotNormalized,
                                      "sample " + std::to_string(start + i) + ": " + e.what(), start + i);
      }
      set.targets.push_back(std::move(out[i]));
    }
  }
  return set;
}

// Fits one surrogate per requested class on an existing perturbation set.
inline std::vector<LocalExplanation> fit_explanations(const std::string& instance_id,
                                                      const FeatureSpace& space, const PerturbationSet& set,
                                                      const LabelSet& labels, const LimeConfig& config,
                                                      std::span<const std::size_t> target_classes) {
  const PredictionVector& original = set.targets.front();
  const std::size_t predicted = original.argmax();

  std::vector<std::size_t> targets(target_classes.begin(), target_classes.end());
  if (targets.empty()) targets.push_back(predicted);
  for (std::size_t c : targets) labels.at(c);

  RidgeSolver solver(set.masks, set.proximity_weights, config.ridge);
  std::vector<LocalExplanation> out;
  std::vector<double> y(set.targets.size());
  for (std::size_t c : targets) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = set.targets[i].probabilities[c];
    const RidgeFit fit = solver.solve(y);
    LocalExplanation e;
    e.instance_id = instance_id;
    e.target = labels.at(c);
    e.intercept = fit.intercept;
    e.weights.reserve(space.size());
    for (std::size_t j = 0; j < space.size(); ++j) e.weights.push_back({space[j], fit.coefficients[j]});
    e.r_squared = weighted_r_squared(set.masks, y, set.proximity_weights, fit);
    e.n_samples = set.masks.size();
    e.seed = config.seed;
    e.predicted_class = labels.at(predicted);
    e.predicted_probability = original.probabilities[predicted];
    out.push_back(std::move(e));
  }
  return out;
}

inline std::vector<LocalExplanation> explain_instance(const MultimodalInstance& instance,
                                                      predict::Predictor& model,
                                                      const audio::SeparatorSpec& separator,
                                                      const ExplainOptions& options) {
  options.lime.validate();
  const PerturbationRenderer renderer(instance, separator, options);
  const PerturbationSet set = perturb_and_query(renderer, model, options.lime);
  return fit_explanations(instance.id, renderer.space(), set, model.labels(), options.lime,
                          options.target_classes);
}

}  // namespace mmlime::lime
