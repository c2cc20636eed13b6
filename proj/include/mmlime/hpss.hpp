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

// Harmonic/percussive separation by median filtering the magnitude
// spectrogram along time (harmonic) and frequency (percussive), followed by
// complementary soft masks on the complex STFT.

#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "mmlime/core.hpp"
#include "mmlime/stft.hpp"

namespace mmlime::audio {

struct HpssConfig {
  StftConfig stft{1024, 256};
  std::size_t kernel_time = 17;
  std::size_t kernel_freq = 17;

  void validate() const {
    stft.validate();
    if (kernel_time == 0 || kernel_time % 2 == 0 || kernel_freq == 0 || kernel_freq % 2 == 0) {
      throw ValidationError("HPSS median kernels must be odd and positive");
    }
  }
};

inline constexpr double kHpssMaskEpsilon = 1e-10;

struct HpssResult {
  std::vector<float> harmonic;
  std::vector<float> percussive;
};

namespace detail {

// Median of the values, averaging the two middle elements for even counts.
inline double median_inplace(std::vector<double>& v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double upper = v[mid];
  if (v.size() % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

// 1-D sliding median over a strided sequence; the window is truncated at the
// edges.
inline void median_filter_1d(std::span<const double> in, std::size_t count, std::size_t stride,
                             std::size_t kernel, std::span<double> out, std::size_t offset) {
  const std::size_t half = kernel / 2;
  std::vector<double> scratch;
  scratch.reserve(kernel);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(count - 1, i + half);
    scratch.clear();
    for (std::size_t k = lo; k <= hi; ++k) scratch.push_back(in[offset + k * stride]);
    out[offset + i * stride] = median_inplace(scratch);
  }
}

}  // namespace detail

inline HpssResult hpss_separate(std::span<const float> waveform, const HpssConfig& cfg) {
  cfg.validate();
  Spectrogram spec = stft(waveform, cfg.stft);
  const std::size_t frames = spec.frames;
  const std::size_t bins = spec.bins;

  std::vector<double> mag(frames * bins);
  for (std::size_t i = 0; i < mag.size(); ++i) mag[i] = std::abs(spec.data[i]);

  std::vector<double> harmonic(mag.size()), percussive(mag.size());
  for (std::size_t b = 0; b < bins; ++b) {
    detail::median_filter_1d(mag, frames, bins, cfg.kernel_time, harmonic, b);
  }
  for (std::size_t f = 0; f < frames; ++f) {
    detail::median_filter_1d(mag, bins, 1, cfg.kernel_freq, percussive, f * bins);
  }

  Spectrogram h_spec = spec;
  Spectrogram p_spec = std::move(spec);
  for (std::size_t i = 0; i < mag.size(); ++i) {
    const double h2 = harmonic[i] * harmonic[i];
    const double p2 = percussive[i] * percussive[i];
    const double mask_h = h2 / (h2 + p2 + kHpssMaskEpsilon);
    const double mask_p = 1.0 - mask_h;
    h_spec.data[i] *= mask_h;
    p_spec.data[i] *= mask_p;
  }

  const auto h = istft(h_spec, cfg.stft);
  const auto p = istft(p_spec, cfg.stft);
  HpssResult out;
  out.harmonic.assign(h.begin(), h.end());
  out.percussive.assign(p.begin(), p.end());
  return out;
}

}  // namespace mmlime::audio
