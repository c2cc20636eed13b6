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

// Hann-windowed STFT with a matching weighted overlap-add inverse.
//
// The signal is zero-padded by (window - hop) samples on the left and up to a
// whole number of frames on the right, so every original sample is covered by
// window/hop frames and the squared-window overlap-add envelope is flat over
// the part of the signal that is kept. istft(stft(x)) == x up to rounding.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <vector>

#include "mmlime/core.hpp"
#include "mmlime/detail/fft.hpp"

namespace mmlime::audio {

struct StftConfig {
  std::size_t window_size = 1024;
  std::size_t hop = 256;

  // Periodic Hann window.
  std::vector<double> window() const {
    std::vector<double> w(window_size);
    for (std::size_t n = 0; n < window_size; ++n) {
      w[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                  static_cast<double>(window_size));
    }
    return w;
  }

  // Largest relative deviation of the squared-window overlap-add from its mean.
  double cola_deviation() const {
    const auto w = window();
    std::vector<double> env(hop, 0.0);
    for (std::size_t n = 0; n < window_size; ++n) env[n % hop] += w[n] * w[n];
    double mean = 0.0;
    for (double e : env) mean += e;
    mean /= static_cast<double>(hop);
    double dev = 0.0;
    for (double e : env) dev = std::max(dev, std::abs(e - mean) / mean);
    return dev;
  }

  double cola_gain() const {
    const auto w = window();
    double s = 0.0;
    for (double v : w) s += v * v;
    return s / static_cast<double>(hop);
  }

  void validate() const {
    if (window_size < 2 || hop == 0 || hop > window_size) {
      throw ValidationError("STFT needs 0 < hop <= window_size and window_size >= 2");
    }
    if (window_size % hop != 0) {
      throw ValidationError("STFT hop " + std::to_string(hop) + " must divide window size " +
                            std::to_string(window_size));
    }
    if (cola_deviation() > 1e-10) {
      throw ValidationError("STFT window " + std::to_string(window_size) + " / hop " +
                            std::to_string(hop) +
                            " does not satisfy constant overlap-add of the squared Hann window");
    }
  }
};

// frames x bins complex matrix, frame-major.
struct Spectrogram {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::size_t signal_length = 0;
  std::vector<std::complex<double>> data;

  std::complex<double>& at(std::size_t frame, std::size_t bin) { return data[frame * bins + bin]; }
  const std::complex<double>& at(std::size_t frame, std::size_t bin) const {
    return data[frame * bins + bin];
  }
};

inline Spectrogram stft(std::span<const float> signal, const StftConfig& cfg) {
  cfg.validate();
  const std::size_t n = signal.size();
  if (n < cfg.window_size) {
    throw ValidationError("signal of " + std::to_string(n) + " samples is shorter than one " +
                          std::to_string(cfg.window_size) + "-sample window");
  }
  const std::size_t pad = cfg.window_size - cfg.hop;
  const std::size_t frames = (pad + n - 1) / cfg.hop + 1;
  const auto window = cfg.window();

  Spectrogram spec;
  spec.frames = frames;
  spec.bins = cfg.window_size / 2 + 1;
  spec.signal_length = n;
  spec.data.resize(frames * spec.bins);

  detail::RealFft fft(cfg.window_size);
  auto buf = fft.real();
  for (std::size_t f = 0; f < frames; ++f) {
    const std::size_t start = f * cfg.hop;  // in padded coordinates
    for (std::size_t k = 0; k < cfg.window_size; ++k) {
      const std::size_t p = start + k;
      const double x = (p >= pad && p - pad < n) ? static_cast<double>(signal[p - pad]) : 0.0;
      buf[k] = x * window[k];
    }
    fft.forward();
    auto s = fft.spectrum();
    std::copy(s.begin(), s.end(), spec.data.begin() + static_cast<std::ptrdiff_t>(f * spec.bins));
  }
  return spec;
}

inline std::vector<double> istft(const Spectrogram& spec, const StftConfig& cfg) {
  cfg.validate();
  if (spec.bins != cfg.window_size / 2 + 1) {
    throw ValidationError("spectrogram bin count does not match the STFT window");
  }
  const std::size_t pad = cfg.window_size - cfg.hop;
  const auto window = cfg.window();
  const double norm = 1.0 / (static_cast<double>(cfg.window_size) * cfg.cola_gain());

  std::vector<double> padded((spec.frames - 1) * cfg.hop + cfg.window_size, 0.0);
  detail::RealFft fft(cfg.window_size);
  for (std::size_t f = 0; f < spec.frames; ++f) {
    auto s = fft.spectrum();
    for (std::size_t b = 0; b < spec.bins; ++b) s[b] = spec.at(f, b);
    fft.inverse();
    auto buf = fft.real();
    const std::size_t start = f * cfg.hop;
    for (std::size_t k = 0; k < cfg.window_size; ++k) {
      padded[start + k] += buf[k] * window[k] * norm;
    }
  }
  return std::vector<double>(padded.begin() + static_cast<std::ptrdiff_t>(pad),
                             padded.begin() + static_cast<std::ptrdiff_t>(pad + spec.signal_length));
}

}  // namespace mmlime::audio
