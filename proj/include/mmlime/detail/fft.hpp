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

// Thin RAII layer over FFTW's real transforms. Plans are created with
// FFTW_ESTIMATE so the chosen algorithm, and therefore every rounding, is the
// same from run to run. Planning is serialized; execution is thread-safe.

#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>

namespace mmlime::detail {

struct FftwDeleter {
  void operator()(void* p) const { fftw_free(p); }
};

template <typename T>
using FftwBuffer = std::unique_ptr<T[], FftwDeleter>;

template <typename T>
FftwBuffer<T> fftw_alloc(std::size_t n) {
  return FftwBuffer<T>(static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n))));
}

class FftPlanCache {
 public:
  static FftPlanCache& instance() {
    static FftPlanCache cache;
    return cache;
  }

  fftw_plan forward(std::size_t n) { return get(n, true); }
  fftw_plan inverse(std::size_t n) { return get(n, false); }

 private:
  fftw_plan get(std::size_t n, bool forward) {
    std::lock_guard lock(mutex_);
    auto& slot = (forward ? forward_ : inverse_)[n];
    if (slot == nullptr) {
      auto real = fftw_alloc<double>(n);
      auto cplx = fftw_alloc<fftw_complex>(n / 2 + 1);
      const int ni = static_cast<int>(n);
      slot = forward ? fftw_plan_dft_r2c_1d(ni, real.get(), cplx.get(), FFTW_ESTIMATE)
                     : fftw_plan_dft_c2r_1d(ni, cplx.get(), real.get(), FFTW_ESTIMATE);
    }
    return slot;
  }

  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> forward_;
  std::map<std::size_t, fftw_plan> inverse_;
};

// Real FFT of a fixed size with its own aligned work buffers.
class RealFft {
 public:
  explicit RealFft(std::size_t n)
      : n_(n),
        real_(fftw_alloc<double>(n)),
        spectrum_(fftw_alloc<fftw_complex>(n / 2 + 1)),
        forward_(FftPlanCache::instance().forward(n)),
        inverse_(FftPlanCache::instance().inverse(n)) {}

  std::size_t size() const { return n_; }
  std::size_t bins() const { return n_ / 2 + 1; }

  std::span<double> real() { return {real_.get(), n_}; }
  std::span<std::complex<double>> spectrum() {
    return {reinterpret_cast<std::complex<double>*>(spectrum_.get()), bins()};
  }

  // real() -> spectrum()
  void forward() { fftw_execute_dft_r2c(forward_, real_.get(), spectrum_.get()); }

  // spectrum() -> real(), unnormalized (scaled by size()); clobbers spectrum().
  void inverse() { fftw_execute_dft_c2r(inverse_, spectrum_.get(), real_.get()); }

 private:
  std::size_t n_;
  FftwBuffer<double> real_;
  FftwBuffer<fftw_complex> spectrum_;
  fftw_plan forward_;
  fftw_plan inverse_;
};

}  // namespace mmlime::detail
