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

// Embedded invariant suite behind `mmlime selfcheck`.

#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "mmlime/audio_features.hpp"
#include "mmlime/global_agg.hpp"
#include "mmlime/lime_engine.hpp"

namespace mmlime::selfcheck {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Options {
  // Test hook: name of a check whose reference computation is deliberately
  // perturbed, to exercise the failure path.
  std::string corrupt;
};

namespace detail {

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

inline std::vector<float> sine_and_clicks(int sample_rate, double seconds) {
  const auto n = static_cast<std::size_t>(seconds * sample_rate);
  std::vector<float> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = 0.5f * static_cast<float>(std::sin(2.0 * std::numbers::pi * 440.0 * static_cast<double>(t) / sample_rate));
  }
  const auto every = static_cast<std::size_t>(0.25 * sample_rate);
  for (std::size_t t = every / 2; t < n; t += every) x[t] += 0.8f;
  return x;
}

}  // namespace detail

inline std::vector<CheckResult> run(const Options& options = {}) {
  const double corrupt_proximity = options.corrupt == "proximity_weight" ? 1e-3 : 0.0;
  std::vector<CheckResult> results;
  auto check = [&results](std::string name, const std::function<std::string()>& body) {
    CheckResult r{std::move(name), false, {}};
    try {
      r.detail = body();
      r.passed = r.detail.empty();
    } catch (const std::exception& e) {
      r.detail = std::string("threw: ") + e.what();
    }
    results.push_back(std::move(r));
  };

  check("mask_determinism", [] {
    const auto a = lime::sample_masks(12, 200, 0.5, 42);
    const auto b = lime::sample_masks(12, 200, 0.5, 42);
    if (a != b) return std::string("identical seeds gave different masks");
    if (!a.front().all()) return std::string("first mask is not all ones");
    return std::string();
  });

  check("proximity_weight", [&] {
    const auto m = BinaryMask::from_string("1000");
    const double w = lime::proximity_weight(m, 0.25) * (1.0 + corrupt_proximity);
    if (!detail::near(w, std::exp(-4.0), 1e-15)) return "d=4 k=1 sigma=0.25 gave " + std::to_string(w);
    if (lime::proximity_weight(BinaryMask::ones(7), 0.25) != 1.0) return std::string("all-ones weight != 1");
    return std::string();
  });

  check("ridge_oracle", [] {
    const auto masks = lime::enumerate_masks(2);
    std::vector<double> y, w;
    for (const auto& m : masks) {
      y.push_back(0.1 + 0.3 * m[0] - 0.2 * m[1]);
      w.push_back(lime::proximity_weight(m, 0.25));
    }
    const auto fit = lime::fit_weighted_ridge(masks, y, w, 1e-9);
    if (!detail::near(fit.coefficients[0], 0.3, 1e-6) || !detail::near(fit.coefficients[1], -0.2, 1e-6) ||
        !detail::near(fit.intercept, 0.1, 1e-6)) {
      return std::string("planted affine model not recovered");
    }
    return std::string();
  });

  check("average_importance", [] {
    agg::WeightTable t;
    const ClassLabel c{0, "a"};
    const auto f = FeatureDescriptor::text("x");
    const double ws[] = {0.5, -0.3, 0.0};
    for (int i = 0; i < 3; ++i) {
      const auto id = "i" + std::to_string(i);
      t.set_predicted(id, c);
      t.add_weight(id, 0, f, ws[i]);
    }
    const double v = agg::average_importance(t).importance_of(0, f);
    if (!detail::near(v, 0.4, 1e-15)) return "expected 0.4, got " + std::to_string(v);
    return std::string();
  });

  check("shannon_entropy", [] {
    const std::vector<double> uniform(9, 1.0 / 9.0);
    if (!detail::near(agg::shannon_entropy(uniform), std::log(9.0), 1e-12)) return std::string("uniform over 9");
    const std::vector<double> two{2.0 / 3.0, 1.0 / 3.0};
    if (!detail::near(agg::shannon_entropy(two), std::log(3.0) - 2.0 / 3.0 * std::log(2.0), 1e-12)) {
      return std::string("(2/3, 1/3)");
    }
    return std::string();
  });

  check("homogeneity_importance", [] {
    agg::WeightTable t;
    const ClassLabel a{0, "a"}, b{1, "b"};
    const auto j1 = FeatureDescriptor::text("j1"), j2 = FeatureDescriptor::text("j2");
    t.set_predicted("x", a);
    t.add_weight("x", 0, j1, 4.0);
    t.add_weight("x", 0, j2, 1.0);
    t.set_predicted("y", b);
    t.add_weight("y", 1, j2, 1.0);
    const auto r = agg::homogeneity_importance(t);
    if (!detail::near(r.importance_of(0, j1), 2.0, 1e-12)) return std::string("concentrated feature != 2.0");
    if (r.importance_of(0, j2) != 0.0 || r.importance_of(1, j2) != 0.0) {
      return std::string("max-entropy feature not zeroed");
    }
    return std::string();
  });

  check("hpss_complementarity", [] {
    const auto x = detail::sine_and_clicks(8000, 1.0);
    const auto sep = audio::hpss_separate(x, audio::HpssConfig{});
    double err = 0.0, ref = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double e = static_cast<double>(sep.harmonic[t]) + sep.percussive[t] - x[t];
      err += e * e;
      ref += static_cast<double>(x[t]) * x[t];
    }
    const double rel = std::sqrt(err / ref);
    if (rel > 1e-4) return "harmonic + percussive differs from input by " + std::to_string(rel);
    return std::string();
  });

  check("reconstruction", [] {
    const auto x = detail::sine_and_clicks(8000, 0.5);
    const auto d = audio::decompose(x, 8000, audio::SeparatorSpec::null(), 10);
    const auto full = audio::reconstruct(d, BinaryMask::ones(d.n_cells()));
    const auto silent = audio::reconstruct(d, BinaryMask::zeros(d.n_cells()));
    for (std::size_t t = 0; t < x.size(); ++t) {
      if (full[t] != x[t]) return std::string("all-ones mask did not reproduce the input");
      if (silent[t] != 0.0f) return std::string("all-zeros mask is not silent");
    }
    return std::string();
  });

  return results;
}

}  // namespace mmlime::selfcheck
