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

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mmlime/audio_features.hpp"
#include "test_util.hpp"

namespace mmlime::audio {
namespace {

using testing::TempDir;

TEST(SegmentBounds, ThirtySecondsAtCdRate) {
  const auto b = segment_bounds(1'323'000, 10);
  ASSERT_EQ(b.size(), 10u);
  std::size_t total = 0;
  for (const auto& [s, e] : b) {
    EXPECT_EQ(e - s, 132'300u);
    total += e - s;
  }
  EXPECT_EQ(total, 1'323'000u);
}

TEST(SegmentBounds, LastAbsorbsRemainder) {
  const auto b = segment_bounds(11, 10);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(b[i].second - b[i].first, 1u);
  EXPECT_EQ(b[9], (std::pair<std::size_t, std::size_t>{9, 11}));
}

TEST(SegmentBounds, SingleSegmentAndErrors) {
  EXPECT_EQ(segment_bounds(7, 1), (SegmentBounds{{0, 7}}));
  EXPECT_THROW(segment_bounds(9, 10), ValidationError);
  EXPECT_THROW(segment_bounds(9, 0), ValidationError);
}

TEST(SegmentBounds, TilingProperty) {
  for (std::size_t n = 1; n <= 60; ++n) {
    for (std::size_t k = 1; k <= n; ++k) {
      const auto b = segment_bounds(n, k);
      ASSERT_EQ(b.size(), k);
      std::size_t expect = 0;
      for (const auto& [s, e] : b) {
        ASSERT_EQ(s, expect);
        ASSERT_GT(e, s);
        expect = e;
      }
      ASSERT_EQ(expect, n);
    }
  }
}

TEST(Decompose, NullSeparatorCellsAreSegments) {
  const auto x = testing::noise(0.5, 8000, 0.3, 1);
  const auto d = decompose(x, 8000, SeparatorSpec::null(), 10);
  ASSERT_EQ(d.n_segments(), 10u);
  ASSERT_EQ(d.n_sources(), 1u);
  for (std::size_t s = 0; s < 10; ++s) {
    const auto [b, e] = d.bounds[s];
    EXPECT_EQ(d.cell(s, 0), std::vector<float>(x.begin() + b, x.begin() + e));
  }
}

TEST(Decompose, HpssSumInvariantPerSegment) {
  const auto x = testing::mix(testing::sine(330.0, 0.4, 16000, 1.5), testing::clicks(0.2, 0.8, 16000, 1.5));
  const auto d = decompose(x, 16000, SeparatorSpec::harmonic_percussive(), 10);
  ASSERT_EQ(d.n_cells(), 20u);
  const auto keys = d.feature_keys();
  EXPECT_EQ(keys[0].source, "harmonic");
  EXPECT_EQ(keys[1].source, "percussive");
  EXPECT_EQ(keys[19].segment, 9u);
  for (std::size_t s = 0; s < 10; ++s) {
    const auto [b, e] = d.bounds[s];
    const std::vector<float> seg(x.begin() + b, x.begin() + e);
    EXPECT_LE(testing::relative_l2(testing::mix(d.cell(s, 0), d.cell(s, 1)), seg), 1e-4) << s;
  }
}

TEST(Reconstruct, AllOnesAllZerosAndSingleSegment) {
  const auto x = testing::noise(0.5, 8000, 0.2, 9);
  const auto d = decompose(x, 8000, SeparatorSpec::null(), 10);
  EXPECT_EQ(reconstruct(d, BinaryMask::ones(10)), x);
  const auto silent = reconstruct(d, BinaryMask::zeros(10));
  EXPECT_EQ(silent, std::vector<float>(x.size(), 0.0f));
  BinaryMask first(10, false);
  first.set(0, true);
  const auto y = reconstruct(d, first);
  for (std::size_t t = 0; t < x.size(); ++t) EXPECT_EQ(y[t], t < d.bounds[0].second ? x[t] : 0.0f);
  EXPECT_THROW(reconstruct(d, BinaryMask::ones(9)), ValidationError);
}

TEST(Reconstruct, DisjointAdditivityIsSampleExactForHpss) {
  const auto x = testing::mix(testing::sine(500.0, 0.4, 8000, 1.0), testing::noise(0.2, 8000, 1.0, 4));
  const auto d = decompose(x, 8000, SeparatorSpec::harmonic_percussive(), 10);
  std::mt19937_64 gen(8);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask m1(d.n_cells(), false), m2(d.n_cells(), false);
    for (std::size_t j = 0; j < d.n_cells(); ++j) {
      const auto r = gen() % 3;
      if (r == 1) m1.set(j, true);
      if (r == 2) m2.set(j, true);
    }
    BinaryMask both(d.n_cells(), false);
    for (std::size_t j = 0; j < d.n_cells(); ++j) both.set(j, m1[j] || m2[j]);
    const auto a = reconstruct(d, m1), b = reconstruct(d, m2), c = reconstruct(d, both);
    for (std::size_t t = 0; t < x.size(); ++t) ASSERT_EQ(a[t] + b[t], c[t]) << t;
  }
}

TEST(Reconstruct, NullSeparatorEnergyMonotone) {
  const auto x = testing::noise(0.5, 8000, 0.5, 12);
  const auto d = decompose(x, 8000, SeparatorSpec::null(), 10);
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 50; ++trial) {
    BinaryMask m(10, false);
    for (std::size_t j = 0; j < 10; ++j) m.set(j, gen() & 1);
    const double e = testing::energy(reconstruct(d, m));
    for (std::size_t j = 0; j < 10; ++j) {
      if (m[j]) continue;
      BinaryMask more = m;
      more.set(j, true);
      EXPECT_GE(testing::energy(reconstruct(d, more)), e);
    }
  }
}

class StemsTest : public ::testing::Test {
 protected:
  static constexpr int kRate = 8000;

  void SetUp() override {
    stems_ = {testing::sine(220.0, 0.2, kRate, 1.0), testing::clicks(0.25, 0.5, kRate, 1.0),
              testing::sine(55.0, 0.3, kRate, 1.0), testing::noise(0.1, kRate, 1.0, 3)};
    mix_.assign(stems_[0].size(), 0.0f);
    for (const auto& s : stems_) {
      for (std::size_t t = 0; t < s.size(); ++t) mix_[t] += s[t];
    }
    const auto& names = default_stem_sources();
    for (std::size_t i = 0; i < names.size(); ++i) write_wav(dir_ / (names[i] + ".wav"), stems_[i], kRate);
  }

  TempDir dir_;
  std::vector<std::vector<float>> stems_;
  std::vector<float> mix_;
};

TEST_F(StemsTest, FourStemsTenSegmentsGiveFortyFeatures) {
  const auto d = decompose(mix_, kRate, SeparatorSpec::stems(dir_.path()), 10);
  EXPECT_EQ(d.n_cells(), 40u);
  EXPECT_EQ(d.feature_keys()[2].source, "bass");
  ASSERT_TRUE(d.residual_db.has_value());
  EXPECT_LT(*d.residual_db, -100.0);
}

TEST(Stems, ExactlySummingStemsHaveZeroResidual) {
  // Values on a 2^-12 grid add exactly in float, so the mix is the exact sum.
  std::vector<std::vector<float>> stems;
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    auto s = testing::noise(0.2, 8000, 0.5, seed);
    for (auto& v : s) v = std::round(v * 4096.0f) / 4096.0f;
    stems.push_back(std::move(s));
  }
  std::vector<float> mix(stems[0].size(), 0.0f);
  for (const auto& s : stems) {
    for (std::size_t t = 0; t < s.size(); ++t) mix[t] += s[t];
  }
  const auto r = stem_residual(mix, stems);
  EXPECT_EQ(r.l2, 0.0);
  EXPECT_TRUE(std::isinf(r.db) && r.db < 0);
}

TEST_F(StemsTest, SmallResidualAcceptedAndReported) {
  auto noisy = mix_;
  const auto n = testing::noise(1e-3, kRate, 1.0, 99);
  for (std::size_t t = 0; t < noisy.size(); ++t) noisy[t] += n[t];
  const auto d = decompose(noisy, kRate, SeparatorSpec::stems(dir_.path()), 10);
  ASSERT_TRUE(d.residual_db.has_value());
  const double expected = 10.0 * std::log10(testing::energy(n) / testing::energy(noisy));
  EXPECT_NEAR(*d.residual_db, expected, 0.05);
  EXPECT_LT(*d.residual_db, -40.0);
}

TEST_F(StemsTest, MissingStemNamesSource) {
  std::filesystem::remove(dir_ / "bass.wav");
  try {
    load_stems(dir_.path(), default_stem_sources());
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("'bass'"), std::string::npos) << e.what();
  }
}

TEST_F(StemsTest, LengthMismatchRejected) {
  write_wav(dir_ / "drums.wav", std::vector<float>(100, 0.0f), kRate);
  EXPECT_THROW(load_stems(dir_.path(), default_stem_sources()), ValidationError);
}

TEST_F(StemsTest, MixLengthMismatchRejected) {
  std::vector<float> shorter(mix_.begin(), mix_.end() - 10);
  EXPECT_THROW(decompose(shorter, kRate, SeparatorSpec::stems(dir_.path()), 10), ValidationError);
}

TEST(SeparatorSpec, Validation) {
  EXPECT_THROW((SeparatorSpec::stems("x", {"a", "a"}).validate()), ValidationError);
  EXPECT_THROW((SeparatorSpec::stems("x", {"a@b"}).validate()), ValidationError);
  EXPECT_THROW((SeparatorSpec::stems("x", {}).validate()), ValidationError);
  EXPECT_THROW((SeparatorSpec::external({}, {"a"}).validate()), ValidationError);
}

TEST(ExternalSeparator, SourcesReturnedInSpecOrder) {
  const auto x = testing::sine(440.0, 0.5, 8000, 0.5);
  const auto spec = SeparatorSpec::external({MMLIME_FAKE_ENDPOINT, "separator-halves"});
  const auto d = decompose(x, 8000, spec, 5);
  ASSERT_EQ(d.n_cells(), 20u);
  const auto full = reconstruct(d, BinaryMask::ones(20));
  EXPECT_EQ(full, x);  // halves are exact in binary floating point
  const auto [b, e] = d.bounds[0];
  for (std::size_t t = b; t < e; ++t) EXPECT_EQ(d.cell(0, 0)[t], 0.5f * x[t]);
}

TEST(ExternalSeparator, MissingSourceIsAnError) {
  const auto x = testing::sine(440.0, 0.5, 8000, 0.2);
  const auto spec = SeparatorSpec::external({MMLIME_FAKE_ENDPOINT, "separator-missing"});
  EXPECT_THROW(decompose(x, 8000, spec, 2), ValidationError);
}

TEST(ExternalSeparator, WrongLengthIsAnError) {
  const auto x = testing::sine(440.0, 0.5, 8000, 0.2);
  const auto spec = SeparatorSpec::external({MMLIME_FAKE_ENDPOINT, "separator-short"});
  EXPECT_THROW(decompose(x, 8000, spec, 2), ValidationError);
}

}  // namespace
}  // namespace mmlime::audio
