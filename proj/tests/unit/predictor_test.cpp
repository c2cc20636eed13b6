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
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmlime/predictor.hpp"
#include "test_util.hpp"

namespace mmlime::predict {
namespace {

const LabelSet kAbc({"a", "b", "c"});

std::vector<PredictionVector> run(Predictor& m, std::string_view lyrics, const std::vector<float>& audio = {},
                                  int sr = 8000) {
  const PredictRequest req{lyrics, audio, sr};
  return predict_batch(m, std::span<const PredictRequest>(&req, 1));
}

std::vector<double> probs(Predictor& m, std::string_view lyrics, const std::vector<float>& audio = {}) {
  return run(m, lyrics, audio)[0].probabilities;
}

TEST(Softmax, ZerosGiveUniformAndTemperatureSharpens) {
  const std::vector<double> zeros(4, 0.0);
  for (double p : softmax(zeros, 1.0)) EXPECT_DOUBLE_EQ(p, 0.25);
  const std::vector<double> s{1.0, 0.0};
  const auto soft = softmax(s, 1.0), sharp = softmax(s, 0.1);
  EXPECT_NEAR(soft[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_GT(sharp[0], soft[0]);
  const std::vector<double> big{1000.0, 999.0};
  EXPECT_NEAR(softmax(big, 1.0)[0], 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
}

TEST(Lexicon, MoreKeywordsRaiseProbability) {
  LexiconToyModel m(kAbc, {{"street"}, {}, {}});
  const double with = run(m, "street life street")[0].probabilities[0];
  const double without = run(m, "")[0].probabilities[0];
  EXPECT_GT(with, without);
  EXPECT_NEAR(with, std::exp(2.0) / (std::exp(2.0) + 2.0), 1e-15);
}

TEST(Lexicon, NoKeywordsIsUniform) {
  LexiconToyModel m(kAbc, {{"x"}, {"y"}, {"z"}});
  for (double p : probs(m, "nothing relevant here")) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
}

TEST(Lexicon, InvariantToOrderAndNonKeywords) {
  LexiconToyModel m(kAbc, {{"love"}, {"hate"}, {"Night"}}, 0.5);
  const auto a = run(m, "love night love hate");
  const auto b = run(m, "Hate, LOVE! filler words night love more filler");
  EXPECT_EQ(a[0].probabilities, b[0].probabilities);
}

TEST(Lexicon, RejectsMultiWordKeywords) {
  EXPECT_THROW(LexiconToyModel(kAbc, {{"two words"}, {}, {}}), ValidationError);
  EXPECT_THROW(LexiconToyModel(kAbc, {{}, {}}), ValidationError);
  EXPECT_THROW(LexiconToyModel(kAbc, {{}, {}, {}}, 0.0), ValidationError);
}

TEST(BandEnergy, SineLandsInItsBand) {
  BandEnergyToyModel m(kAbc, {{0, 300}, {400, 500}, {1000, 4000}});
  const auto x = testing::sine(440.0, 0.5, 8000, 1.0);
  const auto p = run(m, "", x)[0];
  EXPECT_EQ(p.argmax(), 1u);
  const auto s = m.scores(x, 8000);
  EXPECT_GT(s[1], 0.99);
}

TEST(BandEnergy, ScoresMatchDirectDft) {
  BandEnergyToyModel m(kAbc, {{0, 1000}, {1000, 2500}, {2500, 4000}});
  const auto x = testing::noise(0.5, 8000, 0.05, 17);  // 400 samples
  const std::size_t n = x.size();
  std::vector<double> power(n / 2 + 1);
  double total = 0.0;
  for (std::size_t k = 0; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
      re += x[t] * std::cos(2.0 * std::numbers::pi * double(k * t) / double(n));
      im -= x[t] * std::sin(2.0 * std::numbers::pi * double(k * t) / double(n));
    }
    power[k] = (re * re + im * im) * ((k == 0 || k == n / 2) ? 1.0 : 2.0);
    total += power[k];
  }
  const double bin_hz = 8000.0 / double(n);
  const double bands[3][2] = {{0, 1000}, {1000, 2500}, {2500, 4000}};
  const auto s = m.scores(x, 8000);
  for (int c = 0; c < 3; ++c) {
    double e = 0.0;
    for (std::size_t k = 0; k <= n / 2; ++k) {
      const double f = double(k) * bin_hz;
      if (f >= bands[c][0] - 1e-9 && f <= bands[c][1] + 1e-9) e += power[k];
    }
    EXPECT_NEAR(s[c], e / total, 1e-9) << c;
  }
}

TEST(BandEnergy, SilenceIsUniform) {
  BandEnergyToyModel m(kAbc, {{0, 300}, {400, 500}, {1000, 4000}});
  for (double p : probs(m, "", std::vector<float>(1000, 0.0f))) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
  for (double p : probs(m, "words only")) EXPECT_DOUBLE_EQ(p, 1.0 / 3.0);
}

TEST(Fused, AlphaExtremesPassThroughExactly) {
  auto text = std::make_shared<LexiconToyModel>(kAbc, std::vector<std::vector<std::string>>{{"love"}, {}, {}}, 0.7);
  auto audio = std::make_shared<BandEnergyToyModel>(kAbc, std::vector<FrequencyBand>{{0, 300}, {400, 500}, {1000, 4000}});
  const auto x = testing::sine(440.0, 0.5, 8000, 0.25);
  FusedToyModel only_text(text, audio, 1.0), only_audio(text, audio, 0.0), half(text, audio, 0.5);
  EXPECT_EQ(run(only_text, "love love", x)[0].probabilities, run(*text, "love love", x)[0].probabilities);
  EXPECT_EQ(run(only_audio, "love love", x)[0].probabilities, run(*audio, "love love", x)[0].probabilities);
  const auto t = run(*text, "love", x)[0].probabilities;
  const auto a = run(*audio, "love", x)[0].probabilities;
  const auto h = run(half, "love", x)[0].probabilities;
  for (int c = 0; c < 3; ++c) EXPECT_NEAR(h[c], 0.5 * t[c] + 0.5 * a[c], 1e-15);
  EXPECT_THROW(FusedToyModel(text, audio, 1.5), ValidationError);
}

TEST(Constant, UniformAndValidation) {
  auto m = ConstantPredictor::uniform(kAbc);
  EXPECT_EQ(run(m, "x")[0].probabilities, (std::vector<double>(3, 1.0 / 3.0)));
  EXPECT_THROW(ConstantPredictor(kAbc, {0.5, 0.5}), ValidationError);
  EXPECT_THROW(predict_batch(m, {}), ValidationError);
}

TEST(MakeToyModel, BuildsFromJson) {
  const auto params = nlohmann::json::parse(R"({
    "labels": ["rock", "pop"], "tau": 0.5,
    "keywords": {"rock": ["guitar"], "pop": ["baby"]},
    "bands": {"rock": [2000, 4000], "pop": [100, 1000]},
    "alpha": 0.25})");
  for (const char* kind : {"lexicon", "band", "fused"}) {
    const auto m = make_toy_model(kind, params);
    EXPECT_EQ(m->labels().names(), (std::vector<std::string>{"rock", "pop"}));
  }
  const auto lex = make_toy_model("lexicon", params);
  EXPECT_EQ(run(*lex, "guitar guitar baby")[0].argmax(), 0u);
  EXPECT_THROW(make_toy_model("nope", params), ValidationError);
  EXPECT_THROW(make_toy_model("lexicon", nlohmann::json::parse(R"({"labels": ["a"], "keywords": {"b": []}})")),
               ValidationError);
  EXPECT_THROW(make_toy_model("band", nlohmann::json::parse(R"({"labels": ["a"], "bands": {"a": [1]}})")),
               ValidationError);
  EXPECT_THROW(make_toy_model("band", nlohmann::json::parse(R"({"labels": "a"})")), ValidationError);
}

}  // namespace
}  // namespace mmlime::predict
