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

#include <filesystem>
#include <string>
#include <vector>

#include "mmlime/json_io.hpp"
#include "mmlime/report_io.hpp"
#include "test_util.hpp"

namespace mmlime::io {
namespace {

lime::LocalExplanation sample_explanation() {
  lime::LocalExplanation e;
  e.instance_id = "song,1";
  e.target = ClassLabel{1, "happy"};
  e.predicted_class = ClassLabel{1, "happy"};
  e.predicted_probability = 0.625;
  e.intercept = 0.1;
  e.r_squared = 0.75;
  e.n_samples = 5000;
  e.seed = 42;
  e.weights = {{FeatureDescriptor::audio(0, "vocals"), 0.01},
               {FeatureDescriptor::audio(1, "drums"), -0.3},
               {FeatureDescriptor::text("love"), 0.2},
               {FeatureDescriptor::text("rain"), 0.0}};
  return e;
}

TEST(ExplanationJson, RoundTripAndRankedOrder) {
  const auto e = sample_explanation();
  const Json j = explanation_to_json(e);
  const auto& feats = j.at("features");
  ASSERT_EQ(feats.size(), 4u);
  EXPECT_EQ(feats[0].at("key").at("source"), "drums");
  EXPECT_EQ(feats[0].at("key").at("segment"), 1);
  EXPECT_EQ(feats[1].at("key"), "love");
  EXPECT_EQ(feats[2].at("modality"), "audio");
  EXPECT_EQ(feats[3].at("key"), "rain");

  const auto back = explanation_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.instance_id, e.instance_id);
  EXPECT_EQ(back.target, e.target);
  EXPECT_EQ(back.predicted_class, e.predicted_class);
  EXPECT_EQ(back.intercept, e.intercept);
  EXPECT_EQ(back.r_squared, e.r_squared);
  EXPECT_EQ(back.n_samples, e.n_samples);
  EXPECT_EQ(back.seed, e.seed);
  EXPECT_EQ(back.predicted_probability, e.predicted_probability);
  ASSERT_EQ(back.weights.size(), 4u);
  EXPECT_EQ(back.weights[0].feature, FeatureDescriptor::audio(1, "drums"));
  EXPECT_EQ(back.weights[0].weight, -0.3);
  EXPECT_EQ(explanation_to_json(back).dump(), j.dump());
}

TEST(ExplanationJson, MalformedIsFormatError) {
  EXPECT_THROW(explanation_from_json(nlohmann::json::parse(R"({"instance_id": "x"})")), FormatError);
  auto j = nlohmann::json::parse(explanation_to_json(sample_explanation()).dump());
  j["features"][0]["modality"] = "video";
  EXPECT_THROW(explanation_from_json(j), Error);
  j = nlohmann::json::parse(explanation_to_json(sample_explanation()).dump());
  j["seed"] = "many";
  EXPECT_THROW(explanation_from_json(j), FormatError);
}

TEST(FeatureSpaceJson, RoundTrip) {
  const std::vector<AudioFeatureKey> audio{{0, "harmonic"}, {0, "percussive"}, {1, "harmonic"}, {1, "percussive"}};
  const std::vector<std::string> text{"one", "two"};
  const auto space = canonical_feature_order(audio, text);
  const Json j = feature_space_to_json(space);
  EXPECT_EQ(j.at("d"), 6);
  EXPECT_EQ(j.dump(), R"({"d":6,"features":[)"
                      R"({"modality":"audio","key":{"segment":0,"source":"harmonic"}},)"
                      R"({"modality":"audio","key":{"segment":0,"source":"percussive"}},)"
                      R"({"modality":"audio","key":{"segment":1,"source":"harmonic"}},)"
                      R"({"modality":"audio","key":{"segment":1,"source":"percussive"}},)"
                      R"({"modality":"text","key":"one"},{"modality":"text","key":"two"}]})");
  // The checked-in fixture is also validated against the published schema.
  EXPECT_EQ(j.dump(2) + "\n", testing::read_all(std::filesystem::path(MMLIME_FIXTURES) / "feature_space.json"));
  const auto back = feature_space_from_json(j);
  ASSERT_EQ(back.size(), space.size());
  for (std::size_t k = 0; k < space.size(); ++k) EXPECT_EQ(back[k], space[k]);

  Json bad = j;
  bad["d"] = 5;
  EXPECT_THROW(feature_space_from_json(bad), ValidationError);
}

TEST(MaskJson, RoundTrip) {
  const auto m = BinaryMask::from_string("101101");
  EXPECT_EQ(mask_to_json(m), "101101");
  EXPECT_EQ(mask_from_json(mask_to_json(m)), m);
}

agg::GlobalReport sample_report() {
  agg::WeightTable t;
  const ClassLabel a{0, "rock, \"loud\""}, b{1, "calm<>&"};
  lime::LocalExplanation x;
  x.instance_id = "x";
  x.target = x.predicted_class = a;
  x.weights = {{FeatureDescriptor::audio(0, "vocals"), 0.5},
               {FeatureDescriptor::audio(1, "vocals"), 0.25},
               {FeatureDescriptor::text("a,b"), -0.4},
               {FeatureDescriptor::text("quiet"), 0.0}};
  t.add(x);
  lime::LocalExplanation y;
  y.instance_id = "y";
  y.target = y.predicted_class = b;
  y.weights = {{FeatureDescriptor::text("a,b"), 0.1}};
  t.add(y);
  return agg::average_importance(t);
}

TEST(ReportJson, Structure) {
  const auto r = sample_report();
  const Json j = report_to_json(ReportView{&r, 10, false});
  EXPECT_EQ(j.at("method"), "average");
  EXPECT_EQ(j.at("n_instances"), 2);
  ASSERT_EQ(j.at("classes").size(), 2u);
  const auto& c0 = j.at("classes")[0];
  EXPECT_EQ(c0.at("name"), "rock, \"loud\"");
  EXPECT_EQ(c0.at("n_instances"), 1);
  ASSERT_EQ(c0.at("features").size(), 3u);
  EXPECT_EQ(c0.at("features")[0].at("key"), "vocals@seg0");
  EXPECT_EQ(c0.at("features")[1].at("key"), "a,b");
  EXPECT_DOUBLE_EQ(c0.at("features")[1].at("importance").get<double>(), 0.4);
  EXPECT_TRUE(c0.at("features")[0].at("entropy").is_null());

  const Json collapsed = report_to_json(ReportView{&r, 1, true});
  ASSERT_EQ(collapsed.at("classes")[0].at("features").size(), 1u);
  EXPECT_EQ(collapsed.at("classes")[0].at("features")[0].at("key"), "vocals");
  EXPECT_DOUBLE_EQ(collapsed.at("classes")[0].at("features")[0].at("importance").get<double>(), 0.75);
}

TEST(ReportCsv, HeaderEscapingAndPrecision) {
  const auto r = sample_report();
  const std::string csv = report_to_csv(ReportView{&r, 10, false});
  EXPECT_EQ(csv,
            "class,modality,feature_key,importance,support,entropy\n"
            "\"rock, \"\"loud\"\"\",audio,vocals@seg0,0.5,1,\n"
            "\"rock, \"\"loud\"\"\",text,\"a,b\",0.40000000000000002,1,\n"
            "\"rock, \"\"loud\"\"\",audio,vocals@seg1,0.25,1,\n"
            "calm<>&,text,\"a,b\",0.10000000000000001,1,\n");
}

TEST(ReportCsv, HomogeneityHasEntropyColumn) {
  agg::WeightTable t;
  lime::LocalExplanation x;
  x.instance_id = "x";
  x.target = x.predicted_class = ClassLabel{0, "a"};
  x.weights = {{FeatureDescriptor::text("w"), 1.0}};
  t.add(x);
  const auto r = agg::homogeneity_importance(t);
  EXPECT_EQ(report_to_csv(ReportView{&r, 10, false}),
            "class,modality,feature_key,importance,support,entropy\na,text,w,1,1,0\n");
}

TEST(ReportSvg, EscapedAndDeterministic) {
  const auto r = sample_report();
  const ReportView view{&r, 10, false};
  const std::string svg = class_chart_svg(view, r.classes[1]);
  EXPECT_EQ(svg, class_chart_svg(view, r.classes[1]));
  EXPECT_EQ(svg.rfind("<svg xmlns=\"http://www.w3.org/2000/svg\"", 0), 0u);
  EXPECT_NE(svg.find("calm&lt;&gt;&amp; (average)"), std::string::npos);
  EXPECT_EQ(svg.find("calm<>&"), std::string::npos);
  EXPECT_NE(svg.find(kTextColor), std::string::npos);
  EXPECT_NE(class_chart_svg(view, r.classes[0]).find(kAudioColor), std::string::npos);
  EXPECT_EQ(svg.substr(svg.size() - 7), "</svg>\n");
}

TEST(Files, SanitizeFilename) {
  EXPECT_EQ(sanitize_filename("track-01_v2.final"), "track-01_v2.final");
  EXPECT_EQ(sanitize_filename("a/b c:d"), "a_b_c_d");
  EXPECT_EQ(sanitize_filename(""), "_");
  EXPECT_EQ(sanitize_filename(".."), "_..");
  EXPECT_EQ(sanitize_filename("é"), "__");
}

TEST(Files, AtomicWriteReplacesAndLeavesNoTemporaries) {
  testing::TempDir dir;
  const auto path = dir.path() / "out.json";
  write_file_atomic(path, "first");
  write_file_atomic(path, "second");
  EXPECT_EQ(read_text_file(path), "second");
  std::size_t n = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++n;
  EXPECT_EQ(n, 1u);
  EXPECT_THROW(write_file_atomic(dir.path() / "missing" / "x.json", "x"), IoError);
  EXPECT_THROW(read_text_file(dir.path() / "absent.txt"), IoError);
}

}  // namespace
}  // namespace mmlime::io
