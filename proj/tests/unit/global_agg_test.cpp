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
#include <numbers>
#include <string>
#include <vector>

#include "agg_oracle.hpp"
#include "mmlime/global_agg.hpp"

namespace mmlime::agg {
namespace {

const ClassLabel kA{0, "a"}, kB{1, "b"}, kC{2, "c"};
const FeatureDescriptor kJ = FeatureDescriptor::text("j");

lime::LocalExplanation explanation(const std::string& id, const ClassLabel& target, const ClassLabel& predicted,
                                   std::vector<lime::FeatureWeight> weights) {
  lime::LocalExplanation e;
  e.instance_id = id;
  e.target = target;
  e.predicted_class = predicted;
  e.weights = std::move(weights);
  return e;
}

TEST(AverageImportance, SpotValue) {
  WeightTable t;
  const double ws[] = {0.5, -0.3, 0.0};
  for (int i = 0; i < 3; ++i) t.add(explanation("i" + std::to_string(i), kA, kA, {{kJ, ws[i]}}));
  const auto r = average_importance(t);
  EXPECT_NEAR(r.importance_of(0, kJ), 0.4, 1e-15);
  EXPECT_EQ(r.support[r.cell(0, 0)], 2u);
}

TEST(AverageImportance, AllZeroAndSingleNegative) {
  WeightTable t;
  t.add(explanation("x", kA, kA, {{kJ, 0.0}}));
  t.add(explanation("y", kB, kB, {{kJ, -0.7}}));
  const auto r = average_importance(t);
  EXPECT_EQ(r.importance_of(0, kJ), 0.0);
  EXPECT_DOUBLE_EQ(r.importance_of(1, kJ), 0.7);
}

TEST(AverageImportance, NonzeroThreshold) {
  WeightTable t;
  t.add(explanation("x", kA, kA, {{kJ, 1.0}}));
  t.add(explanation("y", kA, kA, {{kJ, 1e-13}}));
  EXPECT_DOUBLE_EQ(average_importance(t).importance_of(0, kJ), 1.0 + 1e-13);
}

TEST(AverageImportance, OnlyPredictedClassCounts) {
  WeightTable t;
  t.add(explanation("x", kA, kA, {{kJ, 0.2}}));
  t.add(explanation("x", kB, kA, {{kJ, 5.0}}));
  const auto r = average_importance(t);
  EXPECT_DOUBLE_EQ(r.importance_of(0, kJ), 0.2);
  EXPECT_EQ(r.importance_of(1, kJ), 0.0);
  EXPECT_EQ(r.class_sizes, (std::vector<std::size_t>{1, 0}));
}

TEST(AverageImportance, InvariantToInstanceOrder) {
  const auto dense = testing::random_dense_table(40, 12, 4, 21);
  auto shuffled = dense;
  std::mt19937_64 gen(5);
  for (std::size_t i = shuffled.n_instances(); i-- > 1;) {
    const std::size_t k = gen() % (i + 1);
    std::swap(shuffled.predicted[i], shuffled.predicted[k]);
    std::swap(shuffled.weights[i], shuffled.weights[k]);
    std::swap(shuffled.distractor[i], shuffled.distractor[k]);
  }
  const auto a = average_importance(dense.to_table());
  const auto b = average_importance(shuffled.to_table());
  ASSERT_EQ(a.features, b.features);
  for (std::size_t k = 0; k < a.importance.size(); ++k) EXPECT_NEAR(a.importance[k], b.importance[k], 1e-15);
}

TEST(WeightTable, Consistency) {
  WeightTable t;
  EXPECT_THROW(average_importance(t), ValidationError);
  t.add(explanation("x", kA, kA, {{kJ, 0.2}}));
  EXPECT_THROW(t.add(explanation("x", kA, kA, {{kJ, 0.2}})), ValidationError);
  EXPECT_THROW(t.add(explanation("x", kB, kB, {{kJ, 0.2}})), ValidationError);
  EXPECT_THROW(t.add(explanation("y", ClassLabel{0, "renamed"}, ClassLabel{0, "renamed"}, {})), ValidationError);
  EXPECT_THROW(t.add_weight("nobody", 0, kJ, 1.0), ValidationError);
}

TEST(ClassDistribution, SquareRootNormalization) {
  WeightTable t;
  t.add(explanation("x", kA, kA, {{kJ, 3.0}}));
  t.add(explanation("y", kA, kA, {{kJ, -1.0}}));
  t.add(explanation("z", kB, kB, {{kJ, 1.0}}));
  const auto p = class_distribution(t, kJ);
  ASSERT_EQ(p.size(), 2u);
  EXPECT_NEAR(p[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(p[1], 1.0 / 3.0, 1e-15);
}

TEST(ClassDistribution, IndicatorUniformAndZero) {
  WeightTable t;
  for (std::size_t c = 0; c < 9; ++c) {
    const ClassLabel l{c, "c" + std::to_string(c)};
    t.add(explanation("i" + std::to_string(c), l, l,
                      {{kJ, 0.5}, {FeatureDescriptor::text("only0"), c == 0 ? 1.0 : 0.0},
                       {FeatureDescriptor::text("never"), 0.0}}));
  }
  for (double v : class_distribution(t, kJ)) EXPECT_NEAR(v, 1.0 / 9.0, 1e-15);
  const auto ind = class_distribution(t, FeatureDescriptor::text("only0"));
  EXPECT_EQ(ind[0], 1.0);
  for (std::size_t c = 1; c < 9; ++c) EXPECT_EQ(ind[c], 0.0);
  EXPECT_THROW(class_distribution(t, FeatureDescriptor::text("never")), ValidationError);
  EXPECT_THROW(class_distribution(t, FeatureDescriptor::text("absent")), ValidationError);
}

TEST(ShannonEntropy, SpotValues) {
  const std::vector<double> point{1, 0, 0, 0};
  EXPECT_EQ(shannon_entropy(point), 0.0);
  const std::vector<double> uniform(9, 1.0 / 9.0);
  EXPECT_NEAR(shannon_entropy(uniform), std::log(9.0), 1e-14);
  EXPECT_NEAR(shannon_entropy(uniform), 2.19722, 1e-5);
  const std::vector<double> two{2.0 / 3.0, 1.0 / 3.0};
  EXPECT_NEAR(shannon_entropy(two), std::log(3.0) - 2.0 / 3.0 * std::log(2.0), 1e-15);
  EXPECT_NEAR(shannon_entropy(two), 0.63651, 1e-5);
  EXPECT_NEAR(shannon_entropy(two, 2.0), shannon_entropy(two) / std::log(2.0), 1e-15);
}

TEST(HomogeneityImportance, SpotValueAndMaxEntropyFeature) {
  WeightTable t;
  const auto j1 = FeatureDescriptor::text("j1"), j2 = FeatureDescriptor::text("j2");
  t.add(explanation("x", kA, kA, {{j1, 4.0}, {j2, 1.0}}));
  t.add(explanation("y", kB, kB, {{j2, -1.0}}));
  const auto r = homogeneity_importance(t);
  EXPECT_NEAR(r.importance_of(0, j1), 2.0, 1e-15);
  EXPECT_EQ(r.importance_of(0, j2), 0.0);
  EXPECT_EQ(r.importance_of(1, j2), 0.0);
  EXPECT_EQ(r.entropy[*r.column_of(j1)], 0.0);
  EXPECT_NEAR(r.entropy[*r.column_of(j2)], std::log(2.0), 1e-15);
}

TEST(HomogeneityImportance, SingleFeatureUsesFactorOne) {
  WeightTable t;
  t.add(explanation("x", kA, kA, {{kJ, 0.25}}));
  t.add(explanation("y", kB, kB, {{kJ, 0.64}}));
  const auto r = homogeneity_importance(t);
  EXPECT_DOUBLE_EQ(r.importance_of(0, kJ), 0.5);
  EXPECT_DOUBLE_EQ(r.importance_of(1, kJ), 0.8);
}

TEST(HomogeneityImportance, ZeroWeightFeaturesExcluded) {
  WeightTable t;
  const auto dead = FeatureDescriptor::text("dead");
  t.add(explanation("x", kA, kA, {{kJ, 0.25}, {dead, 0.0}}));
  t.add(explanation("y", kB, kB, {{kJ, 0.64}, {dead, 0.0}}));
  const auto r = homogeneity_importance(t);
  EXPECT_TRUE(std::isnan(r.entropy[*r.column_of(dead)]));
  EXPECT_EQ(r.importance_of(0, dead), 0.0);
  EXPECT_DOUBLE_EQ(r.importance_of(0, kJ), 0.5);

  WeightTable none;
  none.add(explanation("x", kA, kA, {{dead, 0.0}}));
  EXPECT_THROW(homogeneity_importance(none), ValidationError);
}

TEST(Aggregates, MatchDirectEvaluation) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto dense = testing::random_dense_table(100, 50, 9, seed);
    const auto table = dense.to_table();
    EXPECT_LE(testing::max_report_error(average_importance(table), dense, testing::direct_average(dense)), 1e-12);
    EXPECT_LE(testing::max_report_error(homogeneity_importance(table), dense, testing::direct_homogeneity(dense)),
              1e-12);
  }
}

TEST(Aggregates, EntropyBoundsAndBaseInvariance) {
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    const auto dense = testing::random_dense_table(30, 10, 5, seed, 0.6);
    const auto table = dense.to_table();
    const auto e = homogeneity_importance(table);
    const auto two = homogeneity_importance(table, 2.0);
    for (double h : e.entropy) {
      if (std::isnan(h)) continue;
      EXPECT_GE(h, 0.0);
      EXPECT_LE(h, std::log(5.0) + 1e-12);
    }
    for (std::size_t k = 0; k < e.importance.size(); ++k) EXPECT_NEAR(e.importance[k], two.importance[k], 1e-9);
  }
}

TEST(TopK, OrderTiesAndTruncation) {
  WeightTable t;
  const auto x = FeatureDescriptor::text("x"), y = FeatureDescriptor::text("y"), z = FeatureDescriptor::text("z");
  const auto v0 = FeatureDescriptor::audio(0, "vocals"), v1 = FeatureDescriptor::audio(1, "vocals"),
             d0 = FeatureDescriptor::audio(0, "drums");
  t.add(explanation("i", kA, kA, {{d0, 0.1}, {v0, 0.3}, {v1, 0.3}, {z, 0.5}, {y, 0.3}, {x, 0.0}}));
  const auto r = average_importance(t);
  const auto all = top_k(r, 0, 100);
  ASSERT_EQ(all.size(), 5u);  // x carries no weight
  std::vector<std::string> keys;
  for (const auto& f : all) keys.push_back(f.key);
  // Ties at 0.3 follow global canonical order: audio by segment, then text.
  EXPECT_EQ(keys, (std::vector<std::string>{"z", "vocals@seg0", "vocals@seg1", "y", "drums@seg0"}));
  EXPECT_EQ(top_k(r, 0, 2).size(), 2u);
  EXPECT_THROW(top_k(r, 0, 0), ValidationError);
  EXPECT_THROW(top_k(r, 7, 3), ValidationError);

  const auto collapsed = top_k(r, 0, 10, true);
  ASSERT_EQ(collapsed.size(), 4u);
  EXPECT_EQ(collapsed[0].key, "vocals");
  EXPECT_NEAR(collapsed[0].importance, 0.6, 1e-15);
  EXPECT_EQ(collapsed[0].modality, Modality::Audio);
  EXPECT_EQ(collapsed[1].key, "z");
  EXPECT_EQ(collapsed[3].key, "drums");
}

TEST(TopK, LargestAverageRanksFirst) {
  const auto dense = testing::random_dense_table(60, 20, 3, 8);
  const auto r = average_importance(dense.to_table());
  const auto want = testing::direct_average(dense);
  for (std::size_t c = 0; c < 3; ++c) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < 20; ++j) {
      if (want[c][j] > want[c][best]) best = j;
    }
    EXPECT_EQ(top_k(r, c, 1).front().key, testing::DenseTable::feature(best).key_string());
  }
}

}  // namespace
}  // namespace mmlime::agg
