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

// Global per-class importances from a corpus of local explanations.
//
// S_c is the set of instances whose predicted class is c. Only the weights of
// an instance's explanation for its own predicted class enter the sums;
// explanations it has for other classes are kept but ignored here.
//
//   average:      I_cj = sum_{i in S_c} |W_ij| / #{i in S_c : |W_ij| > 1e-12}
//   homogeneity:  p_cj = sqrt(A_cj) / sum_c' sqrt(A_c'j),  A_cj = sum_{i in S_c} |W_ij|
//                 H_j  = -sum_c p_cj log p_cj
//                 I_cj = (1 - (H_j - H_min) / (H_max - H_min)) sqrt(A_cj)
//
// H_min / H_max range over features with nonzero total weight; features with
// zero total weight have no distribution and score 0. When H_max == H_min the
// homogeneity factor is 1.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mmlime/core.hpp"
#include "mmlime/lime_engine.hpp"

namespace mmlime::agg {

// |W| above this counts towards the support of a feature.
inline constexpr double kNonzeroWeight = 1e-12;

class WeightTable {
 public:
  struct Instance {
    std::size_t predicted_class = 0;
    // class index -> (feature, weight)
    std::map<std::size_t, std::vector<std::pair<FeatureDescriptor, double>>> weights;
  };

  void add_class(const ClassLabel& label) {
    auto [it, inserted] = class_names_.emplace(label.index, label.name);
    if (!inserted && it->second != label.name) {
      throw ValidationError("class index " + std::to_string(label.index) + " is named both '" + it->second +
                            "' and '" + label.name + "'");
    }
  }

  void set_predicted(const std::string& instance_id, const ClassLabel& predicted) {
    add_class(predicted);
    auto [it, inserted] = instances_.try_emplace(instance_id);
    if (!inserted && it->second.predicted_class != predicted.index) {
      throw ValidationError("instance '" + instance_id + "' has conflicting predicted classes");
    }
    it->second.predicted_class = predicted.index;
  }

  void add_weight(const std::string& instance_id, std::size_t class_index, const FeatureDescriptor& feature,
                  double weight) {
    auto it = instances_.find(instance_id);
    if (it == instances_.end()) {
      throw ValidationError("instance '" + instance_id + "' has no predicted class");
    }
    if (!class_names_.contains(class_index)) {
      throw ValidationError("unknown class index " + std::to_string(class_index));
    }
    it->second.weights[class_index].emplace_back(feature, weight);
    universe_.insert(feature);
  }

  void add(const lime::LocalExplanation& e) {
    add_class(e.target);
    set_predicted(e.instance_id, e.predicted_class);
    auto& inst = instances_.at(e.instance_id);
    if (inst.weights.contains(e.target.index)) {
      throw ValidationError("duplicate explanation for instance '" + e.instance_id + "' class '" +
                            e.target.name + "'");
    }
    inst.weights[e.target.index];
    for (const auto& fw : e.weights) add_weight(e.instance_id, e.target.index, fw.feature, fw.weight);
  }

  bool empty() const { return instances_.empty(); }
  std::size_t n_instances() const { return instances_.size(); }
  const std::map<std::string, Instance>& instances() const { return instances_; }

  std::vector<ClassLabel> classes() const {
    std::vector<ClassLabel> out;
    for (const auto& [i, n] : class_names_) out.push_back({i, n});
    return out;
  }

  // Union of all features seen, in global canonical order.
  std::vector<FeatureDescriptor> features() const { return {universe_.begin(), universe_.end()}; }

 private:
  std::map<std::string, Instance> instances_;
  std::map<std::size_t, std::string> class_names_;
  std::set<FeatureDescriptor> universe_;
};

enum class AggregationMethod { Average, Homogeneity };

inline std::string_view to_string(AggregationMethod m) {
  return m == AggregationMethod::Average ? "average" : "homogeneity";
}

inline AggregationMethod aggregation_method_from_string(std::string_view s) {
  if (s == "avg" || s == "average") return AggregationMethod::Average;
  if (s == "homogeneity") return AggregationMethod::Homogeneity;
  throw ValidationError("unknown aggregation method '" + std::string(s) + "' (avg, homogeneity)");
}

// Dense (class x feature) view of a report. Row order follows `classes`.
struct GlobalReport {
  AggregationMethod method = AggregationMethod::Average;
  std::vector<ClassLabel> classes;
  std::vector<FeatureDescriptor> features;
  std::vector<std::size_t> class_sizes;  // |S_c|
  std::vector<double> importance;        // [c * F + j]
  std::vector<double> abs_sum;           // sum_{i in S_c} |W_ij|
  std::vector<std::size_t> support;      // #{i in S_c : |W_ij| > 1e-12}
  std::vector<double> entropy;           // per feature; NaN when not computed

  std::size_t n_features() const { return features.size(); }
  std::size_t cell(std::size_t row, std::size_t j) const { return row * features.size() + j; }

  std::optional<std::size_t> row_of(std::size_t class_index) const {
    for (std::size_t r = 0; r < classes.size(); ++r) {
      if (classes[r].index == class_index) return r;
    }
    return std::nullopt;
  }

  std::optional<std::size_t> column_of(const FeatureDescriptor& f) const {
    auto it = std::lower_bound(features.begin(), features.end(), f);
    if (it == features.end() || !(*it == f)) return std::nullopt;
    return static_cast<std::size_t>(it - features.begin());
  }

  double importance_of(std::size_t class_index, const FeatureDescriptor& f) const {
    const auto r = row_of(class_index);
    const auto j = column_of(f);
    if (!r || !j) throw ValidationError("no such (class, feature) in report");
    return importance[cell(*r, *j)];
  }
};

namespace detail {

// Fills classes, features, class sizes, abs sums and supports.
inline GlobalReport accumulate(const WeightTable& table) {
  if (table.empty()) throw ValidationError("weight table is empty");
  GlobalReport r;
  r.classes = table.classes();
  r.features = table.features();
  const std::size_t n_cls = r.classes.size();
  const std::size_t n_feat = r.features.size();
  r.class_sizes.assign(n_cls, 0);
  r.abs_sum.assign(n_cls * n_feat, 0.0);
  r.support.assign(n_cls * n_feat, 0);
  r.importance.assign(n_cls * n_feat, 0.0);
  r.entropy.assign(n_feat, std::numeric_limits<double>::quiet_NaN());

  for (const auto& [id, inst] : table.instances()) {
    const auto row = r.row_of(inst.predicted_class);
    ++r.class_sizes[*row];
    auto it = inst.weights.find(inst.predicted_class);
    if (it == inst.weights.end()) continue;
    for (const auto& [feature, w] : it->second) {
      const std::size_t k = r.cell(*row, *r.column_of(feature));
      r.abs_sum[k] += std::abs(w);
      if (std::abs(w) > kNonzeroWeight) ++r.support[k];
    }
  }
  return r;
}

}  // namespace detail

inline GlobalReport average_importance(const WeightTable& table) {
  GlobalReport r = detail::accumulate(table);
  r.method = AggregationMethod::Average;
  for (std::size_t k = 0; k < r.importance.size(); ++k) {
    r.importance[k] = r.support[k] == 0 ? 0.0 : r.abs_sum[k] / static_cast<double>(r.support[k]);
  }
  return r;
}

// p_cj over the report's classes for feature column j.
inline std::vector<double> class_distribution(const GlobalReport& stats, std::size_t j) {
  if (j >= stats.n_features()) throw ValidationError("feature column out of range");
  std::vector<double> p(stats.classes.size());
  double total = 0.0;
  for (std::size_t r = 0; r < p.size(); ++r) {
    p[r] = std::sqrt(stats.abs_sum[stats.cell(r, j)]);
    total += p[r];
  }
  if (!(total > 0.0)) {
    throw ValidationError("feature '" + stats.features[j].key_string() + "' has zero total weight");
  }
  for (auto& v : p) v /= total;
  return p;
}

inline std::vector<double> class_distribution(const WeightTable& table, const FeatureDescriptor& feature) {
  const GlobalReport stats = detail::accumulate(table);
  const auto j = stats.column_of(feature);
  if (!j) throw ValidationError("feature '" + feature.key_string() + "' is not in the table");
  return class_distribution(stats, *j);
}

// -sum p log p with 0 log 0 = 0, in the given logarithm base (default e).
inline double shannon_entropy(std::span<const double> p, double log_base = std::numbers::e) {
  const double scale = 1.0 / std::log(log_base);
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v) * scale;
  }
  return h;
}

inline GlobalReport homogeneity_importance(const WeightTable& table, double log_base = std::numbers::e) {
  GlobalReport r = detail::accumulate(table);
  r.method = AggregationMethod::Homogeneity;
  const std::size_t n_cls = r.classes.size();

  double h_min = std::numeric_limits<double>::infinity();
  double h_max = -std::numeric_limits<double>::infinity();
  std::vector<bool> defined(r.n_features(), false);
  for (std::size_t j = 0; j < r.n_features(); ++j) {
    double total = 0.0;
    for (std::size_t row = 0; row < n_cls; ++row) total += r.abs_sum[r.cell(row, j)];
    if (!(total > 0.0)) continue;
    defined[j] = true;
    r.entropy[j] = shannon_entropy(class_distribution(r, j), log_base);
    h_min = std::min(h_min, r.entropy[j]);
    h_max = std::max(h_max, r.entropy[j]);
  }
  if (!(h_max >= h_min)) throw ValidationError("no feature has nonzero total weight");

  for (std::size_t j = 0; j < r.n_features(); ++j) {
    if (!defined[j]) continue;
    const double factor = h_max == h_min ? 1.0 : 1.0 - (r.entropy[j] - h_min) / (h_max - h_min);
    for (std::size_t row = 0; row < n_cls; ++row) {
      const std::size_t k = r.cell(row, j);
      r.importance[k] = factor * std::sqrt(r.abs_sum[k]);
    }
  }
  return r;
}

inline GlobalReport aggregate(const WeightTable& table, AggregationMethod method) {
  return method == AggregationMethod::Average ? average_importance(table) : homogeneity_importance(table);
}

struct RankedFeature {
  Modality modality = Modality::Text;
  // Word, "source@segN", or bare source name when segments are collapsed.
  std::string key;
  double importance = 0.0;
  std::size_t support = 0;
  double entropy = std::numeric_limits<double>::quiet_NaN();
};

// Features that carry weight in the class, by descending importance; ties
// keep global canonical order. With collapse_segments, audio features of the
// same source are summed over segments first.
inline std::vector<RankedFeature> top_k(const GlobalReport& report, std::size_t class_index, std::size_t k,
                                        bool collapse_segments = false) {
  if (k == 0) throw ValidationError("top-k needs k >= 1");
  const auto row = report.row_of(class_index);
  if (!row) throw ValidationError("unknown class index " + std::to_string(class_index));

  std::vector<RankedFeature> candidates;
  std::map<std::string, RankedFeature> collapsed;
  for (std::size_t j = 0; j < report.n_features(); ++j) {
    const std::size_t c = report.cell(*row, j);
    if (!(report.abs_sum[c] > 0.0)) continue;
    const auto& f = report.features[j];
    if (collapse_segments && f.is_audio()) {
      auto& agg = collapsed[f.name];
      agg.modality = Modality::Audio;
      agg.key = f.name;
      agg.importance += report.importance[c];
      agg.support += report.support[c];
      continue;
    }
    candidates.push_back(RankedFeature{f.modality, f.key_string(), report.importance[c], report.support[c],
                                       report.entropy[j]});
  }
  if (collapse_segments) {
    std::vector<RankedFeature> audio;
    for (auto& [name, rf] : collapsed) audio.push_back(std::move(rf));
    candidates.insert(candidates.begin(), audio.begin(), audio.end());
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const auto& a, const auto& b) { return a.importance > b.importance; });
  if (candidates.size() > k) candidates.resize(k);
  return candidates;
}

}  // namespace mmlime::agg
