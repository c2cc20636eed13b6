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

// Client for a model served by a child process over newline-delimited JSON on
// its standard input/output:
//
//   server -> {"n_classes": N, "labels": [...]}                 (handshake)
//   client -> {"id": I, "lyrics": "...", "sample_rate": R, "audio_b64": "..."}
//   server -> {"id": I, "probabilities": [N floats]} | {"id": I, "error": "..."}
//
// Requests of one batch are pipelined; responses may arrive in any order and
// are matched by id.

#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mmlime/core.hpp"
#include "mmlime/detail/base64.hpp"
#include "mmlime/detail/subprocess.hpp"
#include "mmlime/predictor.hpp"

namespace mmlime::predict {

struct ExternalPredictorOptions {
  std::chrono::milliseconds handshake_timeout{std::chrono::seconds(30)};
  std::chrono::milliseconds response_timeout{std::chrono::minutes(5)};
  std::size_t batch_size = 32;
  double normalization_tolerance = 1e-4;
};

class ExternalPredictor final : public Predictor {
 public:
  ExternalPredictor(std::vector<std::string> argv, ExternalPredictorOptions options = {})
      : options_(options) {
    if (options_.batch_size == 0) throw ValidationError("external predictor batch size must be >= 1");
    child_ = std::make_unique<mmlime::detail::ChildProcess>(std::move(argv));
    handshake();
  }

  const LabelSet& labels() const override { return labels_; }

  std::vector<PredictionVector> predict_batch(std::span<const PredictRequest> batch) override {
    if (broken_) {
      throw PredictorError(PredictorErrorKind::Failure,
                           "connection to '" + child_->program() + "' is unusable after an earlier error");
    }
    std::vector<PredictionVector> out;
    out.reserve(batch.size());
    for (std::size_t start = 0; start < batch.size(); start += options_.batch_size) {
      const std::size_t n = std::min(options_.batch_size, batch.size() - start);
      try {
        auto chunk = send_chunk(batch.subspan(start, n), start);
        for (auto& p : chunk) out.push_back(std::move(p));
      } catch (...) {
        broken_ = true;
        throw;
      }
    }
    return out;
  }

 private:
  [[noreturn]] void fail(PredictorErrorKind kind, const std::string& msg,
                         std::optional<std::size_t> pos = std::nullopt,
                         std::optional<long long> id = std::nullopt) {
    throw PredictorError(kind, msg, pos, id);
  }

  std::vector<std::string> exchange(const std::string& payload, std::size_t n_lines,
                                    std::chrono::milliseconds timeout, PredictorErrorKind on_timeout) {
    try {
      return child_->exchange(payload, n_lines, timeout);
    } catch (const mmlime::detail::ChannelTimeout& e) {
      fail(on_timeout, e.what());
    } catch (const mmlime::detail::ChannelClosed& e) {
      fail(PredictorErrorKind::ProcessExited, e.what());
    }
  }

  void handshake() {
    const auto line = exchange({}, 1, options_.handshake_timeout, PredictorErrorKind::HandshakeTimeout);
    nlohmann::json hello;
    try {
      hello = nlohmann::json::parse(line.front());
    } catch (const nlohmann::json::exception& e) {
      fail(PredictorErrorKind::MalformedJson, "handshake is not valid JSON: " + std::string(e.what()));
    }
    if (!hello.is_object() || !hello.contains("n_classes") || !hello["n_classes"].is_number_integer() ||
        !hello.contains("labels") || !hello["labels"].is_array()) {
      fail(PredictorErrorKind::MalformedJson, "handshake must carry integer 'n_classes' and array 'labels'");
    }
    const auto n = hello["n_classes"].get<long long>();
    if (n < 1) fail(PredictorErrorKind::MalformedJson, "handshake n_classes must be >= 1");
    std::vector<std::string> names;
    for (const auto& l : hello["labels"]) {
      if (!l.is_string()) fail(PredictorErrorKind::MalformedJson, "handshake labels must be strings");
      names.push_back(l.get<std::string>());
    }
    if (static_cast<long long>(names.size()) != n) {
      fail(PredictorErrorKind::LengthMismatch, "handshake declares " + std::to_string(n) +
                                                   " classes but lists " + std::to_string(names.size()) +
                                                   " labels");
    }
    try {
      labels_ = LabelSet(std::move(names));
    } catch (const ValidationError& e) {
      fail(PredictorErrorKind::MalformedJson, e.what());
    }
  }

  std::vector<PredictionVector> send_chunk(std::span<const PredictRequest> chunk, std::size_t offset) {
    std::string payload;
    std::map<long long, std::size_t> pending;
    for (std::size_t i = 0; i < chunk.size(); ++i) {
      const long long id = next_id_++;
      pending.emplace(id, i);
      nlohmann::json req{{"id", id},
                         {"lyrics", std::string(chunk[i].lyrics)},
                         {"sample_rate", chunk[i].sample_rate},
                         {"audio_b64", mmlime::detail::encode_pcm_f32(chunk[i].audio)}};
      payload += req.dump();
      payload += '\n';
    }
    const auto lines = exchange(payload, chunk.size(), options_.response_timeout, PredictorErrorKind::Timeout);

    const std::size_t n_classes = labels_.size();
    std::vector<std::optional<PredictionVector>> out(chunk.size());
    for (const auto& line : lines) {
      nlohmann::json resp;
      try {
        resp = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        fail(PredictorErrorKind::MalformedJson, "response is not valid JSON: " + std::string(e.what()));
      }
      if (!resp.is_object() || !resp.contains("id") || !resp["id"].is_number_integer()) {
        fail(PredictorErrorKind::MalformedJson, "response lacks an integer 'id'");
      }
      const auto id = resp["id"].get<long long>();
      auto it = pending.find(id);
      if (it == pending.end()) {
        fail(PredictorErrorKind::UnknownId, "response for unknown or repeated id " + std::to_string(id),
             std::nullopt, id);
      }
      const std::size_t pos = it->second;
      pending.erase(it);
      if (resp.contains("error")) {
        const auto& err = resp["error"];
        fail(PredictorErrorKind::Failure,
             "request " + std::to_string(id) + " failed: " + (err.is_string() ? err.get<std::string>() : err.dump()),
             offset + pos, id);
      }
      if (!resp.contains("probabilities") || !resp["probabilities"].is_array()) {
        fail(PredictorErrorKind::MalformedJson,
             "response " + std::to_string(id) + " lacks a 'probabilities' array", offset + pos, id);
      }
      const auto& probs = resp["probabilities"];
      if (probs.size() != n_classes) {
        fail(PredictorErrorKind::LengthMismatch,
             "response " + std::to_string(id) + " has " + std::to_string(probs.size()) +
                 " probabilities, expected " + std::to_string(n_classes),
             offset + pos, id);
      }
      PredictionVector pv;
      pv.probabilities.reserve(n_classes);
      double sum = 0.0;
      for (const auto& v : probs) {
        if (!v.is_number()) {
          fail(PredictorErrorKind::MalformedJson, "response " + std::to_string(id) + " has a non-numeric probability",
               offset + pos, id);
        }
        const double x = v.get<double>();
        if (!(x >= 0.0)) {
          fail(PredictorErrorKind::NotNormalized, "response " + std::to_string(id) + " has a negative probability",
               offset + pos, id);
        }
        sum += x;
        pv.probabilities.push_back(x);
      }
      if (std::abs(sum - 1.0) > options_.normalization_tolerance) {
        fail(PredictorErrorKind::NotNormalized,
             "response " + std::to_string(id) + " probabilities sum to " + std::to_string(sum),
             offset + pos, id);
      }
      out[pos] = std::move(pv);
    }
    std::vector<PredictionVector> result;
    result.reserve(out.size());
    for (auto& p : out) result.push_back(std::move(*p));
    return result;
  }

  ExternalPredictorOptions options_;
  std::unique_ptr<mmlime::detail::ChildProcess> child_;
  LabelSet labels_;
  long long next_id_ = 0;
  bool broken_ = false;
};

inline std::unique_ptr<ExternalPredictor> external_predictor_connect(
    const std::string& command, const std::vector<std::string>& args,
    ExternalPredictorOptions options = {}) {
  std::vector<std::string> argv{command};
  argv.insert(argv.end(), args.begin(), args.end());
  return std::make_unique<ExternalPredictor>(std::move(argv), options);
}

}  // namespace mmlime::predict
