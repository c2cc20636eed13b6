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

// Scriptable stand-in for external model and separator processes. Speaks the
// newline-delimited JSON protocol on stdin/stdout; the first argument picks a
// behaviour.
//
//   predictor modes: uniform, keyword, wrong-length, unnormalized, near-normalized,
//                    malformed, reverse, error, silent, no-handshake,
//                    bad-handshake, unknown-id, exit-after-handshake
//   (keyword and reverse answer with keyword-driven probabilities)
//   separator modes: separator-halves, separator-missing, separator-short

#include <poll.h>
#include <unistd.h>

#include <chrono>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mmlime/detail/base64.hpp"
#include "mmlime/text_features.hpp"

namespace {

using nlohmann::json;

const std::vector<std::string> kLabels{"calm", "happy", "sad"};

void emit(const json& j) { std::cout << j.dump() << "\n" << std::flush; }

void sleep_forever() {
  for (;;) std::this_thread::sleep_for(std::chrono::hours(1));
}

// True when stdin has a line ready within the timeout.
bool input_ready(int timeout_ms) {
  pollfd p{STDIN_FILENO, POLLIN, 0};
  return ::poll(&p, 1, timeout_ms) > 0;
}

std::vector<double> uniform() { return std::vector<double>(kLabels.size(), 1.0 / kLabels.size()); }

// P(happy) grows with occurrences of "love"; other classes share the rest.
std::vector<double> keyword_probs(const std::string& lyrics) {
  std::size_t hits = 0;
  for (const auto& t : mmlime::text::clean_tokens(lyrics)) hits += t == "love";
  const double p = 1.0 - 0.5 / static_cast<double>(1 + hits);
  return {(1.0 - p) / 2.0, p, (1.0 - p) / 2.0};
}

int run_separator(const std::string& mode) {
  std::string line;
  if (!std::getline(std::cin, line)) return 1;
  const json req = json::parse(line);
  const auto audio = mmlime::detail::decode_pcm_f32(req.at("audio_b64").get<std::string>());
  std::vector<float> half(audio.size());
  for (std::size_t i = 0; i < audio.size(); ++i) half[i] = audio[i] * 0.5f;
  json sources = json::object();
  if (mode == "separator-halves") {
    sources["vocals"] = mmlime::detail::encode_pcm_f32(half);
    sources["drums"] = mmlime::detail::encode_pcm_f32(half);
    sources["bass"] = mmlime::detail::encode_pcm_f32(std::vector<float>(audio.size(), 0.0f));
    sources["other"] = mmlime::detail::encode_pcm_f32(std::vector<float>(audio.size(), 0.0f));
  } else if (mode == "separator-missing") {
    sources["vocals"] = mmlime::detail::encode_pcm_f32(audio);
  } else {
    half.resize(half.size() / 2);
    for (const char* name : {"vocals", "drums", "bass", "other"}) sources[name] = mmlime::detail::encode_pcm_f32(half);
  }
  emit(json{{"sources", sources}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "uniform";
  if (mode.starts_with("separator")) return run_separator(mode);

  if (mode == "no-handshake") sleep_forever();
  if (mode == "bad-handshake") {
    emit(json{{"n_classes", 3}, {"labels", {"calm", "happy"}}});
    sleep_forever();
  }
  emit(json{{"n_classes", kLabels.size()}, {"labels", kLabels}});

  std::vector<json> held;
  std::string line;
  for (;;) {
    if (mode == "reverse" && !held.empty() && !input_ready(50)) {
      for (auto it = held.rbegin(); it != held.rend(); ++it) emit(*it);
      held.clear();
    }
    if (!std::getline(std::cin, line)) break;
    if (mode == "exit-after-handshake") return 3;
    if (mode == "silent") continue;
    if (mode == "malformed") {
      std::cout << "{not json\n" << std::flush;
      continue;
    }
    json req;
    try {
      req = json::parse(line);
    } catch (const json::exception&) {
      emit(json{{"id", nullptr}, {"error", "malformed request"}});
      continue;
    }
    const auto id = req.at("id").get<long long>();
    if (mode == "error") {
      emit(json{{"id", id}, {"error", "model exploded"}});
      continue;
    }
    const bool keyed = mode == "keyword" || mode == "reverse";
    std::vector<double> p = keyed ? keyword_probs(req.value("lyrics", "")) : uniform();
    if (mode == "wrong-length") p.pop_back();
    if (mode == "unnormalized") p[0] += 0.1;
    if (mode == "near-normalized") p[0] += 5e-5;
    const json resp{{"id", mode == "unknown-id" ? id + 1000 : id}, {"probabilities", p}};
    if (mode == "reverse") {
      held.push_back(resp);
      if (held.size() == 2) {
        emit(held[1]);
        emit(held[0]);
        held.clear();
      }
      continue;
    }
    emit(resp);
  }
  return 0;
}
