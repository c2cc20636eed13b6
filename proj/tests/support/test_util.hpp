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

// Helpers shared by the test binaries: scratch directories and synthetic
// audio fixtures.

#pragma once

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace mmlime::testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag = "mmlime") {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

inline std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<float> sine(double freq, double amp, int sr, double seconds) {
  const auto n = static_cast<std::size_t>(seconds * sr);
  std::vector<float> x(n);
  for (std::size_t t = 0; t < n; ++t) {
    x[t] = static_cast<float>(amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / sr));
  }
  return x;
}

// One-sample impulses every `period` seconds, starting half a period in.
inline std::vector<float> clicks(double period, double amp, int sr, double seconds) {
  const auto n = static_cast<std::size_t>(seconds * sr);
  std::vector<float> x(n, 0.0f);
  const auto every = static_cast<std::size_t>(period * sr);
  for (std::size_t t = every / 2; t < n; t += every) x[t] = static_cast<float>(amp);
  return x;
}

inline std::vector<float> noise(double amp, int sr, double seconds, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  std::vector<float> x(static_cast<std::size_t>(seconds * sr));
  for (auto& v : x) v = static_cast<float>(u(gen));
  return x;
}

inline std::vector<float> mix(const std::vector<float>& a, const std::vector<float>& b) {
  std::vector<float> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline double energy(const std::vector<float>& x) {
  double e = 0.0;
  for (float v : x) e += static_cast<double>(v) * v;
  return e;
}

inline double relative_l2(const std::vector<float>& got, const std::vector<float>& want) {
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < want.size(); ++i) {
    const double e = static_cast<double>(got[i]) - want[i];
    err += e * e;
    ref += static_cast<double>(want[i]) * want[i];
  }
  return std::sqrt(err / ref);
}

}  // namespace mmlime::testing
