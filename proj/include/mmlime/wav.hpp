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

// RIFF/WAVE reading and writing for PCM 16-bit integer and IEEE 32-bit float
// data with one or two channels. Stereo input is averaged down to mono.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mmlime/core.hpp"

namespace mmlime::audio {

struct MonoAudio {
  std::vector<float> samples;
  int sample_rate = 0;
};

enum class WavEncoding { Pcm16, Float32 };

namespace detail {

inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline void put16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>(v >> 8));
}
inline void put32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

}  // namespace detail

inline MonoAudio decode_wav(const std::vector<unsigned char>& bytes, const std::string& origin) {
  auto fail = [&origin](const std::string& what) {
    return FormatError("'" + origin + "': " + what);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw fail("not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;

  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = detail::le32(chunk + 4);
    const std::size_t body = pos + 8;
    const std::size_t available = bytes.size() - body;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || size > available) throw fail("truncated fmt chunk");
      const unsigned char* f = bytes.data() + body;
      format = detail::le16(f);
      channels = detail::le16(f + 2);
      rate = detail::le32(f + 4);
      bits = detail::le16(f + 14);
      if (format == detail::kFormatExtensible) {
        if (size < 40) throw fail("truncated WAVE_FORMAT_EXTENSIBLE header");
        // First two bytes of the sub-format GUID carry the actual format tag.
        format = detail::le16(f + 24);
      }
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      // Streaming writers sometimes leave the size unset; take what is there.
      data_size = std::min<std::size_t>(size, available);
      break;
    }
    pos = body + size + (size & 1);
  }
  if (!have_fmt) throw fail("missing fmt chunk");
  if (data == nullptr) throw fail("missing data chunk");
  if (channels < 1 || channels > 2) {
    throw fail("unsupported channel count " + std::to_string(channels));
  }
  if (rate == 0) throw fail("sample rate is zero");
  const bool pcm16 = format == detail::kFormatPcm && bits == 16;
  const bool f32 = format == detail::kFormatFloat && bits == 32;
  if (!pcm16 && !f32) {
    throw fail("unsupported encoding (format tag " + std::to_string(format) + ", " +
               std::to_string(bits) + " bits); expected 16-bit PCM or 32-bit float");
  }

  const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t frames = data_size / frame_bytes;
  if (frames == 0) throw ValidationError("'" + origin + "': audio has zero length");

  MonoAudio out;
  out.sample_rate = static_cast<int>(rate);
  out.samples.resize(frames);
  auto sample = [&](std::size_t frame, std::size_t ch) -> float {
    const unsigned char* p = data + frame * frame_bytes + ch * (bits / 8);
    if (pcm16) {
      return static_cast<float>(static_cast<std::int16_t>(detail::le16(p))) / 32768.0f;
    }
    const std::uint32_t u = detail::le32(p);
    float v;
    std::memcpy(&v, &u, sizeof v);
    return v;
  };
  for (std::size_t i = 0; i < frames; ++i) {
    out.samples[i] = channels == 1 ? sample(i, 0) : 0.5f * (sample(i, 0) + sample(i, 1));
  }
  return out;
}

inline MonoAudio load_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open WAV file '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

// Interleaved channels; channels must divide samples.size().
inline std::string encode_wav(const std::vector<float>& interleaved, int sample_rate, int channels,
                              WavEncoding encoding) {
  if (channels < 1 || channels > 2) throw ValidationError("WAV channel count must be 1 or 2");
  const std::uint16_t bits = encoding == WavEncoding::Pcm16 ? 16 : 32;
  const std::uint32_t data_bytes = static_cast<std::uint32_t>(interleaved.size() * (bits / 8));
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put32(out, 36 + data_bytes);
  out += "WAVEfmt ";
  detail::put32(out, 16);
  detail::put16(out, encoding == WavEncoding::Pcm16 ? detail::kFormatPcm : detail::kFormatFloat);
  detail::put16(out, static_cast<std::uint16_t>(channels));
  detail::put32(out, static_cast<std::uint32_t>(sample_rate));
  detail::put32(out, static_cast<std::uint32_t>(sample_rate * channels * (bits / 8)));
  detail::put16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  detail::put16(out, bits);
  out += "data";
  detail::put32(out, data_bytes);
  for (float s : interleaved) {
    if (encoding == WavEncoding::Pcm16) {
      const float c = std::clamp(s, -1.0f, 32767.0f / 32768.0f);
      detail::put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::lrint(c * 32768.0f))));
    } else {
      std::uint32_t u;
      std::memcpy(&u, &s, sizeof u);
      detail::put32(out, u);
    }
  }
  return out;
}

inline void write_wav(const std::filesystem::path& path, const std::vector<float>& interleaved,
                      int sample_rate, int channels = 1, WavEncoding encoding = WavEncoding::Float32) {
  const std::string bytes = encode_wav(interleaved, sample_rate, channels, encoding);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write WAV file '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to '" + path.string() + "'");
}

}  // namespace mmlime::audio
