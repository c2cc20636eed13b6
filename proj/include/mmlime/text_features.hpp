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

// Word-type features for lyrics and masked lyric rendering.
//
// Cleaning lowercases every codepoint, drops codepoints in the Unicode
// punctuation categories (so "don't" becomes "dont") and splits on Unicode
// white space. The explainer always featurizes the full lyrics; any token
// limit of the explained model is that model's business.

#pragma once

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mmlime/core.hpp"
#include "mmlime/detail/unicode_tables.hpp"

namespace mmlime::text {

namespace detail {

inline constexpr char32_t kReplacementChar = 0xFFFD;

// Decodes one codepoint starting at s[i] and advances i. Invalid sequences
// decode to U+FFFD, one byte at a time.
inline char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  int len = 0;
  char32_t cp = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
  } else {
    ++i;
    return kReplacementChar;
  }
  if (i + static_cast<std::size_t>(len) > s.size()) {
    ++i;
    return kReplacementChar;
  }
  for (int k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + static_cast<std::size_t>(k)]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kReplacementChar;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  i += static_cast<std::size_t>(len);
  return cp;
}

inline void encode_utf8(char32_t cp, std::string& out) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

inline bool is_punctuation(char32_t cp) {
  const auto& table = mmlime::detail::kPunctuationRanges;
  auto it = std::upper_bound(table.begin(), table.end(), cp,
                             [](char32_t c, const auto& r) { return c < r.first; });
  if (it == table.begin()) return false;
  --it;
  return cp <= it->last;
}

// Unicode White_Space property.
inline bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

inline char32_t to_lower(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
  }
  const auto& table = mmlime::detail::kLowercaseMap;
  auto it = std::lower_bound(table.begin(), table.end(), cp,
                             [](const auto& m, char32_t c) { return m.from < c; });
  return (it != table.end() && it->from == cp) ? it->to : cp;
}

}  // namespace detail

struct TextFeaturization {
  // Cleaned token stream.
  std::vector<std::string> tokens;
  // Word type index of each token.
  std::vector<std::size_t> token_types;
  // Unique words in order of first occurrence.
  std::vector<std::string> word_types;
  // Token positions of each word type, parallel to word_types.
  std::vector<std::vector<std::size_t>> occurrences;

  std::size_t size() const { return word_types.size(); }
  bool empty() const { return word_types.empty(); }

  const std::vector<std::size_t>& occurrences_of(std::string_view word) const {
    static const std::vector<std::size_t> kNone;
    for (std::size_t i = 0; i < word_types.size(); ++i) {
      if (word_types[i] == word) return occurrences[i];
    }
    return kNone;
  }
};

// Lowercases, strips punctuation and splits on white space. Empty input gives
// an empty featurization.
inline std::vector<std::string> clean_tokens(std::string_view lyrics) {
  std::vector<std::string> tokens;
  std::string current;
  std::size_t i = 0;
  while (i < lyrics.size()) {
    const char32_t cp = detail::decode_utf8(lyrics, i);
    if (detail::is_whitespace(cp)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (detail::is_punctuation(cp)) continue;
    detail::encode_utf8(detail::to_lower(cp), current);
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

inline TextFeaturization clean_and_tokenize(std::string_view lyrics) {
  TextFeaturization feat;
  feat.tokens = clean_tokens(lyrics);
  std::map<std::string, std::size_t, std::less<>> type_index;
  feat.token_types.reserve(feat.tokens.size());
  for (std::size_t pos = 0; pos < feat.tokens.size(); ++pos) {
    const auto& tok = feat.tokens[pos];
    auto [it, inserted] = type_index.emplace(tok, feat.word_types.size());
    if (inserted) {
      feat.word_types.push_back(tok);
      feat.occurrences.emplace_back();
    }
    feat.token_types.push_back(it->second);
    feat.occurrences[it->second].push_back(pos);
  }
  return feat;
}

// Removes every occurrence of each masked-out word type and joins the
// remaining tokens with single spaces.
inline std::string render_masked_lyrics(const TextFeaturization& feat, const BinaryMask& text_submask) {
  if (text_submask.size() != feat.word_types.size()) {
    throw ValidationError("text mask length " + std::to_string(text_submask.size()) +
                          " does not match " + std::to_string(feat.word_types.size()) +
                          " word types");
  }
  std::string out;
  for (std::size_t pos = 0; pos < feat.tokens.size(); ++pos) {
    if (!text_submask[feat.token_types[pos]]) continue;
    if (!out.empty()) out.push_back(' ');
    out += feat.tokens[pos];
  }
  return out;
}

inline std::string read_lyrics_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open lyrics file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mmlime::text
