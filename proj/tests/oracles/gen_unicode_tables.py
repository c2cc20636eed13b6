#!/usr/bin/env python3
# Copyright 2026 The mmlime Authors.
# SPDX-License-Identifier: Apache-2.0
"""Regenerates include/mmlime/detail/unicode_tables.hpp from Python's unicodedata."""
import sys
import unicodedata

LICENSE = """/*
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
 */"""

def ranges(pred):
    out, start = [], None
    for cp in range(0x110000):
        ok = pred(cp)
        if ok and start is None:
            start = cp
        elif not ok and start is not None:
            out.append((start, cp - 1))
            start = None
    if start is not None:
        out.append((start, 0x10FFFF))
    return out

def is_punct(cp):
    return unicodedata.category(chr(cp)).startswith("P")

lower = []
for cp in range(0x110000):
    ch = chr(cp)
    if unicodedata.category(ch) in ("Cs",):
        continue
    lo = ch.lower()
    if lo != ch:
        lower.append((cp, ord(lo[0])))

p = ranges(is_punct)
w = sys.stdout
w.write(LICENSE + "\n\n")
w.write("// Generated by tests/oracles/gen_unicode_tables.py (Unicode %s). Do not edit.\n\n" % unicodedata.unidata_version)
w.write("#pragma once\n\n#include <array>\n#include <cstdint>\n\nnamespace mmlime::detail {\n\n")
w.write("struct CodepointRange {\n  char32_t first;\n  char32_t last;\n};\n\n")
w.write("struct CodepointMapping {\n  char32_t from;\n  char32_t to;\n};\n\n")
w.write("// General category P* (Pc, Pd, Ps, Pe, Pi, Pf, Po).\n")
w.write("inline constexpr std::array<CodepointRange, %d> kPunctuationRanges{{\n" % len(p))
for a, b in p:
    w.write("    {0x%04X, 0x%04X},\n" % (a, b))
w.write("}};\n\n")
w.write("// Single-codepoint lowercase mappings, sorted by source codepoint.\n")
w.write("inline constexpr std::array<CodepointMapping, %d> kLowercaseMap{{\n" % len(lower))
for a, b in lower:
    w.write("    {0x%04X, 0x%04X},\n" % (a, b))
w.write("}};\n\n}  // namespace mmlime::detail\n")
