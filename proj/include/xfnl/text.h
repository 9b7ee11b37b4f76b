// Copyright 2026 The XFNL Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef XFNL_TEXT_H_
#define XFNL_TEXT_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace xfnl {

// Strips leading and trailing ASCII whitespace.
std::string_view Trim(std::string_view s);

// Lowercases ASCII letters, trims, and collapses internal whitespace runs to a
// single space. Used for tag names and for documentation lookup keys.
std::string NormalizeSpacing(std::string_view s);

// Word tokenization shared by the test embedder and the Jaccard error
// analysis: ASCII-lowercase, every non-alphanumeric ASCII byte becomes a
// separator, split on separators. Non-ASCII bytes are kept inside words.
std::vector<std::string> TokenizeWords(std::string_view s);

// Whitespace split without any normalization.
std::vector<std::string> SplitWhitespace(std::string_view s);

std::string JoinWords(const std::vector<std::string>& words);

// Number of Unicode scalar values in a UTF-8 string, or nullopt when the
// input is not valid UTF-8.
std::optional<std::size_t> Utf8Length(std::string_view s);

// Byte offset of the code point with the given index. `index` may equal the
// code point length (end of string). Returns nullopt when out of range or on
// invalid UTF-8.
std::optional<std::size_t> Utf8ByteOffset(std::string_view s,
                                          std::size_t index);

// Non-overlapping occurrences of `needle` in `haystack`.
std::size_t CountOccurrences(std::string_view haystack,
                             std::string_view needle);

// Stable 64-bit FNV-1a hash; identical on every platform.
std::uint64_t Fnv1a64(std::string_view s);

// SplitMix64 finalizer, used to derive independent seeds.
std::uint64_t Mix64(std::uint64_t x);

// Uniform integer in [0, n) by rejection sampling on the raw engine output.
// Unlike std::uniform_int_distribution the result is fixed across standard
// library implementations. Requires n > 0.
std::uint64_t UniformBelow(std::mt19937_64& rng, std::uint64_t n);

}  // namespace xfnl

#endif  // XFNL_TEXT_H_
