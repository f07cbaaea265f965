#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace citenav {

/// Splits UTF-8 text into maximal runs of alphanumeric characters.
///
/// ASCII letters and digits are word characters. Non-ASCII code points are
/// word characters unless they fall in a punctuation/symbol block (Latin-1
/// punctuation, General Punctuation, CJK punctuation, ...). When `lowercase`
/// is set, ASCII and Latin-1 capitals are folded.
std::vector<std::string> split_words(std::string_view text, bool lowercase);

/// Number of UTF-8 code points in `text` (invalid bytes count as one each).
std::size_t utf8_length(std::string_view text);

/// 64-bit FNV-1a; used for fingerprints and per-query seeds.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);

std::string to_hex(std::uint64_t value);

/// Unbiased integer in [0, bound) from a 64-bit engine. Unlike
/// std::uniform_int_distribution, the sequence is identical across standard
/// library implementations.
template <typename Engine>
std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x = engine();
  while (x >= limit) x = engine();
  return x % bound;
}

}  // namespace citenav
