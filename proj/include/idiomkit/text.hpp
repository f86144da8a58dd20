#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace idiomkit::text {

// ASCII-only case folding; bytes >= 0x80 pass through unchanged.
std::string to_lower(std::string_view s);

std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Letters, digits and every non-ASCII byte count as word characters, so
// UTF-8 encoded accented letters never break a word.
bool is_word_byte(unsigned char c);

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;
};

// First occurrence of the MWE's component words, in order, separated by
// single spaces, case-insensitive, bounded by non-word characters on both
// sides. No inflection handling.
std::optional<Span> find_mwe(std::string_view haystack, std::string_view mwe);

// "Night  Owl" -> "night_owl"
std::string normalize_form(std::string_view form);

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace idiomkit::text
