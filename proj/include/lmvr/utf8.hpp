#ifndef LMVR_UTF8_HPP
#define LMVR_UTF8_HPP

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lmvr::utf8 {

/// Returns the byte offset of the first invalid sequence, or nullopt when
/// `text` is well-formed UTF-8 (no overlongs, no surrogates, <= U+10FFFF).
std::optional<std::size_t> find_invalid(std::string_view text);

inline bool is_valid(std::string_view text) { return !find_invalid(text); }

/// Byte offsets of every code point start, plus text.size() as a sentinel.
/// Assumes valid UTF-8. The result has char_count(text) + 1 entries.
std::vector<std::size_t> char_offsets(std::string_view text);

/// Splits valid UTF-8 into one string per code point.
std::vector<std::string> split_chars(std::string_view text);

std::size_t char_count(std::string_view text);

/// Appends the UTF-8 encoding of `cp` (must be a valid scalar value).
void append_code_point(std::string& out, char32_t cp);

}  // namespace lmvr::utf8

#endif  // LMVR_UTF8_HPP
