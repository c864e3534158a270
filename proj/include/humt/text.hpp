#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace humt::text {

/// Number of Unicode code points in a UTF-8 string. Invalid bytes count as one
/// character each.
std::size_t char_count(std::string_view utf8);

/// First `limit` code points of `utf8`; never splits a multi-byte sequence.
std::string truncate(std::string_view utf8, std::size_t limit);

/// Collapses whitespace runs to one ASCII space and trims both ends.
std::string normalize_whitespace(std::string_view s);

/// Lowercased word tokens: maximal runs of alphanumeric code points. ASCII
/// letters/digits are alphanumeric; non-ASCII code points are alphanumeric
/// unless they fall in a known punctuation, symbol or space block. Lowercasing
/// covers ASCII, Latin-1, Latin Extended-A, Greek and Cyrillic.
std::vector<std::string> tokenize(std::string_view utf8);

std::string to_lower(std::string_view utf8);

std::string trim(std::string_view s);

std::vector<std::string> split(std::string_view s, char sep);

}  // namespace humt::text
