#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hazeval {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
bool contains_ci(std::string_view haystack, std::string_view needle);

// Splits on '\n', dropping a trailing '\r' from each line.
std::vector<std::string> split_lines(std::string_view s);

// Lowercased alphanumeric runs; the unit every mock model and the
// term-frequency embedder operate on.
std::vector<std::string> word_tokens(std::string_view s);

// Collapses runs of whitespace to one space and trims.
std::string normalize_space(std::string_view s);

std::string join(std::span<const std::string> parts, std::string_view sep);

// 64-bit FNV-1a; stable across platforms, used for mock determinism.
std::uint64_t fnv1a(std::string_view s, std::uint64_t seed = 0);

// Replaces every occurrence of `from` with `to`.
std::string replace_all(std::string s, std::string_view from, std::string_view to);

}  // namespace hazeval
