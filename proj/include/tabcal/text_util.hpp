#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tabcal::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::vector<std::string> split_any(std::string_view s, std::string_view seps);
std::vector<std::string> split_whitespace(std::string_view s);

bool is_word_char(char c) noexcept;

/// Number of non-overlapping occurrences of `phrase` in `haystack` whose
/// neighbours are not word characters. Both arguments are expected lowercase.
std::size_t count_word_matches(std::string_view haystack, std::string_view phrase);
inline bool contains_word(std::string_view haystack, std::string_view phrase) {
    return count_word_matches(haystack, phrase) > 0;
}

/// Parses the whole string as a finite decimal number (no hex, inf or nan).
std::optional<double> parse_number(std::string_view s);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Number of UTF-8 code points; invalid bytes count as one each.
std::size_t utf8_length(std::string_view s);

/// Replaces every `{key}` in `tmpl` with the matching value.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, std::string>>& values);

}  // namespace tabcal::text
