#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tabcal {

enum class AnswerKind { Numeric, Boolean, Text };

struct NormalizedAnswer {
    std::string canonical;
    std::optional<double> numeric_value;
    AnswerKind kind = AnswerKind::Text;
};

/// Lowercase, trim, drop ',' '$' '%', strip edge punctuation, then type the
/// result. Numbers are rounded to 4 decimals and rendered without trailing zeros.
NormalizedAnswer normalize(std::string_view text);

enum class MatchType { Exact, Numeric, FuzzyNumeric, Containment, None };

std::string_view match_type_name(MatchType type) noexcept;
std::optional<MatchType> parse_match_type(std::string_view name);

struct MatchResult {
    bool correct = false;
    MatchType match_type = MatchType::None;
};

using GoldAnswer = std::vector<std::string>;

/// Splits a dataset gold string on '|'.
GoldAnswer parse_gold(std::string_view gold);

inline constexpr double kNumericRelativeTolerance = 0.01;
inline constexpr double kZeroGoldAbsoluteTolerance = 1e-9;
inline constexpr std::size_t kContainmentMaxGoldLength = 30;

bool numbers_match(double predicted, double gold) noexcept;

/// First signed decimal (thousands separators allowed) in free text.
std::optional<double> extract_first_number(std::string_view text);

/// Strict, then fuzzy-numeric, then word-boundary containment.
MatchResult match_answer(std::string_view predicted, const GoldAnswer& gold);
MatchResult match_answer(std::string_view predicted, std::string_view gold);

/// Type-aware strict stage only.
MatchResult match_answer_strict(std::string_view predicted, const GoldAnswer& gold);
MatchResult match_answer_strict(std::string_view predicted, std::string_view gold);

}  // namespace tabcal
