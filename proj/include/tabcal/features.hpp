#pragma once

#include "tabcal/table.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

namespace tabcal {

enum class ColumnType { Numeric, Date, Boolean, Text };

/// Type of a single cell: numeric parse, then date pattern, then yes/no/true/false.
ColumnType classify_cell(std::string_view cell);

/// Majority vote over the column's non-empty cells. Ties go to the earlier
/// member of Numeric, Date, Boolean, Text; an all-empty column is Text.
ColumnType infer_column_type(const Table& table, std::size_t column);

bool is_date_like(std::string_view cell);

inline constexpr std::size_t kNumStructuralFeatures = 8;

struct StructuralFeatures {
    double log_rows = 0.0;
    double log_cols = 0.0;
    double frac_numeric = 0.0;
    double frac_date = 0.0;
    double frac_boolean = 0.0;
    double frac_text = 0.0;
    int question_word_count = 0;
    int op_keyword_count = 0;

    std::array<double, kNumStructuralFeatures> to_array() const noexcept {
        return {log_rows,  log_cols,  frac_numeric, frac_date, frac_boolean,
                frac_text, static_cast<double>(question_word_count),
                static_cast<double>(op_keyword_count)};
    }
    static StructuralFeatures from_array(std::span<const double> values);

    friend bool operator==(const StructuralFeatures&, const StructuralFeatures&) = default;
};

inline constexpr std::array<std::string_view, kNumStructuralFeatures> kFeatureNames = {
    "log_rows",  "log_cols",  "frac_numeric",        "frac_date",
    "frac_boolean", "frac_text", "question_word_count", "op_keyword_count"};

/// The fixed aggregation/comparison vocabulary counted by op_keyword_count.
inline constexpr std::array<std::string_view, 19> kOperationKeywords = {
    "sum",     "total",    "average", "mean",   "count",  "how many", "most",
    "least",   "highest",  "lowest",  "largest", "smallest", "first",  "last",
    "before",  "after",    "difference", "more", "fewer"};

int count_question_words(std::string_view question);
int count_operation_keywords(std::string_view question);

StructuralFeatures extract_features(const Table& table, std::string_view question);

enum class QuestionType { Temporal, Superlative, CountSum, Lookup, Comparison, Other };

std::string_view question_type_name(QuestionType type) noexcept;

/// Keyword classification with priority
/// Temporal > Superlative > CountSum > Comparison > Lookup > Other.
QuestionType classify_question_type(std::string_view question);

}  // namespace tabcal
