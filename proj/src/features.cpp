#include "tabcal/features.hpp"
#include "tabcal/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>

namespace tabcal {
namespace {

bool all_digits(std::string_view s, std::size_t min_len, std::size_t max_len) {
    return s.size() >= min_len && s.size() <= max_len &&
           std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
}

bool is_month_name(std::string_view word) {
    static constexpr std::array<std::string_view, 12> full = {
        "january", "february", "march",     "april",   "may",      "june",
        "july",    "august",   "september", "october", "november", "december"};
    std::string w = text::to_lower(word);
    if (!w.empty() && w.back() == '.') w.pop_back();
    for (auto m : full) {
        if (w == m || w == m.substr(0, 3)) return true;
    }
    return w == "sept";
}

bool is_day(std::string_view s) {
    if (!all_digits(s, 1, 2)) return false;
    const int d = std::stoi(std::string(s));
    return d >= 1 && d <= 31;
}

bool is_year(std::string_view s) { return all_digits(s, 4, 4); }

}  // namespace

bool is_date_like(std::string_view cell) {
    const std::string_view s = text::trim(cell);
    if (is_year(s)) return true;
    // YYYY-MM-DD
    if (s.size() == 10 && s[4] == '-' && s[7] == '-' && is_year(s.substr(0, 4)) &&
        all_digits(s.substr(5, 2), 2, 2) && all_digits(s.substr(8, 2), 2, 2)) {
        const int month = std::stoi(std::string(s.substr(5, 2)));
        const int day = std::stoi(std::string(s.substr(8, 2)));
        return month >= 1 && month <= 12 && day >= 1 && day <= 31;
    }
    const auto words = text::split_whitespace(s);
    if (words.size() != 3) return false;
    // DD Month YYYY
    if (is_day(words[0]) && is_month_name(words[1]) && is_year(words[2])) return true;
    // Month DD, YYYY
    std::string_view day = words[1];
    if (!day.empty() && day.back() == ',') day.remove_suffix(1);
    return is_month_name(words[0]) && is_day(day) && is_year(words[2]);
}

ColumnType classify_cell(std::string_view cell) {
    const std::string_view trimmed = text::trim(cell);
    std::string stripped;
    for (char c : trimmed) {
        if (c != ',' && c != '$' && c != '%') stripped += c;
    }
    if (text::parse_number(text::trim(stripped))) return ColumnType::Numeric;
    if (is_date_like(trimmed)) return ColumnType::Date;
    const std::string lower = text::to_lower(trimmed);
    if (lower == "yes" || lower == "no" || lower == "true" || lower == "false") {
        return ColumnType::Boolean;
    }
    return ColumnType::Text;
}

ColumnType infer_column_type(const Table& table, std::size_t column) {
    std::array<std::size_t, 4> votes{};
    for (const auto& row : table.rows) {
        const std::string& cell = row.at(column);
        if (text::trim(cell).empty()) continue;
        ++votes[static_cast<std::size_t>(classify_cell(cell))];
    }
    if (votes[0] + votes[1] + votes[2] + votes[3] == 0) return ColumnType::Text;
    const auto best = std::max_element(votes.begin(), votes.end());  // first maximum wins ties
    return static_cast<ColumnType>(best - votes.begin());
}

StructuralFeatures StructuralFeatures::from_array(std::span<const double> v) {
    if (v.size() != kNumStructuralFeatures) {
        throw std::invalid_argument("structural feature vector must have 8 entries");
    }
    StructuralFeatures f;
    f.log_rows = v[0];
    f.log_cols = v[1];
    f.frac_numeric = v[2];
    f.frac_date = v[3];
    f.frac_boolean = v[4];
    f.frac_text = v[5];
    f.question_word_count = static_cast<int>(std::lround(v[6]));
    f.op_keyword_count = static_cast<int>(std::lround(v[7]));
    return f;
}

int count_question_words(std::string_view question) {
    return static_cast<int>(text::split_whitespace(question).size());
}

int count_operation_keywords(std::string_view question) {
    const std::string lower = text::to_lower(question);
    std::size_t n = 0;
    for (auto kw : kOperationKeywords) n += text::count_word_matches(lower, kw);
    return static_cast<int>(n);
}

StructuralFeatures extract_features(const Table& table, std::string_view question) {
    validate(table);
    StructuralFeatures f;
    f.log_rows = std::log(static_cast<double>(std::max<std::size_t>(table.num_rows(), 1)));
    f.log_cols = std::log(static_cast<double>(table.num_columns()));
    std::array<std::size_t, 4> counts{};
    for (std::size_t c = 0; c < table.num_columns(); ++c) {
        ++counts[static_cast<std::size_t>(infer_column_type(table, c))];
    }
    const double ncols = static_cast<double>(table.num_columns());
    f.frac_numeric = static_cast<double>(counts[0]) / ncols;
    f.frac_date = static_cast<double>(counts[1]) / ncols;
    f.frac_boolean = static_cast<double>(counts[2]) / ncols;
    f.frac_text = static_cast<double>(counts[3]) / ncols;
    f.question_word_count = count_question_words(question);
    f.op_keyword_count = count_operation_keywords(question);
    return f;
}

std::string_view question_type_name(QuestionType type) noexcept {
    switch (type) {
        case QuestionType::Temporal: return "temporal";
        case QuestionType::Superlative: return "superlative";
        case QuestionType::CountSum: return "count_sum";
        case QuestionType::Lookup: return "lookup";
        case QuestionType::Comparison: return "comparison";
        case QuestionType::Other: return "other";
    }
    return "other";
}

QuestionType classify_question_type(std::string_view question) {
    static constexpr std::array<std::string_view, 7> temporal = {
        "year", "date", "when", "before", "after", "first year", "last year"};
    static constexpr std::array<std::string_view, 8> superlative = {
        "most", "least", "highest", "lowest", "largest", "smallest", "best", "worst"};
    static constexpr std::array<std::string_view, 5> count_sum = {
        "how many", "total", "sum", "count", "number of"};
    static constexpr std::array<std::string_view, 5> comparison = {
        "more than", "less than", "compare", "versus", "vs"};
    static constexpr std::array<std::string_view, 4> wh_words = {"which", "what", "who", "where"};

    const std::string lower = text::to_lower(question);
    const auto any = [&](auto const& words) {
        return std::any_of(words.begin(), words.end(),
                           [&](std::string_view w) { return text::contains_word(lower, w); });
    };
    if (any(temporal)) return QuestionType::Temporal;
    if (any(superlative)) return QuestionType::Superlative;
    if (any(count_sum)) return QuestionType::CountSum;
    if (any(comparison)) return QuestionType::Comparison;
    if (any(wh_words)) return QuestionType::Lookup;
    return QuestionType::Other;
}

}  // namespace tabcal
