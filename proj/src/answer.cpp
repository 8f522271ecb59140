#include "tabcal/answer.hpp"
#include "tabcal/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <regex>

namespace tabcal {
namespace {

bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }

std::string render_rounded(double v) {
    char buf[512];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    std::string s(buf);
    if (s.find('.') != std::string::npos) {
        while (s.back() == '0') s.pop_back();
        if (s.back() == '.') s.pop_back();
    }
    if (s == "-0") s = "0";
    return s;
}

std::string surface(std::string_view s) { return text::to_lower(text::trim(s)); }

MatchResult matched(MatchType t) { return {true, t}; }

MatchResult strict_single(std::string_view predicted, std::string_view gold,
                          const NormalizedAnswer& np, const NormalizedAnswer& ng) {
    const std::string sg = surface(gold);
    if (!sg.empty() && surface(predicted) == sg) return matched(MatchType::Exact);
    if (np.kind == AnswerKind::Numeric && ng.kind == AnswerKind::Numeric) {
        if (numbers_match(*np.numeric_value, *ng.numeric_value)) return matched(MatchType::Numeric);
        return {};
    }
    if (!ng.canonical.empty() && np.canonical == ng.canonical) return matched(MatchType::Exact);
    return {};
}

MatchResult strict_list(std::string_view predicted, const GoldAnswer& gold) {
    std::vector<std::string> want;
    for (const auto& g : gold) want.push_back(normalize(g).canonical);
    std::vector<std::string> got;
    for (const auto& p : text::split_any(predicted, ",;")) got.push_back(normalize(p).canonical);
    std::sort(want.begin(), want.end());
    std::sort(got.begin(), got.end());
    if (want == got) return matched(MatchType::Exact);
    return {};
}

}  // namespace

NormalizedAnswer normalize(std::string_view input) {
    std::string s = text::to_lower(input);
    s = std::string(text::trim(s));
    std::erase_if(s, [](char c) { return c == ',' || c == '$' || c == '%'; });
    for (;;) {
        const std::size_t before = s.size();
        s = std::string(text::trim(s));
        while (!s.empty() && is_punct(s.back())) s.pop_back();
        // Keep a leading sign or decimal point that belongs to a number.
        while (!s.empty() && is_punct(s.front()) && !text::parse_number(s)) s.erase(0, 1);
        if (s.size() == before) break;
    }

    NormalizedAnswer out;
    if (const auto v = text::parse_number(s)) {
        double rounded = *v;
        if (std::fabs(rounded) < 1e15) rounded = std::round(rounded * 1e4) / 1e4;
        if (rounded == 0.0) rounded = 0.0;  // drop negative zero
        out.kind = AnswerKind::Numeric;
        out.numeric_value = rounded;
        out.canonical = render_rounded(rounded);
        return out;
    }
    if (s == "yes" || s == "true" || s == "entailed") {
        out.kind = AnswerKind::Boolean;
        out.canonical = "true";
        return out;
    }
    if (s == "no" || s == "false" || s == "refuted") {
        out.kind = AnswerKind::Boolean;
        out.canonical = "false";
        return out;
    }
    out.canonical = std::move(s);
    return out;
}

std::string_view match_type_name(MatchType type) noexcept {
    switch (type) {
        case MatchType::Exact: return "exact";
        case MatchType::Numeric: return "numeric";
        case MatchType::FuzzyNumeric: return "fuzzy_numeric";
        case MatchType::Containment: return "containment";
        case MatchType::None: return "none";
    }
    return "none";
}

std::optional<MatchType> parse_match_type(std::string_view name) {
    for (auto t : {MatchType::Exact, MatchType::Numeric, MatchType::FuzzyNumeric,
                   MatchType::Containment, MatchType::None}) {
        if (match_type_name(t) == name) return t;
    }
    return std::nullopt;
}

GoldAnswer parse_gold(std::string_view gold) { return text::split(gold, '|'); }

bool numbers_match(double predicted, double gold) noexcept {
    if (gold == 0.0) return std::fabs(predicted) <= kZeroGoldAbsoluteTolerance;
    return std::fabs(predicted - gold) / std::max(std::fabs(gold), 1e-12) <=
           kNumericRelativeTolerance;
}

std::optional<double> extract_first_number(std::string_view input) {
    static const std::regex number(R"([-+]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d+)?|[-+]?\.\d+)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(input.begin(), input.end(), m, number)) return std::nullopt;
    std::string digits = m.str();
    std::erase(digits, ',');
    return text::parse_number(digits);
}

MatchResult match_answer_strict(std::string_view predicted, const GoldAnswer& gold) {
    if (gold.empty()) return {};
    if (gold.size() > 1) return strict_list(predicted, gold);
    return strict_single(predicted, gold.front(), normalize(predicted), normalize(gold.front()));
}

MatchResult match_answer_strict(std::string_view predicted, std::string_view gold) {
    return match_answer_strict(predicted, parse_gold(gold));
}

MatchResult match_answer(std::string_view predicted, const GoldAnswer& gold) {
    if (gold.empty()) return {};
    if (gold.size() > 1) return strict_list(predicted, gold);

    const NormalizedAnswer np = normalize(predicted);
    const NormalizedAnswer ng = normalize(gold.front());
    if (const auto strict = strict_single(predicted, gold.front(), np, ng); strict.correct) {
        return strict;
    }
    if (ng.kind == AnswerKind::Numeric && np.kind != AnswerKind::Numeric) {
        if (const auto v = extract_first_number(predicted); v && numbers_match(*v, *ng.numeric_value)) {
            return matched(MatchType::FuzzyNumeric);
        }
    }
    if (!ng.canonical.empty() && ng.canonical.size() < kContainmentMaxGoldLength &&
        text::contains_word(np.canonical, ng.canonical)) {
        return matched(MatchType::Containment);
    }
    return {};
}

MatchResult match_answer(std::string_view predicted, std::string_view gold) {
    return match_answer(predicted, parse_gold(gold));
}

}  // namespace tabcal
