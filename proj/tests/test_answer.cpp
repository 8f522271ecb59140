#include "tabcal/answer.hpp"
#include "tabcal/rng.hpp"

#include <doctest.h>

using namespace tabcal;

TEST_CASE("normalize examples") {
    auto n = normalize("$1,000");
    CHECK(n.kind == AnswerKind::Numeric);
    CHECK(n.numeric_value == 1000.0);
    CHECK(n.canonical == "1000");

    n = normalize("YES");
    CHECK(n.kind == AnswerKind::Boolean);
    CHECK(n.canonical == "true");
    CHECK(normalize("Refuted").canonical == "false");

    n = normalize("  Chicago. ");
    CHECK(n.kind == AnswerKind::Text);
    CHECK(n.canonical == "chicago");

    CHECK(normalize("").canonical.empty());
    CHECK(normalize("3.14159").canonical == "3.1416");
    CHECK(normalize("-2.50").canonical == "-2.5");
    CHECK(normalize("(12)").canonical == "12");
    CHECK(normalize("45%").canonical == "45");
}

TEST_CASE("match examples") {
    auto m = match_answer("37 women competed", "37");
    CHECK(m.correct);
    CHECK(m.match_type == MatchType::FuzzyNumeric);

    m = match_answer("Kazakhstan had the most gold medals", "Kazakhstan");
    CHECK(m.correct);
    CHECK(m.match_type == MatchType::Containment);

    m = match_answer("$1,000", "1000");
    CHECK(m.match_type == MatchType::Numeric);

    m = match_answer("1005", "1000");
    CHECK(m.match_type == MatchType::Numeric);
    CHECK(match_answer("1011", "1000").match_type == MatchType::None);

    CHECK(match_answer_strict("37 women competed", "37").match_type == MatchType::None);
    CHECK(match_answer_strict("abc", "abc").match_type == MatchType::Exact);
    CHECK(match_answer_strict("1000.00", "1000").match_type == MatchType::Numeric);
}

TEST_CASE("zero gold uses an absolute tolerance") {
    CHECK(numbers_match(0.0, 0.0));
    CHECK_FALSE(numbers_match(1e-6, 0.0));
    CHECK(match_answer("0", "0").correct);
}

TEST_CASE("gold lists compare as multisets") {
    const GoldAnswer gold = parse_gold("a|b");
    REQUIRE(gold.size() == 2);
    CHECK(match_answer("B, a", gold).match_type == MatchType::Exact);
    CHECK(match_answer("a; b", gold).correct);
    CHECK_FALSE(match_answer("a", gold).correct);
    CHECK_FALSE(match_answer("a, a", gold).correct);
    CHECK(parse_gold("x").size() == 1);
}

TEST_CASE("number extraction") {
    CHECK(extract_first_number("30-40") == 30.0);
    CHECK(extract_first_number("about 1,234.5 units") == 1234.5);
    CHECK(extract_first_number("no digits") == std::nullopt);
    CHECK(extract_first_number("-7 degrees") == -7.0);
}

TEST_CASE("containment needs a short gold and a whole word") {
    CHECK_FALSE(match_answer("Kazakhstani athletes", "Kazakhstan").correct);
    const std::string long_gold(31, 'x');
    CHECK_FALSE(match_answer("the " + long_gold + " one", long_gold).correct);
}

namespace {

std::string random_answer(Rng& rng) {
    static const std::vector<std::string> atoms = {
        "37", " ", "women", "$", "1,000", ".", "Paris", "-", "yes", "NO", "0.5", "%", "(", ")",
        "x", "3", "entailed", ",", "!", "1e3", "abc"};
    std::string s;
    const auto k = 1 + rng.below(4);
    for (std::uint64_t i = 0; i < k; ++i) s += atoms[rng.below(atoms.size())];
    return s;
}

std::string shout(std::string s) {
    for (char& c : s) {
        if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
    }
    return s;
}

}  // namespace

TEST_CASE("property: normalization and matching invariants") {
    Rng rng(3);
    for (int i = 0; i < 3000; ++i) {
        const std::string a = random_answer(rng);
        const std::string b = random_answer(rng);
        CAPTURE(a);
        CAPTURE(b);
        const auto na = normalize(a);
        CHECK(normalize(na.canonical).canonical == na.canonical);
        if (na.kind == AnswerKind::Numeric) CHECK(na.numeric_value.has_value());

        if (!na.canonical.empty()) {
            const auto self = match_answer(a, a);
            CHECK(self.correct);
            CHECK(self.match_type == MatchType::Exact);
        }
        const auto fuzzy = match_answer(a, b);
        CHECK(fuzzy.correct == (fuzzy.match_type != MatchType::None));
        if (match_answer_strict(a, b).correct) CHECK(fuzzy.correct);
        const auto padded = match_answer("  " + shout(a) + "\t", " " + shout(b));
        CHECK(padded.match_type == fuzzy.match_type);
    }
}
