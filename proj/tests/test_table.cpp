#include "appendix_blocks.hpp"
#include "support.hpp"
#include "tabcal/features.hpp"
#include "tabcal/table.hpp"

#include <doctest.h>

#include <cmath>

using namespace tabcal;

using namespace tabcal::testing::appendix;

TEST_CASE("appendix layouts are reproduced byte for byte") {
    const Table t = testing::alice_table();
    CHECK(serialize(t, SerializationFormat::Markdown) == kMarkdown);
    CHECK(serialize(t, SerializationFormat::Html) == kHtml);
    CHECK(serialize(t, SerializationFormat::Json) == kJson);
    CHECK(serialize(t, SerializationFormat::Csv) == kCsv);
}

TEST_CASE("format names") {
    for (auto f : kAllFormats) CHECK(parse_format_name(format_name(f)) == f);
    CHECK(parse_format_name("md") == SerializationFormat::Markdown);
    CHECK_FALSE(parse_format_name("xml").has_value());
}

TEST_CASE("empty body csv") {
    Table t;
    t.columns = {"A"};
    CHECK(serialize(t, SerializationFormat::Csv) == "A\n");
    CHECK(parse_table("A\n", SerializationFormat::Csv).columns == t.columns);
}

TEST_CASE("csv quoting") {
    Table t;
    t.columns = {"k", "v"};
    t.rows = {{"a,b", "say \"hi\""}};
    const auto text = serialize(t, SerializationFormat::Csv);
    CHECK(text == "k,v\n\"a,b\",\"say \"\"hi\"\"\"\n");
    const Table back = parse_table(text, SerializationFormat::Csv);
    CHECK(back.rows == t.rows);
}

TEST_CASE("ragged and malformed input is rejected") {
    CHECK_THROWS_AS(parse_table("a,b,c\n1,2\n", SerializationFormat::Csv), ParseError);
    CHECK_THROWS_AS(parse_table("a,b\n\"open,2\n", SerializationFormat::Csv), ParseError);
    CHECK_THROWS_AS(parse_table("| a | b |\n| --- | --- |\n| 1 |\n", SerializationFormat::Markdown),
                    ParseError);
    CHECK_THROWS_AS(parse_table("[{\"a\": \"1\"}, {\"b\": \"2\"}]", SerializationFormat::Json),
                    ParseError);
    CHECK_THROWS_AS(parse_table("<table><tr><th>a</th></tr><tr><td>1</td><td>2</td></tr></table>",
                                SerializationFormat::Html),
                    ParseError);
    try {
        parse_table("a,b\n1,2\n3\n", SerializationFormat::Csv);
        FAIL("expected error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("appendix blocks parse back to the same grid") {
    const Table t = testing::alice_table();
    CHECK(parse_table(kMarkdown, SerializationFormat::Markdown).rows == t.rows);
    CHECK(parse_table(kHtml, SerializationFormat::Html).rows == t.rows);
    CHECK(parse_table(kJson, SerializationFormat::Json).rows == t.rows);
    CHECK(parse_table(kCsv, SerializationFormat::Csv).columns == t.columns);
}

TEST_CASE("property: serialization round-trips and is deterministic") {
    Rng rng(7);
    for (int trial = 0; trial < 400; ++trial) {
        const Table t = testing::random_table(rng);
        for (auto f : kAllFormats) {
            if (f == SerializationFormat::Json && t.rows.empty()) continue;
            const std::string text = serialize(t, f);
            CAPTURE(text);
            CHECK(serialize(t, f) == text);
            Table back;
            REQUIRE_NOTHROW(back = parse_table(text, f));
            CHECK(back.columns == t.columns);
            CHECK(back.rows == t.rows);
        }
    }
}

TEST_CASE("validate") {
    Table t;
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    t.columns = {"a", " "};
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    t.columns = {"a", "b"};
    t.rows = {{"1"}};
    CHECK_THROWS_AS(validate(t), std::invalid_argument);
    CHECK_THROWS_AS(serialize(t, SerializationFormat::Csv), std::invalid_argument);
}

TEST_CASE("structural features") {
    Table one;
    one.columns = {"c"};
    one.rows = {{"v"}};
    auto f = extract_features(one, "x");
    CHECK(f.log_rows == 0.0);
    CHECK(f.log_cols == 0.0);
    CHECK(f.question_word_count == 1);
    CHECK(f.op_keyword_count == 0);

    Table text3;
    text3.columns = {"a", "b", "c"};
    text3.rows = {{"x", "y", "z"}, {"p", "q", "r"}, {"s", "t", "u"}};
    f = extract_features(text3, "How many people are older than 30?");
    CHECK(f.log_rows == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    CHECK(f.frac_text == 1.0);
    CHECK(f.question_word_count == 7);  // whitespace tokens
    CHECK(f.op_keyword_count == 1);

    f = extract_features(testing::alice_table(), "Who lives in Chicago?");
    CHECK(f.frac_numeric == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(f.frac_text == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    Table empty;
    empty.columns = {"a"};
    CHECK(extract_features(empty, "q").log_rows == 0.0);
}

TEST_CASE("cell typing") {
    CHECK(classify_cell("1,234") == ColumnType::Numeric);
    CHECK(classify_cell("$5") == ColumnType::Numeric);
    CHECK(classify_cell("12%") == ColumnType::Numeric);
    CHECK(classify_cell("2004-05-17") == ColumnType::Date);
    CHECK(classify_cell("17 May 2004") == ColumnType::Date);
    CHECK(classify_cell("May 17, 2004") == ColumnType::Date);
    CHECK(classify_cell("Yes") == ColumnType::Boolean);
    CHECK(classify_cell("false") == ColumnType::Boolean);
    CHECK(classify_cell("Paris") == ColumnType::Text);
    // A bare year parses as a number first.
    CHECK(classify_cell("1999") == ColumnType::Numeric);
    CHECK(is_date_like("1999"));
}

TEST_CASE("column majority vote with ties to the earlier type") {
    Table t;
    t.columns = {"mix", "blank"};
    t.rows = {{"1", ""}, {"yes", ""}, {"abc", ""}, {"2", ""}, {"no", ""}};
    CHECK(infer_column_type(t, 0) == ColumnType::Numeric);
    CHECK(infer_column_type(t, 1) == ColumnType::Text);
}

TEST_CASE("property: feature fractions sum to one") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
        const Table t = testing::random_table(rng);
        const auto f = extract_features(t, "what is the total?");
        CHECK(f.frac_numeric + f.frac_date + f.frac_boolean + f.frac_text ==
              doctest::Approx(1.0).epsilon(1e-9));
        for (double v : f.to_array()) CHECK(std::isfinite(v));
        CHECK(StructuralFeatures::from_array(f.to_array()) == f);
    }
}

TEST_CASE("operation keywords use word boundaries") {
    CHECK(count_operation_keywords("What is the sum of the summary?") == 1);
    CHECK(count_operation_keywords("How many more after the first?") == 4);
    CHECK(count_operation_keywords("") == 0);
}

TEST_CASE("question types") {
    CHECK(classify_question_type("How many medals did Italy win?") == QuestionType::CountSum);
    CHECK(classify_question_type("Which year came first, 1990 or 1995?") == QuestionType::Temporal);
    CHECK(classify_question_type("zzz") == QuestionType::Other);
    CHECK(classify_question_type("Who scored the most goals?") == QuestionType::Superlative);
    CHECK(classify_question_type("Did Bob score more than Ann?") == QuestionType::Comparison);
    CHECK(classify_question_type("Who won?") == QuestionType::Lookup);
}
