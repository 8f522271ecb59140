#include "support.hpp"
#include "tabcal/ensembles.hpp"

#include <doctest.h>

#include <cmath>

using namespace tabcal;

namespace {

ElicitationRecord rec(Method m, const std::string& id, const std::string& answer, double c) {
    ElicitationRecord r;
    r.method = m;
    r.question_id = id;
    r.answer = answer;
    r.confidence = c;
    return r;
}

// Two confidence signals that each see a different half of the errors.
std::vector<EnsembleRow> complementary_rows(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<EnsembleRow> rows;
    for (std::size_t i = 0; i < n; ++i) {
        const bool correct = rng.bernoulli(0.6);
        const bool kind_a = rng.bernoulli(0.5);
        double a = 0.7 + 0.25 * rng.uniform();
        double b = 0.7 + 0.25 * rng.uniform();
        if (!correct) (kind_a ? a : b) -= 0.5;
        rows.push_back({"q" + std::to_string(i), {a, b, rng.uniform()}, correct});
    }
    return rows;
}

}  // namespace

TEST_CASE("combine") {
    const std::vector<ElicitationRecord> two = {rec(Method::PTrue, "q", "y", 0.6), rec(Method::MFA, "q", "x", 0.8)};
    EnsembleSpec spec{{Method::MFA, Method::PTrue}, {1.0, 0.0}};
    auto c = combine(two, spec);
    CHECK(c.confidence == 0.8);
    CHECK(c.answer == "x");
    spec.weights = {0.5, 0.5};
    CHECK(combine(two, spec).confidence == doctest::Approx(0.7).epsilon(1e-15));
    spec.answer_source = 1;
    CHECK(combine(two, spec).answer == "y");

    const std::vector<ElicitationRecord> three = {rec(Method::MFA, "q", "a", 0.75), rec(Method::SelfConsistency, "q", "a", 0.6),
                                                  rec(Method::SemanticEntropy, "q", "a", 0.2)};
    const EnsembleSpec tri{{Method::MFA, Method::SelfConsistency, Method::SemanticEntropy}, {0.5, 0.4, 0.1}};
    CHECK(combine(three, tri).confidence == doctest::Approx(0.375 + 0.24 + 0.02).epsilon(1e-15));
    CHECK(tri.label() == "mfa+self_consistency+semantic_entropy");

    CHECK_THROWS_AS(combine(std::span(three).first(2), tri), std::invalid_argument);
    auto other = three;
    other[1].question_id = "z";
    CHECK_THROWS_AS(combine(other, tri), std::invalid_argument);
    CHECK_THROWS_AS((EnsembleSpec{{Method::MFA, Method::PTrue}, {0.6, 0.6}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((EnsembleSpec{{Method::MFA, Method::PTrue}, {0.5, 0.5}, 0.3}.validate()), std::invalid_argument);
}

TEST_CASE("property: combine is affine and stays in [0,1]") {
    Rng rng(5);
    for (int t = 0; t < 300; ++t) {
        const double c1 = rng.uniform(), c2 = rng.uniform(), c3 = rng.uniform();
        const auto i1 = static_cast<int>(rng.below(21));
        const auto i2 = static_cast<int>(rng.below(21 - i1));
        const double w1 = i1 / 20.0, w2 = i2 / 20.0;
        const EnsembleSpec s{{Method::MFA, Method::PTrue, Method::Verbalized}, {w1, w2, (20 - i1 - i2) / 20.0}};
        const std::vector<ElicitationRecord> rs = {rec(Method::Verbalized, "q", "", c3), rec(Method::MFA, "q", "", c1),
                                                   rec(Method::PTrue, "q", "", c2)};
        const double got = combine(rs, s).confidence;
        CHECK(got == doctest::Approx(w1 * c1 + w2 * c2 + (1 - w1 - w2) * c3).epsilon(1e-12));
        CHECK(got >= 0.0);
        CHECK(got <= 1.0 + 1e-15);
    }
}

TEST_CASE("fit_weights grid and tie-breaks") {
    Rng rng(11);
    std::vector<EnsembleRow> mirror;
    for (int i = 0; i < 300; ++i) {
        const double c1 = rng.uniform();
        mirror.push_back({"q" + std::to_string(i), {c1, 1.0 - c1}, rng.bernoulli(c1)});
    }
    auto fit = fit_weights(mirror, {Method::MFA, Method::PTrue});
    CHECK(fit.spec.weights[0] == 1.0);
    CHECK(fit.evaluated == 21);
    // Grid oracle: the fitted objective is the best over every weight.
    double best = -1.0;
    for (int i = 0; i <= 20; ++i) {
        const std::vector<double> w = {i / 20.0, 1.0 - i / 20.0};
        best = std::max(best, auroc(ensemble_predictions(mirror, w)));
    }
    CHECK(fit.objective == best);

    std::vector<EnsembleRow> same;
    for (const auto& r : mirror) same.push_back({r.question_id, {r.confidences[0], r.confidences[0]}, r.correct});
    fit = fit_weights(same, {Method::MFA, Method::SelfConsistency});
    CHECK(fit.spec.weights == std::vector<double>{1.0, 0.0});

    const auto rows = complementary_rows(400, 3);
    fit = fit_weights(rows, {Method::MFA, Method::SelfConsistency, Method::SemanticEntropy}, 0.05, {}, 3);
    CHECK(fit.evaluated == 231);
    CHECK(fit.spec.weights[0] > 0.2);
    CHECK(fit.spec.weights[1] > 0.2);
    for (std::size_t m = 0; m < 3; ++m) CHECK(fit.objective >= auroc(member_predictions(rows, m)));
    CHECK(fit_weights(rows, {Method::MFA, Method::PTrue, Method::Verbalized}, 0.25).evaluated == 15);
    const auto serial = fit_weights(rows, {Method::MFA, Method::SelfConsistency, Method::SemanticEntropy});
    CHECK(serial.spec.weights == fit.spec.weights);

    std::vector<EnsembleRow> one_class = rows;
    for (auto& r : one_class) r.correct = true;
    CHECK_THROWS_AS(fit_weights(one_class, {Method::MFA, Method::PTrue, Method::Verbalized}), UndefinedMetric);
    CHECK_THROWS_AS(fit_weights(rows, {Method::MFA, Method::PTrue, Method::Verbalized}, 0.07), std::invalid_argument);
}

TEST_CASE("property: fitted train objective is at least every member's") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        std::vector<EnsembleRow> rows;
        const std::size_t members = 2 + seed % 2;
        for (int i = 0; i < 60; ++i) {
            EnsembleRow r{"q" + std::to_string(i), {}, rng.bernoulli(0.5)};
            for (std::size_t m = 0; m < members; ++m) r.confidences.push_back(rng.below(5) / 4.0);
            rows.push_back(r);
        }
        rows[0].correct = true;
        rows[1].correct = false;
        std::vector<Method> ms = {Method::MFA, Method::PTrue, Method::Verbalized};
        ms.resize(members);
        const auto fit = fit_weights(rows, ms, 0.1);
        CHECK(fit.evaluated == (members == 2 ? 11u : 66u));
        for (std::size_t m = 0; m < members; ++m) CHECK(fit.objective >= auroc(member_predictions(rows, m)));
    }
}

TEST_CASE("join_members") {
    const std::vector<std::vector<ScoredPrediction>> per = {
        {{0.9, true, "a"}, {0.4, false, "b"}, {0.3, true, "c"}},
        {{0.2, false, "b"}, {0.8, false, "a"}},
    };
    auto rows = join_members(per);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].question_id == "a");
    CHECK(rows[0].confidences == std::vector<double>{0.9, 0.8});
    CHECK(rows[0].correct);
    rows = join_members(per, 1);
    CHECK_FALSE(rows[0].correct);
}

TEST_CASE("split stability") {
    const auto rows = complementary_rows(600, 8);
    const std::vector<Method> ms = {Method::MFA, Method::SelfConsistency, Method::SemanticEntropy};
    const auto a = split_stability(rows, ms, 5, 21);
    const auto b = split_stability(rows, ms, 5, 21);
    REQUIRE(a.splits.size() == 5);
    for (int s = 0; s < 5; ++s) CHECK(a.splits[s].weights == b.splits[s].weights);
    CHECK(a.test_objective.mean == b.test_objective.mean);
    CHECK(a.gain_over_best_member >= 0.03);
    CHECK(a.weights[2].mean < 0.2);

    std::vector<EnsembleRow> same;
    for (const auto& r : rows) same.push_back({r.question_id, {r.confidences[0], r.confidences[0]}, r.correct});
    const auto s = split_stability(same, {Method::MFA, Method::PTrue}, 5, 1);
    CHECK(s.weights[0].mean == 1.0);
    CHECK(s.weights[0].std == 0.0);
    CHECK_THROWS_AS(split_stability(std::span(rows).first(19), ms), std::invalid_argument);
}

TEST_CASE("ensemble documents round-trip") {
    const EnsembleSpec s{{Method::MFA, Method::SelfConsistency, Method::SemanticEntropy}, {0.5, 0.4, 0.1}, 0.05, 1};
    const auto text = ensemble_to_json(s);
    CHECK(text.find("\"kind\": \"ensemble\"") != std::string::npos);
    const auto back = ensemble_from_json(text);
    CHECK(back.members == s.members);
    CHECK(back.weights == s.weights);
    CHECK(back.answer_source == 1);
    CHECK(ensemble_to_json(back) == text);
    CHECK_THROWS_AS(ensemble_from_json(R"({"format":"tabcal-model","version":1,"kind":"platt"})"), std::invalid_argument);
}
