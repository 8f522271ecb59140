#include "support.hpp"
#include "tabcal/inference.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace tabcal;

namespace {

const MetricFn kAuroc = [](std::span<const ScoredPrediction> p) { return auroc(p); };
const MetricFn kAccuracy = [](std::span<const ScoredPrediction> p) { return accuracy(p); };

bool same(const BootstrapResult& x, const BootstrapResult& y) {
    return x.point == y.point && x.lower == y.lower && x.upper == y.upper && x.p_value == y.p_value &&
           x.degenerate == y.degenerate;
}

}  // namespace

TEST_CASE("Holm-Bonferroni examples") {
    const std::vector<double> p = {0.01, 0.04, 0.03};
    CHECK(holm_bonferroni(p) == std::vector<double>{0.03, 0.06, 0.06});
    CHECK(holm_bonferroni(std::vector<double>{0.2}) == std::vector<double>{0.2});
    CHECK(holm_bonferroni(std::vector<double>{0.5, 0.9}) == std::vector<double>{1.0, 1.0});
    CHECK(holm_bonferroni(std::vector<double>{}).empty());
    CHECK_THROWS_AS(holm_bonferroni(std::vector<double>{1.5}), std::invalid_argument);
}

TEST_CASE("property: Holm is monotone and never below raw") {
    Rng rng(12);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<double> p(1 + rng.below(12));
        for (auto& v : p) v = rng.bernoulli(0.2) ? 0.0 : rng.uniform();
        const auto adj = holm_bonferroni(p);
        std::vector<std::size_t> order(p.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(adj[i] >= p[i]);
            CHECK(adj[i] <= 1.0);
            if (i > 0) CHECK(adj[order[i]] >= adj[order[i - 1]]);
        }
    }
}

TEST_CASE("multi-seed aggregation") {
    auto r = multi_seed_aggregate(std::vector<double>{0.83, 0.83, 0.83});
    CHECK(r.mean == doctest::Approx(0.83).epsilon(1e-12));
    CHECK(r.std == doctest::Approx(0.0).epsilon(1e-12));
    r = multi_seed_aggregate(std::vector<double>{0.82, 0.83, 0.84});
    CHECK(r.mean == doctest::Approx(0.83).epsilon(1e-12));
    CHECK(r.std == doctest::Approx(0.01).epsilon(1e-9));
    CHECK(multi_seed_aggregate(std::vector<double>{0.5, 0.5}).std == 0.0);
    CHECK_THROWS_AS(multi_seed_aggregate(std::vector<double>{0.5}), std::invalid_argument);
}

TEST_CASE("stars") {
    CHECK(significance_stars(0.0001) == "***");
    CHECK(significance_stars(0.005) == "**");
    CHECK(significance_stars(0.03) == "*");
    CHECK(significance_stars(0.05) == "ns");
}

TEST_CASE("percentile CI") {
    std::vector<ScoredPrediction> constant(50, ScoredPrediction{0.7, true, ""});
    for (std::size_t i = 0; i < constant.size(); ++i) constant[i].question_id = std::to_string(i);
    const auto flat = percentile_ci(constant, kAccuracy, {1000, 0.95, 3, 1});
    CHECK(flat.lower == flat.upper);
    CHECK(flat.point == 1.0);

    Rng rng(9);
    const auto preds = testing::calibrated_predictions(rng, 300);
    const auto a = percentile_ci(preds, kAuroc, {2000, 0.95, 42, 1});
    const auto b = percentile_ci(preds, kAuroc, {2000, 0.95, 42, 1});
    const auto c = percentile_ci(preds, kAuroc, {2000, 0.95, 42, 3});
    CHECK(same(a, b));
    CHECK(same(a, c));
    CHECK(a.lower <= a.upper);
    CHECK(a.resamples == 2000);
    CHECK(a.seed == 42);
    const auto d = percentile_ci(preds, kAuroc, {2000, 0.95, 43, 1});
    CHECK_FALSE(same(a, d));

    CHECK_THROWS_AS(percentile_ci(preds, kAuroc, {999, 0.95, 1, 1}), std::invalid_argument);
    CHECK_THROWS_AS(percentile_ci(preds, kAuroc, {1000, 1.0, 1, 1}), std::invalid_argument);
}

TEST_CASE("degenerate resamples are redrawn, and too many are an error") {
    // One incorrect answer among 20: single-class resamples happen about
    // (19/20)^20 = 36% of the time, which stays below the 50% cap.
    std::vector<ScoredPrediction> rare;
    for (int i = 0; i < 20; ++i) rare.push_back({0.05 * i, i != 3, "q" + std::to_string(i)});
    const auto res = percentile_ci(rare, kAuroc, {1000, 0.95, 7, 2});
    CHECK(res.degenerate > 200);
    CHECK(res.degenerate <= 1000);

    // A metric undefined on roughly 90% of draws must fail.
    const MetricFn flaky = [](std::span<const ScoredPrediction> p) {
        if (p[0].question_id != "q0" && p[0].question_id != "q1") throw UndefinedMetric("flaky");
        return 0.0;
    };
    CHECK_THROWS_AS(percentile_ci(rare, flaky, {1000, 0.95, 7, 1}), std::runtime_error);
}

TEST_CASE("paired bootstrap") {
    Rng rng(10);
    const auto a = testing::calibrated_predictions(rng, 200);
    const auto same_res = paired_bootstrap_diff(a, a, kAuroc, {1000, 0.95, 1, 1});
    CHECK(same_res.point == 0.0);
    CHECK(same_res.lower <= 0.0);
    CHECK(same_res.upper >= 0.0);
    CHECK(same_res.p_value == 1.0);

    // A is confident exactly where it is right; B is the reverse.
    std::vector<ScoredPrediction> good, bad;
    for (int i = 0; i < 200; ++i) {
        const bool right = i % 2 == 0;
        good.push_back({right ? 0.9 : 0.1, right, "q" + std::to_string(i)});
        bad.push_back({right ? 0.1 : 0.9, right, "q" + std::to_string(i)});
    }
    std::reverse(bad.begin(), bad.end());  // pairing is by id, not position
    const auto dom = paired_bootstrap_diff(good, bad, kAuroc, {10000, 0.95, 2, 2});
    CHECK(dom.point == 1.0);
    CHECK(dom.lower > 0.0);
    CHECK(*dom.p_value <= 0.001);
    CHECK(*dom.p_value == doctest::Approx(1.0 / 10000));
    CHECK(same(dom, paired_bootstrap_diff(good, bad, kAuroc, {10000, 0.95, 2, 1})));

    auto missing = good;
    missing.back().question_id = "other";
    CHECK_THROWS_AS(paired_bootstrap_diff(missing, bad, kAuroc, {1000, 0.95, 2, 1}), std::invalid_argument);
    missing.pop_back();
    CHECK_THROWS_AS(paired_bootstrap_diff(missing, bad, kAuroc, {1000, 0.95, 2, 1}), std::invalid_argument);

    const auto table = significance_table({{"good-bad", dom}, {"a-a", same_res}});
    REQUIRE(table.size() == 2);
    CHECK(table[0].p_holm == doctest::Approx(2.0 / 10000));
    CHECK(table[0].stars == "***");
    CHECK(table[1].p_holm == 1.0);
    CHECK(table[1].stars == "ns");
}
