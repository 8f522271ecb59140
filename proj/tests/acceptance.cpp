// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include "appendix_blocks.hpp"
#include "support.hpp"
#include "tabcal/answer.hpp"
#include "tabcal/elicitation.hpp"
#include "tabcal/ensembles.hpp"
#include "tabcal/harness.hpp"
#include "tabcal/inference.hpp"
#include "tabcal/metrics.hpp"
#include "tabcal/recalibration.hpp"
#include "tabcal/table.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace tabcal;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double a) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// ------------------------------------------------------------ brute-force definitions

double brute_ece(const std::vector<ScoredPrediction>& p, int bins) {
    double total = 0.0;
    for (int b = 0; b < bins; ++b) {
        const double lo = static_cast<double>(b) / bins, hi = static_cast<double>(b + 1) / bins;
        double conf = 0.0, hits = 0.0, n = 0.0;
        for (const auto& x : p) {
            const bool in = b == bins - 1 ? (x.confidence >= lo && x.confidence <= 1.0)
                                          : (x.confidence >= lo && x.confidence < hi);
            if (!in) continue;
            n += 1;
            conf += x.confidence;
            hits += x.correct ? 1.0 : 0.0;
        }
        if (n > 0) total += n / p.size() * std::abs(hits / n - conf / n);
    }
    return total;
}

double brute_brier(const std::vector<ScoredPrediction>& p) {
    double s = 0.0;
    for (const auto& x : p) s += (x.confidence - (x.correct ? 1.0 : 0.0)) * (x.confidence - (x.correct ? 1.0 : 0.0));
    return s / p.size();
}

double brute_auroc(const std::vector<ScoredPrediction>& p) {
    double wins = 0.0, pairs = 0.0;
    for (const auto& a : p) {
        if (!a.correct) continue;
        for (const auto& b : p) {
            if (b.correct) continue;
            pairs += 1;
            wins += a.confidence > b.confidence ? 1.0 : a.confidence == b.confidence ? 0.5 : 0.0;
        }
    }
    return wins / pairs;
}

// ------------------------------------------------------------ criteria

Outcome metric_oracles() {
    double worst = 0.0;
    int sets = 0;
    for (std::uint64_t seed = 0; sets < 100; ++seed) {
        Rng rng(1000 + seed);
        const std::size_t n = 2 + rng.below(199);
        const auto p = testing::random_predictions(rng, n);
        const bool pos = std::any_of(p.begin(), p.end(), [](auto& x) { return x.correct; });
        const bool neg = std::any_of(p.begin(), p.end(), [](auto& x) { return !x.correct; });
        if (!pos || !neg) continue;
        ++sets;
        for (int bins : {10, 15, 20}) worst = std::max(worst, std::abs(binned_ece(p, bins) - brute_ece(p, bins)));
        worst = std::max(worst, std::abs(brier(p) - brute_brier(p)));
        worst = std::max(worst, std::abs(auroc(p) - brute_auroc(p)));
    }
    return {worst <= 1e-12, "max |diff| " + fmt("%.3g", worst) + " over 100 sets"};
}

// All set partitions of {0..n-1} as block labels in restricted-growth form.
void partitions(std::vector<int>& labels, std::size_t i, int max_label, std::vector<std::vector<int>>& out) {
    if (i == labels.size()) {
        out.push_back(labels);
        return;
    }
    for (int l = 0; l <= max_label + 1; ++l) {
        labels[i] = l;
        partitions(labels, i + 1, std::max(max_label, l), out);
    }
}

Outcome closed_forms() {
    bool ok = true;
    std::string detail;
    const std::vector<std::string> se_answers = {"a", "a", "a", "b", "b"};
    const double se = semantic_entropy_confidence(se_answers);
    ok &= std::abs(se - 0.5818) <= 1e-4;
    detail += "SE{3,2}=" + fmt("%.6f", se);

    std::vector<std::vector<int>> parts;
    std::vector<int> labels(4, 0);
    partitions(labels, 1, 0, parts);
    ok &= parts.size() == 15;
    int exact = 0;
    const std::vector<std::string> names = {"w", "x", "y", "z"};
    for (const auto& part : parts) {
        std::vector<std::string> answers;
        std::map<int, int> sizes;
        for (int l : part) {
            answers.push_back(names[l]);
            ++sizes[l];
        }
        int largest = 0;
        for (auto [l, s] : sizes) largest = std::max(largest, s);
        // Expected answer: the smallest label among the largest blocks.
        std::string expected;
        for (auto [l, s] : sizes) {
            if (s == largest) {
                expected = names[l];
                break;
            }
        }
        const Majority m = majority_vote(answers);
        const double conf = static_cast<double>(m.size) / 4.0;
        if (conf == largest / 4.0 && answers[m.representative] == expected) ++exact;
    }
    ok &= exact == 15;
    detail += ", MFA partitions exact " + std::to_string(exact) + "/15";

    const std::vector<double> p = {0.01, 0.04, 0.03};
    const auto h = holm_bonferroni(p);
    const bool holm_ok = h == std::vector<double>{0.03, 0.06, 0.06};
    ok &= holm_ok;
    detail += holm_ok ? ", Holm exact" : ", Holm mismatch";
    return {ok, detail};
}

Outcome smooth_ece_properties() {
    Rng rng(2024);
    std::vector<ScoredPrediction> cal;
    for (int i = 0; i < 10000; ++i) {
        const double c = rng.uniform();
        cal.push_back({c, rng.bernoulli(c), "q" + std::to_string(i)});
    }
    const auto a = smooth_ece_with_bandwidth(cal);
    std::vector<ScoredPrediction> flat;
    for (int i = 0; i < 1000; ++i) flat.push_back({0.99, i < 700, "q" + std::to_string(i)});
    const auto b = smooth_ece_with_bandwidth(flat);
    const double residual = std::max(std::abs(a.value - a.bandwidth), std::abs(b.value - b.bandwidth));
    const bool ok = a.value <= 0.02 && std::abs(b.value - 0.29) <= 0.02 && residual <= 1e-6;
    return {ok, "calibrated " + fmt("%.4f", a.value) + ", constant " + fmt("%.4f", b.value) + ", residual " +
                    fmt("%.2g", residual)};
}

Outcome monotone_invariance() {
    Rng rng(17);
    std::vector<ScoredPrediction> train, test;
    for (int i = 0; i < 8000; ++i) {
        // Stated logits are five times too sharp.
        const double s = rng.uniform(2.4, 8.0);
        ScoredPrediction q{sigmoid(s), rng.bernoulli(sigmoid(s / 5.0)), "q" + std::to_string(i)};
        (i % 2 ? test : train).push_back(q);
    }
    const auto temp = fit_temperature(train);
    const auto platt = fit_platt(train);
    const double a = std::get<PlattModel>(platt.params).a;
    const auto t_out = apply_all(temp, std::span<const ScoredPrediction>(test));
    const auto p_out = apply_all(platt, std::span<const ScoredPrediction>(test));
    const double raw_ece = binned_ece(test, 10);
    const double d_auc = std::max(std::abs(auroc(t_out) - auroc(test)), std::abs(auroc(p_out) - auroc(test)));
    const double ece_t = binned_ece(t_out, 10), ece_p = binned_ece(p_out, 10);
    const bool ok = a > 0 && raw_ece >= 0.25 && ece_t <= 0.05 && ece_p <= 0.05 && d_auc < 1e-9;
    return {ok, "ECE " + fmt("%.3f", raw_ece) + " -> temperature " + fmt("%.3f", ece_t) + ", Platt " +
                    fmt("%.3f", ece_p) + " (a=" + fmt("%.3f", a) + "), max AUROC change " + fmt("%.2g", d_auc)};
}

// 50/50 split by question index parity.
template <class T>
void halves(const std::vector<T>& all, std::vector<T>& train, std::vector<T>& test) {
    for (std::size_t i = 0; i < all.size(); ++i) (i % 2 ? test : train).push_back(all[i]);
}

Outcome structure_aware_gain() {
    SyntheticSpec spec;
    spec.n = 2000;
    const auto bench = synthesize_benchmark(spec, 55);
    auto resp = make_respondent(bench, 55);
    RunConfig cfg;
    cfg.methods = {Method::Verbalized};
    cfg.parallelism = 1;
    const auto [rows, calls] = run_elicitation(bench.items, {resp.get()}, cfg);
    const auto featured = featured_predictions(rows, "synthetic", "verbalized");
    std::vector<FeaturedPrediction> train, test;
    halves(featured, train, test);
    const auto platt = fit_platt(strip_features(train));
    const auto sa = fit_structure_aware(train, FeatureGroup::Full);
    const double au_p = auroc(apply_all(platt, test));
    const double au_s = auroc(apply_all(sa, test));
    return {au_s - au_p >= 0.05, "test AUROC Platt " + fmt("%.3f", au_p) + " -> structure-aware " + fmt("%.3f", au_s) +
                                     " (+" + fmt("%.3f", au_s - au_p) + ")"};
}

Outcome dichotomy() {
    SyntheticSpec spec;
    spec.n = 500;
    spec.profile.rho = 0.5;
    spec.profile.beta = 0.3;
    const auto bench = synthesize_benchmark(spec, 7);
    auto resp = make_respondent(bench, 7);
    RunConfig cfg;
    cfg.parallelism = 1;
    ReportOptions opts;
    opts.bootstrap.resamples = 10000;
    opts.bootstrap.seed = 7;
    const auto [rows, calls] = run_elicitation(bench.items, {resp.get()}, cfg);
    const auto mfa = scored_predictions(rows, "synthetic", "mfa");
    const double au_m = auroc(mfa);
    const double au_v = auroc(scored_predictions(rows, "synthetic", "verbalized"));
    // Holm over MFA against each of the other four methods.
    std::vector<std::pair<std::string, BootstrapResult>> cmp;
    const MetricFn metric = [](std::span<const ScoredPrediction> p) { return auroc(p); };
    for (const char* m : {"verbalized", "ptrue", "self_consistency", "semantic_entropy"}) {
        cmp.push_back({m, paired_bootstrap_diff(mfa, scored_predictions(rows, "synthetic", m), metric, opts.bootstrap)});
    }
    const auto table = significance_table(cmp);
    const double p_holm = table[0].p_holm;
    const bool ok = au_m - au_v >= 0.10 && p_holm < 0.01;
    return {ok, "AUROC MFA " + fmt("%.3f", au_m) + " vs verbalized " + fmt("%.3f", au_v) + " (+" +
                    fmt("%.3f", au_m - au_v) + "), Holm p " + fmt("%.2g", p_holm)};
}

Outcome ensemble_complementarity() {
    SyntheticSpec spec;
    spec.n = 1000;
    spec.profile.input_error_share = 0.5;
    const auto bench = synthesize_benchmark(spec, 31);
    auto resp = make_respondent(bench, 31);
    RunConfig cfg;
    cfg.methods = {Method::SelfConsistency, Method::SemanticEntropy, Method::MFA};
    cfg.parallelism = 1;
    const auto [rows, calls] = run_elicitation(bench.items, {resp.get()}, cfg);
    std::vector<std::vector<ScoredPrediction>> per;
    for (const char* m : {"mfa", "self_consistency", "semantic_entropy"}) per.push_back(scored_predictions(rows, "synthetic", m));
    const auto joined = join_members(per);
    const auto st = split_stability(joined, {Method::MFA, Method::SelfConsistency, Method::SemanticEntropy}, 5, 31);
    return {st.gain_over_best_member >= 0.03,
            "held-out AUROC " + fmt("%.3f", st.test_objective.mean) + ", gain over best member " +
                fmt("%+.3f", st.gain_over_best_member) + " (5 splits)"};
}

Outcome bootstrap_sanity() {
    const double true_auroc = 5.0 / 6.0;  // c ~ U(0,1), y ~ Bernoulli(c)
    const MetricFn metric = [](std::span<const ScoredPrediction> p) { return auroc(p); };
    const auto draw = [](std::uint64_t seed) {
        Rng rng(seed);
        std::vector<ScoredPrediction> p;
        for (int i = 0; i < 2000; ++i) {
            const double c = rng.uniform();
            p.push_back({c, rng.bernoulli(c), "q" + std::to_string(i)});
        }
        return p;
    };
    const auto first = percentile_ci(draw(900), metric, {10000, 0.95, 900, 1});
    const double half = (first.upper - first.lower) / 2.0;
    int covered = 0;
    for (int s = 0; s < 200; ++s) {
        const auto ci = percentile_ci(draw(5000 + s), metric, {1000, 0.95, static_cast<std::uint64_t>(s), 1});
        covered += ci.lower <= true_auroc && true_auroc <= ci.upper;
    }
    const double coverage = covered / 200.0;
    const bool ok = half >= 0.01 && half <= 0.03 && coverage >= 0.90;
    return {ok, "half-width " + fmt("%.4f", half) + ", coverage " + fmt("%.3f", coverage) + " over 200 sims"};
}

Outcome pipeline_fidelity() {
    bool ok = true;
    int passed = 0;
    const auto m1 = match_answer("37 women competed", "37");
    const auto m2 = match_answer("$1,000", "1000");
    const auto m3 = match_answer("Kazakhstan (KAZ) won the most medals", "Kazakhstan");
    passed += m1.correct && m1.match_type == MatchType::FuzzyNumeric;
    passed += m2.correct && m2.match_type == MatchType::Numeric;
    passed += m3.correct && m3.match_type == MatchType::Containment;
    ok &= passed == 3;
    const Table t = testing::alice_table();
    int blocks = 0;
    blocks += serialize(t, SerializationFormat::Markdown) == testing::appendix::kMarkdown;
    blocks += serialize(t, SerializationFormat::Html) == testing::appendix::kHtml;
    blocks += serialize(t, SerializationFormat::Json) == testing::appendix::kJson;
    blocks += serialize(t, SerializationFormat::Csv) == testing::appendix::kCsv;
    ok &= blocks == 4;
    return {ok, std::to_string(passed) + "/3 match examples, " + std::to_string(blocks) + "/4 serialization blocks"};
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        std::ifstream in(e.path(), std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        out[fs::relative(e.path(), dir).string()] = ss.str();
    }
    return out;
}

Outcome replay_determinism() {
    const fs::path dir = fs::temp_directory_path() / ("tabcal-acceptance-replay-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    SyntheticSpec spec;
    spec.n = 100;
    const auto bench = synthesize_benchmark(spec, 12);
    auto resp = make_respondent(bench, 12);
    RunConfig cfg;
    cfg.cache = dir / "cache.ndjson";
    ReportOptions opts;
    opts.bootstrap.resamples = 1000;
    RunStats live;
    run_matrix(bench.items, {resp.get()}, cfg, opts, &live);
    cfg.replay = true;
    RunStats r1, r2;
    emit_report(run_matrix(bench.items, {resp.get()}, cfg, opts, &r1), dir / "replay1");
    emit_report(run_matrix(bench.items, {resp.get()}, cfg, opts, &r2), dir / "replay2");
    const auto a = tree(dir / "replay1");
    const bool same = a == tree(dir / "replay2");
    fs::remove_all(dir);
    const bool ok = same && r1.provider_calls == 0 && r2.provider_calls == 0 && live.provider_calls > 0;
    return {ok, std::to_string(a.size()) + " files " + (same ? "identical" : "differ") + ", replay provider calls " +
                    std::to_string(r1.provider_calls + r2.provider_calls)};
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double limit_s;
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria = {
        {1, "metric oracle equivalence", 5, metric_oracles},
        {2, "closed-form fixtures", 1, closed_forms},
        {3, "smooth ECE properties", 10, smooth_ece_properties},
        {4, "monotone invariance of recalibration", 5, monotone_invariance},
        {5, "structure-aware gain", 10, structure_aware_gain},
        {6, "dichotomy reproduction", 60, dichotomy},
        {7, "ensemble complementarity", 30, ensemble_complementarity},
        {8, "bootstrap CI sanity", 300, bootstrap_sanity},
        {9, "pipeline fidelity fixtures", 1, pipeline_fidelity},
        {10, "replay determinism", 10, replay_determinism},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = o.pass && in_time;
        failed += !pass;
        std::printf("%s criterion %d (%s): %s; %.2f s of %.0f s%s\n", pass ? "PASS" : "FAIL", c.id, c.name,
                    o.detail.c_str(), secs, c.limit_s, in_time ? "" : " (over time)");
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
