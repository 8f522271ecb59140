#include "tabcal/inference.hpp"
#include "tabcal/quantile.hpp"
#include "tabcal/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>
#include <unordered_map>

namespace tabcal {

namespace {

void check_options(const BootstrapOptions& o) {
    if (o.resamples < kMinResamples) {
        throw std::invalid_argument("bootstrap needs at least " + std::to_string(kMinResamples) +
                                    " resamples");
    }
    if (!(o.level > 0.0 && o.level < 1.0)) throw std::invalid_argument("level must lie in (0,1)");
}

/// Runs body(r) for every resample index, spread over worker threads.
template <class Body>
void for_each_resample(int resamples, int parallelism, Body body) {
    const int workers = std::clamp(parallelism, 1, resamples);
    if (workers == 1) {
        for (int r = 0; r < resamples; ++r) body(r);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            try {
                for (int r = next++; r < resamples; r = next++) body(r);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = resamples;
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

/// Draws resample `r`, retrying while `evaluate` reports an undefined
/// metric. Returns the value and adds the number of redraws to `redraws`.
template <class Evaluate>
double draw_resample(const CounterRng& rng, int r, std::size_t n, std::vector<std::size_t>& idx,
                     std::atomic<int>& redraws, Evaluate evaluate) {
    for (int attempt = 0; attempt < kMaxAttemptsPerResample; ++attempt) {
        const auto stream = static_cast<std::uint64_t>(r) * kMaxAttemptsPerResample +
                            static_cast<std::uint64_t>(attempt);
        for (std::size_t d = 0; d < n; ++d) idx[d] = rng.below(stream, d, n);
        try {
            return evaluate(idx);
        } catch (const UndefinedMetric&) {
            ++redraws;
        }
    }
    throw std::runtime_error("bootstrap: metric undefined on " +
                             std::to_string(kMaxAttemptsPerResample) +
                             " consecutive redraws of resample " + std::to_string(r));
}

BootstrapResult summarise(std::vector<double> values, double point, const BootstrapOptions& o,
                          int redraws) {
    if (redraws > o.resamples) {
        throw std::runtime_error("bootstrap: more than half of all draws were degenerate (" +
                                 std::to_string(redraws) + " redraws for " +
                                 std::to_string(o.resamples) + " resamples)");
    }
    std::sort(values.begin(), values.end());
    const double alpha = (1.0 - o.level) / 2.0;
    BootstrapResult res;
    res.point = point;
    res.lower = sorted_quantile(values, alpha);
    res.upper = sorted_quantile(values, 1.0 - alpha);
    res.resamples = o.resamples;
    res.seed = o.seed;
    res.degenerate = redraws;
    return res;
}

}  // namespace

BootstrapResult percentile_ci(std::span<const ScoredPrediction> preds, const MetricFn& metric,
                              const BootstrapOptions& options) {
    check_options(options);
    validate_predictions(preds);
    const double point = metric(preds);
    const std::size_t n = preds.size();
    const CounterRng rng(options.seed);
    std::vector<double> values(static_cast<std::size_t>(options.resamples));
    std::atomic<int> redraws{0};
    for_each_resample(options.resamples, options.parallelism, [&](int r) {
        std::vector<std::size_t> idx(n);
        std::vector<ScoredPrediction> sample(n);
        values[static_cast<std::size_t>(r)] =
            draw_resample(rng, r, n, idx, redraws, [&](const std::vector<std::size_t>& ix) {
                for (std::size_t d = 0; d < n; ++d) sample[d] = preds[ix[d]];
                return metric(sample);
            });
    });
    return summarise(std::move(values), point, options, redraws.load());
}

BootstrapResult paired_bootstrap_diff(std::span<const ScoredPrediction> a,
                                      std::span<const ScoredPrediction> b, const MetricFn& metric,
                                      const BootstrapOptions& options) {
    check_options(options);
    validate_predictions(a);
    validate_predictions(b);
    if (a.size() != b.size()) throw std::invalid_argument("paired bootstrap: question sets differ in size");

    // Align B to A's order by question id.
    std::unordered_map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < b.size(); ++i) {
        if (!pos.emplace(b[i].question_id, i).second) {
            throw std::invalid_argument("paired bootstrap: duplicate question id '" + b[i].question_id + "'");
        }
    }
    std::vector<ScoredPrediction> left(a.begin(), a.end());
    std::vector<ScoredPrediction> right;
    right.reserve(a.size());
    {
        std::unordered_map<std::string, bool> seen;
        for (const auto& p : a) {
            if (!seen.emplace(p.question_id, true).second) {
                throw std::invalid_argument("paired bootstrap: duplicate question id '" + p.question_id + "'");
            }
            const auto it = pos.find(p.question_id);
            if (it == pos.end()) {
                throw std::invalid_argument("paired bootstrap: question '" + p.question_id +
                                            "' missing from the second set");
            }
            right.push_back(b[it->second]);
        }
    }
    const double point = metric(left) - metric(right);
    const std::size_t n = left.size();
    const CounterRng rng(options.seed);
    std::vector<double> deltas(static_cast<std::size_t>(options.resamples));
    std::atomic<int> redraws{0};
    for_each_resample(options.resamples, options.parallelism, [&](int r) {
        std::vector<std::size_t> idx(n);
        std::vector<ScoredPrediction> sa(n), sb(n);
        deltas[static_cast<std::size_t>(r)] =
            draw_resample(rng, r, n, idx, redraws, [&](const std::vector<std::size_t>& ix) {
                for (std::size_t d = 0; d < n; ++d) {
                    sa[d] = left[ix[d]];
                    sb[d] = right[ix[d]];
                }
                return metric(sa) - metric(sb);
            });
    });
    std::size_t le = 0, ge = 0;
    for (double d : deltas) {
        if (d <= 0.0) ++le;
        if (d >= 0.0) ++ge;
    }
    const double r = static_cast<double>(options.resamples);
    const double two_sided = 2.0 * static_cast<double>(std::min(le, ge)) / r;
    auto res = summarise(std::move(deltas), point, options, redraws.load());
    res.p_value = std::clamp(two_sided, 1.0 / r, 1.0);
    return res;
}

std::vector<double> holm_bonferroni(std::span<const double> p_values) {
    for (double p : p_values) {
        if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p-values must lie in [0,1]");
    }
    const std::size_t m = p_values.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return p_values[x] < p_values[y]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double scaled = std::min(1.0, static_cast<double>(m - j) * p_values[order[j]]);
        running = std::max(running, scaled);
        adjusted[order[j]] = running;
    }
    return adjusted;
}

MeanStd multi_seed_aggregate(std::span<const double> values) {
    if (values.size() < 2) throw std::invalid_argument("aggregation needs at least two values");
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

std::string significance_stars(double p) {
    if (p < 0.001) return "***";
    if (p < 0.01) return "**";
    if (p < 0.05) return "*";
    return "ns";
}

std::vector<SignificanceRow> significance_table(
    std::vector<std::pair<std::string, BootstrapResult>> comparisons) {
    std::vector<double> raw;
    for (const auto& [name, res] : comparisons) {
        if (!res.p_value) throw std::invalid_argument("comparison '" + name + "' carries no p-value");
        raw.push_back(*res.p_value);
    }
    const auto adj = holm_bonferroni(raw);
    std::vector<SignificanceRow> rows;
    for (std::size_t i = 0; i < comparisons.size(); ++i) {
        rows.push_back({std::move(comparisons[i].first), comparisons[i].second, adj[i],
                        significance_stars(adj[i])});
    }
    return rows;
}

}  // namespace tabcal
