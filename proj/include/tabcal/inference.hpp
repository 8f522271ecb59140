#pragma once

#include "tabcal/metrics.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tabcal {

using MetricFn = std::function<double(std::span<const ScoredPrediction>)>;

inline constexpr int kDefaultResamples = 10000;
inline constexpr int kMinResamples = 1000;
/// Draws tried for one resample before a metric that stays undefined is an error.
inline constexpr int kMaxAttemptsPerResample = 10;

struct BootstrapResult {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    int resamples = 0;
    std::uint64_t seed = 0;
    std::optional<double> p_value;
    /// Resamples redrawn because the metric was undefined on them.
    int degenerate = 0;
};

struct BootstrapOptions {
    int resamples = kDefaultResamples;
    double level = 0.95;
    std::uint64_t seed = 0;
    int parallelism = 1;
};

/// Percentile interval from resampling questions with replacement. Each
/// resample's draws depend only on (seed, resample index), never on thread
/// scheduling.
BootstrapResult percentile_ci(std::span<const ScoredPrediction> preds, const MetricFn& metric,
                              const BootstrapOptions& options = {});

/// Resamples question ids shared by both sides and reports
/// metric(A) - metric(B). Two-sided p = 2 min(P(d <= 0), P(d >= 0)),
/// clamped to [1/R, 1].
BootstrapResult paired_bootstrap_diff(std::span<const ScoredPrediction> a,
                                      std::span<const ScoredPrediction> b, const MetricFn& metric,
                                      const BootstrapOptions& options = {});

/// Step-down adjustment; output in the input order.
std::vector<double> holm_bonferroni(std::span<const double> p_values);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;
};

/// Mean and sample standard deviation (n - 1 denominator).
MeanStd multi_seed_aggregate(std::span<const double> values);

/// "***" below 0.001, "**" below 0.01, "*" below 0.05, otherwise "ns".
std::string significance_stars(double p);

struct SignificanceRow {
    std::string comparison;
    BootstrapResult diff;
    double p_holm = 1.0;
    std::string stars;
};

/// Applies Holm over the family of comparisons and attaches stars to the
/// adjusted p-values.
std::vector<SignificanceRow> significance_table(
    std::vector<std::pair<std::string, BootstrapResult>> comparisons);

}  // namespace tabcal
