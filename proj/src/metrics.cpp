#include "tabcal/metrics.hpp"
#include "tabcal/kernels.hpp"
#include "tabcal/quantile.hpp"
#include "tabcal/rng.hpp"
#include "tabcal/text_util.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tabcal {

void validate_predictions(std::span<const ScoredPrediction> preds) {
    if (preds.empty()) throw std::invalid_argument("metric needs at least one prediction");
    for (const auto& p : preds) {
        if (!std::isfinite(p.confidence) || p.confidence < 0.0 || p.confidence > 1.0) {
            throw std::invalid_argument("confidence outside [0,1] for question '" + p.question_id + "'");
        }
    }
}

double accuracy(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    const auto hits = std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.correct; });
    return static_cast<double>(hits) / static_cast<double>(preds.size());
}

double mean_confidence(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    double s = 0.0;
    for (const auto& p : preds) s += p.confidence;
    return s / static_cast<double>(preds.size());
}

double binned_ece(std::span<const ScoredPrediction> preds, int bins) {
    validate_predictions(preds);
    if (bins < 1) throw std::invalid_argument("binned ECE needs at least one bin");
    const double nb = static_cast<double>(bins);
    std::vector<double> gap(static_cast<std::size_t>(bins), 0.0);
    for (const auto& p : preds) {
        int b = std::min(static_cast<int>(std::floor(p.confidence * nb)), bins - 1);
        // Agree with the interval definition lo = b/B exactly.
        while (b > 0 && p.confidence < static_cast<double>(b) / nb) --b;
        while (b < bins - 1 && p.confidence >= static_cast<double>(b + 1) / nb) ++b;
        gap[static_cast<std::size_t>(b)] += (p.correct ? 1.0 : 0.0) - p.confidence;
    }
    double total = 0.0;
    for (double g : gap) total += std::fabs(g);
    return total / static_cast<double>(preds.size());
}

double brier(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    std::vector<double> c(preds.size());
    std::vector<double> y(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        c[i] = preds[i].confidence;
        y[i] = preds[i].correct ? 1.0 : 0.0;
    }
    return kernels::sum_sq_diff(c, y) / static_cast<double>(preds.size());
}

double auroc(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    std::vector<std::pair<double, bool>> v;
    v.reserve(preds.size());
    for (const auto& p : preds) v.emplace_back(p.confidence, p.correct);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    double u = 0.0;
    double negatives_below = 0.0;
    double positives = 0.0;
    for (std::size_t i = 0; i < v.size();) {
        std::size_t j = i;
        double pos = 0.0;
        double neg = 0.0;
        while (j < v.size() && v[j].first == v[i].first) {
            (v[j].second ? pos : neg) += 1.0;
            ++j;
        }
        u += pos * negatives_below + 0.5 * pos * neg;
        negatives_below += neg;
        positives += pos;
        i = j;
    }
    if (positives == 0.0 || negatives_below == 0.0) {
        throw UndefinedMetric("AUROC undefined: predictions contain a single class");
    }
    return u / (positives * negatives_below);
}

double separability(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    double sum_c = 0.0, sum_i = 0.0;
    std::size_t n_c = 0, n_i = 0;
    for (const auto& p : preds) {
        if (p.correct) {
            sum_c += p.confidence;
            ++n_c;
        } else {
            sum_i += p.confidence;
            ++n_i;
        }
    }
    if (n_c == 0 || n_i == 0) throw UndefinedMetric("separability undefined: single class");
    return sum_c / static_cast<double>(n_c) - sum_i / static_cast<double>(n_i);
}

double saturation_fraction(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    const auto pinned =
        std::count_if(preds.begin(), preds.end(), [](const auto& p) { return p.confidence == 1.0; });
    return static_cast<double>(pinned) / static_cast<double>(preds.size());
}

// ------------------------------------------------------------ smoothing

namespace {

constexpr std::size_t kL = kSmoothingGridIntervals;
constexpr std::size_t kNodes = kL + 1;
constexpr double kH = 1.0 / static_cast<double>(kL);

struct GridMass {
    std::vector<double> residual = std::vector<double>(kNodes, 0.0);
    std::vector<double> hits = std::vector<double>(kNodes, 0.0);
    std::vector<double> mass = std::vector<double>(kNodes, 0.0);
    double total = 0.0;

    void deposit(double c, bool correct, double weight) {
        const double pos = c * static_cast<double>(kL);
        std::size_t j = std::min(static_cast<std::size_t>(pos), kL - 1);
        const double frac = pos - static_cast<double>(j);
        const double y = correct ? 1.0 : 0.0;
        const double w0 = weight * (1.0 - frac);
        const double w1 = weight * frac;
        residual[j] += w0 * (y - c);
        residual[j + 1] += w1 * (y - c);
        hits[j] += w0 * y;
        hits[j + 1] += w1 * y;
        mass[j] += w0;
        mass[j + 1] += w1;
        total += weight;
    }
};

GridMass deposit_all(std::span<const ScoredPrediction> preds) {
    GridMass g;
    for (const auto& p : preds) g.deposit(p.confidence, p.correct, 1.0);
    return g;
}

// Symmetric kernel samples G[m] = g(|m - 2L| h), m in [0, 4L], normalised so
// that h * sum over the whole integer lattice of g(kh) equals one.
class FoldedKernel {
public:
    explicit FoldedKernel(double sigma) : table_(4 * kL + 1) {
        const double inv = 1.0 / (2.0 * sigma * sigma);
        double z = 1.0;
        for (std::size_t k = 1;; ++k) {
            const double x = static_cast<double>(k) * kH;
            const double v = std::exp(-x * x * inv);
            if (v < 1e-300 || (k > 2 * kL && v < 1e-17 * z)) break;
            z += 2.0 * v;
        }
        const double norm = 1.0 / (kH * z);
        for (std::size_t k = 0; k <= 2 * kL; ++k) {
            const double x = static_cast<double>(k) * kH;
            const double v = std::exp(-x * x * inv) * norm;
            table_[2 * kL + k] = v;
            table_[2 * kL - k] = v;
        }
    }

    /// sum_j values[j] * K(t_i, s_j)
    double smooth_at(std::span<const double> values, std::size_t i) const {
        const double* g = table_.data();
        return kernels::active().shifted_dot3(values.data(), g + 2 * kL - i, g + 2 * kL + i, g + i,
                                              kNodes);
    }

private:
    std::vector<double> table_;
};

double trapezoid_weight(std::size_t i) { return (i == 0 || i == kL) ? 0.5 * kH : kH; }

double smooth_ece_grid(const GridMass& grid, double sigma) {
    const FoldedKernel kernel(sigma);
    double total = 0.0;
    for (std::size_t i = 0; i < kNodes; ++i) {
        total += trapezoid_weight(i) * std::fabs(kernel.smooth_at(grid.residual, i));
    }
    return total / grid.total;
}

SmoothEce fixed_point(const GridMass& grid) {
    double lo = kMinBandwidth;
    double hi = kMaxBandwidth;
    const double f_lo = smooth_ece_grid(grid, lo);
    if (f_lo <= lo) return {f_lo, lo};
    const double f_hi = smooth_ece_grid(grid, hi);
    if (f_hi >= hi) return {f_hi, hi};
    for (int it = 0; it < 200 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (smooth_ece_grid(grid, mid) > mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    const double sigma = 0.5 * (lo + hi);
    return {smooth_ece_grid(grid, sigma), sigma};
}

}  // namespace

double smooth_ece_at(std::span<const ScoredPrediction> preds, double bandwidth) {
    validate_predictions(preds);
    if (!(bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be positive");
    return smooth_ece_grid(deposit_all(preds), bandwidth);
}

SmoothEce smooth_ece_with_bandwidth(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    return fixed_point(deposit_all(preds));
}

double smooth_ece(std::span<const ScoredPrediction> preds) {
    return smooth_ece_with_bandwidth(preds).value;
}

// ------------------------------------------------------------ curves

namespace {

struct OutputPoint {
    double x;
    std::size_t node;  // lower bracketing node
    double frac;
};

std::vector<OutputPoint> output_points(int grid_size) {
    std::vector<OutputPoint> pts;
    for (int k = 0; k < grid_size; ++k) {
        const double x = grid_size == 1 ? 0.5 : static_cast<double>(k) / (grid_size - 1);
        const double pos = x * static_cast<double>(kL);
        const std::size_t j = std::min(static_cast<std::size_t>(pos), kL - 1);
        pts.push_back({x, j, pos - static_cast<double>(j)});
    }
    return pts;
}

/// Smoothed accuracy at each output point; NaN where no mass is nearby.
std::vector<double> smoothed_accuracy(const GridMass& grid, const FoldedKernel& kernel,
                                      const std::vector<OutputPoint>& pts) {
    std::vector<double> out;
    out.reserve(pts.size());
    for (const auto& p : pts) {
        const double num = (1.0 - p.frac) * kernel.smooth_at(grid.hits, p.node) +
                           p.frac * kernel.smooth_at(grid.hits, p.node + 1);
        const double den = (1.0 - p.frac) * kernel.smooth_at(grid.mass, p.node) +
                           p.frac * kernel.smooth_at(grid.mass, p.node + 1);
        out.push_back(den > 1e-12 * grid.total ? num / den : std::nan(""));
    }
    return out;
}

}  // namespace

CurveData reliability_curve(std::span<const ScoredPrediction> preds, int grid_size,
                            const std::optional<BootstrapBand>& band) {
    validate_predictions(preds);
    if (grid_size < 2) throw std::invalid_argument("reliability grid needs at least two points");
    const GridMass grid = deposit_all(preds);
    const SmoothEce fp = fixed_point(grid);
    const FoldedKernel kernel(fp.bandwidth);
    const auto pts = output_points(grid_size);
    const auto y = smoothed_accuracy(grid, kernel, pts);

    std::vector<std::vector<double>> samples;
    if (band) {
        if (band->resamples < 1) throw std::invalid_argument("band needs at least one resample");
        samples.assign(pts.size(), {});
        const CounterRng rng(band->seed);
        const std::uint64_t n = preds.size();
        for (int r = 0; r < band->resamples; ++r) {
            GridMass g;
            for (std::uint64_t d = 0; d < n; ++d) {
                const auto& p = preds[rng.below(static_cast<std::uint64_t>(r), d, n)];
                g.deposit(p.confidence, p.correct, 1.0);
            }
            const auto yr = smoothed_accuracy(g, kernel, pts);
            for (std::size_t k = 0; k < pts.size(); ++k) {
                if (!std::isnan(yr[k])) samples[k].push_back(yr[k]);
            }
        }
    }

    CurveData curve;
    curve.kind = CurveKind::Reliability;
    curve.bandwidth = fp.bandwidth;
    const double alpha = band ? (1.0 - band->level) / 2.0 : 0.0;
    for (std::size_t k = 0; k < pts.size(); ++k) {
        if (std::isnan(y[k])) continue;
        CurvePoint cp{pts[k].x, y[k], std::nullopt, std::nullopt};
        if (band && !samples[k].empty()) {
            std::sort(samples[k].begin(), samples[k].end());
            cp.lower = sorted_quantile(samples[k], alpha);
            cp.upper = sorted_quantile(samples[k], 1.0 - alpha);
        }
        curve.points.push_back(cp);
    }
    return curve;
}

namespace {

std::vector<std::size_t> confidence_order(std::span<const ScoredPrediction> preds) {
    std::vector<std::size_t> idx(preds.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        if (preds[a].confidence != preds[b].confidence) return preds[a].confidence > preds[b].confidence;
        return preds[a].question_id < preds[b].question_id;
    });
    return idx;
}

}  // namespace

CurveData risk_coverage(std::span<const ScoredPrediction> preds) {
    validate_predictions(preds);
    const auto order = confidence_order(preds);
    CurveData curve;
    curve.kind = CurveKind::RiskCoverage;
    const double n = static_cast<double>(preds.size());
    std::size_t hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (preds[order[k]].correct) ++hits;
        const double covered = static_cast<double>(k + 1);
        curve.points.push_back({covered / n, static_cast<double>(hits) / covered, std::nullopt, std::nullopt});
    }
    return curve;
}

double accuracy_at_coverage(std::span<const ScoredPrediction> preds, double coverage) {
    if (!(coverage > 0.0 && coverage <= 1.0)) throw std::invalid_argument("coverage must lie in (0,1]");
    const CurveData curve = risk_coverage(preds);
    const double n = static_cast<double>(preds.size());
    auto k = static_cast<std::size_t>(std::ceil(coverage * n - 1e-9));
    k = std::clamp<std::size_t>(k, 1, preds.size());
    return curve.points[k - 1].y;
}

double coverage_at_accuracy(std::span<const ScoredPrediction> preds, double target_accuracy) {
    const CurveData curve = risk_coverage(preds);
    for (auto it = curve.points.rbegin(); it != curve.points.rend(); ++it) {
        if (it->y >= target_accuracy) return it->x;
    }
    return 0.0;
}

std::string curve_to_csv(const CurveData& curve) {
    std::string out = "x,y,lower,upper\n";
    for (const auto& p : curve.points) {
        out += text::format_double(p.x);
        out += ',';
        out += text::format_double(p.y);
        out += ',';
        if (p.lower) out += text::format_double(*p.lower);
        out += ',';
        if (p.upper) out += text::format_double(*p.upper);
        out += '\n';
    }
    return out;
}

}  // namespace tabcal
