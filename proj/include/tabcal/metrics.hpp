#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tabcal {

struct ScoredPrediction {
    double confidence = 0.0;
    bool correct = false;
    std::string question_id;
};

/// A metric that is undefined on the given sample (for example AUROC with a
/// single class). Bootstrap resampling redraws on this error.
class UndefinedMetric : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Throws std::invalid_argument on empty input or confidence outside [0,1].
void validate_predictions(std::span<const ScoredPrediction> preds);

double accuracy(std::span<const ScoredPrediction> preds);
double mean_confidence(std::span<const ScoredPrediction> preds);

/// Equal-width bins [lo, hi), the last one closed at 1.
double binned_ece(std::span<const ScoredPrediction> preds, int bins);

double brier(std::span<const ScoredPrediction> preds);

/// Mann-Whitney statistic with half credit for ties.
double auroc(std::span<const ScoredPrediction> preds);

/// Mean confidence on correct answers minus mean confidence on incorrect ones.
double separability(std::span<const ScoredPrediction> preds);

/// Fraction of predictions whose confidence is exactly 1.
double saturation_fraction(std::span<const ScoredPrediction> preds);

// ------------------------------------------------------------ smooth ECE
//
// Residuals y - c are spread onto a uniform grid over [0,1] and smoothed
// with a Gaussian kernel folded back at both boundaries:
//   K(t, s) = g(t - s) + g(t + s) + g(2 - t - s)
// with g normalised on the grid so the scheme stays well defined when the
// bandwidth is below the grid spacing. smECE_sigma is the integral of the
// absolute smoothed residual; the reported value uses the bandwidth at which
// smECE_sigma equals sigma, located by bisection.

inline constexpr std::size_t kSmoothingGridIntervals = 1000;
inline constexpr double kMinBandwidth = 1e-4;
inline constexpr double kMaxBandwidth = 1.0;

struct SmoothEce {
    double value = 0.0;
    double bandwidth = 0.0;
};

double smooth_ece_at(std::span<const ScoredPrediction> preds, double bandwidth);
SmoothEce smooth_ece_with_bandwidth(std::span<const ScoredPrediction> preds);
double smooth_ece(std::span<const ScoredPrediction> preds);

// ------------------------------------------------------------ curves

enum class CurveKind { Reliability, RiskCoverage };

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
    std::optional<double> lower;
    std::optional<double> upper;
};

struct CurveData {
    CurveKind kind = CurveKind::Reliability;
    std::vector<CurvePoint> points;
    double bandwidth = 0.0;  // reliability curves only
};

struct BootstrapBand {
    int resamples = 1000;
    double level = 0.90;
    std::uint64_t seed = 0;
};

/// Kernel-smoothed accuracy on `grid_size` evenly spaced confidences, using
/// the smooth-ECE kernel and bandwidth. Grid points with no nearby mass are
/// omitted.
CurveData reliability_curve(std::span<const ScoredPrediction> preds, int grid_size,
                            const std::optional<BootstrapBand>& band = std::nullopt);

/// Selective accuracy of the k most confident answers at coverage k/n.
/// Confidence ties are ordered by question_id.
CurveData risk_coverage(std::span<const ScoredPrediction> preds);
double accuracy_at_coverage(std::span<const ScoredPrediction> preds, double coverage);
double coverage_at_accuracy(std::span<const ScoredPrediction> preds, double target_accuracy);

std::string curve_to_csv(const CurveData& curve);

}  // namespace tabcal
