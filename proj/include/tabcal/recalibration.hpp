#pragma once

#include "tabcal/features.hpp"
#include "tabcal/metrics.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace tabcal {

/// Covariate layout of the structure-aware model: index 0 is the raw
/// confidence c, indices 1..8 follow StructuralFeatures::to_array().
inline constexpr std::size_t kNumCovariates = 1 + kNumStructuralFeatures;

/// Confidences are clamped into [kProbClamp, 1 - kProbClamp] before a logit.
inline constexpr double kProbClamp = 1e-6;

/// L2 strength on the slope weights; the intercept is not penalised.
inline constexpr double kRidgeLambda = 1e-3;

enum class FeatureGroup { ConfidenceOnly, TableDims, ColumnTypes, QueryComplexity, Full };

inline constexpr std::array<FeatureGroup, 5> kAllFeatureGroups = {
    FeatureGroup::ConfidenceOnly, FeatureGroup::TableDims, FeatureGroup::ColumnTypes,
    FeatureGroup::QueryComplexity, FeatureGroup::Full};

std::string_view feature_group_name(FeatureGroup group) noexcept;
std::optional<FeatureGroup> parse_feature_group(std::string_view name);

/// Sorted covariate indices used by a group; always starts with 0 (c).
std::vector<std::size_t> group_covariates(FeatureGroup group);

struct FeaturedPrediction {
    ScoredPrediction pred;
    StructuralFeatures features;
};

enum class PlattInput { Raw, Logit };

struct TemperatureModel {
    double temperature = 1.0;
};

struct PlattModel {
    double a = 0.0;
    double b = 0.0;
    PlattInput input = PlattInput::Raw;
};

struct IsotonicModel {
    /// Strictly increasing confidences with nondecreasing values in [0,1].
    std::vector<std::pair<double, double>> breakpoints;
};

struct StructureAwareModel {
    std::vector<std::size_t> covariates;
    /// Per-covariate centring and scaling from the training set; the raw
    /// confidence keeps mean 0 and scale 1.
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<double> weights;
    double bias = 0.0;
    /// Newton failed and gradient descent produced the weights.
    bool gradient_fallback = false;
};

struct RecalibrationModel {
    std::variant<TemperatureModel, PlattModel, IsotonicModel, StructureAwareModel> params;

    std::string_view kind() const noexcept;
    bool needs_features() const noexcept {
        return std::holds_alternative<StructureAwareModel>(params);
    }
};

/// Outcome of the shared penalised logistic fit, exposed for diagnostics.
struct LogisticFit {
    std::vector<double> weights;
    double bias = 0.0;
    int iterations = 0;
    double gradient_norm = 0.0;
    double objective = 0.0;
    bool gradient_fallback = false;
};

/// Minimises mean log-loss + lambda/2 * |w|^2 by damped Newton steps.
/// `columns` holds one contiguous vector per covariate. With
/// `allow_fallback`, a singular system switches to gradient descent;
/// otherwise it throws.
LogisticFit fit_logistic(std::span<const std::vector<double>> columns, std::span<const double> y,
                         double lambda, bool allow_fallback);

RecalibrationModel fit_temperature(std::span<const ScoredPrediction> train);
RecalibrationModel fit_platt(std::span<const ScoredPrediction> train,
                             PlattInput input = PlattInput::Raw);
RecalibrationModel fit_isotonic(std::span<const ScoredPrediction> train);
RecalibrationModel fit_structure_aware(std::span<const FeaturedPrediction> train,
                                       FeatureGroup group = FeatureGroup::Full);

/// Throws std::invalid_argument when a structure-aware model gets no features.
double apply(const RecalibrationModel& model, double confidence,
             const std::optional<StructuralFeatures>& features = std::nullopt);

std::vector<ScoredPrediction> apply_all(const RecalibrationModel& model,
                                        std::span<const FeaturedPrediction> preds);
std::vector<ScoredPrediction> apply_all(const RecalibrationModel& model,
                                        std::span<const ScoredPrediction> preds);

struct AblationRow {
    FeatureGroup group;
    double ece = 0.0;
    double auroc = 0.0;
};

/// Fits the structure-aware model per group on `train` and scores binned ECE
/// (10 bins) and AUROC on `test`.
std::vector<AblationRow> feature_ablation(std::span<const FeaturedPrediction> train,
                                          std::span<const FeaturedPrediction> test,
                                          std::span<const FeatureGroup> groups);

std::string model_to_json(const RecalibrationModel& model);
RecalibrationModel model_from_json(std::string_view text);

std::vector<ScoredPrediction> strip_features(std::span<const FeaturedPrediction> preds);

}  // namespace tabcal
