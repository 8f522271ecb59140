#pragma once

#include "tabcal/elicitation.hpp"
#include "tabcal/inference.hpp"
#include "tabcal/metrics.hpp"

#include <span>
#include <string>
#include <vector>

namespace tabcal {

inline constexpr double kDefaultGridStep = 0.05;

struct EnsembleSpec {
    std::vector<Method> members;  // two or three
    std::vector<double> weights;
    double grid_step = kDefaultGridStep;
    /// Index into `members` whose answer the ensemble reports.
    std::size_t answer_source = 0;

    /// Throws std::invalid_argument when the spec breaks its invariants.
    void validate() const;
    std::string label() const;  // "mfa+ptrue"
};

struct CombinedAnswer {
    std::string question_id;
    std::string answer;
    double confidence = 0.0;
};

/// Picks each member's record out of `records` (any order) and mixes their
/// confidences.
CombinedAnswer combine(std::span<const ElicitationRecord> records, const EnsembleSpec& spec);

/// Member confidences for one question, with correctness of the answer
/// source's answer.
struct EnsembleRow {
    std::string question_id;
    std::vector<double> confidences;
    bool correct = false;
};

/// Joins per-member scored predictions on question id. Questions missing
/// from any member are dropped; correctness comes from member
/// `answer_source`.
std::vector<EnsembleRow> join_members(std::span<const std::vector<ScoredPrediction>> per_member,
                                      std::size_t answer_source = 0);

std::vector<ScoredPrediction> ensemble_predictions(std::span<const EnsembleRow> rows,
                                                   std::span<const double> weights);
/// Scores a single member as if it were the whole ensemble.
std::vector<ScoredPrediction> member_predictions(std::span<const EnsembleRow> rows, std::size_t member);

struct WeightFit {
    EnsembleSpec spec;
    double objective = 0.0;
    std::size_t evaluated = 0;  // grid points examined
};

/// Exhaustive search over the weight simplex on a grid of `grid_step`.
/// Ties go to the larger first weight, then the larger second. Objective
/// defaults to AUROC; a single-class train set throws UndefinedMetric.
WeightFit fit_weights(std::span<const EnsembleRow> train, std::vector<Method> members,
                      double grid_step = kDefaultGridStep, const MetricFn& objective = {},
                      int parallelism = 1);

struct SplitResult {
    std::vector<double> weights;
    double test_objective = 0.0;
    std::vector<double> member_test_objectives;
};

struct SplitStability {
    std::vector<SplitResult> splits;
    std::vector<MeanStd> weights;  // per member
    MeanStd test_objective;
    std::vector<MeanStd> member_test_objectives;
    /// Mean ensemble test objective minus the best member's mean.
    double gain_over_best_member = 0.0;
};

/// Random 50/50 question splits; fits on each train half and scores the
/// paired test half. Needs at least 20 rows.
SplitStability split_stability(std::span<const EnsembleRow> rows, const std::vector<Method>& members,
                               int n_splits = 5, std::uint64_t seed = 0,
                               double grid_step = kDefaultGridStep, const MetricFn& objective = {});

std::string ensemble_to_json(const EnsembleSpec& spec);
EnsembleSpec ensemble_from_json(std::string_view text);

}  // namespace tabcal
