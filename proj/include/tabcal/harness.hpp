#pragma once

#include "tabcal/dataset.hpp"
#include "tabcal/elicitation.hpp"
#include "tabcal/inference.hpp"
#include "tabcal/metrics.hpp"
#include "tabcal/recalibration.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tabcal {

enum class RowStatus { Scored, Skipped, Failed };
std::string_view row_status_name(RowStatus s) noexcept;

/// One (provider, method, question) outcome. Skipped rows produced no
/// answer to judge; failed rows hit a provider or elicitation error.
struct ResultRow {
    std::string provider;
    std::string method;
    std::string question_id;
    std::string source;
    std::string question_type;
    RowStatus status = RowStatus::Scored;
    std::string answer;
    double confidence = 0.0;
    bool correct = false;
    bool strict_correct = false;
    MatchType match_type = MatchType::None;
    int api_calls = 0;
    std::string gold;  // '|'-joined
    std::string flags;  // ';'-joined
    StructuralFeatures features;
};

struct CallRow {
    std::string provider;
    std::string method;
    std::string question_id;
    std::string label;
    std::string parsed_answer;
};

struct RunConfig {
    std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
    MethodConfig method;
    PromptTemplates templates = PromptTemplates::defaults();
    /// Questions elicited concurrently.
    int parallelism = 4;
    std::optional<std::filesystem::path> cache;
    /// With a cache, never call the providers; a miss fails the row.
    bool replay = false;
};

struct ReportOptions {
    BootstrapOptions bootstrap;  // AUROC intervals and paired tests
    int reliability_grid = 101;
    BootstrapBand band;
    std::vector<int> k_values = {2, 3, 4};
};

struct MethodSummary {
    std::string provider;
    std::string method;
    std::size_t loaded = 0, scored = 0, skipped = 0, failed = 0;
    std::size_t unparsed = 0;  // scored rows whose response needed a fallback or default
    std::optional<double> accuracy, mean_confidence, gap, smece, ece10, ece15, ece20, brier;
    std::optional<double> auroc, auroc_lower, auroc_upper;
    std::optional<double> strict_accuracy, strict_auroc;
    std::optional<double> separability, saturation;
    std::optional<double> calls_per_question;
};

struct KAblationRow {
    std::string provider;
    int k = 0;
    std::size_t subsets = 0;
    std::optional<double> accuracy, auroc, ece10, saturation;  // means over subsets
};

struct FormatSubsetRow {
    std::string provider;
    std::string formats;  // "markdown+csv"
    int k = 0;
    std::optional<double> accuracy, auroc, ece10, saturation;
};

struct GroupRow {
    std::string provider;
    std::string method;
    std::string group;  // question type or match type
    std::size_t n = 0;
    double fraction = 0.0;
    std::optional<double> accuracy, mean_confidence, auroc;
};

struct NamedCurve {
    std::string provider;
    std::string method;
    CurveData curve;
};

struct SignificanceEntry {
    std::string provider;
    SignificanceRow row;
};

struct RunReport {
    std::vector<ResultRow> rows;
    std::vector<CallRow> calls;
    std::vector<MethodSummary> summaries;
    std::vector<NamedCurve> reliability;
    std::vector<NamedCurve> risk_coverage;
    std::vector<KAblationRow> k_ablation;
    std::vector<FormatSubsetRow> format_subsets;
    std::vector<GroupRow> question_types;
    std::vector<GroupRow> match_types;
    std::vector<SignificanceEntry> significance;
    ReportOptions options;
};

struct RunStats {
    std::uint64_t provider_calls = 0;  // calls that reached a backend
    std::uint64_t cache_hits = 0;
};

/// Elicits every requested method for every item and provider and judges
/// the answers. Self-consistency samples are reused for semantic entropy.
/// Rows come out in (provider, method, item) order whatever the scheduling.
std::pair<std::vector<ResultRow>, std::vector<CallRow>> run_elicitation(
    const std::vector<QAItem>& items, const std::vector<ModelProvider*>& providers, const RunConfig& config,
    RunStats* stats = nullptr);

/// Summaries and analysis blocks, computed from rows and calls alone.
RunReport build_report(std::vector<ResultRow> rows, std::vector<CallRow> calls, const ReportOptions& options);

RunReport run_matrix(const std::vector<QAItem>& items, const std::vector<ModelProvider*>& providers,
                     const RunConfig& config, const ReportOptions& options = {}, RunStats* stats = nullptr);

/// Per-method summary from rows of one (provider, method).
MethodSummary summarize(std::span<const ResultRow> rows, const BootstrapOptions& bootstrap);

/// Scored predictions of one (provider, method), in row order.
std::vector<ScoredPrediction> scored_predictions(std::span<const ResultRow> rows, const std::string& provider,
                                                 const std::string& method, bool strict = false);
std::vector<FeaturedPrediction> featured_predictions(std::span<const ResultRow> rows, const std::string& provider,
                                                     const std::string& method);

/// Re-judges answers against the stored gold lists.
void rejudge(std::vector<ResultRow>& rows);

/// Writes summary.json, rows.csv, calls.csv, curves/ and analysis/.
void emit_report(const RunReport& report, const std::filesystem::path& out_dir);

std::string rows_to_csv(std::span<const ResultRow> rows);
std::vector<ResultRow> rows_from_csv(std::string_view text);
std::string calls_to_csv(std::span<const CallRow> calls);
std::vector<CallRow> calls_from_csv(std::string_view text);
std::string summary_json(const RunReport& report);
/// The report options recorded in a summary.json, so a rebuild can reproduce it.
ReportOptions report_options_from_summary(std::string_view summary);

}  // namespace tabcal
