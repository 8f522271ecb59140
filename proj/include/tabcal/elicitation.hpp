#pragma once

#include "tabcal/provider.hpp"
#include "tabcal/table.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tabcal {

enum class Method { Verbalized, PTrue, SelfConsistency, SemanticEntropy, MFA };

inline constexpr std::array<Method, 5> kAllMethods = {Method::Verbalized, Method::PTrue,
                                                      Method::SelfConsistency,
                                                      Method::SemanticEntropy, Method::MFA};

std::string_view method_name(Method method) noexcept;
std::optional<Method> parse_method(std::string_view name);

struct MethodConfig {
    int n_samples = 5;
    double sample_temperature = 0.7;
    std::vector<SerializationFormat> formats{kAllFormats.begin(), kAllFormats.end()};
    double mfa_temperature = 0.0;
    /// Sample i of a sampling method uses seed base_seed * 1000 + i.
    std::int64_t base_seed = 42;
    /// Upper bound on concurrent provider calls within one record.
    int parallelism = 1;

    void validate() const;
};

struct CallRecord {
    std::string label;
    std::string raw;
    std::string parsed_answer;
};

struct ElicitationRecord {
    std::string question_id;
    Method method = Method::Verbalized;
    std::string answer;
    double confidence = 0.0;
    std::vector<CallRecord> per_call;
    int api_calls = 0;
    /// "unparsed", "out-of-range", "call-failed:<label>", "retried", ...
    std::vector<std::string> flags;

    bool has_flag(std::string_view flag) const;
};

/// Prompt text with {serialized_table}, {question} and {answer} placeholders.
struct PromptTemplates {
    std::string verbalized;
    std::string answer_only;
    std::string ptrue;

    static PromptTemplates defaults();
    /// Reads verbalized.txt, answer_only.txt and ptrue.txt from `dir`; any
    /// missing file keeps its default.
    static PromptTemplates load(const std::filesystem::path& dir);
};

std::string render_prompt(std::string_view tmpl, std::string_view serialized_table,
                          std::string_view question, std::string_view answer = {});

/// What a single response yielded after parsing.
struct ParsedResponse {
    std::optional<std::string> answer;
    /// In [0,1] after scaling from 0-100 and clamping.
    std::optional<double> confidence;
    bool out_of_range = false;
};

/// Structured JSON first ({"answer", "confidence"}), no fallback.
ParsedResponse parse_structured(std::string_view raw, std::string_view confidence_key);
/// Regex fallback: first quoted "answer" value and the first number after
/// the confidence key.
ParsedResponse parse_fallback(std::string_view raw, std::string_view confidence_key);
/// The answer field of an answer-only response, else the trimmed raw text.
std::string parse_answer_only(std::string_view raw, bool& parsed);

struct Majority {
    std::string canonical;
    std::size_t size = 0;
    std::size_t representative = 0;  // index of the first answer in the cluster
};

/// Clusters answers by normalized canonical form; ties between the largest
/// clusters go to the lexicographically smallest canonical.
Majority majority_vote(std::span<const std::string> answers);

/// 1 - H / log2(N) over canonical clusters, H in bits.
double semantic_entropy_confidence(std::span<const std::string> answers);

struct ElicitationInput {
    std::string question_id;
    const Table* table = nullptr;
    std::string question;
};

ElicitationRecord elicit_verbalized(ModelProvider& provider, const ElicitationInput& input,
                                    const PromptTemplates& templates = PromptTemplates::defaults());

ElicitationRecord elicit_ptrue(ModelProvider& provider, const ElicitationInput& input,
                               const PromptTemplates& templates = PromptTemplates::defaults());

ElicitationRecord elicit_self_consistency(ModelProvider& provider, const ElicitationInput& input,
                                          const MethodConfig& cfg,
                                          const PromptTemplates& templates = PromptTemplates::defaults());

/// With `shared` (a self-consistency record for the same question) no new
/// calls are made.
ElicitationRecord elicit_semantic_entropy(ModelProvider& provider, const ElicitationInput& input,
                                          const MethodConfig& cfg,
                                          const ElicitationRecord* shared = nullptr,
                                          const PromptTemplates& templates = PromptTemplates::defaults());

ElicitationRecord elicit_mfa(ModelProvider& provider, const ElicitationInput& input,
                             const MethodConfig& cfg,
                             const PromptTemplates& templates = PromptTemplates::defaults());

/// Rebuilds MFA answer and confidence on every size-k subset of the stored
/// per-format answers, in lexicographic subset order.
std::vector<ElicitationRecord> mfa_subset_records(const ElicitationRecord& record, int k);

class ElicitationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace tabcal
