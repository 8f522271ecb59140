#include "tabcal/elicitation.hpp"
#include "tabcal/answer.hpp"
#include "tabcal/text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

namespace tabcal {

std::string_view method_name(Method method) noexcept {
    switch (method) {
        case Method::Verbalized: return "verbalized";
        case Method::PTrue: return "ptrue";
        case Method::SelfConsistency: return "self_consistency";
        case Method::SemanticEntropy: return "semantic_entropy";
        case Method::MFA: return "mfa";
    }
    return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
    for (auto m : kAllMethods) {
        if (method_name(m) == name) return m;
    }
    if (name == "sc") return Method::SelfConsistency;
    if (name == "se") return Method::SemanticEntropy;
    if (name == "p_true") return Method::PTrue;
    return std::nullopt;
}

void MethodConfig::validate() const {
    if (n_samples < 2) throw std::invalid_argument("n_samples must be at least 2");
    if (formats.empty() || formats.size() > 4) throw std::invalid_argument("between 1 and 4 formats required");
    for (std::size_t i = 0; i < formats.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (formats[i] == formats[j]) throw std::invalid_argument("duplicate format in MFA list");
        }
    }
    if (!(sample_temperature >= 0.0) || !(mfa_temperature >= 0.0)) {
        throw std::invalid_argument("temperatures must be non-negative");
    }
    if (parallelism < 1) throw std::invalid_argument("parallelism must be at least 1");
}

bool ElicitationRecord::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

// ------------------------------------------------------------ prompts

PromptTemplates PromptTemplates::defaults() {
    PromptTemplates t;
    t.verbalized =
        "You are a precise tabular data analyst. You will be given a table and a question about "
        "the table. Answer the question based only on the information in the table.\n"
        "\n"
        "Table: {serialized_table}\n"
        "\n"
        "Question: {question}\n"
        "\n"
        "Respond in the following JSON format exactly:\n"
        "{\"answer\": \"<your answer>\",\n"
        " \"confidence\": <integer 0-100>,\n"
        " \"reasoning\": \"<brief explanation>\"}";
    t.answer_only =
        "You are a precise tabular data analyst. You will be given a table and a question about "
        "the table. Answer the question based only on the information in the table.\n"
        "\n"
        "Table: {serialized_table}\n"
        "\n"
        "Question: {question}\n"
        "\n"
        "Respond in the following JSON format exactly:\n"
        "{\"answer\": \"<your answer>\",\n"
        " \"reasoning\": \"<brief explanation>\"}";
    t.ptrue =
        "You are a precise tabular data analyst. You will be given a table, a question about the "
        "table, and a proposed answer. Judge the proposed answer based only on the information in "
        "the table.\n"
        "\n"
        "Table: {serialized_table}\n"
        "\n"
        "Question: {question}\n"
        "\n"
        "Proposed answer: {answer}\n"
        "\n"
        "Is the proposed answer correct? Respond in the following JSON format exactly:\n"
        "{\"probability\": <integer 0-100, the probability that the proposed answer is correct>}";
    return t;
}

PromptTemplates PromptTemplates::load(const std::filesystem::path& dir) {
    PromptTemplates t = defaults();
    const auto read = [&](const char* file, std::string& into) {
        const auto path = dir / file;
        if (!std::filesystem::exists(path)) return;
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot read prompt template " + path.string());
        std::ostringstream ss;
        ss << in.rdbuf();
        into = ss.str();
    };
    read("verbalized.txt", t.verbalized);
    read("answer_only.txt", t.answer_only);
    read("ptrue.txt", t.ptrue);
    return t;
}

std::string render_prompt(std::string_view tmpl, std::string_view serialized_table,
                          std::string_view question, std::string_view answer) {
    while (!serialized_table.empty() && serialized_table.back() == '\n') serialized_table.remove_suffix(1);
    return text::substitute(tmpl, {{"serialized_table", std::string(serialized_table)},
                                   {"question", std::string(question)},
                                   {"answer", std::string(answer)}});
}

// ------------------------------------------------------------ parsing

namespace {

std::optional<nlohmann::json> find_json_object(std::string_view raw) {
    const auto open = raw.find('{');
    const auto close = raw.rfind('}');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        return std::nullopt;
    }
    auto j = nlohmann::json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    return j;
}

std::optional<std::string> json_scalar_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number()) return text::format_double(v.get<double>());
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    return std::nullopt;
}

void set_confidence(ParsedResponse& out, double value) {
    if (value < 0.0 || value > 100.0) {
        out.out_of_range = true;
        value = std::clamp(value, 0.0, 100.0);
    }
    out.confidence = value / 100.0;
}

}  // namespace

ParsedResponse parse_structured(std::string_view raw, std::string_view confidence_key) {
    ParsedResponse out;
    const auto j = find_json_object(raw);
    if (!j) return out;
    if (const auto it = j->find("answer"); it != j->end()) out.answer = json_scalar_text(*it);
    if (!confidence_key.empty()) {
        if (const auto it = j->find(std::string(confidence_key)); it != j->end()) {
            std::optional<double> v;
            if (it->is_number()) {
                v = it->get<double>();
            } else if (it->is_string()) {
                v = text::parse_number(text::trim(it->get<std::string>()));
            }
            if (v && std::isfinite(*v)) set_confidence(out, *v);
        }
    }
    return out;
}

ParsedResponse parse_fallback(std::string_view raw, std::string_view confidence_key) {
    ParsedResponse out;
    const std::string s(raw);
    static const std::regex answer_re(R"re("answer"\s*:\s*"((?:[^"\\]|\\.)*)")re", std::regex::icase);
    std::smatch m;
    if (std::regex_search(s, m, answer_re)) out.answer = m[1].str();

    static const std::regex number_re(R"(-?\d+(?:\.\d+)?)");
    std::string::const_iterator from = s.begin();
    if (!confidence_key.empty()) {
        const std::string lower = text::to_lower(s);
        const auto pos = lower.find(text::to_lower(confidence_key));
        if (pos == std::string::npos) return out;
        from = s.begin() + static_cast<std::ptrdiff_t>(pos + confidence_key.size());
    }
    if (std::regex_search(from, s.end(), m, number_re)) {
        if (auto v = text::parse_number(m[0].str()); v) set_confidence(out, *v);
    }
    return out;
}

std::string parse_answer_only(std::string_view raw, bool& parsed) {
    const auto p = parse_structured(raw, {});
    if (p.answer) {
        parsed = true;
        return *p.answer;
    }
    const auto f = parse_fallback(raw, "confidence");
    if (f.answer) {
        parsed = true;
        return *f.answer;
    }
    parsed = false;
    return std::string(text::trim(raw));
}

// ------------------------------------------------------------ agreement

Majority majority_vote(std::span<const std::string> answers) {
    if (answers.empty()) throw std::invalid_argument("majority vote over no answers");
    std::map<std::string, std::pair<std::size_t, std::size_t>> clusters;  // canonical -> (count, first)
    for (std::size_t i = 0; i < answers.size(); ++i) {
        auto [it, inserted] = clusters.try_emplace(normalize(answers[i]).canonical, 0, i);
        ++it->second.first;
    }
    Majority best;
    for (const auto& [canonical, info] : clusters) {
        // Map iteration is in ascending canonical order, so a strict
        // comparison keeps the smallest canonical among ties.
        if (info.first > best.size) best = {canonical, info.first, info.second};
    }
    return best;
}

double semantic_entropy_confidence(std::span<const std::string> answers) {
    if (answers.size() < 2) throw std::invalid_argument("semantic entropy needs at least two samples");
    std::map<std::string, std::size_t> clusters;
    for (const auto& a : answers) ++clusters[normalize(a).canonical];
    const double n = static_cast<double>(answers.size());
    double h = 0.0;
    for (const auto& [canonical, count] : clusters) {
        const double p = static_cast<double>(count) / n;
        h -= p * std::log2(p);
    }
    return std::clamp(1.0 - h / std::log2(n), 0.0, 1.0);
}

// ------------------------------------------------------------ methods

namespace {

const Table& table_of(const ElicitationInput& input) {
    if (input.table == nullptr) throw std::invalid_argument("elicitation input has no table");
    validate(*input.table);
    if (text::trim(input.question).empty()) throw std::invalid_argument("question is empty");
    return *input.table;
}

CompletionRequest request(const ElicitationInput& input, Method method, std::string label,
                          std::string prompt, double temperature,
                          std::optional<std::int64_t> seed = std::nullopt) {
    return {std::move(prompt), temperature, seed,
            CallTag{std::string(method_name(method)), input.question_id, std::move(label)}};
}

struct CallOutcome {
    std::optional<std::string> raw;
    std::string error;
};

/// Issues the requests with at most `parallelism` in flight. Provider
/// failures are captured per call; results keep request order.
std::vector<CallOutcome> run_calls(ModelProvider& provider, const std::vector<CompletionRequest>& reqs,
                                   int parallelism) {
    std::vector<CallOutcome> out(reqs.size());
    const auto one = [&](std::size_t i) {
        try {
            out[i].raw = provider.complete(reqs[i]);
        } catch (const ProviderError& e) {
            out[i].error = e.what();
        }
    };
    const auto workers = static_cast<std::size_t>(std::max(1, parallelism));
    if (workers == 1 || reqs.size() < 2) {
        for (std::size_t i = 0; i < reqs.size(); ++i) one(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(workers, reqs.size()); ++w) {
        pool.emplace_back([&] {
            try {
                for (std::size_t i = next++; i < reqs.size(); i = next++) one(i);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
    return out;
}

/// Shared tail of the agreement methods: parse each usable call, vote, and
/// fill the record. `labels` match `reqs`.
ElicitationRecord agreement_record(const ElicitationInput& input, Method method,
                                   const std::vector<CompletionRequest>& reqs,
                                   const std::vector<CallOutcome>& outcomes) {
    ElicitationRecord rec;
    rec.question_id = input.question_id;
    rec.method = method;
    rec.api_calls = static_cast<int>(reqs.size());
    std::vector<std::string> answers;
    bool any_unparsed = false;
    for (std::size_t i = 0; i < reqs.size(); ++i) {
        if (!outcomes[i].raw) {
            rec.flags.push_back("call-failed:" + reqs[i].tag.label);
            continue;
        }
        bool parsed = false;
        std::string answer = parse_answer_only(*outcomes[i].raw, parsed);
        any_unparsed = any_unparsed || !parsed;
        rec.per_call.push_back({reqs[i].tag.label, *outcomes[i].raw, answer});
        answers.push_back(std::move(answer));
    }
    if (answers.size() < 2) {
        throw ElicitationError(std::string(method_name(method)) + " for question '" +
                               input.question_id + "': fewer than 2 usable responses");
    }
    if (any_unparsed) rec.flags.push_back("unparsed-answer");
    return rec;
}

void finish_majority(ElicitationRecord& rec) {
    std::vector<std::string> answers;
    for (const auto& c : rec.per_call) answers.push_back(c.parsed_answer);
    const Majority maj = majority_vote(answers);
    rec.answer = answers[maj.representative];
    rec.confidence = static_cast<double>(maj.size) / static_cast<double>(answers.size());
}

std::vector<CompletionRequest> sample_requests(const ElicitationInput& input, Method method,
                                               const MethodConfig& cfg, const PromptTemplates& templates) {
    const std::string prompt = render_prompt(
        templates.answer_only, serialize(*input.table, SerializationFormat::Markdown), input.question);
    std::vector<CompletionRequest> reqs;
    for (int i = 0; i < cfg.n_samples; ++i) {
        reqs.push_back(request(input, method, std::to_string(i), prompt, cfg.sample_temperature,
                               cfg.base_seed * 1000 + i));
    }
    return reqs;
}

}  // namespace

ElicitationRecord elicit_verbalized(ModelProvider& provider, const ElicitationInput& input,
                                    const PromptTemplates& templates) {
    const Table& table = table_of(input);
    const std::string prompt =
        render_prompt(templates.verbalized, serialize(table, SerializationFormat::Markdown), input.question);
    ElicitationRecord rec;
    rec.question_id = input.question_id;
    rec.method = Method::Verbalized;

    const std::string first = provider.complete(request(input, Method::Verbalized, "main", prompt, 0.0));
    rec.api_calls = 1;
    rec.per_call.push_back({"main", first, ""});
    std::vector<std::string> raws = {first};

    ParsedResponse p = parse_structured(first, "confidence");
    if (!(p.answer && p.confidence)) {
        rec.flags.push_back("retried");
        try {
            const std::string second =
                provider.complete(request(input, Method::Verbalized, "retry", prompt, 0.0));
            ++rec.api_calls;
            rec.per_call.push_back({"retry", second, ""});
            raws.push_back(second);
            p = parse_structured(second, "confidence");
        } catch (const ProviderError&) {
            ++rec.api_calls;
            rec.flags.push_back("call-failed:retry");
        }
    }
    if (!(p.answer && p.confidence)) {
        p = {};
        for (auto it = raws.rbegin(); it != raws.rend() && !p.confidence; ++it) {
            p = parse_fallback(*it, "confidence");
            if (p.confidence && !p.answer) p.answer = std::string(text::trim(*it));
        }
        if (p.confidence) rec.flags.push_back("fallback");
    }
    if (p.answer && p.confidence) {
        rec.answer = *p.answer;
        rec.confidence = *p.confidence;
        if (p.out_of_range) rec.flags.push_back("out-of-range");
    } else {
        rec.answer = std::string(text::trim(raws.back()));
        rec.confidence = 0.5;
        rec.flags.push_back("unparsed");
    }
    rec.per_call.back().parsed_answer = rec.answer;
    return rec;
}

ElicitationRecord elicit_ptrue(ModelProvider& provider, const ElicitationInput& input,
                               const PromptTemplates& templates) {
    const Table& table = table_of(input);
    const std::string table_text = serialize(table, SerializationFormat::Markdown);
    ElicitationRecord rec;
    rec.question_id = input.question_id;
    rec.method = Method::PTrue;

    const std::string raw1 = provider.complete(request(
        input, Method::PTrue, "pass1", render_prompt(templates.answer_only, table_text, input.question), 0.0));
    bool parsed = false;
    rec.answer = parse_answer_only(raw1, parsed);
    if (!parsed) rec.flags.push_back("unparsed-answer");
    rec.per_call.push_back({"pass1", raw1, rec.answer});

    const std::string raw2 = provider.complete(
        request(input, Method::PTrue, "pass2",
                render_prompt(templates.ptrue, table_text, input.question, rec.answer), 0.0));
    rec.api_calls = 2;
    rec.per_call.push_back({"pass2", raw2, rec.answer});

    ParsedResponse p = parse_structured(raw2, "probability");
    if (!p.confidence) {
        p = parse_fallback(raw2, "probability");
        if (!p.confidence) p = parse_fallback(raw2, {});
        if (p.confidence) rec.flags.push_back("fallback");
    }
    if (p.confidence) {
        rec.confidence = *p.confidence;
        if (p.out_of_range) rec.flags.push_back("out-of-range");
    } else {
        rec.confidence = 0.5;
        rec.flags.push_back("unparsed");
    }
    return rec;
}

ElicitationRecord elicit_self_consistency(ModelProvider& provider, const ElicitationInput& input,
                                          const MethodConfig& cfg, const PromptTemplates& templates) {
    cfg.validate();
    table_of(input);
    const auto reqs = sample_requests(input, Method::SelfConsistency, cfg, templates);
    auto rec = agreement_record(input, Method::SelfConsistency, reqs, run_calls(provider, reqs, cfg.parallelism));
    finish_majority(rec);
    return rec;
}

ElicitationRecord elicit_semantic_entropy(ModelProvider& provider, const ElicitationInput& input,
                                          const MethodConfig& cfg, const ElicitationRecord* shared,
                                          const PromptTemplates& templates) {
    cfg.validate();
    table_of(input);
    ElicitationRecord rec;
    if (shared != nullptr) {
        if (shared->question_id != input.question_id) {
            throw std::invalid_argument("shared samples belong to a different question");
        }
        if (shared->per_call.size() < 2) {
            throw ElicitationError("shared samples hold fewer than 2 usable responses");
        }
        rec.question_id = input.question_id;
        rec.method = Method::SemanticEntropy;
        rec.per_call = shared->per_call;
        rec.api_calls = 0;
        rec.flags = shared->flags;
        rec.flags.push_back("shared-samples");
    } else {
        const auto reqs = sample_requests(input, Method::SemanticEntropy, cfg, templates);
        rec = agreement_record(input, Method::SemanticEntropy, reqs, run_calls(provider, reqs, cfg.parallelism));
    }
    std::vector<std::string> answers;
    for (const auto& c : rec.per_call) answers.push_back(c.parsed_answer);
    const Majority maj = majority_vote(answers);
    rec.answer = answers[maj.representative];
    rec.confidence = semantic_entropy_confidence(answers);
    return rec;
}

ElicitationRecord elicit_mfa(ModelProvider& provider, const ElicitationInput& input,
                             const MethodConfig& cfg, const PromptTemplates& templates) {
    cfg.validate();
    if (cfg.formats.size() < 2) throw std::invalid_argument("MFA needs at least two formats");
    const Table& table = table_of(input);
    std::vector<CompletionRequest> reqs;
    for (std::size_t k = 0; k < cfg.formats.size(); ++k) {
        const auto f = cfg.formats[k];
        std::optional<std::int64_t> seed;
        if (cfg.mfa_temperature > 0.0) seed = cfg.base_seed * 1000 + static_cast<std::int64_t>(k);
        reqs.push_back(request(input, Method::MFA, std::string(format_name(f)),
                               render_prompt(templates.answer_only, serialize(table, f), input.question),
                               cfg.mfa_temperature, seed));
    }
    auto rec = agreement_record(input, Method::MFA, reqs, run_calls(provider, reqs, cfg.parallelism));
    finish_majority(rec);
    return rec;
}

std::vector<ElicitationRecord> mfa_subset_records(const ElicitationRecord& record, int k) {
    if (record.method != Method::MFA) throw std::invalid_argument("subset records need an MFA record");
    const auto m = static_cast<int>(record.per_call.size());
    if (m < 2) throw std::invalid_argument("MFA record lacks per-format answers");
    if (k < 2 || k > m) throw std::invalid_argument("subset size must lie in [2, number of formats]");
    std::vector<ElicitationRecord> out;
    std::vector<int> idx(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
    while (true) {
        ElicitationRecord sub;
        sub.question_id = record.question_id;
        sub.method = Method::MFA;
        sub.api_calls = k;
        for (int i : idx) sub.per_call.push_back(record.per_call[static_cast<std::size_t>(i)]);
        finish_majority(sub);
        out.push_back(std::move(sub));
        // Advance to the next combination in lexicographic order.
        int pos = k - 1;
        while (pos >= 0 && idx[static_cast<std::size_t>(pos)] == m - k + pos) --pos;
        if (pos < 0) break;
        ++idx[static_cast<std::size_t>(pos)];
        for (int j = pos + 1; j < k; ++j) idx[static_cast<std::size_t>(j)] = idx[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

}  // namespace tabcal
