#include "tabcal/synthetic.hpp"
#include "tabcal/answer.hpp"
#include "tabcal/rng.hpp"
#include "tabcal/text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace tabcal {

namespace {

enum class PromptKind { Verbalized, AnswerOnly, PTrue };

PromptKind prompt_kind(std::string_view prompt) {
    if (prompt.find("Proposed answer:") != std::string_view::npos) return PromptKind::PTrue;
    if (prompt.find("\"confidence\"") != std::string_view::npos) return PromptKind::Verbalized;
    return PromptKind::AnswerOnly;
}

std::string detect_format(std::string_view prompt) {
    const auto pos = prompt.find("Table: ");
    if (pos == std::string_view::npos || pos + 7 >= prompt.size()) return "markdown";
    switch (prompt[pos + 7]) {
        case '|': return "markdown";
        case '<': return "html";
        case '[': return "json";
        default: return "csv";
    }
}

std::string line_after(std::string_view prompt, std::string_view marker) {
    const auto pos = prompt.find(marker);
    if (pos == std::string_view::npos) return {};
    const auto start = pos + marker.size();
    const auto end = prompt.find('\n', start);
    return std::string(prompt.substr(start, end == std::string_view::npos ? end : end - start));
}

int to_percent_step5(double p) {
    const double clamped = std::clamp(p, 0.0, 1.0);
    return static_cast<int>(std::lround(clamped * 20.0)) * 5;
}

}  // namespace

SyntheticRespondent::SyntheticRespondent(SyntheticProfile profile, std::uint64_t seed)
    : profile_(profile), seed_(seed) {
    for (double v : {profile.rho, profile.input_error_share, profile.input_flip_gold, profile.correct_flip_rate,
                     profile.known_sample_stability, profile.input_sample_stability,
                     profile.output_sample_gold, profile.output_sample_repeat, profile.verbose_rate,
                     profile.malformed_rate}) {
        if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("synthetic profile rates must lie in [0,1]");
    }
    if (profile.output_sample_gold + profile.output_sample_repeat > 1.0) {
        throw std::invalid_argument("output-error sample shares exceed 1");
    }
}

void SyntheticRespondent::add_question(const std::string& question_id, SyntheticTruth truth) {
    if (truth.distractors.empty()) throw std::invalid_argument("synthetic question needs a distractor");
    if (!(truth.p_correct >= 0.0 && truth.p_correct <= 1.0)) {
        throw std::invalid_argument("p_correct must lie in [0,1]");
    }
    const std::lock_guard lock(mutex_);
    questions_[question_id] = std::move(truth);
}

bool SyntheticRespondent::has_question(const std::string& question_id) const {
    const std::lock_guard lock(mutex_);
    return questions_.count(question_id) != 0;
}

const SyntheticTruth& SyntheticRespondent::truth(const std::string& question_id) const {
    const std::lock_guard lock(mutex_);
    const auto it = questions_.find(question_id);
    if (it == questions_.end()) {
        throw ProviderError("synthetic respondent knows no question '" + question_id + "'", false);
    }
    return it->second;  // entries are never erased, so the reference stays valid
}

std::string SyntheticRespondent::model() const {
    const auto& p = profile_;
    std::uint64_t h = hash_combine(seed_, 0x5eed);
    for (double v : {p.rho, p.beta, p.input_error_share, p.input_flip_gold, p.correct_flip_rate, p.verbalized_signal,
                     p.verbalized_noise, p.ptrue_signal, p.ptrue_noise, p.known_sample_stability,
                     p.input_sample_stability, p.output_sample_gold, p.output_sample_repeat,
                     p.verbose_rate, p.malformed_rate}) {
        h = hash_combine(h, hash_string(text::format_double(v)));
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return std::string("respondent-") + buf;
}

double SyntheticRespondent::unit(std::uint64_t a, const std::string& qid, std::string_view salt) const {
    const std::uint64_t h =
        hash_combine(hash_combine(seed_, hash_string(qid)), hash_combine(hash_string(salt), a));
    return to_unit(splitmix64(h));
}

SyntheticLatent SyntheticRespondent::latent(const std::string& question_id) const {
    const SyntheticTruth& t = truth(question_id);
    SyntheticLatent lat;
    lat.knows = unit(0, question_id, "knows") < t.p_correct;
    if (lat.knows) return lat;
    lat.error = unit(0, question_id, "kind") < profile_.input_error_share ? SyntheticErrorKind::Input
                                                                         : SyntheticErrorKind::Output;
    const auto k = static_cast<std::size_t>(unit(0, question_id, "wrong") * static_cast<double>(t.distractors.size()));
    lat.wrong = t.distractors[std::min(k, t.distractors.size() - 1)];
    return lat;
}

namespace {

/// A distractor other than `avoid` when there is a choice.
const std::string& pick_other(const SyntheticTruth& t, const std::string& avoid, double u) {
    std::vector<const std::string*> pool;
    for (const auto& d : t.distractors) {
        if (d != avoid) pool.push_back(&d);
    }
    if (pool.empty()) return t.distractors.front();
    const auto k = std::min(static_cast<std::size_t>(u * static_cast<double>(pool.size())), pool.size() - 1);
    return *pool[k];
}

}  // namespace

std::string SyntheticRespondent::format_answer(const std::string& qid, const SyntheticLatent& lat,
                                               const std::string& format) const {
    const SyntheticTruth& t = truth(qid);
    const bool canonical = format == "markdown";
    switch (lat.error) {
        case SyntheticErrorKind::None:
            if (!canonical && unit(0, qid, "flip-known:" + format) < profile_.correct_flip_rate) {
                return pick_other(t, t.gold, unit(1, qid, "flip-known:" + format));
            }
            return t.gold;
        case SyntheticErrorKind::Input:
            if (!canonical && unit(0, qid, "flip-input:" + format) < profile_.rho) {
                return unit(1, qid, "flip-input:" + format) < profile_.input_flip_gold
                           ? t.gold
                           : pick_other(t, lat.wrong, unit(2, qid, "flip-input:" + format));
            }
            return lat.wrong;
        case SyntheticErrorKind::Output:
            return lat.wrong;
    }
    return t.gold;
}

std::string SyntheticRespondent::sample_answer(const std::string& qid, const SyntheticLatent& lat,
                                               const std::string& format, std::int64_t seed) const {
    const SyntheticTruth& t = truth(qid);
    const std::string base = format_answer(qid, lat, format);
    const auto s = static_cast<std::uint64_t>(seed);
    const std::string salt = "sample:" + format;
    const double u = unit(s, qid, salt);
    const double v = unit(s ^ 0x9e3779b97f4a7c15ULL, qid, salt);
    switch (lat.error) {
        case SyntheticErrorKind::None:
            return u < profile_.known_sample_stability ? base : pick_other(t, t.gold, v);
        case SyntheticErrorKind::Input:
            if (u < profile_.input_sample_stability) return base;
            return v < 0.5 ? t.gold : pick_other(t, base, v * 2.0 - 1.0);
        case SyntheticErrorKind::Output:
            if (u < profile_.output_sample_gold) return t.gold;
            if (u < profile_.output_sample_gold + profile_.output_sample_repeat) return lat.wrong;
            return pick_other(t, lat.wrong, v);
    }
    return base;
}

std::string SyntheticRespondent::complete(const CompletionRequest& request) {
    ++calls_;
    const std::string& qid = request.tag.question_id;
    const SyntheticTruth& t = truth(qid);
    const SyntheticLatent lat = latent(qid);
    const PromptKind kind = prompt_kind(request.prompt);
    const std::string format = detect_format(request.prompt);

    // Randomness for one call depends on what a real model would see:
    // the prompt kind, the format, and the sampling seed when hot.
    const bool hot = request.temperature > 0.0;
    const std::uint64_t call_key = hot && request.seed ? static_cast<std::uint64_t>(*request.seed) : 0;

    nlohmann::ordered_json j;
    if (kind == PromptKind::PTrue) {
        const std::string proposed = line_after(request.prompt, "Proposed answer: ");
        const bool right = normalize(proposed).canonical == normalize(t.gold).canonical;
        const double z = normal_from_uniforms(unit(call_key, qid, "ptrue-u1"), unit(call_key, qid, "ptrue-u2"));
        const double p = 0.5 + 0.8 * profile_.beta + profile_.ptrue_signal * (right ? 1.0 : 0.0) +
                         profile_.ptrue_noise * z;
        j["probability"] = to_percent_step5(p);
        return j.dump();
    }

    std::string answer = hot && request.seed ? sample_answer(qid, lat, format, *request.seed)
                                             : format_answer(qid, lat, format);
    if (unit(call_key, qid, "malformed:" + format) < profile_.malformed_rate) {
        return "I believe the answer is " + answer + ", and I am fairly sure.";
    }
    if (kind == PromptKind::Verbalized) {
        const bool right = answer == t.gold;
        if (unit(call_key, qid, "verbose") < profile_.verbose_rate) answer = "The answer is " + answer + ".";
        const double z = normal_from_uniforms(unit(call_key, qid, "verb-u1"), unit(call_key, qid, "verb-u2"));
        const double c = 0.55 + profile_.beta + profile_.verbalized_signal * (right ? 1.0 : 0.0) +
                         profile_.verbalized_noise * z;
        j["answer"] = answer;
        j["confidence"] = to_percent_step5(c);
        j["reasoning"] = "Read from the table.";
        return j.dump();
    }
    j["answer"] = answer;
    j["reasoning"] = "Read from the table.";
    return j.dump();
}

}  // namespace tabcal
