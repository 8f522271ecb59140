#pragma once

// A deterministic stand-in for a chat model, used for offline runs and the
// acceptance suite. Each registered question carries a latent probability of
// being answered correctly; wrong answers come in two kinds:
//
//   input errors   the model misreads the table, so other serializations
//                  may change the answer (format sensitivity rho) while
//                  resampling the same prompt mostly repeats it;
//   output errors  the model settles on a wrong answer in every format, but
//                  resampling at temperature > 0 is unstable.
//
// Verbalized and P(True) confidences are centred on 0.55 + beta with a weak
// correctness signal, so they are overconfident and barely discriminative.

#include "tabcal/provider.hpp"

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <vector>

namespace tabcal {

struct SyntheticTruth {
    std::string gold;
    std::vector<std::string> distractors;  // at least one
    double p_correct = 0.5;
};

struct SyntheticProfile {
    double rho = 0.5;                  // flip probability of a non-canonical format on input errors
    double beta = 0.3;                 // overconfidence shift of self-reported confidence
    double input_error_share = 0.7;    // fraction of errors that are input errors
    double input_flip_gold = 0.25;     // share of those flips that land on the gold answer
    double correct_flip_rate = 0.05;   // format flips when the answer is known
    double verbalized_signal = 0.01;   // confidence bump when correct
    double verbalized_noise = 0.10;
    double ptrue_signal = 0.02;
    double ptrue_noise = 0.12;
    double known_sample_stability = 0.9;
    double input_sample_stability = 0.85;
    double output_sample_gold = 0.35;
    double output_sample_repeat = 0.35;
    double verbose_rate = 0.0;         // verbalized answers wrapped in a sentence
    double malformed_rate = 0.0;       // responses that ignore the JSON format
};

enum class SyntheticErrorKind { None, Input, Output };

struct SyntheticLatent {
    bool knows = false;
    SyntheticErrorKind error = SyntheticErrorKind::None;
    std::string wrong;  // the answer the model settles on when it errs
};

class SyntheticRespondent : public ModelProvider {
public:
    SyntheticRespondent(SyntheticProfile profile, std::uint64_t seed);

    void add_question(const std::string& question_id, SyntheticTruth truth);
    bool has_question(const std::string& question_id) const;

    /// Uses request.tag.question_id to find the registered question.
    std::string complete(const CompletionRequest& request) override;
    std::string name() const override { return "synthetic"; }
    /// Distinguishes profiles and seeds so caches never mix them.
    std::string model() const override;

    SyntheticLatent latent(const std::string& question_id) const;
    std::uint64_t calls() const noexcept { return calls_.load(); }
    const SyntheticProfile& profile() const noexcept { return profile_; }

private:
    const SyntheticTruth& truth(const std::string& question_id) const;
    std::string format_answer(const std::string& qid, const SyntheticLatent& lat,
                              const std::string& format) const;
    std::string sample_answer(const std::string& qid, const SyntheticLatent& lat,
                              const std::string& format, std::int64_t seed) const;
    double unit(std::uint64_t a, const std::string& qid, std::string_view salt) const;

    SyntheticProfile profile_;
    std::uint64_t seed_;
    mutable std::mutex mutex_;
    std::map<std::string, SyntheticTruth> questions_;
    std::atomic<std::uint64_t> calls_{0};
};

}  // namespace tabcal
