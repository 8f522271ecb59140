#pragma once

#include "tabcal/synthetic.hpp"

#include <json.hpp>

namespace tabcal::detail {

inline nlohmann::ordered_json profile_json(const SyntheticProfile& p) {
    nlohmann::ordered_json j;
    j["rho"] = p.rho;
    j["beta"] = p.beta;
    j["input_error_share"] = p.input_error_share;
    j["input_flip_gold"] = p.input_flip_gold;
    j["correct_flip_rate"] = p.correct_flip_rate;
    j["verbalized_signal"] = p.verbalized_signal;
    j["verbalized_noise"] = p.verbalized_noise;
    j["ptrue_signal"] = p.ptrue_signal;
    j["ptrue_noise"] = p.ptrue_noise;
    j["known_sample_stability"] = p.known_sample_stability;
    j["input_sample_stability"] = p.input_sample_stability;
    j["output_sample_gold"] = p.output_sample_gold;
    j["output_sample_repeat"] = p.output_sample_repeat;
    j["verbose_rate"] = p.verbose_rate;
    j["malformed_rate"] = p.malformed_rate;
    return j;
}

inline SyntheticProfile profile_from_json(const nlohmann::json& j) {
    SyntheticProfile p;
    p.rho = j.value("rho", p.rho);
    p.beta = j.value("beta", p.beta);
    p.input_error_share = j.value("input_error_share", p.input_error_share);
    p.input_flip_gold = j.value("input_flip_gold", p.input_flip_gold);
    p.correct_flip_rate = j.value("correct_flip_rate", p.correct_flip_rate);
    p.verbalized_signal = j.value("verbalized_signal", p.verbalized_signal);
    p.verbalized_noise = j.value("verbalized_noise", p.verbalized_noise);
    p.ptrue_signal = j.value("ptrue_signal", p.ptrue_signal);
    p.ptrue_noise = j.value("ptrue_noise", p.ptrue_noise);
    p.known_sample_stability = j.value("known_sample_stability", p.known_sample_stability);
    p.input_sample_stability = j.value("input_sample_stability", p.input_sample_stability);
    p.output_sample_gold = j.value("output_sample_gold", p.output_sample_gold);
    p.output_sample_repeat = j.value("output_sample_repeat", p.output_sample_repeat);
    p.verbose_rate = j.value("verbose_rate", p.verbose_rate);
    p.malformed_rate = j.value("malformed_rate", p.malformed_rate);
    return p;
}

}  // namespace tabcal::detail
