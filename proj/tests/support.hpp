#pragma once

// Hand-rolled generators shared by the property tests.

#include "tabcal/metrics.hpp"
#include "tabcal/rng.hpp"
#include "tabcal/table.hpp"

#include <string>
#include <vector>

namespace tabcal::testing {

inline Table alice_table() {
    Table t;
    t.id = "people";
    t.columns = {"Name", "Age", "City"};
    t.rows = {{"Alice", "30", "New York"}, {"Bob", "25", "San Francisco"}, {"Charlie", "35", "Chicago"}};
    return t;
}

inline std::string random_cell(Rng& rng) {
    static const std::vector<std::string> atoms = {
        "a", "Zed", "42", "-3.5", " ", ",", "\"", "|", "\\", "<b>", "&amp;", "'", "{", "}", "[",
        ":", "\n", "\r\n", "\t", "é", "日本", "x y", "true", "1,000", "$5", "", "--", "null"};
    const auto parts = rng.below(4);
    std::string s;
    for (std::uint64_t i = 0; i < parts; ++i) s += atoms[rng.below(atoms.size())];
    return s;
}

inline Table random_table(Rng& rng) {
    Table t;
    const auto cols = 1 + rng.below(5);
    for (std::uint64_t c = 0; c < cols; ++c) {
        std::string name;
        do {
            name = random_cell(rng);
        } while (name.find_first_not_of(" \t\r\n") == std::string::npos);
        t.columns.push_back(name + std::to_string(c));
    }
    const auto rows = rng.below(6);
    for (std::uint64_t r = 0; r < rows; ++r) {
        std::vector<std::string> row;
        for (std::uint64_t c = 0; c < cols; ++c) row.push_back(random_cell(rng));
        t.rows.push_back(std::move(row));
    }
    return t;
}

/// Confidences drawn from a small lattice so that ties and bin edges occur.
inline std::vector<ScoredPrediction> random_predictions(Rng& rng, std::size_t n) {
    std::vector<ScoredPrediction> out;
    const bool lattice = rng.bernoulli(0.5);
    for (std::size_t i = 0; i < n; ++i) {
        ScoredPrediction p;
        p.confidence = lattice ? static_cast<double>(rng.below(21)) / 20.0 : rng.uniform();
        p.correct = rng.bernoulli(0.3 + 0.5 * p.confidence);
        p.question_id = "q" + std::to_string(i);
        out.push_back(p);
    }
    return out;
}

/// Perfectly calibrated sample: c ~ U[0,1], correct ~ Bernoulli(c).
inline std::vector<ScoredPrediction> calibrated_predictions(Rng& rng, std::size_t n) {
    std::vector<ScoredPrediction> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i].confidence = rng.uniform();
        out[i].correct = rng.bernoulli(out[i].confidence);
        out[i].question_id = "q" + std::to_string(i);
    }
    return out;
}

}  // namespace tabcal::testing

#include "tabcal/recalibration.hpp"

#include <cmath>

namespace tabcal::testing {

inline double sigmoid(double t) { return 1.0 / (1.0 + std::exp(-t)); }

/// Correctness driven by table size only; confidence is pure noise.
inline std::vector<FeaturedPrediction> planted_log_rows(Rng& rng, std::size_t n) {
    std::vector<FeaturedPrediction> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& f = out[i].features;
        f.log_rows = rng.uniform(0.0, 6.0);
        f.log_cols = std::log(static_cast<double>(2 + rng.below(6)));
        f.frac_numeric = 0.5;
        f.frac_text = 0.5;
        f.question_word_count = 5 + static_cast<int>(rng.below(10));
        f.op_keyword_count = static_cast<int>(rng.below(3));
        out[i].pred.confidence = rng.uniform();
        out[i].pred.correct = rng.bernoulli(sigmoid(2.0 - f.log_rows));
        out[i].pred.question_id = "q" + std::to_string(i);
    }
    return out;
}

}  // namespace tabcal::testing
