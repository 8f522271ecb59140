#include "tabcal/ensembles.hpp"
#include "tabcal/rng.hpp"

#include "json_envelope.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <thread>

namespace tabcal {

namespace {

int grid_steps(double grid_step) {
    if (!(grid_step > 0.0 && grid_step <= 1.0)) throw std::invalid_argument("grid step must lie in (0,1]");
    const double s = std::round(1.0 / grid_step);
    if (std::abs(s * grid_step - 1.0) > 1e-9) throw std::invalid_argument("grid step must divide 1 evenly");
    return static_cast<int>(s);
}

MetricFn default_objective(const MetricFn& f) {
    if (f) return f;
    return [](std::span<const ScoredPrediction> p) { return auroc(p); };
}

// Weight vectors on the grid, the first weight descending, then the second.
std::vector<std::vector<double>> simplex_grid(std::size_t members, int s) {
    std::vector<std::vector<double>> out;
    const double sd = s;
    if (members == 2) {
        for (int i = s; i >= 0; --i) out.push_back({i / sd, (s - i) / sd});
    } else {
        for (int i = s; i >= 0; --i) {
            for (int j = s - i; j >= 0; --j) out.push_back({i / sd, j / sd, (s - i - j) / sd});
        }
    }
    return out;
}

}  // namespace

void EnsembleSpec::validate() const {
    if (members.size() < 2 || members.size() > 3) throw std::invalid_argument("an ensemble has two or three members");
    if (weights.size() != members.size()) throw std::invalid_argument("one weight per member");
    double total = 0.0;
    for (double w : weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("ensemble weights must be nonnegative");
        total += w;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("ensemble weights must sum to 1");
    grid_steps(grid_step);
    if (answer_source >= members.size()) throw std::invalid_argument("answer source is not a member");
}

std::string EnsembleSpec::label() const {
    std::string s;
    for (auto m : members) {
        if (!s.empty()) s += '+';
        s += method_name(m);
    }
    return s;
}

CombinedAnswer combine(std::span<const ElicitationRecord> records, const EnsembleSpec& spec) {
    spec.validate();
    CombinedAnswer out;
    for (std::size_t k = 0; k < spec.members.size(); ++k) {
        const auto it = std::find_if(records.begin(), records.end(),
                                     [&](const ElicitationRecord& r) { return r.method == spec.members[k]; });
        if (it == records.end()) {
            throw std::invalid_argument("missing record for ensemble member " +
                                        std::string(method_name(spec.members[k])));
        }
        if (k == 0) {
            out.question_id = it->question_id;
        } else if (it->question_id != out.question_id) {
            throw std::invalid_argument("ensemble members disagree on the question id");
        }
        out.confidence += spec.weights[k] * it->confidence;
        if (k == spec.answer_source) out.answer = it->answer;
    }
    return out;
}

std::vector<EnsembleRow> join_members(std::span<const std::vector<ScoredPrediction>> per_member,
                                      std::size_t answer_source) {
    if (per_member.empty() || answer_source >= per_member.size()) {
        throw std::invalid_argument("answer source is not a member");
    }
    std::vector<std::map<std::string, const ScoredPrediction*>> index(per_member.size());
    for (std::size_t m = 0; m < per_member.size(); ++m) {
        for (const auto& p : per_member[m]) {
            if (!index[m].emplace(p.question_id, &p).second) {
                throw std::invalid_argument("duplicate question id '" + p.question_id + "'");
            }
        }
    }
    std::vector<EnsembleRow> rows;
    for (const auto& p : per_member[0]) {
        EnsembleRow row;
        row.question_id = p.question_id;
        bool complete = true;
        for (std::size_t m = 0; m < per_member.size() && complete; ++m) {
            const auto it = index[m].find(p.question_id);
            if (it == index[m].end()) {
                complete = false;
                break;
            }
            row.confidences.push_back(it->second->confidence);
            if (m == answer_source) row.correct = it->second->correct;
        }
        if (complete) rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<ScoredPrediction> ensemble_predictions(std::span<const EnsembleRow> rows,
                                                   std::span<const double> weights) {
    std::vector<ScoredPrediction> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        if (r.confidences.size() != weights.size()) throw std::invalid_argument("row and weight sizes differ");
        double c = 0.0;
        for (std::size_t k = 0; k < weights.size(); ++k) c += weights[k] * r.confidences[k];
        out.push_back({std::clamp(c, 0.0, 1.0), r.correct, r.question_id});
    }
    return out;
}

std::vector<ScoredPrediction> member_predictions(std::span<const EnsembleRow> rows, std::size_t member) {
    std::vector<ScoredPrediction> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back({r.confidences.at(member), r.correct, r.question_id});
    return out;
}

WeightFit fit_weights(std::span<const EnsembleRow> train, std::vector<Method> members, double grid_step,
                      const MetricFn& objective, int parallelism) {
    if (members.size() < 2 || members.size() > 3) throw std::invalid_argument("an ensemble has two or three members");
    const int s = grid_steps(grid_step);
    const bool any_right = std::any_of(train.begin(), train.end(), [](const EnsembleRow& r) { return r.correct; });
    const bool any_wrong = std::any_of(train.begin(), train.end(), [](const EnsembleRow& r) { return !r.correct; });
    if (!any_right || !any_wrong) throw UndefinedMetric("ensemble train set has a single class");
    const MetricFn f = default_objective(objective);

    const auto grid = simplex_grid(members.size(), s);
    std::vector<double> scores(grid.size());
    std::atomic<std::size_t> next{0};
    const auto worker = [&] {
        for (std::size_t g; (g = next.fetch_add(1)) < grid.size();) {
            scores[g] = f(ensemble_predictions(train, grid[g]));
        }
    };
    const int threads = std::clamp(parallelism, 1, static_cast<int>(grid.size()));
    std::vector<std::jthread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    pool.clear();

    std::size_t best = 0;
    for (std::size_t g = 1; g < grid.size(); ++g) {
        if (scores[g] > scores[best] + 1e-12) best = g;
    }
    WeightFit fit;
    fit.spec.members = std::move(members);
    fit.spec.weights = grid[best];
    fit.spec.grid_step = grid_step;
    fit.objective = scores[best];
    fit.evaluated = grid.size();
    return fit;
}

SplitStability split_stability(std::span<const EnsembleRow> rows, const std::vector<Method>& members,
                               int n_splits, std::uint64_t seed, double grid_step, const MetricFn& objective) {
    if (rows.size() < 20) throw std::invalid_argument("split stability needs at least 20 questions");
    if (n_splits < 1) throw std::invalid_argument("need at least one split");
    const MetricFn f = default_objective(objective);
    const CounterRng rng(seed);
    const std::size_t n = rows.size();

    SplitStability out;
    for (int split = 0; split < n_splits; ++split) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = n - 1; i > 0; --i) {
            std::swap(order[i], order[rng.below(static_cast<std::uint64_t>(split), i, i + 1)]);
        }
        std::vector<EnsembleRow> train, test;
        for (std::size_t i = 0; i < n; ++i) (i < n / 2 ? train : test).push_back(rows[order[i]]);

        const WeightFit fit = fit_weights(train, members, grid_step, f);
        SplitResult r;
        r.weights = fit.spec.weights;
        r.test_objective = f(ensemble_predictions(test, r.weights));
        for (std::size_t m = 0; m < members.size(); ++m) {
            r.member_test_objectives.push_back(f(member_predictions(test, m)));
        }
        out.splits.push_back(std::move(r));
    }

    const auto column = [&](auto get) {
        std::vector<double> v;
        for (const auto& s : out.splits) v.push_back(get(s));
        return n_splits > 1 ? multi_seed_aggregate(v) : MeanStd{v[0], 0.0};
    };
    out.test_objective = column([](const SplitResult& s) { return s.test_objective; });
    double best_member = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < members.size(); ++m) {
        out.weights.push_back(column([m](const SplitResult& s) { return s.weights[m]; }));
        out.member_test_objectives.push_back(column([m](const SplitResult& s) { return s.member_test_objectives[m]; }));
        best_member = std::max(best_member, out.member_test_objectives.back().mean);
    }
    out.gain_over_best_member = out.test_objective.mean - best_member;
    return out;
}

std::string ensemble_to_json(const EnsembleSpec& spec) {
    spec.validate();
    auto j = detail::make_envelope("ensemble");
    auto& members = j["members"] = nlohmann::ordered_json::array();
    for (auto m : spec.members) members.push_back(std::string(method_name(m)));
    j["weights"] = spec.weights;
    j["grid_step"] = spec.grid_step;
    j["answer_source"] = std::string(method_name(spec.members[spec.answer_source]));
    return j.dump(2) + "\n";
}

EnsembleSpec ensemble_from_json(std::string_view text) {
    nlohmann::json j;
    if (detail::open_envelope(text, j) != "ensemble") throw std::invalid_argument("not an ensemble document");
    EnsembleSpec spec;
    try {
        for (const auto& m : j.at("members")) {
            const auto parsed = parse_method(m.get<std::string>());
            if (!parsed) throw std::invalid_argument("unknown ensemble member " + m.dump());
            spec.members.push_back(*parsed);
        }
        spec.weights = j.at("weights").get<std::vector<double>>();
        spec.grid_step = j.value("grid_step", kDefaultGridStep);
        const auto source = parse_method(j.value("answer_source", std::string(method_name(spec.members.at(0)))));
        const auto it = source ? std::find(spec.members.begin(), spec.members.end(), *source) : spec.members.end();
        if (it == spec.members.end()) throw std::invalid_argument("answer source is not a member");
        spec.answer_source = static_cast<std::size_t>(it - spec.members.begin());
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed ensemble document: ") + e.what());
    }
    spec.validate();
    return spec;
}

}  // namespace tabcal
