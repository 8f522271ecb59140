#include "tabcal/recalibration.hpp"
#include "json_envelope.hpp"
#include "tabcal/kernels.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tabcal {

namespace {

double clamp_prob(double c) { return std::clamp(c, kProbClamp, 1.0 - kProbClamp); }

double logit(double c) {
    const double p = clamp_prob(c);
    return std::log(p / (1.0 - p));
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

/// log(1 + e^t) without overflow.
double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

void require_both_classes(std::span<const ScoredPrediction> preds, const char* what) {
    validate_predictions(preds);
    bool pos = false, neg = false;
    for (const auto& p : preds) (p.correct ? pos : neg) = true;
    if (!pos || !neg) {
        throw std::invalid_argument(std::string(what) + " needs both correct and incorrect examples");
    }
}

std::vector<double> labels(std::span<const ScoredPrediction> preds) {
    std::vector<double> y(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) y[i] = preds[i].correct ? 1.0 : 0.0;
    return y;
}

// ------------------------------------------------------------ logistic core

struct LogisticProblem {
    std::span<const std::vector<double>> columns;
    std::span<const double> y;
    double lambda;
    std::size_t n;

    void linear(std::span<const double> w, double b, std::vector<double>& eta) const {
        std::fill(eta.begin(), eta.end(), b);
        for (std::size_t k = 0; k < columns.size(); ++k) kernels::axpy(w[k], columns[k], eta);
    }

    double objective(std::span<const double> w, double b, std::vector<double>& eta) const {
        linear(w, b, eta);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) loss += softplus(eta[i]) - y[i] * eta[i];
        double pen = 0.0;
        for (double v : w) pen += v * v;
        return loss / static_cast<double>(n) + 0.5 * lambda * pen;
    }

    /// Gradient (weights then intercept) and curvature weights s = p(1-p).
    Eigen::VectorXd gradient(std::span<const double> w, const std::vector<double>& eta,
                             std::vector<double>& resid, std::vector<double>& curv) const {
        const std::size_t d = columns.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(eta[i]);
            resid[i] = p - y[i];
            curv[i] = p * (1.0 - p);
        }
        Eigen::VectorXd g(d + 1);
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t k = 0; k < d; ++k) {
            g[static_cast<Eigen::Index>(k)] = kernels::dot(columns[k], resid) * inv_n + lambda * w[k];
        }
        double sr = 0.0;
        for (double r : resid) sr += r;
        g[static_cast<Eigen::Index>(d)] = sr * inv_n;
        return g;
    }

    Eigen::MatrixXd hessian(const std::vector<double>& curv) const {
        const std::size_t d = columns.size();
        const double inv_n = 1.0 / static_cast<double>(n);
        Eigen::MatrixXd h(d + 1, d + 1);
        const auto D = static_cast<Eigen::Index>(d);
        for (std::size_t k = 0; k < d; ++k) {
            const auto K = static_cast<Eigen::Index>(k);
            for (std::size_t l = 0; l <= k; ++l) {
                const auto L = static_cast<Eigen::Index>(l);
                const double v = kernels::dot3(columns[k], columns[l], curv) * inv_n;
                h(K, L) = v;
                h(L, K) = v;
            }
            h(K, K) += lambda;
            const double v = kernels::dot(columns[k], curv) * inv_n;
            h(K, D) = v;
            h(D, K) = v;
        }
        double sc = 0.0;
        for (double s : curv) sc += s;
        h(D, D) = sc * inv_n;
        return h;
    }
};

constexpr double kGradientTolerance = 1e-8;
constexpr int kMaxNewtonIterations = 100;

LogisticFit gradient_descent(const LogisticProblem& prob, LogisticFit start) {
    const std::size_t d = prob.columns.size();
    // Step 1/L with L bounding the Hessian's largest eigenvalue.
    double frob = static_cast<double>(prob.n);
    for (const auto& col : prob.columns) frob += kernels::dot(col, col);
    const double step = 1.0 / (0.25 * frob / static_cast<double>(prob.n) + prob.lambda);

    std::vector<double> eta(prob.n), resid(prob.n), curv(prob.n);
    std::vector<double> w = start.weights;
    double b = start.bias;
    double gnorm = 0.0;
    int it = 0;
    for (; it < 200000; ++it) {
        prob.linear(w, b, eta);
        const Eigen::VectorXd g = prob.gradient(w, eta, resid, curv);
        gnorm = g.norm();
        if (gnorm <= kGradientTolerance) break;
        for (std::size_t k = 0; k < d; ++k) w[k] -= step * g[static_cast<Eigen::Index>(k)];
        b -= step * g[static_cast<Eigen::Index>(d)];
    }
    LogisticFit fit;
    fit.weights = std::move(w);
    fit.bias = b;
    fit.iterations = start.iterations + it;
    fit.gradient_norm = gnorm;
    fit.objective = prob.objective(fit.weights, fit.bias, eta);
    fit.gradient_fallback = true;
    return fit;
}

}  // namespace

LogisticFit fit_logistic(std::span<const std::vector<double>> columns, std::span<const double> y,
                         double lambda, bool allow_fallback) {
    if (y.empty()) throw std::invalid_argument("logistic fit needs data");
    for (const auto& col : columns) {
        if (col.size() != y.size()) throw std::invalid_argument("covariate length mismatch");
        for (double v : col) {
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite covariate");
        }
    }
    const LogisticProblem prob{columns, y, lambda, y.size()};
    const std::size_t d = columns.size();

    // Start from the intercept-only optimum.
    double ybar = 0.0;
    for (double v : y) ybar += v;
    ybar /= static_cast<double>(y.size());
    std::vector<double> w(d, 0.0);
    double b = logit(ybar);

    std::vector<double> eta(prob.n), resid(prob.n), curv(prob.n), w_try(d);
    double obj = prob.objective(w, b, eta);
    LogisticFit fit;
    for (int it = 0; it < kMaxNewtonIterations; ++it) {
        const Eigen::VectorXd g = prob.gradient(w, eta, resid, curv);
        fit.gradient_norm = g.norm();
        fit.iterations = it;
        if (fit.gradient_norm <= kGradientTolerance) {
            fit.weights = w;
            fit.bias = b;
            fit.objective = obj;
            return fit;
        }
        const Eigen::MatrixXd h = prob.hessian(curv);
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
        Eigen::VectorXd dir;
        bool ok = ldlt.info() == Eigen::Success && ldlt.isPositive() && ldlt.rcond() > 1e-14;
        if (ok) {
            dir = -ldlt.solve(g);
            ok = dir.allFinite() && dir.dot(g) < 0.0;
        }
        if (!ok) {
            if (!allow_fallback) {
                std::ostringstream msg;
                msg << "logistic fit: singular Newton system at iteration " << it
                    << ", gradient norm " << fit.gradient_norm;
                throw std::runtime_error(msg.str());
            }
            fit.weights = w;
            fit.bias = b;
            return gradient_descent(prob, fit);
        }
        // Backtracking on the sufficient-decrease condition.
        double t = 1.0;
        double next = obj;
        bool moved = false;
        for (int halvings = 0; halvings < 60; ++halvings, t *= 0.5) {
            for (std::size_t k = 0; k < d; ++k) w_try[k] = w[k] + t * dir[static_cast<Eigen::Index>(k)];
            const double b_try = b + t * dir[static_cast<Eigen::Index>(d)];
            next = prob.objective(w_try, b_try, eta);
            if (next <= obj + 1e-4 * t * dir.dot(g)) {
                w = w_try;
                b = b_try;
                moved = true;
                break;
            }
        }
        if (!moved) {
            // At machine precision the decrease test can fail even at the
            // optimum; accept if the gradient is already tiny.
            prob.linear(w, b, eta);
            if (fit.gradient_norm <= 1e3 * kGradientTolerance) {
                fit.weights = w;
                fit.bias = b;
                fit.objective = obj;
                return fit;
            }
            break;
        }
        obj = next;
    }
    std::ostringstream msg;
    msg << "logistic fit did not converge in " << kMaxNewtonIterations
        << " Newton iterations (gradient norm " << fit.gradient_norm << ", objective " << obj << ")";
    throw std::runtime_error(msg.str());
}

// ------------------------------------------------------------ groups

std::string_view feature_group_name(FeatureGroup group) noexcept {
    switch (group) {
        case FeatureGroup::ConfidenceOnly: return "confidence_only";
        case FeatureGroup::TableDims: return "table_dims";
        case FeatureGroup::ColumnTypes: return "column_types";
        case FeatureGroup::QueryComplexity: return "query_complexity";
        case FeatureGroup::Full: return "full";
    }
    return "unknown";
}

std::optional<FeatureGroup> parse_feature_group(std::string_view name) {
    for (auto g : kAllFeatureGroups) {
        if (feature_group_name(g) == name) return g;
    }
    return std::nullopt;
}

std::vector<std::size_t> group_covariates(FeatureGroup group) {
    switch (group) {
        case FeatureGroup::ConfidenceOnly: return {0};
        case FeatureGroup::TableDims: return {0, 1, 2};
        case FeatureGroup::ColumnTypes: return {0, 3, 4, 5, 6};
        case FeatureGroup::QueryComplexity: return {0, 7, 8};
        case FeatureGroup::Full: return {0, 1, 2, 3, 4, 5, 6, 7, 8};
    }
    return {0};
}

std::string_view RecalibrationModel::kind() const noexcept {
    switch (params.index()) {
        case 0: return "temperature";
        case 1: return "platt";
        case 2: return "isotonic";
        default: return "structure_aware";
    }
}

// ------------------------------------------------------------ fitters

RecalibrationModel fit_temperature(std::span<const ScoredPrediction> train) {
    require_both_classes(train, "temperature scaling");
    std::vector<double> z(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) z[i] = logit(train[i].confidence);
    const auto nll = [&](double log_t) {
        const double inv_t = std::exp(-log_t);
        double s = 0.0;
        for (std::size_t i = 0; i < train.size(); ++i) {
            const double t = z[i] * inv_t;
            s += train[i].correct ? softplus(-t) : softplus(t);
        }
        return s;
    };
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double lo = -4.0, hi = 4.0;
    double x1 = hi - phi * (hi - lo);
    double x2 = lo + phi * (hi - lo);
    double f1 = nll(x1), f2 = nll(x2);
    while (hi - lo > 1e-6) {
        if (f1 <= f2) {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = nll(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = nll(x2);
        }
    }
    return {TemperatureModel{std::exp(0.5 * (lo + hi))}};
}

RecalibrationModel fit_platt(std::span<const ScoredPrediction> train, PlattInput input) {
    require_both_classes(train, "Platt scaling");
    std::vector<std::vector<double>> cols(1, std::vector<double>(train.size()));
    for (std::size_t i = 0; i < train.size(); ++i) {
        cols[0][i] = input == PlattInput::Raw ? train[i].confidence : logit(train[i].confidence);
    }
    const auto y = labels(train);
    const LogisticFit fit = fit_logistic(cols, y, kRidgeLambda, false);
    return {PlattModel{fit.weights[0], fit.bias, input}};
}

RecalibrationModel fit_isotonic(std::span<const ScoredPrediction> train) {
    validate_predictions(train);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(train.size());
    for (const auto& p : train) pts.emplace_back(p.confidence, p.correct ? 1.0 : 0.0);
    std::sort(pts.begin(), pts.end());

    struct Block {
        double lo, hi;  // confidence range covered
        double sum, weight;
        double value() const { return sum / weight; }
    };
    std::vector<Block> blocks;
    for (std::size_t i = 0; i < pts.size();) {
        std::size_t j = i;
        double sum = 0.0;
        while (j < pts.size() && pts[j].first == pts[i].first) sum += pts[j++].second;
        blocks.push_back({pts[i].first, pts[i].first, sum, static_cast<double>(j - i)});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value() >= blocks.back().value()) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            prev.hi = top.hi;
            prev.sum += top.sum;
            prev.weight += top.weight;
        }
        i = j;
    }
    IsotonicModel model;
    for (const auto& b : blocks) {
        model.breakpoints.emplace_back(b.lo, b.value());
        if (b.hi > b.lo) model.breakpoints.emplace_back(b.hi, b.value());
    }
    return {std::move(model)};
}

RecalibrationModel fit_structure_aware(std::span<const FeaturedPrediction> train, FeatureGroup group) {
    const auto plain = strip_features(train);
    require_both_classes(plain, "structure-aware recalibration");
    StructureAwareModel model;
    model.covariates = group_covariates(group);
    const std::size_t n = train.size();
    std::vector<std::vector<double>> cols;
    for (std::size_t idx : model.covariates) {
        std::vector<double> col(n);
        for (std::size_t i = 0; i < n; ++i) {
            col[i] = idx == 0 ? train[i].pred.confidence : train[i].features.to_array()[idx - 1];
        }
        double mean = 0.0, scale = 1.0;
        if (idx != 0) {
            for (double v : col) mean += v;
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (double v : col) var += (v - mean) * (v - mean);
            var /= static_cast<double>(n);
            if (var > 1e-24) scale = std::sqrt(var);
            for (double& v : col) v = (v - mean) / scale;
        }
        model.mean.push_back(mean);
        model.scale.push_back(scale);
        cols.push_back(std::move(col));
    }
    const auto y = labels(plain);
    const LogisticFit fit = fit_logistic(cols, y, kRidgeLambda, true);
    model.weights = fit.weights;
    model.bias = fit.bias;
    model.gradient_fallback = fit.gradient_fallback;
    return {std::move(model)};
}

// ------------------------------------------------------------ apply

namespace {

double isotonic_lookup(const IsotonicModel& m, double c) {
    const auto& bp = m.breakpoints;
    if (bp.empty()) throw std::invalid_argument("isotonic model has no breakpoints");
    if (c <= bp.front().first) return bp.front().second;
    if (c >= bp.back().first) return bp.back().second;
    const auto it = std::upper_bound(bp.begin(), bp.end(), c,
                                     [](double v, const auto& p) { return v < p.first; });
    const auto& [x1, y1] = *it;
    const auto& [x0, y0] = *(it - 1);
    return y0 + (y1 - y0) * (c - x0) / (x1 - x0);
}

}  // namespace

double apply(const RecalibrationModel& model, double confidence,
             const std::optional<StructuralFeatures>& features) {
    if (!std::isfinite(confidence) || confidence < 0.0 || confidence > 1.0) {
        throw std::invalid_argument("confidence outside [0,1]");
    }
    return std::visit(
        [&](const auto& m) -> double {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, TemperatureModel>) {
                return sigmoid(logit(confidence) / m.temperature);
            } else if constexpr (std::is_same_v<M, PlattModel>) {
                const double x = m.input == PlattInput::Raw ? confidence : logit(confidence);
                return sigmoid(m.a * x + m.b);
            } else if constexpr (std::is_same_v<M, IsotonicModel>) {
                return isotonic_lookup(m, confidence);
            } else {
                if (!features) throw std::invalid_argument("structure-aware model needs features");
                const auto x = features->to_array();
                double t = m.bias;
                for (std::size_t k = 0; k < m.covariates.size(); ++k) {
                    const std::size_t idx = m.covariates[k];
                    const double raw = idx == 0 ? confidence : x[idx - 1];
                    t += m.weights[k] * ((raw - m.mean[k]) / m.scale[k]);
                }
                return sigmoid(t);
            }
        },
        model.params);
}

std::vector<ScoredPrediction> apply_all(const RecalibrationModel& model,
                                        std::span<const FeaturedPrediction> preds) {
    std::vector<ScoredPrediction> out;
    out.reserve(preds.size());
    for (const auto& p : preds) {
        ScoredPrediction s = p.pred;
        s.confidence = apply(model, p.pred.confidence, p.features);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<ScoredPrediction> apply_all(const RecalibrationModel& model,
                                        std::span<const ScoredPrediction> preds) {
    if (model.needs_features()) throw std::invalid_argument("structure-aware model needs features");
    std::vector<ScoredPrediction> out(preds.begin(), preds.end());
    for (auto& p : out) p.confidence = apply(model, p.confidence);
    return out;
}

std::vector<ScoredPrediction> strip_features(std::span<const FeaturedPrediction> preds) {
    std::vector<ScoredPrediction> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(p.pred);
    return out;
}

std::vector<AblationRow> feature_ablation(std::span<const FeaturedPrediction> train,
                                          std::span<const FeaturedPrediction> test,
                                          std::span<const FeatureGroup> groups) {
    std::vector<AblationRow> rows;
    for (auto g : groups) {
        const auto model = fit_structure_aware(train, g);
        const auto scored = apply_all(model, test);
        rows.push_back({g, binned_ece(scored, 10), auroc(scored)});
    }
    return rows;
}

// ------------------------------------------------------------ persistence

std::string model_to_json(const RecalibrationModel& model) {
    auto j = detail::make_envelope(model.kind());
    std::visit(
        [&](const auto& m) {
            using M = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<M, TemperatureModel>) {
                j["temperature"] = m.temperature;
            } else if constexpr (std::is_same_v<M, PlattModel>) {
                j["a"] = m.a;
                j["b"] = m.b;
                j["input"] = m.input == PlattInput::Raw ? "raw" : "logit";
            } else if constexpr (std::is_same_v<M, IsotonicModel>) {
                auto arr = nlohmann::ordered_json::array();
                for (const auto& [x, y] : m.breakpoints) arr.push_back({x, y});
                j["breakpoints"] = arr;
            } else {
                auto names = nlohmann::ordered_json::array();
                for (std::size_t idx : m.covariates) {
                    names.push_back(idx == 0 ? std::string("confidence")
                                             : std::string(kFeatureNames[idx - 1]));
                }
                j["covariates"] = names;
                j["mean"] = m.mean;
                j["scale"] = m.scale;
                j["weights"] = m.weights;
                j["bias"] = m.bias;
                j["gradient_fallback"] = m.gradient_fallback;
            }
        },
        model.params);
    return j.dump(2) + "\n";
}

RecalibrationModel model_from_json(std::string_view text) {
    nlohmann::json j;
    const std::string kind = detail::open_envelope(text, j);
    try {
        if (kind == "temperature") {
            const double t = j.at("temperature").get<double>();
            if (!(t > 0.0)) throw std::invalid_argument("temperature must be positive");
            return {TemperatureModel{t}};
        }
        if (kind == "platt") {
            const std::string input = j.value("input", "raw");
            if (input != "raw" && input != "logit") throw std::invalid_argument("unknown Platt input");
            return {PlattModel{j.at("a").get<double>(), j.at("b").get<double>(),
                               input == "raw" ? PlattInput::Raw : PlattInput::Logit}};
        }
        if (kind == "isotonic") {
            IsotonicModel m;
            for (const auto& p : j.at("breakpoints")) {
                m.breakpoints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());
            }
            if (m.breakpoints.empty()) throw std::invalid_argument("isotonic model has no breakpoints");
            return {std::move(m)};
        }
        if (kind == "structure_aware") {
            StructureAwareModel m;
            for (const auto& name : j.at("covariates")) {
                const auto s = name.get<std::string>();
                if (s == "confidence") {
                    m.covariates.push_back(0);
                    continue;
                }
                const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), s);
                if (it == kFeatureNames.end()) throw std::invalid_argument("unknown covariate " + s);
                m.covariates.push_back(1 + static_cast<std::size_t>(it - kFeatureNames.begin()));
            }
            m.mean = j.at("mean").get<std::vector<double>>();
            m.scale = j.at("scale").get<std::vector<double>>();
            m.weights = j.at("weights").get<std::vector<double>>();
            m.bias = j.at("bias").get<double>();
            m.gradient_fallback = j.value("gradient_fallback", false);
            const auto d = m.covariates.size();
            if (m.mean.size() != d || m.scale.size() != d || m.weights.size() != d) {
                throw std::invalid_argument("structure-aware model arrays disagree in length");
            }
            return {std::move(m)};
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("malformed model document: ") + e.what());
    }
    throw std::invalid_argument("unknown recalibration model kind '" + kind + "'");
}

}  // namespace tabcal
