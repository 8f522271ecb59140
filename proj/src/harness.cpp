#include "tabcal/harness.hpp"
#include "tabcal/cache.hpp"
#include "tabcal/text_util.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <thread>

namespace tabcal {

namespace fs = std::filesystem;

std::string_view row_status_name(RowStatus s) noexcept {
    switch (s) {
        case RowStatus::Scored: return "scored";
        case RowStatus::Skipped: return "skipped";
        case RowStatus::Failed: return "failed";
    }
    return "scored";
}

namespace {

/// Counts calls that reach the wrapped provider.
class CountingProvider : public ModelProvider {
public:
    explicit CountingProvider(ModelProvider& inner) : inner_(inner) {}
    std::string complete(const CompletionRequest& r) override {
        ++calls;
        return inner_.complete(r);
    }
    std::string name() const override { return inner_.name(); }
    std::string model() const override { return inner_.model(); }
    std::atomic<std::uint64_t> calls{0};

private:
    ModelProvider& inner_;
};

std::string join(const std::vector<std::string>& parts, char sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

void judge(ResultRow& row) {
    if (text::trim(row.answer).empty()) {
        row.status = RowStatus::Skipped;
        row.correct = row.strict_correct = false;
        row.match_type = MatchType::None;
        return;
    }
    const GoldAnswer gold = parse_gold(row.gold);
    const MatchResult m = match_answer(row.answer, gold);
    row.correct = m.correct;
    row.match_type = m.match_type;
    row.strict_correct = match_answer_strict(row.answer, gold).correct;
    row.status = RowStatus::Scored;
}

struct ItemOutcome {
    std::vector<ResultRow> rows;  // one per requested method, in config order
    std::vector<std::vector<CallRow>> calls;
};

ItemOutcome elicit_item(ModelProvider& provider, const std::string& provider_name, const QAItem& item,
                        const RunConfig& cfg, const StructuralFeatures& features) {
    const ElicitationInput input{item.id, &item.table, item.question};
    std::map<Method, ElicitationRecord> done;
    std::map<Method, std::string> errors;
    const auto run = [&](Method m) {
        if (done.count(m) || errors.count(m)) return;
        try {
            switch (m) {
                case Method::Verbalized: done[m] = elicit_verbalized(provider, input, cfg.templates); break;
                case Method::PTrue: done[m] = elicit_ptrue(provider, input, cfg.templates); break;
                case Method::SelfConsistency:
                    done[m] = elicit_self_consistency(provider, input, cfg.method, cfg.templates);
                    break;
                case Method::SemanticEntropy: {
                    const bool share = std::find(cfg.methods.begin(), cfg.methods.end(), Method::SelfConsistency) !=
                                       cfg.methods.end();
                    const auto sc = done.find(Method::SelfConsistency);
                    if (share && sc == done.end()) {
                        throw ElicitationError("self-consistency samples unavailable: " +
                                               errors[Method::SelfConsistency]);
                    }
                    done[m] = elicit_semantic_entropy(provider, input, cfg.method, share ? &sc->second : nullptr,
                                                      cfg.templates);
                    break;
                }
                case Method::MFA: done[m] = elicit_mfa(provider, input, cfg.method, cfg.templates); break;
            }
        } catch (const ProviderError& e) {
            errors[m] = e.what();
        } catch (const ElicitationError& e) {
            errors[m] = e.what();
        }
    };
    if (std::find(cfg.methods.begin(), cfg.methods.end(), Method::SemanticEntropy) != cfg.methods.end() &&
        std::find(cfg.methods.begin(), cfg.methods.end(), Method::SelfConsistency) != cfg.methods.end()) {
        run(Method::SelfConsistency);
    }
    ItemOutcome out;
    for (Method m : cfg.methods) {
        run(m);
        ResultRow row;
        row.provider = provider_name;
        row.method = std::string(method_name(m));
        row.question_id = item.id;
        row.source = item.source;
        row.question_type = std::string(question_type_name(item.question_type));
        row.gold = join(item.gold, '|');
        row.features = features;
        std::vector<CallRow> calls;
        if (const auto it = done.find(m); it != done.end()) {
            const auto& rec = it->second;
            row.answer = rec.answer;
            row.confidence = rec.confidence;
            row.api_calls = rec.api_calls;
            row.flags = join(rec.flags, ';');
            judge(row);
            for (const auto& c : rec.per_call) calls.push_back({provider_name, row.method, item.id, c.label, c.parsed_answer});
        } else {
            row.status = RowStatus::Failed;
            row.flags = "error:" + errors[m];
        }
        out.rows.push_back(std::move(row));
        out.calls.push_back(std::move(calls));
    }
    return out;
}

}  // namespace

std::pair<std::vector<ResultRow>, std::vector<CallRow>> run_elicitation(const std::vector<QAItem>& items,
                                                                        const std::vector<ModelProvider*>& providers,
                                                                        const RunConfig& config, RunStats* stats) {
    config.method.validate();
    if (config.methods.empty()) throw std::invalid_argument("no methods requested");
    if (std::set<Method>(config.methods.begin(), config.methods.end()).size() != config.methods.size()) {
        throw std::invalid_argument("a method is requested twice");
    }
    if (config.replay && !config.cache) throw std::invalid_argument("replay needs a cache");
    check_items(items);
    std::set<std::string> names;
    for (auto* p : providers) {
        if (p == nullptr) throw std::invalid_argument("null provider");
        if (!names.insert(p->name()).second) throw std::invalid_argument("duplicate provider name '" + p->name() + "'");
    }

    std::unique_ptr<ResponseCache> cache;
    if (config.cache) cache = std::make_unique<ResponseCache>(*config.cache);
    std::vector<std::unique_ptr<CountingProvider>> counters;
    std::vector<std::unique_ptr<CachingProvider>> cached;
    std::vector<ModelProvider*> effective;
    for (auto* p : providers) {
        counters.push_back(std::make_unique<CountingProvider>(*p));
        if (cache) {
            cached.push_back(std::make_unique<CachingProvider>(config.replay ? nullptr : counters.back().get(), *cache,
                                                               p->name(), p->model()));
            effective.push_back(cached.back().get());
        } else {
            effective.push_back(counters.back().get());
        }
    }

    std::vector<StructuralFeatures> features;
    features.reserve(items.size());
    for (const auto& it : items) features.push_back(extract_features(it.table, it.question));

    const std::size_t tasks = providers.size() * items.size();
    std::vector<ItemOutcome> outcomes(tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto worker = [&] {
        for (std::size_t t; (t = next.fetch_add(1)) < tasks;) {
            const std::size_t p = t / items.size(), i = t % items.size();
            try {
                outcomes[t] = elicit_item(*effective[p], providers[p]->name(), items[i], config, features[i]);
            } catch (...) {
                const std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(config.parallelism, 1, static_cast<int>(std::max<std::size_t>(tasks, 1)));
    {
        std::vector<std::jthread> pool;
        for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
        worker();
    }
    if (failure) std::rethrow_exception(failure);

    std::vector<ResultRow> rows;
    std::vector<CallRow> calls;
    for (std::size_t p = 0; p < providers.size(); ++p) {
        for (std::size_t m = 0; m < config.methods.size(); ++m) {
            for (std::size_t i = 0; i < items.size(); ++i) {
                auto& o = outcomes[p * items.size() + i];
                rows.push_back(std::move(o.rows[m]));
                for (auto& c : o.calls[m]) calls.push_back(std::move(c));
            }
        }
    }
    if (stats) {
        for (const auto& c : counters) stats->provider_calls += c->calls.load();
        for (const auto& c : cached) stats->cache_hits += c->hits();
    }
    return {std::move(rows), std::move(calls)};
}

// ------------------------------------------------------------ summaries

std::vector<ScoredPrediction> scored_predictions(std::span<const ResultRow> rows, const std::string& provider,
                                                 const std::string& method, bool strict) {
    std::vector<ScoredPrediction> out;
    for (const auto& r : rows) {
        if (r.status != RowStatus::Scored || r.provider != provider || r.method != method) continue;
        out.push_back({r.confidence, strict ? r.strict_correct : r.correct, r.question_id});
    }
    return out;
}

std::vector<FeaturedPrediction> featured_predictions(std::span<const ResultRow> rows, const std::string& provider,
                                                     const std::string& method) {
    std::vector<FeaturedPrediction> out;
    for (const auto& r : rows) {
        if (r.status != RowStatus::Scored || r.provider != provider || r.method != method) continue;
        out.push_back({{r.confidence, r.correct, r.question_id}, r.features});
    }
    return out;
}

namespace {

template <class F>
std::optional<double> defined(F&& f) {
    try {
        return f();
    } catch (const UndefinedMetric&) {
        return std::nullopt;
    }
}

bool both_classes(std::span<const ScoredPrediction> p) {
    bool t = false, f = false;
    for (const auto& x : p) (x.correct ? t : f) = true;
    return t && f;
}

const MetricFn kAuroc = [](std::span<const ScoredPrediction> p) { return auroc(p); };

}  // namespace

MethodSummary summarize(std::span<const ResultRow> rows, const BootstrapOptions& bootstrap) {
    MethodSummary s;
    if (rows.empty()) return s;
    s.provider = rows.front().provider;
    s.method = rows.front().method;
    std::vector<ScoredPrediction> preds, strict;
    double calls = 0.0;
    for (const auto& r : rows) {
        if (r.provider != s.provider || r.method != s.method) throw std::invalid_argument("summarize needs one group");
        ++s.loaded;
        switch (r.status) {
            case RowStatus::Scored:
                ++s.scored;
                preds.push_back({r.confidence, r.correct, r.question_id});
                strict.push_back({r.confidence, r.strict_correct, r.question_id});
                calls += r.api_calls;
                for (const auto& f : text::split(r.flags, ';')) {
                    if (f == "unparsed" || f == "fallback" || f == "unparsed-answer") {
                        ++s.unparsed;
                        break;
                    }
                }
                break;
            case RowStatus::Skipped: ++s.skipped; break;
            case RowStatus::Failed: ++s.failed; break;
        }
    }
    if (preds.empty()) return s;
    s.accuracy = accuracy(preds);
    s.mean_confidence = mean_confidence(preds);
    s.gap = *s.mean_confidence - *s.accuracy;
    s.smece = smooth_ece(preds);
    s.ece10 = binned_ece(preds, 10);
    s.ece15 = binned_ece(preds, 15);
    s.ece20 = binned_ece(preds, 20);
    s.brier = brier(preds);
    s.saturation = saturation_fraction(preds);
    s.calls_per_question = calls / static_cast<double>(preds.size());
    s.strict_accuracy = accuracy(strict);
    s.strict_auroc = defined([&] { return auroc(strict); });
    s.separability = defined([&] { return separability(preds); });
    if (both_classes(preds)) {
        s.auroc = auroc(preds);
        try {
            const auto ci = percentile_ci(preds, kAuroc, bootstrap);
            s.auroc_lower = ci.lower;
            s.auroc_upper = ci.upper;
        } catch (const std::runtime_error&) {
            // too many single-class resamples; the point estimate stands alone
        }
    }
    return s;
}

void rejudge(std::vector<ResultRow>& rows) {
    for (auto& r : rows) {
        if (r.status != RowStatus::Failed) judge(r);
    }
}

namespace {

struct Group {
    std::string provider, method;
};

std::vector<Group> groups_of(std::span<const ResultRow> rows) {
    std::vector<Group> out;
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& r : rows) {
        if (seen.insert({r.provider, r.method}).second) out.push_back({r.provider, r.method});
    }
    return out;
}

std::vector<ResultRow> rows_of(std::span<const ResultRow> rows, const Group& g) {
    std::vector<ResultRow> out;
    for (const auto& r : rows) {
        if (r.provider == g.provider && r.method == g.method) out.push_back(r);
    }
    return out;
}

struct SubsetStats {
    std::optional<double> accuracy, auroc, ece10, saturation;
};

SubsetStats subset_stats(std::span<const ScoredPrediction> p) {
    SubsetStats s;
    if (p.empty()) return s;
    s.accuracy = accuracy(p);
    s.auroc = defined([&] { return auroc(p); });
    s.ece10 = binned_ece(p, 10);
    s.saturation = saturation_fraction(p);
    return s;
}

void format_ablation(RunReport& report, const std::string& provider, const ReportOptions& options) {
    const std::string mfa(method_name(Method::MFA));
    std::map<std::string, const ResultRow*> scored;
    for (const auto& r : report.rows) {
        if (r.provider == provider && r.method == mfa && r.status == RowStatus::Scored) scored[r.question_id] = &r;
    }
    std::map<std::string, ElicitationRecord> records;
    std::vector<std::string> labels;
    for (const auto& c : report.calls) {
        if (c.provider != provider || c.method != mfa || !scored.count(c.question_id)) continue;
        auto& rec = records[c.question_id];
        rec.question_id = c.question_id;
        rec.method = Method::MFA;
        rec.per_call.push_back({c.label, "", c.parsed_answer});
        if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
    }
    // Only questions with every format answered take part, in row order.
    std::vector<std::pair<const ResultRow*, const ElicitationRecord*>> full;
    for (const auto& r : report.rows) {
        if (r.provider != provider || r.method != mfa || r.status != RowStatus::Scored) continue;
        const auto it = records.find(r.question_id);
        if (it != records.end() && it->second.per_call.size() == labels.size()) full.push_back({&r, &it->second});
    }
    if (full.empty()) return;

    for (int k = 2; k <= static_cast<int>(labels.size()); ++k) {
        std::vector<std::vector<ScoredPrediction>> per_subset;
        std::vector<std::string> names;
        for (const auto& [row, rec] : full) {
            const auto subs = mfa_subset_records(*rec, k);
            if (per_subset.empty()) {
                per_subset.resize(subs.size());
                for (const auto& s : subs) {
                    std::vector<std::string> ls;
                    for (const auto& c : s.per_call) ls.push_back(c.label);
                    names.push_back(join(ls, '+'));
                }
            }
            const GoldAnswer gold = parse_gold(row->gold);
            for (std::size_t j = 0; j < subs.size(); ++j) {
                per_subset[j].push_back({subs[j].confidence, match_answer(subs[j].answer, gold).correct, row->question_id});
            }
        }
        KAblationRow ka{provider, k, per_subset.size(), {}, {}, {}, {}};
        std::vector<double> acc, au, ece, sat;
        for (std::size_t j = 0; j < per_subset.size(); ++j) {
            const auto st = subset_stats(per_subset[j]);
            report.format_subsets.push_back({provider, names[j], k, st.accuracy, st.auroc, st.ece10, st.saturation});
            acc.push_back(*st.accuracy);
            ece.push_back(*st.ece10);
            sat.push_back(*st.saturation);
            if (st.auroc) au.push_back(*st.auroc);
        }
        const auto mean = [](const std::vector<double>& v) -> std::optional<double> {
            if (v.empty()) return std::nullopt;
            double s = 0.0;
            for (double x : v) s += x;
            return s / static_cast<double>(v.size());
        };
        ka.accuracy = mean(acc);
        ka.auroc = au.size() == per_subset.size() ? mean(au) : std::nullopt;
        ka.ece10 = mean(ece);
        ka.saturation = mean(sat);
        if (std::find(options.k_values.begin(), options.k_values.end(), k) != options.k_values.end()) {
            report.k_ablation.push_back(ka);
        }
    }
}

}  // namespace

RunReport build_report(std::vector<ResultRow> rows, std::vector<CallRow> calls, const ReportOptions& options) {
    RunReport report;
    report.rows = std::move(rows);
    report.calls = std::move(calls);
    report.options = options;
    const auto groups = groups_of(report.rows);
    std::vector<std::string> providers;
    for (const auto& g : groups) {
        if (std::find(providers.begin(), providers.end(), g.provider) == providers.end()) providers.push_back(g.provider);
    }

    for (const auto& g : groups) {
        const auto subset = rows_of(report.rows, g);
        report.summaries.push_back(summarize(subset, options.bootstrap));
        const auto preds = scored_predictions(subset, g.provider, g.method);
        if (preds.empty()) continue;
        report.reliability.push_back({g.provider, g.method, reliability_curve(preds, options.reliability_grid, options.band)});
        report.risk_coverage.push_back({g.provider, g.method, risk_coverage(preds)});

        std::map<std::string, std::vector<ScoredPrediction>> by_type;
        std::map<MatchType, std::size_t> by_match;
        for (const auto& r : subset) {
            if (r.status != RowStatus::Scored) continue;
            by_type[r.question_type].push_back({r.confidence, r.correct, r.question_id});
            ++by_match[r.match_type];
        }
        const double n = static_cast<double>(preds.size());
        for (const auto& [type, p] : by_type) {
            report.question_types.push_back({g.provider, g.method, type, p.size(), p.size() / n, accuracy(p),
                                             mean_confidence(p), defined([&] { return auroc(p); })});
        }
        for (auto mt : {MatchType::Exact, MatchType::Numeric, MatchType::FuzzyNumeric, MatchType::Containment,
                        MatchType::None}) {
            const std::size_t c = by_match[mt];
            report.match_types.push_back({g.provider, g.method, std::string(match_type_name(mt)), c, c / n, {}, {}, {}});
        }
    }

    for (const auto& provider : providers) {
        format_ablation(report, provider, options);

        std::vector<std::string> methods;
        for (const auto& g : groups) {
            if (g.provider == provider) methods.push_back(g.method);
        }
        const std::string mfa(method_name(Method::MFA));
        const std::string ref = std::find(methods.begin(), methods.end(), mfa) != methods.end() ? mfa : methods.front();
        const auto ref_preds = scored_predictions(report.rows, provider, ref);
        std::vector<std::pair<std::string, BootstrapResult>> comparisons;
        for (const auto& m : methods) {
            if (m == ref) continue;
            const auto other = scored_predictions(report.rows, provider, m);
            std::set<std::string> common_ids;
            for (const auto& p : other) common_ids.insert(p.question_id);
            std::vector<ScoredPrediction> a, b;
            std::set<std::string> both;
            for (const auto& p : ref_preds) {
                if (common_ids.count(p.question_id)) {
                    a.push_back(p);
                    both.insert(p.question_id);
                }
            }
            for (const auto& p : other) {
                if (both.count(p.question_id)) b.push_back(p);
            }
            if (!both_classes(a) || !both_classes(b)) continue;
            try {
                comparisons.push_back({ref + " vs " + m, paired_bootstrap_diff(a, b, kAuroc, options.bootstrap)});
            } catch (const std::runtime_error&) {
                // too many single-class resamples
            }
        }
        if (comparisons.empty()) continue;
        for (auto& row : significance_table(std::move(comparisons))) report.significance.push_back({provider, std::move(row)});
    }
    return report;
}

RunReport run_matrix(const std::vector<QAItem>& items, const std::vector<ModelProvider*>& providers,
                     const RunConfig& config, const ReportOptions& options, RunStats* stats) {
    auto [rows, calls] = run_elicitation(items, providers, config, stats);
    return build_report(std::move(rows), std::move(calls), options);
}

// ------------------------------------------------------------ serialization

namespace {

const std::vector<std::string> kRowColumns = {
    "provider", "method", "question_id", "source", "question_type", "status", "answer", "confidence",
    "correct", "strict_correct", "match_type", "api_calls", "gold", "flags", "log_rows", "log_cols",
    "frac_numeric", "frac_date", "frac_boolean", "frac_text", "question_word_count", "op_keyword_count"};

std::string num(double v) { return text::format_double(v); }
std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

nlohmann::ordered_json jopt(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

std::string to_csv(std::vector<std::string> columns, std::vector<std::vector<std::string>> rows) {
    Table t;
    t.columns = std::move(columns);
    t.rows = std::move(rows);
    return serialize(t, SerializationFormat::Csv);
}

double parse_double(const std::string& s, const char* what) {
    const auto v = text::parse_number(s);
    if (!v) throw std::invalid_argument(std::string("bad ") + what + " value '" + s + "'");
    return *v;
}

std::size_t column_index(const Table& t, const std::string& name) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    if (it == t.columns.end()) throw std::invalid_argument("missing column " + name);
    return static_cast<std::size_t>(it - t.columns.begin());
}

std::string file_stem(const std::string& provider, const std::string& method) {
    std::string s = provider + "__" + method;
    for (char& c : s) {
        if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '_' || c == '-')) c = '_';
    }
    return s;
}

void write_file(const fs::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << content;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

std::string rows_to_csv(std::span<const ResultRow> rows) {
    std::vector<std::vector<std::string>> body;
    for (const auto& r : rows) {
        std::vector<std::string> cells = {r.provider, r.method, r.question_id, r.source, r.question_type,
                                          std::string(row_status_name(r.status)), r.answer, num(r.confidence),
                                          r.correct ? "1" : "0", r.strict_correct ? "1" : "0",
                                          std::string(match_type_name(r.match_type)), std::to_string(r.api_calls),
                                          r.gold, r.flags};
        for (double f : r.features.to_array()) cells.push_back(num(f));
        body.push_back(std::move(cells));
    }
    return to_csv(kRowColumns, std::move(body));
}

std::vector<ResultRow> rows_from_csv(std::string_view text) {
    const Table t = parse_table(text, SerializationFormat::Csv);
    std::vector<std::size_t> idx;
    for (const auto& c : kRowColumns) idx.push_back(column_index(t, c));
    std::vector<ResultRow> out;
    for (const auto& cells : t.rows) {
        const auto cell = [&](std::size_t k) -> const std::string& { return cells[idx[k]]; };
        ResultRow r;
        r.provider = cell(0);
        r.method = cell(1);
        r.question_id = cell(2);
        r.source = cell(3);
        r.question_type = cell(4);
        if (cell(5) == "scored") r.status = RowStatus::Scored;
        else if (cell(5) == "skipped") r.status = RowStatus::Skipped;
        else if (cell(5) == "failed") r.status = RowStatus::Failed;
        else throw std::invalid_argument("bad status '" + cell(5) + "'");
        r.answer = cell(6);
        r.confidence = parse_double(cell(7), "confidence");
        r.correct = cell(8) == "1";
        r.strict_correct = cell(9) == "1";
        const auto mt = parse_match_type(cell(10));
        if (!mt) throw std::invalid_argument("bad match type '" + cell(10) + "'");
        r.match_type = *mt;
        r.api_calls = static_cast<int>(parse_double(cell(11), "api_calls"));
        r.gold = cell(12);
        r.flags = cell(13);
        std::array<double, kNumStructuralFeatures> f{};
        for (std::size_t k = 0; k < f.size(); ++k) f[k] = parse_double(cell(14 + k), "feature");
        r.features = StructuralFeatures::from_array(f);
        out.push_back(std::move(r));
    }
    return out;
}

std::string calls_to_csv(std::span<const CallRow> calls) {
    std::vector<std::vector<std::string>> body;
    for (const auto& c : calls) body.push_back({c.provider, c.method, c.question_id, c.label, c.parsed_answer});
    return to_csv({"provider", "method", "question_id", "label", "parsed_answer"}, std::move(body));
}

std::vector<CallRow> calls_from_csv(std::string_view text) {
    const Table t = parse_table(text, SerializationFormat::Csv);
    const std::size_t p = column_index(t, "provider"), m = column_index(t, "method"), q = column_index(t, "question_id"),
                      l = column_index(t, "label"), a = column_index(t, "parsed_answer");
    std::vector<CallRow> out;
    for (const auto& r : t.rows) out.push_back({r[p], r[m], r[q], r[l], r[a]});
    return out;
}

std::string summary_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["format"] = "tabcal-report";
    j["version"] = 1;
    std::size_t loaded = 0, scored = 0, skipped = 0, failed = 0;
    auto& methods = j["methods"] = nlohmann::ordered_json::array();
    for (const auto& s : report.summaries) {
        loaded += s.loaded;
        scored += s.scored;
        skipped += s.skipped;
        failed += s.failed;
        nlohmann::ordered_json m;
        m["provider"] = s.provider;
        m["method"] = s.method;
        m["loaded"] = s.loaded;
        m["scored"] = s.scored;
        m["skipped"] = s.skipped;
        m["failed"] = s.failed;
        m["unparsed"] = s.unparsed;
        m["accuracy"] = jopt(s.accuracy);
        m["mean_confidence"] = jopt(s.mean_confidence);
        m["gap"] = jopt(s.gap);
        m["smece"] = jopt(s.smece);
        m["ece_10"] = jopt(s.ece10);
        m["ece_15"] = jopt(s.ece15);
        m["ece_20"] = jopt(s.ece20);
        m["brier"] = jopt(s.brier);
        m["auroc"] = jopt(s.auroc);
        m["auroc_ci"] = {jopt(s.auroc_lower), jopt(s.auroc_upper)};
        m["strict_accuracy"] = jopt(s.strict_accuracy);
        m["strict_auroc"] = jopt(s.strict_auroc);
        m["separability"] = jopt(s.separability);
        m["saturation"] = jopt(s.saturation);
        m["calls_per_question"] = jopt(s.calls_per_question);
        methods.push_back(std::move(m));
    }
    j["totals"] = {{"loaded", loaded}, {"scored", scored}, {"skipped", skipped}, {"failed", failed}};
    auto& sig = j["significance"] = nlohmann::ordered_json::array();
    for (const auto& e : report.significance) {
        nlohmann::ordered_json s;
        s["provider"] = e.provider;
        s["comparison"] = e.row.comparison;
        s["metric"] = "auroc";
        s["diff"] = e.row.diff.point;
        s["ci"] = {e.row.diff.lower, e.row.diff.upper};
        s["p"] = jopt(e.row.diff.p_value);
        s["p_holm"] = e.row.p_holm;
        s["stars"] = e.row.stars;
        s["resamples"] = e.row.diff.resamples;
        sig.push_back(std::move(s));
    }
    const auto& o = report.options;
    j["report_options"] = {
        {"bootstrap", {{"resamples", o.bootstrap.resamples}, {"level", o.bootstrap.level}, {"seed", o.bootstrap.seed}}},
        {"reliability",
         {{"grid", o.reliability_grid},
          {"band_resamples", o.band.resamples},
          {"band_level", o.band.level},
          {"band_seed", o.band.seed}}},
        {"k_values", o.k_values},
    };
    j["conventions"] = {
        {"ensemble_answer", "first member"},
        {"semantic_entropy_samples", "shared with self-consistency when both run"},
        {"skipped", "no answer to judge"},
    };
    return j.dump(2) + "\n";
}

ReportOptions report_options_from_summary(std::string_view summary) {
    ReportOptions o;
    const auto j = nlohmann::json::parse(summary);
    if (!j.contains("report_options")) return o;
    const auto& r = j.at("report_options");
    const auto& b = r.at("bootstrap");
    o.bootstrap.resamples = b.at("resamples").get<int>();
    o.bootstrap.level = b.at("level").get<double>();
    o.bootstrap.seed = b.at("seed").get<std::uint64_t>();
    const auto& rel = r.at("reliability");
    o.reliability_grid = rel.at("grid").get<int>();
    o.band.resamples = rel.at("band_resamples").get<int>();
    o.band.level = rel.at("band_level").get<double>();
    o.band.seed = rel.at("band_seed").get<std::uint64_t>();
    o.k_values = r.at("k_values").get<std::vector<int>>();
    return o;
}

void emit_report(const RunReport& report, const fs::path& out_dir) {
    std::error_code ec;
    fs::create_directories(out_dir / "curves", ec);
    fs::create_directories(out_dir / "analysis", ec);
    if (ec) throw std::runtime_error("cannot create " + out_dir.string() + ": " + ec.message());

    write_file(out_dir / "summary.json", summary_json(report));
    write_file(out_dir / "rows.csv", rows_to_csv(report.rows));
    write_file(out_dir / "calls.csv", calls_to_csv(report.calls));
    for (const auto& c : report.reliability) {
        write_file(out_dir / "curves" / (file_stem(c.provider, c.method) + "__reliability.csv"), curve_to_csv(c.curve));
    }
    for (const auto& c : report.risk_coverage) {
        write_file(out_dir / "curves" / (file_stem(c.provider, c.method) + "__risk_coverage.csv"), curve_to_csv(c.curve));
    }

    std::vector<std::vector<std::string>> body;
    for (const auto& k : report.k_ablation) {
        body.push_back({k.provider, std::to_string(k.k), std::to_string(k.subsets), opt(k.accuracy), opt(k.auroc),
                        opt(k.ece10), opt(k.saturation)});
    }
    write_file(out_dir / "analysis" / "k_ablation.csv",
               to_csv({"provider", "k", "subsets", "accuracy", "auroc", "ece_10", "saturation"}, std::move(body)));

    body.clear();
    for (const auto& f : report.format_subsets) {
        body.push_back({f.provider, f.formats, std::to_string(f.k), opt(f.accuracy), opt(f.auroc), opt(f.ece10),
                        opt(f.saturation)});
    }
    write_file(out_dir / "analysis" / "format_subsets.csv",
               to_csv({"provider", "formats", "k", "accuracy", "auroc", "ece_10", "saturation"}, std::move(body)));

    body.clear();
    for (const auto& g : report.question_types) {
        body.push_back({g.provider, g.method, g.group, std::to_string(g.n), num(g.fraction), opt(g.accuracy),
                        opt(g.mean_confidence), opt(g.auroc)});
    }
    write_file(out_dir / "analysis" / "question_types.csv",
               to_csv({"provider", "method", "question_type", "n", "fraction", "accuracy", "mean_confidence", "auroc"},
                      std::move(body)));

    body.clear();
    for (const auto& g : report.match_types) {
        body.push_back({g.provider, g.method, g.group, std::to_string(g.n), num(g.fraction)});
    }
    write_file(out_dir / "analysis" / "match_types.csv",
               to_csv({"provider", "method", "match_type", "count", "fraction"}, std::move(body)));

    std::vector<std::vector<std::string>> strict, sep, sat;
    for (const auto& s : report.summaries) {
        strict.push_back({s.provider, s.method, opt(s.accuracy), opt(s.strict_accuracy), opt(s.auroc), opt(s.strict_auroc)});
        sep.push_back({s.provider, s.method, opt(s.separability)});
        sat.push_back({s.provider, s.method, opt(s.saturation)});
    }
    write_file(out_dir / "analysis" / "strict_vs_fuzzy.csv",
               to_csv({"provider", "method", "accuracy", "strict_accuracy", "auroc", "strict_auroc"}, std::move(strict)));
    write_file(out_dir / "analysis" / "separability.csv", to_csv({"provider", "method", "separability"}, std::move(sep)));
    write_file(out_dir / "analysis" / "saturation.csv", to_csv({"provider", "method", "saturation"}, std::move(sat)));

    body.clear();
    for (const auto& e : report.significance) {
        body.push_back({e.provider, e.row.comparison, num(e.row.diff.point), num(e.row.diff.lower), num(e.row.diff.upper),
                        opt(e.row.diff.p_value), num(e.row.p_holm), e.row.stars});
    }
    write_file(out_dir / "analysis" / "significance.csv",
               to_csv({"provider", "comparison", "auroc_diff", "lower", "upper", "p", "p_holm", "stars"}, std::move(body)));
}

}  // namespace tabcal
