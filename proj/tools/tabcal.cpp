// Command-line front end: run elicitation matrices, rebuild reports, and
// apply the analysis tools to persisted rows.

#include "tabcal/ensembles.hpp"
#include "tabcal/harness.hpp"
#include "tabcal/recalibration.hpp"
#include "tabcal/rng.hpp"
#include "tabcal/settings.hpp"
#include "tabcal/text_util.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

using namespace tabcal;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << s;
    if (!out) throw std::runtime_error("cannot write " + p.string());
}

void emit(const std::optional<fs::path>& out, const std::string& text) {
    if (out) {
        spit(*out, text);
    } else {
        std::cout << text;
    }
}

std::string num(double v) { return text::format_double(v); }
std::string opt(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

std::string csv(std::vector<std::string> columns, std::vector<std::vector<std::string>> rows) {
    Table t;
    t.columns = std::move(columns);
    t.rows = std::move(rows);
    return serialize(t, SerializationFormat::Csv);
}

SerializationFormat format_arg(const std::string& name) {
    const auto f = parse_format_name(text::to_lower(name));
    if (!f) throw CLI::ValidationError("--format", "unknown format '" + name + "'");
    return *f;
}

Method method_arg(const std::string& name) {
    const auto m = parse_method(text::to_lower(name));
    if (!m) throw CLI::ValidationError("--method", "unknown method '" + name + "'");
    return *m;
}

std::vector<Method> methods_arg(const std::string& list) {
    std::vector<Method> out;
    for (const auto& m : text::split(list, ',')) out.push_back(method_arg(std::string(text::trim(m))));
    return out;
}

/// Shared flags; each overrides the matching config key when given.
struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string cache;
    std::string out;
    std::optional<int> parallelism;
    std::string provider;
    std::string methods;
    std::string dataset;
    std::string dataset_kind;
    std::string base_url;
    std::string model;
    std::optional<int> resamples;
    std::optional<std::size_t> limit;
    std::optional<std::size_t> n;
    bool replay = false;

    void add_to(CLI::App* app) {
        app->add_option("--config", config, "JSON config file");
        app->add_option("--seed", seed, "Seed for synthetic data, respondents and bootstrap");
        app->add_option("--cache", cache, "NDJSON response cache");
        app->add_option("--out", out, "Output directory");
        app->add_option("--parallelism", parallelism, "Concurrent questions");
        app->add_option("--provider", provider, "synthetic or http");
        app->add_option("--methods", methods, "Comma-separated methods");
        app->add_option("--dataset", dataset, "Dataset path");
        app->add_option("--dataset-kind", dataset_kind, "synthetic, wtq or tablebench");
        app->add_option("--base-url", base_url, "HTTP provider base URL");
        app->add_option("--model", model, "HTTP provider model");
        app->add_option("--resamples", resamples, "Bootstrap resamples");
        app->add_option("--limit", limit, "Use at most this many items");
        app->add_option("--n", n, "Synthetic corpus size");
        app->add_flag("--replay", replay, "Serve every call from the cache");
    }

    Settings settings() const {
        Settings s = config.empty() ? Settings{} : load_settings(config);
        if (seed) {
            s.seed = *seed;
            s.report.bootstrap.seed = *seed;
            s.report.band.seed = *seed;
        }
        if (!cache.empty()) s.run.cache = fs::path(cache);
        if (!out.empty()) s.out = fs::path(out);
        if (parallelism) s.run.parallelism = *parallelism;
        if (!methods.empty()) s.run.methods = methods_arg(methods);
        if (!dataset_kind.empty()) s.dataset.kind = dataset_kind;
        if (!dataset.empty()) s.dataset.path = dataset;
        if (resamples) s.report.bootstrap.resamples = *resamples;
        if (limit) s.dataset.limit = *limit;
        if (n) s.dataset.synthetic.n = *n;
        if (replay) s.run.replay = true;
        if (!provider.empty()) {
            ProviderSettings p;
            p.kind = provider;
            if (p.kind != "synthetic" && p.kind != "http") throw CLI::ValidationError("--provider", "synthetic or http");
            if (!base_url.empty()) p.http.base_url = base_url;
            if (!model.empty()) p.http.model = model;
            s.providers = {p};
        } else if (!base_url.empty() || !model.empty()) {
            for (auto& p : s.providers) {
                if (!base_url.empty()) p.http.base_url = base_url;
                if (!model.empty()) p.http.model = model;
            }
        }
        if (s.prompts) s.run.templates = PromptTemplates::load(*s.prompts);
        return s;
    }
};

std::vector<ResultRow> read_rows(const std::string& path) { return rows_from_csv(slurp(path)); }

/// Picks the provider: the given one, or the only one present.
std::string provider_of(const std::vector<ResultRow>& rows, const std::string& wanted) {
    if (!wanted.empty()) return wanted;
    std::set<std::string> names;
    for (const auto& r : rows) names.insert(r.provider);
    if (names.size() != 1) throw std::invalid_argument("rows hold several providers; pass --provider");
    return *names.begin();
}

MetricFn metric_arg(const std::string& name) {
    if (name == "auroc") return [](std::span<const ScoredPrediction> p) { return auroc(p); };
    if (name == "ece") return [](std::span<const ScoredPrediction> p) { return binned_ece(p, 10); };
    if (name == "smece") return [](std::span<const ScoredPrediction> p) { return smooth_ece(p); };
    if (name == "brier") return [](std::span<const ScoredPrediction> p) { return brier(p); };
    if (name == "accuracy") return [](std::span<const ScoredPrediction> p) { return accuracy(p); };
    throw CLI::ValidationError("--metric", "auroc, ece, smece, brier or accuracy");
}

/// Deterministic 50/50 split by hashed question id.
template <class T>
std::pair<std::vector<T>, std::vector<T>> split_half(const std::vector<T>& preds, std::uint64_t seed,
                                                     const std::function<const std::string&(const T&)>& id) {
    std::vector<std::pair<std::uint64_t, std::size_t>> keys;
    for (std::size_t i = 0; i < preds.size(); ++i) keys.push_back({hash_combine(seed, hash_string(id(preds[i]))), i});
    std::sort(keys.begin(), keys.end());
    std::vector<bool> train(preds.size(), false);
    for (std::size_t k = 0; k < keys.size() / 2; ++k) train[keys[k].second] = true;
    std::pair<std::vector<T>, std::vector<T>> out;
    for (std::size_t i = 0; i < preds.size(); ++i) (train[i] ? out.first : out.second).push_back(preds[i]);
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Calibration toolkit for table question answering"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "tabcal 1.0.0");

    // serialize
    auto* ser = app.add_subcommand("serialize", "Render a table in one or all serialization formats");
    std::string ser_table, ser_in = "csv", ser_format = "all";
    ser->add_option("table", ser_table, "Table file")->required();
    ser->add_option("--input-format", ser_in, "Format of the table file");
    ser->add_option("--format", ser_format, "markdown, html, json, csv or all");

    // synth
    auto* syn = app.add_subcommand("synth", "Write a synthetic corpus with its ground truth");
    Common syn_c;
    syn_c.add_to(syn);
    double syn_rho = -1, syn_beta = -99, syn_share = -1;
    syn->add_option("--rho", syn_rho, "Format sensitivity of input errors");
    syn->add_option("--beta", syn_beta, "Overconfidence shift");
    syn->add_option("--input-error-share", syn_share, "Fraction of errors that are input errors");

    // elicit
    auto* eli = app.add_subcommand("elicit", "Run the method-by-provider matrix and write a report");
    Common eli_c;
    eli_c.add_to(eli);

    // evaluate
    auto* eva = app.add_subcommand("evaluate", "Re-judge stored answers and rebuild the report");
    std::string eva_in;
    Common eva_c;
    eva_c.add_to(eva);
    eva->add_option("--in", eva_in, "Report directory holding rows.csv and calls.csv")->required();

    // report
    auto* rep = app.add_subcommand("report", "Rebuild summaries and analyses from stored rows");
    std::string rep_in;
    bool rep_check = false;
    Common rep_c;
    rep_c.add_to(rep);
    rep->add_option("--in", rep_in, "Report directory holding rows.csv and calls.csv")->required();
    rep->add_flag("--check", rep_check, "Fail unless summary.json matches a recomputation");

    // recalibrate
    auto* rec = app.add_subcommand("recalibrate", "Fit, apply or compare recalibration maps");
    rec->require_subcommand(1);
    std::string rec_rows, rec_method = "verbalized", rec_provider, rec_kind = "platt", rec_group = "full",
                rec_model, rec_out;
    std::uint64_t rec_seed = 0;
    bool rec_logit = false;
    auto* rec_fit = rec->add_subcommand("fit", "Fit a model on scored rows");
    rec_fit->add_option("--rows", rec_rows, "rows.csv")->required();
    rec_fit->add_option("--method", rec_method, "Method whose confidences are mapped");
    rec_fit->add_option("--provider", rec_provider, "Provider name");
    rec_fit->add_option("--kind", rec_kind, "temperature, platt, isotonic or structure_aware");
    rec_fit->add_option("--group", rec_group, "Covariate group for structure_aware");
    rec_fit->add_flag("--logit", rec_logit, "Platt on logit(c) instead of c");
    rec_fit->add_option("--out", rec_out, "Model JSON (default stdout)");
    auto* rec_apply = rec->add_subcommand("apply", "Rewrite row confidences through a model");
    rec_apply->add_option("--rows", rec_rows, "rows.csv")->required();
    rec_apply->add_option("--model", rec_model, "Model JSON")->required();
    rec_apply->add_option("--method", rec_method, "Rows of this method are mapped");
    rec_apply->add_option("--out", rec_out, "Output rows.csv (default stdout)");
    auto* rec_cmp = rec->add_subcommand("compare", "50/50 split: every map plus the feature ablation");
    rec_cmp->add_option("--rows", rec_rows, "rows.csv")->required();
    rec_cmp->add_option("--method", rec_method, "Method whose confidences are mapped");
    rec_cmp->add_option("--provider", rec_provider, "Provider name");
    rec_cmp->add_option("--seed", rec_seed, "Split seed");
    rec_cmp->add_option("--out", rec_out, "Output directory")->required();

    // stats
    auto* sta = app.add_subcommand("stats", "Bootstrap intervals and Holm-corrected paired tests");
    std::string sta_rows, sta_metric = "auroc", sta_reference, sta_provider, sta_out;
    int sta_resamples = kDefaultResamples, sta_parallel = 1;
    double sta_level = 0.95;
    std::uint64_t sta_seed = 0;
    sta->add_option("--rows", sta_rows, "rows.csv")->required();
    sta->add_option("--metric", sta_metric, "auroc, ece, smece, brier or accuracy");
    sta->add_option("--reference", sta_reference, "Method compared against every other (default mfa if present)");
    sta->add_option("--provider", sta_provider, "Provider name");
    sta->add_option("--resamples", sta_resamples, "Bootstrap resamples (at least 1000)");
    sta->add_option("--level", sta_level, "Interval level");
    sta->add_option("--seed", sta_seed, "Bootstrap seed");
    sta->add_option("--parallelism", sta_parallel, "Bootstrap threads");
    sta->add_option("--out", sta_out, "Output CSV (default stdout)");

    // ensemble
    auto* ens = app.add_subcommand("ensemble", "Fit convex confidence ensembles with split stability");
    std::string ens_rows, ens_members = "mfa,self_consistency,semantic_entropy", ens_provider, ens_out;
    double ens_grid = kDefaultGridStep;
    int ens_splits = 5;
    std::uint64_t ens_seed = 0;
    ens->add_option("--rows", ens_rows, "rows.csv")->required();
    ens->add_option("--members", ens_members, "Two or three comma-separated methods; the first gives the answer");
    ens->add_option("--provider", ens_provider, "Provider name");
    ens->add_option("--grid", ens_grid, "Weight grid step");
    ens->add_option("--splits", ens_splits, "Random 50/50 splits");
    ens->add_option("--seed", ens_seed, "Split seed");
    ens->add_option("--out", ens_out, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*ser) {
            const Table t = parse_table(slurp(ser_table), format_arg(ser_in));
            if (ser_format == "all") {
                for (auto f : kAllFormats) std::cout << "== " << format_name(f) << "\n" << serialize(t, f) << "\n";
            } else {
                std::cout << serialize(t, format_arg(ser_format));
            }
        } else if (*syn) {
            Settings s = syn_c.settings();
            auto& spec = s.dataset.synthetic;
            if (syn_rho >= 0) spec.profile.rho = syn_rho;
            if (syn_beta > -99) spec.profile.beta = syn_beta;
            if (syn_share >= 0) spec.profile.input_error_share = syn_share;
            if (!s.out) throw CLI::ValidationError("--out", "synth needs an output directory");
            const auto bench = synthesize_benchmark(spec, s.seed);
            write_synthetic(bench, *s.out);
            std::cerr << "wrote " << bench.items.size() << " synthetic items to " << s.out->string() << "\n";
        } else if (*eli) {
            const Settings s = eli_c.settings();
            if (!s.out) throw CLI::ValidationError("--out", "elicit needs an output directory");
            const auto data = load_dataset(s.dataset, s.seed);
            for (const auto& w : data.load.warnings) std::cerr << "warning: " << w << "\n";
            std::cerr << "loaded " << data.load.items.size() << " items (" << data.load.skipped << " skipped, "
                      << data.load.excluded << " excluded)\n";
            auto owned = make_providers(s, data);
            std::vector<ModelProvider*> providers;
            for (auto& p : owned) providers.push_back(p.get());
            RunStats stats;
            const auto report = run_matrix(data.load.items, providers, s.run, s.report, &stats);
            emit_report(report, *s.out);
            std::cerr << "provider calls: " << stats.provider_calls << ", cache hits: " << stats.cache_hits << "\n";
        } else if (*eva || *rep) {
            const Common& c = *eva ? eva_c : rep_c;
            const Settings s = c.settings();
            const fs::path in = *eva ? eva_in : rep_in;
            // Defaults come from the run being rebuilt; a config or flags override them.
            ReportOptions options = s.report;
            if (c.config.empty() && fs::exists(in / "summary.json")) {
                const int parallelism = options.bootstrap.parallelism;
                options = report_options_from_summary(slurp(in / "summary.json"));
                options.bootstrap.parallelism = parallelism;
                if (c.seed) options.bootstrap.seed = options.band.seed = *c.seed;
                if (c.resamples) options.bootstrap.resamples = *c.resamples;
            }
            auto rows = rows_from_csv(slurp(in / "rows.csv"));
            if (*eva) rejudge(rows);
            const auto report = build_report(std::move(rows), calls_from_csv(slurp(in / "calls.csv")), options);
            if (rep_check && *rep) {
                if (summary_json(report) != slurp(in / "summary.json")) {
                    std::cerr << "summary.json does not match the rows\n";
                    return 2;
                }
                std::cerr << "summary.json matches the rows\n";
            }
            if (s.out) emit_report(report, *s.out);
        } else if (*rec_fit) {
            const auto rows = read_rows(rec_rows);
            const auto provider = provider_of(rows, rec_provider);
            const auto featured = featured_predictions(rows, provider, rec_method);
            const auto plain = strip_features(featured);
            RecalibrationModel model;
            if (rec_kind == "temperature") {
                model = fit_temperature(plain);
            } else if (rec_kind == "platt") {
                model = fit_platt(plain, rec_logit ? PlattInput::Logit : PlattInput::Raw);
            } else if (rec_kind == "isotonic") {
                model = fit_isotonic(plain);
            } else if (rec_kind == "structure_aware") {
                const auto group = parse_feature_group(rec_group);
                if (!group) throw CLI::ValidationError("--group", "unknown feature group");
                model = fit_structure_aware(featured, *group);
            } else {
                throw CLI::ValidationError("--kind", "temperature, platt, isotonic or structure_aware");
            }
            emit(rec_out.empty() ? std::nullopt : std::optional<fs::path>(rec_out), model_to_json(model));
        } else if (*rec_apply) {
            auto rows = read_rows(rec_rows);
            const auto model = model_from_json(slurp(rec_model));
            for (auto& r : rows) {
                if (r.method != rec_method || r.status != RowStatus::Scored) continue;
                r.confidence = apply(model, r.confidence, r.features);
            }
            emit(rec_out.empty() ? std::nullopt : std::optional<fs::path>(rec_out), rows_to_csv(rows));
        } else if (*rec_cmp) {
            const auto rows = read_rows(rec_rows);
            const auto provider = provider_of(rows, rec_provider);
            const auto featured = featured_predictions(rows, provider, rec_method);
            const auto [train, test] = split_half<FeaturedPrediction>(
                featured, rec_seed, [](const FeaturedPrediction& p) -> const std::string& { return p.pred.question_id; });
            const auto train_plain = strip_features(train);
            std::vector<std::pair<std::string, std::vector<ScoredPrediction>>> mapped;
            mapped.push_back({"uncalibrated", strip_features(test)});
            const std::vector<std::pair<std::string, RecalibrationModel>> models = {
                {"temperature", fit_temperature(train_plain)},
                {"platt", fit_platt(train_plain)},
                {"isotonic", fit_isotonic(train_plain)},
                {"structure_aware", fit_structure_aware(train, FeatureGroup::Full)},
            };
            fs::create_directories(fs::path(rec_out) / "models");
            for (const auto& [name, m] : models) {
                mapped.push_back({name, apply_all(m, test)});
                spit(fs::path(rec_out) / "models" / (name + ".json"), model_to_json(m));
            }
            std::vector<std::vector<std::string>> body;
            for (const auto& [name, p] : mapped) {
                std::optional<double> au;
                try {
                    au = auroc(p);
                } catch (const UndefinedMetric&) {
                }
                body.push_back({name, std::to_string(p.size()), num(binned_ece(p, 10)), num(smooth_ece(p)),
                                num(brier(p)), opt(au)});
            }
            spit(fs::path(rec_out) / "recalibration.csv",
                 csv({"model", "n_test", "ece_10", "smece", "brier", "auroc"}, std::move(body)));
            body.clear();
            const std::vector<FeatureGroup> groups = {FeatureGroup::ConfidenceOnly, FeatureGroup::TableDims,
                                                      FeatureGroup::ColumnTypes, FeatureGroup::QueryComplexity,
                                                      FeatureGroup::Full};
            for (const auto& a : feature_ablation(train, test, groups)) {
                body.push_back({std::string(feature_group_name(a.group)), num(a.ece), num(a.auroc)});
            }
            spit(fs::path(rec_out) / "feature_ablation.csv", csv({"group", "ece_10", "auroc"}, std::move(body)));
        } else if (*sta) {
            const auto rows = read_rows(sta_rows);
            const auto provider = provider_of(rows, sta_provider);
            const MetricFn metric = metric_arg(sta_metric);
            std::vector<std::string> methods;
            for (const auto& r : rows) {
                if (r.provider == provider && std::find(methods.begin(), methods.end(), r.method) == methods.end()) {
                    methods.push_back(r.method);
                }
            }
            std::string ref = sta_reference;
            if (ref.empty()) ref = std::find(methods.begin(), methods.end(), "mfa") != methods.end() ? "mfa" : methods.at(0);
            const BootstrapOptions opts{sta_resamples, sta_level, sta_seed, sta_parallel};
            std::vector<std::vector<std::string>> body;
            for (const auto& m : methods) {
                const auto ci = percentile_ci(scored_predictions(rows, provider, m), metric, opts);
                body.push_back({"interval", m, num(ci.point), num(ci.lower), num(ci.upper), "", "", ""});
            }
            std::vector<std::pair<std::string, BootstrapResult>> cmp;
            const auto a = scored_predictions(rows, provider, ref);
            for (const auto& m : methods) {
                if (m != ref) cmp.push_back({ref + " vs " + m, paired_bootstrap_diff(a, scored_predictions(rows, provider, m), metric, opts)});
            }
            for (const auto& row : significance_table(std::move(cmp))) {
                body.push_back({"paired", row.comparison, num(row.diff.point), num(row.diff.lower), num(row.diff.upper),
                                opt(row.diff.p_value), num(row.p_holm), row.stars});
            }
            emit(sta_out.empty() ? std::nullopt : std::optional<fs::path>(sta_out),
                 csv({"kind", "name", sta_metric, "lower", "upper", "p", "p_holm", "stars"}, std::move(body)));
        } else if (*ens) {
            const auto rows = read_rows(ens_rows);
            const auto provider = provider_of(rows, ens_provider);
            const auto members = methods_arg(ens_members);
            std::vector<std::vector<ScoredPrediction>> per;
            for (auto m : members) per.push_back(scored_predictions(rows, provider, std::string(method_name(m))));
            const auto joined = join_members(per);
            const auto fit = fit_weights(joined, members, ens_grid);
            const auto st = split_stability(joined, members, ens_splits, ens_seed, ens_grid);
            fs::create_directories(ens_out);
            spit(fs::path(ens_out) / "ensemble.json", ensemble_to_json(fit.spec));
            std::vector<std::string> cols = {"split"};
            for (auto m : members) cols.push_back("w_" + std::string(method_name(m)));
            cols.push_back("test_auroc");
            for (auto m : members) cols.push_back("test_auroc_" + std::string(method_name(m)));
            std::vector<std::vector<std::string>> body;
            for (std::size_t i = 0; i < st.splits.size(); ++i) {
                std::vector<std::string> r = {std::to_string(i)};
                for (double w : st.splits[i].weights) r.push_back(num(w));
                r.push_back(num(st.splits[i].test_objective));
                for (double v : st.splits[i].member_test_objectives) r.push_back(num(v));
                body.push_back(std::move(r));
            }
            const auto add_stat = [&](const char* label, auto get) {
                std::vector<std::string> r = {label};
                for (std::size_t m = 0; m < members.size(); ++m) r.push_back(num(get(st.weights[m])));
                r.push_back(num(get(st.test_objective)));
                for (std::size_t m = 0; m < members.size(); ++m) r.push_back(num(get(st.member_test_objectives[m])));
                body.push_back(std::move(r));
            };
            add_stat("mean", [](const MeanStd& x) { return x.mean; });
            add_stat("std", [](const MeanStd& x) { return x.std; });
            spit(fs::path(ens_out) / "split_stability.csv", csv(cols, std::move(body)));
            std::cerr << "fitted " << fit.spec.label() << " on " << joined.size() << " questions; held-out gain over best member "
                      << num(st.gain_over_best_member) << "\n";
        }
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
