#include "tabcal/settings.hpp"

#include "profile_json.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace tabcal {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw std::invalid_argument("config key " + where + key + " has the wrong type");
    }
}

const std::set<std::string> kTopKeys = {"seed", "parallelism", "cache", "replay", "out", "methods", "sampling",
                                        "formats", "prompts", "bootstrap", "reliability", "dataset", "providers"};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [k, v] : j.items()) {
        if (!allowed.count(k)) throw std::invalid_argument("unknown config key " + where + k);
    }
}

}  // namespace

Settings settings_from_json(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    check_keys(j, kTopKeys, "");
    Settings s;
    read(j, "seed", s.seed, "");
    read(j, "parallelism", s.run.parallelism, "");
    if (j.contains("cache")) s.run.cache = fs::path(j.at("cache").get<std::string>());
    read(j, "replay", s.run.replay, "");
    if (j.contains("out")) s.out = fs::path(j.at("out").get<std::string>());
    if (j.contains("prompts")) s.prompts = fs::path(j.at("prompts").get<std::string>());
    if (j.contains("methods")) {
        s.run.methods.clear();
        for (const auto& m : j.at("methods")) {
            const auto parsed = parse_method(m.get<std::string>());
            if (!parsed) throw std::invalid_argument("unknown method " + m.dump());
            s.run.methods.push_back(*parsed);
        }
    }
    if (j.contains("formats")) {
        s.run.method.formats.clear();
        for (const auto& f : j.at("formats")) {
            const auto parsed = parse_format_name(f.get<std::string>());
            if (!parsed) throw std::invalid_argument("unknown format " + f.dump());
            s.run.method.formats.push_back(*parsed);
        }
    }
    if (j.contains("sampling")) {
        const auto& x = j.at("sampling");
        check_keys(x, {"n_samples", "temperature", "base_seed", "mfa_temperature", "parallelism"}, "sampling.");
        read(x, "n_samples", s.run.method.n_samples, "sampling.");
        read(x, "temperature", s.run.method.sample_temperature, "sampling.");
        read(x, "base_seed", s.run.method.base_seed, "sampling.");
        read(x, "mfa_temperature", s.run.method.mfa_temperature, "sampling.");
        read(x, "parallelism", s.run.method.parallelism, "sampling.");
    }
    if (j.contains("bootstrap")) {
        const auto& x = j.at("bootstrap");
        check_keys(x, {"resamples", "level", "parallelism"}, "bootstrap.");
        read(x, "resamples", s.report.bootstrap.resamples, "bootstrap.");
        read(x, "level", s.report.bootstrap.level, "bootstrap.");
        read(x, "parallelism", s.report.bootstrap.parallelism, "bootstrap.");
    }
    if (j.contains("reliability")) {
        const auto& x = j.at("reliability");
        check_keys(x, {"grid", "band_resamples", "band_level"}, "reliability.");
        read(x, "grid", s.report.reliability_grid, "reliability.");
        read(x, "band_resamples", s.report.band.resamples, "reliability.");
        read(x, "band_level", s.report.band.level, "reliability.");
    }
    if (j.contains("dataset")) {
        const auto& x = j.at("dataset");
        check_keys(x, {"kind", "path", "root", "split", "keys", "limit", "synthetic"}, "dataset.");
        auto& d = s.dataset;
        read(x, "kind", d.kind, "dataset.");
        if (x.contains("path")) d.path = x.at("path").get<std::string>();
        if (x.contains("root")) d.root = x.at("root").get<std::string>();
        read(x, "split", d.split, "dataset.");
        if (x.contains("limit")) d.limit = x.at("limit").get<std::size_t>();
        if (x.contains("keys")) {
            const auto& k = x.at("keys");
            check_keys(k, {"id", "question", "answer", "table", "columns", "rows", "qtype"}, "dataset.keys.");
            read(k, "id", d.keys.id, "dataset.keys.");
            read(k, "question", d.keys.question, "dataset.keys.");
            read(k, "answer", d.keys.answer, "dataset.keys.");
            read(k, "table", d.keys.table, "dataset.keys.");
            read(k, "columns", d.keys.columns, "dataset.keys.");
            read(k, "rows", d.keys.rows, "dataset.keys.");
            read(k, "qtype", d.keys.qtype, "dataset.keys.");
        }
        if (x.contains("synthetic")) {
            const auto& y = x.at("synthetic");
            check_keys(y, {"n", "max_log_rows", "min_columns", "max_columns", "intercept", "slope", "profile"},
                       "dataset.synthetic.");
            read(y, "n", d.synthetic.n, "dataset.synthetic.");
            read(y, "max_log_rows", d.synthetic.max_log_rows, "dataset.synthetic.");
            read(y, "min_columns", d.synthetic.min_columns, "dataset.synthetic.");
            read(y, "max_columns", d.synthetic.max_columns, "dataset.synthetic.");
            read(y, "intercept", d.synthetic.intercept, "dataset.synthetic.");
            read(y, "slope", d.synthetic.slope, "dataset.synthetic.");
            if (y.contains("profile")) d.synthetic.profile = detail::profile_from_json(y.at("profile"));
        }
        if (d.kind != "synthetic" && d.kind != "wtq" && d.kind != "tablebench") {
            throw std::invalid_argument("unknown dataset kind '" + d.kind + "'");
        }
    }
    if (j.contains("providers")) {
        s.providers.clear();
        for (const auto& p : j.at("providers")) {
            check_keys(p, {"kind", "seed", "name", "base_url", "path", "model", "api_key_env", "max_retries",
                           "initial_backoff_ms", "timeout_s"},
                       "providers[].");
            ProviderSettings ps;
            read(p, "kind", ps.kind, "providers[].");
            if (p.contains("seed")) ps.seed = p.at("seed").get<std::uint64_t>();
            auto& h = ps.http;
            read(p, "name", h.name, "providers[].");
            read(p, "base_url", h.base_url, "providers[].");
            read(p, "path", h.path, "providers[].");
            read(p, "model", h.model, "providers[].");
            read(p, "api_key_env", h.api_key_env, "providers[].");
            read(p, "max_retries", h.max_retries, "providers[].");
            if (p.contains("initial_backoff_ms")) h.initial_backoff = std::chrono::milliseconds(p.at("initial_backoff_ms").get<long>());
            if (p.contains("timeout_s")) h.timeout = std::chrono::seconds(p.at("timeout_s").get<long>());
            if (ps.kind != "synthetic" && ps.kind != "http") {
                throw std::invalid_argument("unknown provider kind '" + ps.kind + "'");
            }
            s.providers.push_back(std::move(ps));
        }
    }
    return s;
}

Settings load_settings(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw std::invalid_argument("cannot read config " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return settings_from_json(ss.str());
}

LoadedDataset load_dataset(const DatasetSettings& d, std::uint64_t seed) {
    LoadedDataset out;
    if (d.kind == "synthetic") {
        out.synthetic = d.path.empty() ? synthesize_benchmark(d.synthetic, seed) : read_synthetic(d.path);
        out.load.items = out.synthetic->items;
    } else if (d.kind == "wtq") {
        if (d.path.empty()) throw std::invalid_argument("the WTQ adapter needs an examples file");
        const fs::path root = d.root.empty() ? d.path.parent_path().parent_path() : d.root;
        out.load = load_wtq(d.path, root, d.split);
    } else if (d.kind == "tablebench") {
        if (d.path.empty()) throw std::invalid_argument("the TableBench adapter needs a file");
        out.load = load_tablebench(d.path, d.keys, d.split);
    } else {
        throw std::invalid_argument("unknown dataset kind '" + d.kind + "'");
    }
    if (d.limit && out.load.items.size() > *d.limit) out.load.items.resize(*d.limit);
    return out;
}

std::vector<std::unique_ptr<ModelProvider>> make_providers(const Settings& settings, const LoadedDataset& data) {
    std::vector<std::unique_ptr<ModelProvider>> out;
    for (const auto& p : settings.providers) {
        if (p.kind == "synthetic") {
            if (!data.synthetic) throw std::invalid_argument("the synthetic provider needs a synthetic dataset");
            out.push_back(make_respondent(*data.synthetic, p.seed.value_or(settings.seed)));
        } else {
            out.push_back(std::make_unique<HttpProvider>(p.http));
        }
    }
    return out;
}

}  // namespace tabcal
