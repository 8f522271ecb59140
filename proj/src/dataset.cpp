#include "tabcal/dataset.hpp"
#include "tabcal/rng.hpp"
#include "tabcal/text_util.hpp"

#include "profile_json.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace tabcal {

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void name_blank_columns(Table& t) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (text::trim(t.columns[c]).empty()) t.columns[c] = "column_" + std::to_string(c + 1);
    }
}

std::string strip_cr(std::string_view line) {
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    return std::string(line);
}

Table read_wtq_tsv_table(const std::string& text) {
    Table t;
    std::istringstream in(text);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
        line = strip_cr(line);
        if (line.empty() && header) continue;
        std::vector<std::string> cells;
        for (const auto& f : text::split(line, '\t')) cells.push_back(wtq_unescape(f));
        if (header) {
            t.columns = std::move(cells);
            header = false;
        } else {
            if (cells.size() != t.columns.size()) throw std::invalid_argument("ragged row in table file");
            t.rows.push_back(std::move(cells));
        }
    }
    name_blank_columns(t);
    validate(t);
    return t;
}

std::string cell_text(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_null()) return "";
    return v.dump();
}

}  // namespace

void check_items(const std::vector<QAItem>& items) {
    std::set<std::string> seen;
    for (const auto& it : items) {
        if (it.gold.empty()) throw std::invalid_argument("item '" + it.id + "' has no gold answer");
        if (!seen.insert(it.id).second) throw std::invalid_argument("duplicate item id '" + it.id + "'");
    }
}

std::string wtq_unescape(std::string_view field) {
    std::string out;
    out.reserve(field.size());
    for (std::size_t i = 0; i < field.size(); ++i) {
        if (field[i] == '\\' && i + 1 < field.size()) {
            const char n = field[i + 1];
            if (n == 'n' || n == 'p' || n == '\\') {
                out += n == 'n' ? '\n' : n == 'p' ? '|' : '\\';
                ++i;
                continue;
            }
        }
        out += field[i];
    }
    return out;
}

LoadResult load_wtq(const fs::path& examples_file, const fs::path& root, const std::string& split) {
    std::istringstream in(read_file(examples_file));
    LoadResult out;
    std::map<std::string, Table> table_cache;
    std::string line;
    std::vector<std::string> header;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        line = strip_cr(line);
        if (line.empty()) continue;
        const auto fields = text::split(line, '\t');
        if (header.empty()) {
            header = fields;
            for (const char* want : {"id", "utterance", "context", "targetValue"}) {
                if (std::find(header.begin(), header.end(), want) == header.end()) {
                    throw std::invalid_argument(examples_file.string() + ": missing column " + want);
                }
            }
            continue;
        }
        const auto col = [&](std::string_view name) -> std::string {
            const auto k = static_cast<std::size_t>(std::find(header.begin(), header.end(), name) - header.begin());
            return k < fields.size() ? fields[k] : std::string();
        };
        if (fields.size() != header.size()) {
            ++out.skipped;
            out.warnings.push_back("line " + std::to_string(line_no) + ": wrong field count");
            continue;
        }
        const std::string context = col("context");
        auto cached = table_cache.find(context);
        if (cached == table_cache.end()) {
            fs::path csv = root / context;
            fs::path tsv = csv;
            tsv.replace_extension(".tsv");
            try {
                Table t;
                if (fs::exists(tsv) && tsv != csv) {
                    t = read_wtq_tsv_table(read_file(tsv));
                } else if (fs::exists(csv)) {
                    t = parse_table(read_file(csv), SerializationFormat::Csv);
                } else {
                    throw std::runtime_error("missing table file " + context);
                }
                t.id = context;
                cached = table_cache.emplace(context, std::move(t)).first;
            } catch (const std::exception& e) {
                ++out.skipped;
                out.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
                continue;
            }
        }
        QAItem item;
        item.id = col("id");
        item.table = cached->second;
        item.question = wtq_unescape(col("utterance"));
        for (const auto& g : text::split(col("targetValue"), '|')) item.gold.push_back(wtq_unescape(g));
        item.source = "wtq";
        item.question_type = classify_question_type(item.question);
        item.split = split;
        out.items.push_back(std::move(item));
    }
    check_items(out.items);
    return out;
}

LoadResult load_tablebench(const fs::path& file, const TableBenchKeys& keys, const std::string& split) {
    std::istringstream in(read_file(file));
    LoadResult out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            const std::string qtype = j.contains(keys.qtype) ? cell_text(j[keys.qtype]) : "";
            if (text::to_lower(qtype) == "visualization") {
                ++out.excluded;
                continue;
            }
            nlohmann::json tj = j.at(keys.table);
            if (tj.is_string()) tj = nlohmann::json::parse(tj.get<std::string>());
            Table t;
            for (const auto& c : tj.at(keys.columns)) t.columns.push_back(cell_text(c));
            for (const auto& r : tj.at(keys.rows)) {
                std::vector<std::string> cells;
                for (const auto& v : r) cells.push_back(cell_text(v));
                t.rows.push_back(std::move(cells));
            }
            name_blank_columns(t);
            validate(t);
            QAItem item;
            item.id = cell_text(j.at(keys.id));
            t.id = item.id;
            item.table = std::move(t);
            item.question = j.at(keys.question).get<std::string>();
            item.gold = parse_gold(cell_text(j.at(keys.answer)));
            if (item.gold.empty() || (item.gold.size() == 1 && text::trim(item.gold[0]).empty())) {
                throw std::invalid_argument("empty answer");
            }
            item.source = "tablebench";
            item.question_type = classify_question_type(item.question);
            item.split = split;
            out.items.push_back(std::move(item));
        } catch (const std::exception& e) {
            ++out.skipped;
            out.warnings.push_back("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    check_items(out.items);
    return out;
}

// ------------------------------------------------------------ synthetic corpus

namespace {

enum class CellKind { Number, Text, Date, Flag };

struct ColumnPlan {
    CellKind kind;
    std::string name;
};

const std::vector<std::string> kSyllables = {"ka", "lo", "ren", "mi", "sa", "tor", "vel", "dor", "an",
                                             "is", "ber", "qua", "nes", "fi", "gal", "ur"};

std::string make_word(Rng& rng) {
    std::string w;
    const auto n = 2 + rng.below(2);
    for (std::uint64_t i = 0; i < n; ++i) w += kSyllables[rng.below(kSyllables.size())];
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    return w;
}

std::string make_cell(CellKind kind, Rng& rng) {
    switch (kind) {
        case CellKind::Number: return std::to_string(10 + rng.below(99990));
        case CellKind::Text: return make_word(rng);
        case CellKind::Date: {
            char buf[16];
            std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", static_cast<int>(1950 + rng.below(70)),
                          static_cast<int>(1 + rng.below(12)), static_cast<int>(1 + rng.below(28)));
            return buf;
        }
        case CellKind::Flag: return rng.bernoulli(0.5) ? "yes" : "no";
    }
    return "";
}

// Column values, unique where the kind allows it.
std::vector<std::string> make_column(CellKind kind, std::size_t rows, Rng& rng) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    while (out.size() < rows) {
        std::string v = make_cell(kind, rng);
        if (kind != CellKind::Flag && !seen.insert(text::to_lower(v)).second) continue;
        out.push_back(std::move(v));
    }
    return out;
}

// Wrong answers that no matcher confuses with the gold or with each other.
std::vector<std::string> pick_distractors(const std::string& gold, std::vector<std::string> candidates,
                                          const std::function<std::string()>& fresh) {
    std::vector<std::string> out;
    const auto usable = [&](const std::string& d) {
        if (match_answer(d, gold).correct || match_answer(gold, d).correct) return false;
        for (const auto& o : out) {
            if (match_answer(d, o).correct || match_answer(o, d).correct) return false;
        }
        return true;
    };
    for (auto& c : candidates) {
        if (out.size() == 3) break;
        if (usable(c)) out.push_back(std::move(c));
    }
    for (int tries = 0; out.size() < 3 && tries < 200; ++tries) {
        std::string c = fresh();
        if (usable(c)) out.push_back(std::move(c));
    }
    if (out.empty()) throw std::logic_error("could not build a distractor for '" + gold + "'");
    return out;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

SyntheticBenchmark synthesize_benchmark(const SyntheticSpec& spec, std::uint64_t seed) {
    if (!(spec.max_log_rows >= 0.0 && spec.max_log_rows <= 9.0)) {
        throw std::invalid_argument("max_log_rows must lie in [0, 9]");
    }
    if (spec.min_columns < 2 || spec.max_columns < spec.min_columns || spec.max_columns > 12) {
        throw std::invalid_argument("column range must satisfy 2 <= min <= max <= 12");
    }
    if (!std::isfinite(spec.intercept) || !std::isfinite(spec.slope)) {
        throw std::invalid_argument("difficulty coefficients must be finite");
    }
    SyntheticRespondent(spec.profile, 0);  // validates the profile

    SyntheticBenchmark bench;
    bench.spec = spec;
    bench.seed = seed;
    const std::vector<std::pair<CellKind, std::vector<std::string>>> pools = {
        {CellKind::Number, {"Points", "Score", "Population", "Votes", "Goals", "Attendance"}},
        {CellKind::Text, {"City", "Country", "Club", "Genre", "Region"}},
        {CellKind::Date, {"Date", "Founded", "Opened"}},
        {CellKind::Flag, {"Active", "Qualified"}},
    };

    for (std::size_t q = 0; q < spec.n; ++q) {
        Rng rng(hash_combine(seed, q));
        const double u = rng.uniform(0.0, spec.max_log_rows);
        const auto rows = static_cast<std::size_t>(std::max(1.0, std::round(std::exp(u))));
        const std::size_t ncols = spec.min_columns + rng.below(spec.max_columns - spec.min_columns + 1);

        std::vector<ColumnPlan> plan = {{CellKind::Text, "Name"}};
        std::set<std::string> used = {"Name"};
        plan.push_back({CellKind::Number, pools[0].second[rng.below(pools[0].second.size())]});
        used.insert(plan.back().name);
        while (plan.size() < ncols) {
            const auto& pool = pools[rng.below(pools.size())];
            const auto& name = pool.second[rng.below(pool.second.size())];
            if (used.insert(name).second) plan.push_back({pool.first, name});
        }

        Table t;
        char idbuf[32];
        std::snprintf(idbuf, sizeof idbuf, "syn-%05zu", q);
        t.id = idbuf;
        std::vector<std::vector<std::string>> cols;
        for (const auto& c : plan) {
            t.columns.push_back(c.name);
            cols.push_back(make_column(c.kind, rows, rng));
        }
        t.rows.assign(rows, {});
        for (std::size_t r = 0; r < rows; ++r) {
            for (auto& c : cols) t.rows[r].push_back(c[r]);
        }

        const auto number = [&](std::size_t r) { return std::stod(cols[1][r]); };
        const std::string& num_col = plan[1].name;
        const std::size_t r0 = rng.below(rows);
        std::string question, gold;
        std::vector<std::string> candidates;
        std::function<std::string()> fresh;
        switch (rng.below(rows >= 2 ? 5 : 2)) {
            case 0: {
                const std::size_t c = 1 + rng.below(ncols - 1);
                question = "What is the " + text::to_lower(plan[c].name) + " of " + cols[0][r0] + "?";
                gold = cols[c][r0];
                candidates = cols[c];
                const CellKind kind = plan[c].kind;
                fresh = [kind, &rng] { return make_cell(kind, rng); };
                if (kind == CellKind::Flag) fresh = [&] { return std::string(gold == "yes" ? "no" : "yes"); };
                break;
            }
            case 1: {
                std::size_t best = 0;
                for (std::size_t r = 1; r < rows; ++r) if (number(r) > number(best)) best = r;
                question = "Which name has the highest " + text::to_lower(num_col) + "?";
                gold = cols[0][best];
                candidates = cols[0];
                fresh = [&rng] { return make_word(rng); };
                break;
            }
            case 2: {
                const double threshold = number(r0);
                int count = 0;
                for (std::size_t r = 0; r < rows; ++r) count += number(r) > threshold;
                question = "How many rows have a " + text::to_lower(num_col) + " above " + cols[1][r0] + "?";
                gold = std::to_string(count);
                candidates = {std::to_string(count + 1), std::to_string(count + 2),
                              std::to_string(count > 0 ? count - 1 : count + 3)};
                fresh = [&rng, count] { return std::to_string(count + 4 + static_cast<int>(rng.below(20))); };
                break;
            }
            case 3: {
                std::size_t r1 = rng.below(rows - 1);
                if (r1 >= r0) ++r1;
                question = "Does " + cols[0][r0] + " have more " + text::to_lower(num_col) + " than " + cols[0][r1] + "?";
                gold = number(r0) > number(r1) ? "yes" : "no";
                candidates = {gold == "yes" ? "no" : "yes"};
                fresh = [&] { return std::string(gold == "yes" ? "no" : "yes"); };
                break;
            }
            default: {
                std::size_t lo = 0;
                for (std::size_t r = 1; r < rows; ++r) if (number(r) < number(lo)) lo = r;
                question = "Which name has the lowest " + text::to_lower(num_col) + " in the table?";
                gold = cols[0][lo];
                candidates = cols[0];
                fresh = [&rng] { return make_word(rng); };
                break;
            }
        }
        // Shuffle candidates deterministically so table order does not leak.
        for (std::size_t i = candidates.size(); i > 1; --i) std::swap(candidates[i - 1], candidates[rng.below(i)]);

        SyntheticTruth truth;
        truth.gold = gold;
        truth.distractors = pick_distractors(gold, std::move(candidates), fresh);
        truth.p_correct = sigmoid(spec.intercept - spec.slope * std::log(static_cast<double>(rows)));

        QAItem item;
        item.id = t.id;
        item.table = std::move(t);
        item.question = question;
        item.gold = {gold};
        item.source = "synthetic";
        item.question_type = classify_question_type(question);
        item.split = "synthetic";
        bench.truths.emplace(item.id, std::move(truth));
        bench.items.push_back(std::move(item));
    }
    return bench;
}

std::unique_ptr<SyntheticRespondent> make_respondent(const SyntheticBenchmark& bench, std::uint64_t respondent_seed) {
    auto r = std::make_unique<SyntheticRespondent>(bench.spec.profile, respondent_seed);
    for (const auto& [id, truth] : bench.truths) r->add_question(id, truth);
    return r;
}

void write_synthetic(const SyntheticBenchmark& bench, const fs::path& dir) {
    fs::create_directories(dir);
    std::ofstream items(dir / "items.ndjson", std::ios::binary);
    for (const auto& it : bench.items) {
        nlohmann::ordered_json j;
        j["id"] = it.id;
        j["question"] = it.question;
        j["answer"] = it.gold.front();
        j["qtype"] = std::string(question_type_name(it.question_type));
        j["table"]["columns"] = it.table.columns;
        j["table"]["data"] = it.table.rows;
        items << j.dump() << '\n';
    }
    nlohmann::ordered_json meta;
    meta["seed"] = bench.seed;
    meta["n"] = bench.spec.n;
    meta["max_log_rows"] = bench.spec.max_log_rows;
    meta["min_columns"] = bench.spec.min_columns;
    meta["max_columns"] = bench.spec.max_columns;
    meta["intercept"] = bench.spec.intercept;
    meta["slope"] = bench.spec.slope;
    meta["profile"] = detail::profile_json(bench.spec.profile);
    auto& truths = meta["truths"] = nlohmann::ordered_json::object();
    for (const auto& it : bench.items) {
        const auto& t = bench.truths.at(it.id);
        truths[it.id] = {{"gold", t.gold}, {"distractors", t.distractors}, {"p_correct", t.p_correct}};
    }
    std::ofstream(dir / "truths.json", std::ios::binary) << meta.dump(2) << '\n';
    if (!items) throw std::runtime_error("cannot write synthetic corpus to " + dir.string());
}

SyntheticBenchmark read_synthetic(const fs::path& dir) {
    SyntheticBenchmark bench;
    const auto meta = nlohmann::json::parse(read_file(dir / "truths.json"));
    bench.seed = meta.at("seed").get<std::uint64_t>();
    bench.spec.n = meta.at("n").get<std::size_t>();
    bench.spec.max_log_rows = meta.at("max_log_rows").get<double>();
    bench.spec.min_columns = meta.at("min_columns").get<std::size_t>();
    bench.spec.max_columns = meta.at("max_columns").get<std::size_t>();
    bench.spec.intercept = meta.at("intercept").get<double>();
    bench.spec.slope = meta.at("slope").get<double>();
    bench.spec.profile = detail::profile_from_json(meta.at("profile"));
    auto loaded = load_tablebench(dir / "items.ndjson", {}, "synthetic");
    if (loaded.skipped != 0) throw std::runtime_error("synthetic corpus has malformed records");
    for (auto& it : loaded.items) {
        it.source = "synthetic";
        const auto& t = meta.at("truths").at(it.id);
        bench.truths[it.id] = {t.at("gold").get<std::string>(), t.at("distractors").get<std::vector<std::string>>(),
                               t.at("p_correct").get<double>()};
    }
    bench.items = std::move(loaded.items);
    return bench;
}

}  // namespace tabcal
