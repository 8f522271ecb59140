#include "support.hpp"
#include "tabcal/cache.hpp"
#include "tabcal/harness.hpp"
#include "tabcal/http_provider.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

using namespace tabcal;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("tabcal-test-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << s;
}

std::map<std::string, std::string> tree(const fs::path& dir) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = slurp(e.path());
    }
    return out;
}

SyntheticBenchmark small_bench(std::size_t n = 40, std::uint64_t seed = 4) {
    SyntheticSpec spec;
    spec.n = n;
    spec.max_log_rows = 3.0;
    return synthesize_benchmark(spec, seed);
}

ReportOptions fast_options() {
    ReportOptions o;
    o.bootstrap.resamples = 1000;
    o.band.resamples = 200;
    return o;
}

}  // namespace

TEST_CASE("WTQ adapter") {
    const auto dir = scratch_dir("wtq");
    spit(dir / "csv/200-csv/1.csv", "Nation,Gold\nKazakhstan,3\n\"Korea, South\",2\n");
    spit(dir / "csv/200-csv/2.csv", "x\n1\n");
    spit(dir / "csv/200-csv/2.tsv", "Year\tNote\n2001\ta\\pb\n");
    spit(dir / "data/dev.tsv",
         "id\tutterance\tcontext\ttargetValue\n"
         "nt-1\twhich nation won 3 gold?\tcsv/200-csv/1.csv\tKazakhstan\n"
         "nt-2\twhat note and year?\tcsv/200-csv/2.csv\ta\\pb|2001\n"
         "nt-3\tmissing table\tcsv/200-csv/9.csv\tx\n");
    const auto r = load_wtq(dir / "data/dev.tsv", dir, "dev");
    REQUIRE(r.items.size() == 2);
    CHECK(r.skipped == 1);
    CHECK(r.warnings.size() == 1);
    CHECK(r.items[0].table.rows[1][0] == "Korea, South");
    CHECK(r.items[0].source == "wtq");
    CHECK(r.items[1].gold == GoldAnswer{"a|b", "2001"});
    CHECK(r.items[1].table.columns == std::vector<std::string>{"Year", "Note"});
    CHECK(r.items[1].table.rows[0][1] == "a|b");
    CHECK(wtq_unescape("a\\nb\\\\c") == "a\nb\\c");

    // The table file round-trips through the CSV parser.
    const Table t = parse_table(slurp(dir / "csv/200-csv/1.csv"), SerializationFormat::Csv);
    CHECK(parse_table(serialize(t, SerializationFormat::Csv), SerializationFormat::Csv).rows == t.rows);

    spit(dir / "data/dup.tsv",
         "id\tutterance\tcontext\ttargetValue\n"
         "nt-1\tq\tcsv/200-csv/1.csv\ta\n"
         "nt-1\tq\tcsv/200-csv/1.csv\tb\n");
    CHECK_THROWS_AS(load_wtq(dir / "data/dup.tsv", dir), std::invalid_argument);
}

TEST_CASE("TableBench adapter") {
    const auto dir = scratch_dir("tb");
    spit(dir / "tb.jsonl",
         R"({"id":"a","qtype":"FactChecking","question":"q1","answer":"5","table":{"columns":["c","d"],"data":[["1",2],["3",null]]}})"
         "\n"
         R"({"id":"b","qtype":"Visualization","question":"plot","answer":"y","table":{"columns":["c"],"data":[]}})"
         "\n"
         R"({"id":"c","qtype":"NumericalReasoning","question":"q3","answer":"7","table":"{\"columns\":[\"x\"],\"data\":[[\"7\"]]}"})"
         "\n"
         R"({"id":"d","question":"ragged","answer":"1","table":{"columns":["a","b"],"data":[["1"]]}})"
         "\n"
         "not json\n");
    const auto r = load_tablebench(dir / "tb.jsonl");
    REQUIRE(r.items.size() == 2);
    CHECK(r.excluded == 1);
    CHECK(r.skipped == 2);
    CHECK(r.items[0].table.rows[0] == std::vector<std::string>{"1", "2"});
    CHECK(r.items[0].table.rows[1][1] == "");
    CHECK(r.items[1].table.columns == std::vector<std::string>{"x"});

    spit(dir / "custom.jsonl", R"({"qid":"z","ask":"q","gold":"1","tbl":{"header":["h"],"rows":[["1"]]}})" "\n");
    TableBenchKeys keys;
    keys.id = "qid";
    keys.question = "ask";
    keys.answer = "gold";
    keys.table = "tbl";
    keys.columns = "header";
    keys.rows = "rows";
    CHECK(load_tablebench(dir / "custom.jsonl", keys).items.size() == 1);
}

TEST_CASE("synthetic benchmark") {
    SyntheticSpec empty;
    empty.n = 0;
    CHECK(synthesize_benchmark(empty, 1).items.empty());
    const auto a = small_bench(60, 9);
    const auto b = small_bench(60, 9);
    REQUIRE(a.items.size() == 60);
    for (std::size_t i = 0; i < a.items.size(); ++i) {
        CHECK(a.items[i].id == b.items[i].id);
        CHECK(a.items[i].question == b.items[i].question);
        CHECK(a.items[i].table.rows == b.items[i].table.rows);
        const auto& t = a.truths.at(a.items[i].id);
        CHECK(t.p_correct == b.truths.at(a.items[i].id).p_correct);
        const double lr = extract_features(a.items[i].table, a.items[i].question).log_rows;
        CHECK(t.p_correct == doctest::Approx(1.0 / (1.0 + std::exp(-(2.0 - lr)))).epsilon(1e-12));
        for (const auto& d : t.distractors) CHECK_FALSE(match_answer(d, a.items[i].gold).correct);
        CHECK(match_answer(t.gold, a.items[i].gold).correct);
    }
    CHECK(small_bench(60, 10).items[0].table.rows != a.items[0].table.rows);
    SyntheticSpec narrow;
    narrow.n = 3;
    narrow.min_columns = 1;
    CHECK_THROWS_AS(synthesize_benchmark(narrow, 1), std::invalid_argument);

    const auto dir = scratch_dir("syn");
    write_synthetic(a, dir);
    const auto back = read_synthetic(dir);
    REQUIRE(back.items.size() == a.items.size());
    CHECK(back.items[5].table.rows == a.items[5].table.rows);
    CHECK(back.truths.at("syn-00005").distractors == a.truths.at("syn-00005").distractors);
    CHECK(make_respondent(back, 3)->model() == make_respondent(a, 3)->model());
}

TEST_CASE("response cache") {
    const auto dir = scratch_dir("cache");
    CompletionRequest req{"prompt", 0.7, 42001, {"self_consistency", "q1", "1"}};
    const auto k = cache_key("p", "m", req);
    CHECK(k.size() == 32);
    CHECK(k == cache_key("p", "m", req));
    auto other = req;
    other.seed = 42002;
    CHECK(k != cache_key("p", "m", other));
    other = req;
    other.prompt += " ";
    CHECK(k != cache_key("p", "m", other));
    CHECK(k != cache_key("p", "m2", req));

    struct Echo : ModelProvider {
        std::atomic<int> n{0};
        std::string complete(const CompletionRequest& r) override {
            ++n;
            return R"({"answer":")" + r.tag.label + R"(","confidence":50})";
        }
        std::string name() const override { return "echo"; }
    } echo;
    {
        ResponseCache cache(dir / "c.ndjson");
        CachingProvider cp(&echo, cache, "echo", "m");
        CHECK(cp.complete(req) == R"({"answer":"1","confidence":50})");
        CHECK(cp.complete(req) == R"({"answer":"1","confidence":50})");
        CHECK(echo.n == 1);
        CHECK(cp.hits() == 1);
        const auto rec = cache.find(k.empty() ? "" : cache_key("echo", "m", req));
        REQUIRE(rec);
        CHECK(rec->parsed_answer == "1");
        CHECK(rec->parsed_confidence == 0.5);
    }
    // A torn final line is ignored and later appends stay readable.
    { std::ofstream(dir / "c.ndjson", std::ios::app) << R"({"key":"abc","raw":)"; }
    {
        ResponseCache cache(dir / "c.ndjson");
        CHECK(cache.size() == 1);
        CachingProvider replay(nullptr, cache, "echo", "m");
        CHECK(replay.complete(req).find("\"1\"") != std::string::npos);
        auto miss = req;
        miss.tag.label = "2";
        CHECK_THROWS_AS(replay.complete(miss), ProviderError);
        CachingProvider live(&echo, cache, "echo", "m");
        live.complete(miss);
    }
    CHECK(ResponseCache(dir / "c.ndjson").size() == 2);
}

TEST_CASE("HTTP provider against a local server") {
    httplib::Server server;
    std::atomic<int> hits{0};
    std::string last_body;
    server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        const int n = ++hits;
        if (n <= 2) {
            res.status = n == 1 ? 503 : 429;
            return;
        }
        last_body = req.body;
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"{\"answer\":\"ok\"}"}}]})",
                        "application/json");
    });
    server.Post("/bad", [&](const httplib::Request&, httplib::Response& res) { res.status = 400; });
    server.Post("/down", [&](const httplib::Request&, httplib::Response& res) { res.status = 500; });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    std::vector<long> waits;
    HttpProviderConfig cfg;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.model = "test-model";
    cfg.api_key_env = "";
    HttpProvider p(cfg, [&](std::chrono::milliseconds d) { waits.push_back(static_cast<long>(d.count())); });
    const CompletionRequest req{"hello", 0.7, 7, {"verbalized", "q", "main"}};
    CHECK(p.complete(req) == R"({"answer":"ok"})");
    CHECK(waits == std::vector<long>{1000, 2000});
    const auto body = nlohmann::json::parse(last_body);
    CHECK(body["model"] == "test-model");
    CHECK(body["messages"][0]["content"] == "hello");
    CHECK(body["temperature"] == 0.7);
    CHECK(body["seed"] == 7);

    cfg.path = "/bad";
    HttpProvider bad(cfg, [](std::chrono::milliseconds) {});
    try {
        bad.complete(req);
        FAIL("expected an error");
    } catch (const ProviderError& e) {
        CHECK_FALSE(e.transient());
    }
    cfg.path = "/down";
    waits.clear();
    HttpProvider down(cfg, [&](std::chrono::milliseconds d) { waits.push_back(static_cast<long>(d.count())); });
    try {
        down.complete(req);
        FAIL("expected an error");
    } catch (const ProviderError& e) {
        CHECK(e.transient());
    }
    CHECK(waits.size() == 3);
    server.stop();
    th.join();
    CHECK_THROWS_AS(HttpProvider::response_text("{}"), ProviderError);
}

TEST_CASE("run matrix bookkeeping and report invariants") {
    const auto bench = small_bench(40);
    auto resp = make_respondent(bench, 2);
    RunConfig cfg;
    RunStats stats;
    const auto report = run_matrix(bench.items, {resp.get()}, cfg, fast_options(), &stats);

    REQUIRE(report.summaries.size() == 5);
    // Calls: 1 + 2 + 5 + 0 + 4 per question; semantic entropy reuses the samples.
    CHECK(stats.provider_calls == 40u * 12u);
    for (const auto& s : report.summaries) {
        CHECK(s.loaded == 40);
        CHECK(s.loaded == s.scored + s.skipped + s.failed);
        if (s.method == "semantic_entropy") CHECK(*s.calls_per_question == 0.0);
        if (s.method == "self_consistency") CHECK(*s.calls_per_question == 5.0);
        if (s.method == "mfa") CHECK(*s.calls_per_question == 4.0);
        CHECK(*s.gap == *s.mean_confidence - *s.accuracy);
    }
    std::size_t k_rows = 0;
    for (const auto& k : report.k_ablation) {
        ++k_rows;
        CHECK(k.subsets == (k.k == 2 ? 6u : k.k == 3 ? 4u : 1u));
    }
    CHECK(k_rows == 3);
    CHECK(report.format_subsets.size() == 11);
    // The K = 4 subset reproduces the MFA rows.
    const auto mfa = std::find_if(report.summaries.begin(), report.summaries.end(),
                                  [](const MethodSummary& s) { return s.method == "mfa"; });
    CHECK(report.k_ablation.back().accuracy == mfa->accuracy);
    CHECK(report.k_ablation.back().saturation == mfa->saturation);

    // Every summary number is recomputed from the persisted rows.
    const auto dir = scratch_dir("report");
    emit_report(report, dir);
    const auto rows = rows_from_csv(slurp(dir / "rows.csv"));
    REQUIRE(rows.size() == report.rows.size());
    const auto recorded = report_options_from_summary(slurp(dir / "summary.json"));
    CHECK(recorded.bootstrap.resamples == fast_options().bootstrap.resamples);
    CHECK(recorded.band.resamples == fast_options().band.resamples);
    const auto again = build_report(rows, calls_from_csv(slurp(dir / "calls.csv")), recorded);
    CHECK(summary_json(again) == slurp(dir / "summary.json"));
    const auto summary = nlohmann::json::parse(slurp(dir / "summary.json"));
    CHECK(summary["totals"]["loaded"] == 200);
    for (const char* f : {"analysis/k_ablation.csv", "analysis/format_subsets.csv", "analysis/match_types.csv",
                          "analysis/question_types.csv", "analysis/strict_vs_fuzzy.csv", "analysis/separability.csv",
                          "analysis/saturation.csv", "analysis/significance.csv",
                          "curves/synthetic__mfa__reliability.csv", "curves/synthetic__mfa__risk_coverage.csv"}) {
        CHECK_MESSAGE(fs::exists(dir / f), f);
    }
    auto rejudged = rows;
    rejudge(rejudged);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rejudged[i].correct == rows[i].correct);
}

TEST_CASE("all-agree MFA saturates and failures are counted") {
    struct Fixed : ModelProvider {
        std::string complete(const CompletionRequest& r) override {
            if (r.tag.question_id == "syn-00003") throw ProviderError("down", true);
            if (r.tag.question_id == "syn-00004") return R"({"answer":"","confidence":50})";
            return R"({"answer":"7","confidence":90})";
        }
        std::string name() const override { return "fixed"; }
    } fixed;
    const auto bench = small_bench(12);
    RunConfig cfg;
    cfg.methods = {Method::MFA, Method::Verbalized};
    const auto report = run_matrix(bench.items, {&fixed}, cfg, fast_options());
    for (const auto& s : report.summaries) {
        CHECK(s.failed == 1);
        CHECK(s.skipped == 1);
        CHECK(s.scored == 10);
        if (s.method == "mfa") CHECK(*s.saturation == 1.0);
    }
    CHECK(report.rows.size() == 24);
}

TEST_CASE("replay determinism") {
    const auto bench = small_bench(25, 6);
    const auto dir = scratch_dir("replay");
    auto resp = make_respondent(bench, 1);
    RunConfig cfg;
    cfg.cache = dir / "cache.ndjson";
    RunStats first;
    emit_report(run_matrix(bench.items, {resp.get()}, cfg, fast_options(), &first), dir / "a");
    CHECK(first.provider_calls == 25u * 12u);

    cfg.replay = true;
    cfg.parallelism = 3;
    for (const char* out : {"b", "c"}) {
        RunStats s;
        emit_report(run_matrix(bench.items, {resp.get()}, cfg, fast_options(), &s), dir / out);
        CHECK(s.provider_calls == 0);
        CHECK(s.cache_hits == 25u * 12u);
    }
    CHECK(tree(dir / "a") == tree(dir / "b"));
    CHECK(tree(dir / "b") == tree(dir / "c"));

    // Replay against an unknown question fails the row instead of calling out.
    auto more = small_bench(26, 6);
    RunStats s;
    const auto rep = run_matrix(more.items, {resp.get()}, cfg, fast_options(), &s);
    CHECK(s.provider_calls == 0);
    CHECK(rep.summaries[0].failed == 1);
}
