#pragma once

#include "tabcal/answer.hpp"
#include "tabcal/features.hpp"
#include "tabcal/synthetic.hpp"
#include "tabcal/table.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace tabcal {

struct QAItem {
    std::string id;
    Table table;
    std::string question;
    GoldAnswer gold;
    std::string source;
    QuestionType question_type = QuestionType::Other;
    std::string split;
};

/// Counts and messages from a dataset load. Skipped items never reach a run.
struct LoadResult {
    std::vector<QAItem> items;
    std::size_t skipped = 0;
    std::size_t excluded = 0;  // dropped by a filter rule, not an error
    std::vector<std::string> warnings;
};

/// Throws std::invalid_argument on an empty gold list or a duplicate id.
void check_items(const std::vector<QAItem>& items);

/// WikiTableQuestions layout: a TSV examples file with columns id,
/// utterance, context, targetValue, where context names a table file
/// relative to `root`. A "foo.tsv" sibling of "foo.csv" is preferred.
LoadResult load_wtq(const std::filesystem::path& examples_file, const std::filesystem::path& root,
                    const std::string& split = "");

/// Undoes the escapes of WTQ TSV cells: \n, \p (pipe) and \\.
std::string wtq_unescape(std::string_view field);

struct TableBenchKeys {
    std::string id = "id";
    std::string question = "question";
    std::string answer = "answer";
    std::string table = "table";      // object with the two keys below
    std::string columns = "columns";
    std::string rows = "data";
    std::string qtype = "qtype";
};

/// Newline-delimited JSON records with an embedded table. Records whose
/// qtype is "Visualization" are left out; malformed ones are skipped.
LoadResult load_tablebench(const std::filesystem::path& file, const TableBenchKeys& keys = {},
                           const std::string& split = "");

/// A synthetic corpus whose per-question correctness probability is
/// sigmoid(intercept - slope * log_rows), with log_rows uniform on
/// [0, max_log_rows].
struct SyntheticSpec {
    std::size_t n = 500;
    double max_log_rows = 6.0;
    std::size_t min_columns = 3;
    std::size_t max_columns = 5;
    double intercept = 2.0;
    double slope = 1.0;
    SyntheticProfile profile;
};

struct SyntheticBenchmark {
    std::vector<QAItem> items;
    std::map<std::string, SyntheticTruth> truths;
    SyntheticSpec spec;
    std::uint64_t seed = 0;
};

SyntheticBenchmark synthesize_benchmark(const SyntheticSpec& spec, std::uint64_t seed);

/// A respondent that knows every question of the benchmark.
std::unique_ptr<SyntheticRespondent> make_respondent(const SyntheticBenchmark& bench,
                                                     std::uint64_t respondent_seed);

/// Writes the corpus as TableBench-style NDJSON plus a truths file, so that
/// later runs can reload both.
void write_synthetic(const SyntheticBenchmark& bench, const std::filesystem::path& dir);
SyntheticBenchmark read_synthetic(const std::filesystem::path& dir);

}  // namespace tabcal
