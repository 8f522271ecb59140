#pragma once

// Run settings as read from a JSON config document. Every key is optional;
// command-line flags override whatever the document sets.

#include "tabcal/dataset.hpp"
#include "tabcal/harness.hpp"
#include "tabcal/http_provider.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tabcal {

struct ProviderSettings {
    std::string kind = "synthetic";  // "synthetic" or "http"
    std::optional<std::uint64_t> seed;  // synthetic respondent; defaults to the run seed
    HttpProviderConfig http;
};

struct DatasetSettings {
    std::string kind = "synthetic";  // "synthetic", "wtq" or "tablebench"
    std::filesystem::path path;      // examples file, NDJSON file, or synthetic corpus directory
    std::filesystem::path root;      // WTQ tables; defaults to the examples file's grandparent
    std::string split;
    TableBenchKeys keys;
    SyntheticSpec synthetic;         // used when kind is synthetic and path is empty
    std::optional<std::size_t> limit;
};

struct Settings {
    std::uint64_t seed = 0;
    RunConfig run;
    ReportOptions report;
    DatasetSettings dataset;
    std::vector<ProviderSettings> providers{ProviderSettings{}};
    std::optional<std::filesystem::path> out;
    std::optional<std::filesystem::path> prompts;
};

/// Throws std::invalid_argument naming the offending key.
Settings settings_from_json(std::string_view text);
Settings load_settings(const std::filesystem::path& file);

struct LoadedDataset {
    LoadResult load;
    std::optional<SyntheticBenchmark> synthetic;
};

LoadedDataset load_dataset(const DatasetSettings& settings, std::uint64_t seed);

std::vector<std::unique_ptr<ModelProvider>> make_providers(const Settings& settings, const LoadedDataset& data);

}  // namespace tabcal
