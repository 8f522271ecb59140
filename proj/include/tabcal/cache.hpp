#pragma once

#include "tabcal/provider.hpp"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>

namespace tabcal {

struct CacheRecord {
    std::string key;
    std::string provider;
    std::string model;
    std::string method;
    std::string question_id;
    std::string label;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;
    std::string raw;
    std::string parsed_answer;
    std::optional<double> parsed_confidence;
    std::string timestamp;  // UTC, ISO 8601
};

/// 128-bit hex digest over everything that identifies one provider call.
std::string cache_key(const std::string& provider, const std::string& model, const CompletionRequest& request);

/// Append-only NDJSON store. A torn final line (from a crash mid-write) is
/// ignored on load; later records with an existing key win.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path path);

    std::optional<CacheRecord> find(const std::string& key) const;
    /// Writes and flushes one line under a lock.
    void append(const CacheRecord& record);
    std::size_t size() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::map<std::string, CacheRecord> records_;
    std::ofstream out_;
};

/// Serves repeated calls from the cache. With no inner provider every miss
/// is a hard ProviderError (replay mode).
class CachingProvider : public ModelProvider {
public:
    CachingProvider(ModelProvider* inner, ResponseCache& cache, std::string name, std::string model);

    std::string complete(const CompletionRequest& request) override;
    std::string name() const override { return name_; }
    std::string model() const override { return model_; }

    std::uint64_t hits() const noexcept { return hits_.load(); }
    std::uint64_t misses() const noexcept { return misses_.load(); }

private:
    ModelProvider* inner_;
    ResponseCache& cache_;
    std::string name_;
    std::string model_;
    std::atomic<std::uint64_t> hits_{0};
    std::atomic<std::uint64_t> misses_{0};
};

}  // namespace tabcal
