#include "tabcal/cache.hpp"
#include "tabcal/elicitation.hpp"
#include "tabcal/rng.hpp"
#include "tabcal/text_util.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

namespace tabcal {

namespace fs = std::filesystem;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

nlohmann::ordered_json to_json(const CacheRecord& r) {
    nlohmann::ordered_json j;
    j["key"] = r.key;
    j["provider"] = r.provider;
    j["model"] = r.model;
    j["method"] = r.method;
    j["question_id"] = r.question_id;
    j["label"] = r.label;
    j["temperature"] = r.temperature;
    j["seed"] = r.seed ? nlohmann::ordered_json(*r.seed) : nlohmann::ordered_json();
    j["raw"] = r.raw;
    j["parsed_answer"] = r.parsed_answer;
    j["parsed_confidence"] = r.parsed_confidence ? nlohmann::ordered_json(*r.parsed_confidence) : nlohmann::ordered_json();
    j["timestamp"] = r.timestamp;
    return j;
}

CacheRecord from_json(const nlohmann::json& j) {
    CacheRecord r;
    r.key = j.at("key").get<std::string>();
    r.provider = j.value("provider", "");
    r.model = j.value("model", "");
    r.method = j.value("method", "");
    r.question_id = j.value("question_id", "");
    r.label = j.value("label", "");
    r.temperature = j.value("temperature", 0.0);
    if (j.contains("seed") && !j["seed"].is_null()) r.seed = j["seed"].get<std::int64_t>();
    r.raw = j.at("raw").get<std::string>();
    r.parsed_answer = j.value("parsed_answer", "");
    if (j.contains("parsed_confidence") && !j["parsed_confidence"].is_null()) {
        r.parsed_confidence = j["parsed_confidence"].get<double>();
    }
    r.timestamp = j.value("timestamp", "");
    return r;
}

}  // namespace

std::string cache_key(const std::string& provider, const std::string& model, const CompletionRequest& request) {
    std::uint64_t a = 0x7461626361ULL, b = 0x63616368ULL;
    const auto mix = [&](std::string_view field) {
        const std::uint64_t h = hash_string(field);
        a = hash_combine(a, h);
        b = hash_combine(b ^ 0xa5a5a5a5a5a5a5a5ULL, h + field.size());
    };
    mix(provider);
    mix(model);
    mix(request.tag.method);
    mix(request.tag.question_id);
    mix(request.tag.label);
    mix(text::format_double(request.temperature));
    mix(request.seed ? std::to_string(*request.seed) : std::string("-"));
    mix(hex64(hash_string(request.prompt)) + ":" + std::to_string(request.prompt.size()));
    return hex64(a) + hex64(b);
}

ResponseCache::ResponseCache(fs::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    if (fs::exists(path_)) {
        std::ifstream in(path_, std::ios::binary);
        std::string line;
        std::uintmax_t good_end = 0;
        bool torn = false, unterminated = false;
        while (std::getline(in, line)) {
            const bool complete = !in.eof();
            if (!text::trim(line).empty()) {
                try {
                    auto r = from_json(nlohmann::json::parse(line));
                    records_[r.key] = std::move(r);
                } catch (const std::exception&) {
                    if (complete) throw std::runtime_error("corrupt cache line in " + path_.string());
                    torn = true;
                    break;
                }
            }
            good_end += line.size() + (complete ? 1 : 0);
            unterminated = !complete;
        }
        in.close();
        if (torn) {
            fs::resize_file(path_, good_end);
        } else if (unterminated) {
            std::ofstream(path_, std::ios::binary | std::ios::app) << '\n';
        }
    }
    out_.open(path_, std::ios::binary | std::ios::app);
    if (!out_) throw std::runtime_error("cannot open cache " + path_.string());
}

std::optional<CacheRecord> ResponseCache::find(const std::string& key) const {
    const std::lock_guard lock(mutex_);
    const auto it = records_.find(key);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::append(const CacheRecord& record) {
    const std::string line = to_json(record).dump() + "\n";
    const std::lock_guard lock(mutex_);
    out_ << line;
    out_.flush();
    if (!out_) throw std::runtime_error("cannot append to cache " + path_.string());
    records_[record.key] = record;
}

std::size_t ResponseCache::size() const {
    const std::lock_guard lock(mutex_);
    return records_.size();
}

CachingProvider::CachingProvider(ModelProvider* inner, ResponseCache& cache, std::string name, std::string model)
    : inner_(inner), cache_(cache), name_(std::move(name)), model_(std::move(model)) {}

std::string CachingProvider::complete(const CompletionRequest& request) {
    const std::string key = cache_key(name_, model_, request);
    if (auto hit = cache_.find(key)) {
        ++hits_;
        return hit->raw;
    }
    ++misses_;
    if (inner_ == nullptr) {
        throw ProviderError("replay cache has no entry for " + request.tag.method + "/" + request.tag.question_id +
                                "/" + request.tag.label,
                            false);
    }
    CacheRecord rec;
    rec.raw = inner_->complete(request);
    rec.key = key;
    rec.provider = name_;
    rec.model = model_;
    rec.method = request.tag.method;
    rec.question_id = request.tag.question_id;
    rec.label = request.tag.label;
    rec.temperature = request.temperature;
    rec.seed = request.seed;
    const auto parsed = parse_structured(rec.raw, "confidence");
    if (parsed.answer) rec.parsed_answer = *parsed.answer;
    rec.parsed_confidence = parsed.confidence;
    rec.timestamp = utc_now();
    cache_.append(rec);
    return rec.raw;
}

}  // namespace tabcal
