#include <httplib.h>
#include <json.hpp>

#include "tabcal/http_provider.hpp"

#include <cstdlib>
#include <thread>

namespace tabcal {

HttpProvider::HttpProvider(HttpProviderConfig config, Sleeper sleeper)
    : config_(std::move(config)), sleeper_(std::move(sleeper)) {
    if (config_.model.empty()) throw std::invalid_argument("HTTP provider needs a model name");
    if (config_.max_retries < 0) throw std::invalid_argument("max_retries must be nonnegative");
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
    if (!sleeper_) sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::string HttpProvider::request_body(const std::string& model, const CompletionRequest& request) {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["messages"] = nlohmann::ordered_json::array({{{"role", "user"}, {"content", request.prompt}}});
    j["temperature"] = request.temperature;
    if (request.seed) j["seed"] = *request.seed;
    return j.dump();
}

std::string HttpProvider::response_text(const std::string& body) {
    try {
        const auto j = nlohmann::json::parse(body);
        const auto& content = j.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string() : content.get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ProviderError(std::string("unexpected completion response: ") + e.what(), false);
    }
}

std::string HttpProvider::complete(const CompletionRequest& request) {
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const std::string body = request_body(config_.model, request);

    auto backoff = config_.initial_backoff;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
        if (attempt > 0) {
            sleeper_(backoff);
            backoff *= 2;
        }
        const auto res = client.Post(config_.path, headers, body, "application/json");
        if (!res) {
            last_error = "connection failed: " + httplib::to_string(res.error());
            continue;
        }
        const int status = res->status;
        if (status >= 200 && status < 300) return response_text(res->body);
        last_error = "HTTP " + std::to_string(status) + ": " + res->body.substr(0, 200);
        const bool transient = status == 408 || status == 429 || status >= 500;
        if (!transient) throw ProviderError(last_error, false);
    }
    throw ProviderError("giving up after " + std::to_string(config_.max_retries) + " retries: " + last_error, true);
}

}  // namespace tabcal
