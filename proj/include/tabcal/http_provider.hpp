#pragma once

#include "tabcal/provider.hpp"

#include <chrono>
#include <functional>
#include <string>

namespace tabcal {

/// An OpenAI-compatible chat-completions endpoint.
struct HttpProviderConfig {
    std::string name = "http";
    std::string base_url = "http://127.0.0.1:8000";  // scheme://host[:port]
    std::string path = "/v1/chat/completions";
    std::string model;
    /// Environment variable holding the bearer token; empty or unset sends none.
    std::string api_key_env = "OPENAI_API_KEY";
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    std::chrono::seconds timeout{120};
};

class HttpProvider : public ModelProvider {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpProvider(HttpProviderConfig config, Sleeper sleeper = {});

    /// Connection failures, 408, 429 and 5xx are retried with doubling
    /// backoff; other statuses fail at once.
    std::string complete(const CompletionRequest& request) override;
    std::string name() const override { return config_.name; }
    std::string model() const override { return config_.model; }

    static std::string request_body(const std::string& model, const CompletionRequest& request);
    /// choices[0].message.content of a response body.
    static std::string response_text(const std::string& body);

private:
    HttpProviderConfig config_;
    std::string api_key_;
    Sleeper sleeper_;
};

}  // namespace tabcal
