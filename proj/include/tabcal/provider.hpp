#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace tabcal {

/// Identifies a call for caching and bookkeeping. Providers may ignore it.
struct CallTag {
    std::string method;
    std::string question_id;
    std::string label;  // format name, sample index, or pass name
};

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.0;
    std::optional<std::int64_t> seed;
    CallTag tag;
};

class ProviderError : public std::runtime_error {
public:
    ProviderError(const std::string& what, bool transient)
        : std::runtime_error(what), transient_(transient) {}
    bool transient() const noexcept { return transient_; }

private:
    bool transient_;
};

/// A chat model that turns a prompt into raw response text. At temperature
/// 0, equal requests should give equal text. Implementations must be safe
/// to call from several threads at once.
class ModelProvider {
public:
    virtual ~ModelProvider() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
    virtual std::string name() const = 0;
    virtual std::string model() const { return name(); }
};

}  // namespace tabcal
