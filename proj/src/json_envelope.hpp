#pragma once

// Versioned wrapper shared by every persisted model document.

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace tabcal::detail {

inline constexpr std::string_view kModelFormat = "tabcal-model";
inline constexpr int kModelVersion = 1;

inline nlohmann::ordered_json make_envelope(std::string_view kind) {
    nlohmann::ordered_json j;
    j["format"] = kModelFormat;
    j["version"] = kModelVersion;
    j["kind"] = kind;
    return j;
}

/// Parses the document and returns its kind after checking format and version.
inline std::string open_envelope(std::string_view text, nlohmann::json& out) {
    try {
        out = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("model document is not valid JSON: ") + e.what());
    }
    if (!out.is_object() || out.value("format", "") != kModelFormat) {
        throw std::invalid_argument("not a tabcal model document");
    }
    if (out.value("version", 0) != kModelVersion) {
        throw std::invalid_argument("unsupported model document version");
    }
    return out.value("kind", "");
}

}  // namespace tabcal::detail
