#include "tabcal/table.hpp"
#include "tabcal/text_util.hpp"

#include <algorithm>
#include <cstdio>

namespace tabcal {

void validate(const Table& table) {
    if (table.columns.empty()) throw std::invalid_argument("table '" + table.id + "' has no columns");
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (text::trim(table.columns[c]).empty()) {
            throw std::invalid_argument("table '" + table.id + "': column " + std::to_string(c) +
                                        " has a blank name");
        }
    }
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (table.rows[r].size() != table.columns.size()) {
            throw std::invalid_argument("table '" + table.id + "': row " + std::to_string(r) +
                                        " has " + std::to_string(table.rows[r].size()) +
                                        " cells, expected " + std::to_string(table.columns.size()));
        }
    }
}

std::string_view format_name(SerializationFormat format) noexcept {
    switch (format) {
        case SerializationFormat::Markdown: return "markdown";
        case SerializationFormat::Html: return "html";
        case SerializationFormat::Json: return "json";
        case SerializationFormat::Csv: return "csv";
    }
    return "unknown";
}

std::optional<SerializationFormat> parse_format_name(std::string_view name) {
    const std::string lower = text::to_lower(text::trim(name));
    if (lower == "markdown" || lower == "md") return SerializationFormat::Markdown;
    if (lower == "html") return SerializationFormat::Html;
    if (lower == "json") return SerializationFormat::Json;
    if (lower == "csv") return SerializationFormat::Csv;
    return std::nullopt;
}

namespace {

std::string escape_markdown_cell(std::string_view cell) {
    std::string out;
    out.reserve(cell.size());
    for (char c : cell) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '|': out += "\\|"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default: out += c;
        }
    }
    // Edge spaces would be eaten as padding by the reader.
    std::size_t lead = 0;
    while (lead < out.size() && out[lead] == ' ') ++lead;
    if (lead == out.size()) {
        std::string all;
        for (std::size_t i = 0; i < lead; ++i) all += "\\ ";
        return all;
    }
    std::size_t trail = 0;
    while (trail < out.size() && out[out.size() - 1 - trail] == ' ') ++trail;
    std::string result;
    for (std::size_t i = 0; i < lead; ++i) result += "\\ ";
    result += out.substr(lead, out.size() - lead - trail);
    for (std::size_t i = 0; i < trail; ++i) result += "\\ ";
    return result;
}

std::string escape_html(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            case '\'': out += "&#39;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string quote_json(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        switch (c) {
            case '"': out += "\\\""; break;
            case '\\': out += "\\\\"; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            case '\b': out += "\\b"; break;
            case '\f': out += "\\f"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof(buf), "\\u%04x", static_cast<unsigned>(c));
                    out += buf;
                } else {
                    out += c;
                }
        }
    }
    out += '"';
    return out;
}

std::string csv_field(std::string_view cell, bool force_quotes) {
    const bool needs_quotes =
        force_quotes || cell.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs_quotes) return std::string(cell);
    std::string out = "\"";
    for (char c : cell) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// Greedy line filling: a token joins the current line while the line stays
// within kWrapWidth; otherwise it starts a new line at `continuation`.
void append_wrapped(std::string& out, std::string line, const std::vector<std::string>& tokens,
                    std::string_view separator, std::string_view continuation) {
    bool line_has_token = false;
    for (const auto& tok : tokens) {
        const std::size_t extra = (line_has_token ? separator.size() : 0) + text::utf8_length(tok);
        if (line_has_token && text::utf8_length(line) + extra > kWrapWidth) {
            out += line;
            out += '\n';
            line = std::string(continuation);
            line_has_token = false;
        }
        if (line_has_token) line += separator;
        line += tok;
        line_has_token = true;
    }
    out += line;
    out += '\n';
}

std::string serialize_markdown(const Table& t) {
    const std::size_t ncols = t.columns.size();
    std::vector<std::string> header(ncols);
    std::vector<std::vector<std::string>> body(t.rows.size(), std::vector<std::string>(ncols));
    std::vector<std::size_t> width(ncols, 3);
    for (std::size_t c = 0; c < ncols; ++c) {
        header[c] = escape_markdown_cell(t.columns[c]);
        width[c] = std::max(width[c], text::utf8_length(header[c]));
    }
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < ncols; ++c) {
            body[r][c] = escape_markdown_cell(t.rows[r][c]);
            width[c] = std::max(width[c], text::utf8_length(body[r][c]));
        }
    }
    auto emit_row = [&](std::string& out, const std::vector<std::string>& cells) {
        out += '|';
        for (std::size_t c = 0; c < ncols; ++c) {
            out += ' ';
            out += cells[c];
            out.append(width[c] - text::utf8_length(cells[c]), ' ');
            out += " |";
        }
        out += '\n';
    };
    std::string out;
    emit_row(out, header);
    out += '|';
    for (std::size_t c = 0; c < ncols; ++c) {
        out += ' ';
        out.append(width[c], '-');
        out += " |";
    }
    out += '\n';
    for (const auto& row : body) emit_row(out, row);
    return out;
}

std::string serialize_html(const Table& t) {
    std::string out = "<table>\n  <thead><tr>\n";
    std::vector<std::string> tokens;
    for (const auto& col : t.columns) tokens.push_back("<th>" + escape_html(col) + "</th>");
    append_wrapped(out, "    ", tokens, "", "    ");
    out += "  </tr></thead>\n  <tbody>\n";
    for (const auto& row : t.rows) {
        tokens.clear();
        for (const auto& cell : row) tokens.push_back("<td>" + escape_html(cell) + "</td>");
        tokens.back() += "</tr>";
        append_wrapped(out, "    <tr>", tokens, "", "        ");
    }
    out += "  </tbody>\n</table>\n";
    return out;
}

std::string serialize_json(const Table& t) {
    if (t.rows.empty()) return "[]\n";
    std::string out;
    std::vector<std::string> keys;
    for (const auto& col : t.columns) keys.push_back(quote_json(col));
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        std::vector<std::string> tokens;
        for (std::size_t c = 0; c < keys.size(); ++c) {
            std::string tok = keys[c] + ": " + quote_json(t.rows[r][c]);
            if (c + 1 < keys.size()) {
                tok += ',';
            } else {
                tok += r + 1 < t.rows.size() ? "}," : "}]";
            }
            tokens.push_back(std::move(tok));
        }
        append_wrapped(out, r == 0 ? "[{" : " {", tokens, " ", "  ");
    }
    return out;
}

std::string serialize_csv(const Table& t) {
    const bool single = t.columns.size() == 1;
    std::string out;
    auto emit = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c > 0) out += ',';
            // A lone empty field would otherwise read back as a blank line.
            out += csv_field(cells[c], single && cells[c].empty());
        }
        out += '\n';
    };
    emit(t.columns);
    for (const auto& row : t.rows) emit(row);
    return out;
}

}  // namespace

std::string serialize(const Table& table, SerializationFormat format) {
    validate(table);
    switch (format) {
        case SerializationFormat::Markdown: return serialize_markdown(table);
        case SerializationFormat::Html: return serialize_html(table);
        case SerializationFormat::Json: return serialize_json(table);
        case SerializationFormat::Csv: return serialize_csv(table);
    }
    throw std::invalid_argument("unknown serialization format");
}

}  // namespace tabcal
