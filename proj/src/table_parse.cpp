#include "tabcal/table.hpp"
#include "tabcal/text_util.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>

namespace tabcal {
namespace {

struct Locator {
    std::string_view text;

    ParseError error(std::size_t offset, const std::string& what) const {
        std::size_t line = 1;
        std::size_t col = 1;
        for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        return ParseError(line, col, what);
    }
};

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out += static_cast<char>(cp);
    } else if (cp < 0x800) {
        out += static_cast<char>(0xC0 | (cp >> 6));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else if (cp < 0x10000) {
        out += static_cast<char>(0xE0 | (cp >> 12));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    } else {
        out += static_cast<char>(0xF0 | (cp >> 18));
        out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
        out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
        out += static_cast<char>(0x80 | (cp & 0x3F));
    }
}

void check_width(const Locator& loc, std::size_t offset, std::size_t row, std::size_t got,
                 std::size_t expected) {
    if (got != expected) {
        throw loc.error(offset, "row " + std::to_string(row) + " has " + std::to_string(got) +
                                    " cells, expected " + std::to_string(expected));
    }
}

Table finish(std::vector<std::string> header, std::vector<std::vector<std::string>> rows) {
    Table t;
    t.columns = std::move(header);
    t.rows = std::move(rows);
    return t;
}

// ---------------------------------------------------------------- CSV

Table parse_csv(std::string_view s) {
    const Locator loc{s};
    if (s.empty()) throw loc.error(0, "empty CSV input");
    std::vector<std::vector<std::string>> records;
    std::vector<std::size_t> record_offsets;
    std::vector<std::string> record;
    std::string field;
    std::size_t i = 0;
    std::size_t record_start = 0;
    bool at_field_start = true;

    auto end_record = [&] {
        record.push_back(std::move(field));
        field.clear();
        records.push_back(std::move(record));
        record.clear();
        record_offsets.push_back(record_start);
        at_field_start = true;
    };

    while (i < s.size()) {
        const char c = s[i];
        if (at_field_start && c == '"') {
            const std::size_t open = i++;
            for (;;) {
                if (i >= s.size()) throw loc.error(open, "unterminated quoted field");
                if (s[i] == '"') {
                    if (i + 1 < s.size() && s[i + 1] == '"') {
                        field += '"';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                field += s[i++];
            }
            at_field_start = false;
            if (i < s.size() && s[i] != ',' && s[i] != '\n' && s[i] != '\r') {
                throw loc.error(i, "unexpected character after closing quote");
            }
            continue;
        }
        if (c == ',') {
            record.push_back(std::move(field));
            field.clear();
            at_field_start = true;
            ++i;
        } else if (c == '\r' || c == '\n') {
            end_record();
            if (c == '\r' && i + 1 < s.size() && s[i + 1] == '\n') ++i;
            ++i;
            record_start = i;
        } else if (c == '"') {
            throw loc.error(i, "quote inside unquoted field");
        } else {
            field += c;
            at_field_start = false;
            ++i;
        }
    }
    // A final record without trailing newline.
    if (!(at_field_start && record.empty() && field.empty())) end_record();

    if (records.empty()) throw loc.error(0, "no header row");
    std::vector<std::string> header = std::move(records.front());
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 1; r < records.size(); ++r) {
        check_width(loc, record_offsets[r], r - 1, records[r].size(), header.size());
        rows.push_back(std::move(records[r]));
    }
    return finish(std::move(header), std::move(rows));
}

// ---------------------------------------------------------------- Markdown

bool escaped_at(std::string_view s, std::size_t pos) {
    std::size_t slashes = 0;
    while (pos > slashes && s[pos - 1 - slashes] == '\\') ++slashes;
    return slashes % 2 == 1;
}

std::string unescape_markdown(std::string_view raw) {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\\' && i + 1 < raw.size()) {
            const char n = raw[i + 1];
            switch (n) {
                case 'n': out += '\n'; ++i; continue;
                case 'r': out += '\r'; ++i; continue;
                case 't': out += '\t'; ++i; continue;
                case '|':
                case '\\':
                case ' ': out += n; ++i; continue;
                default: break;
            }
        }
        out += raw[i];
    }
    return out;
}

std::string decode_markdown_cell(std::string_view raw) {
    std::size_t b = 0;
    while (b < raw.size() && (raw[b] == ' ' || raw[b] == '\t')) ++b;
    std::size_t e = raw.size();
    while (e > b && (raw[e - 1] == ' ' || raw[e - 1] == '\t') && !escaped_at(raw, e - 1)) --e;
    return unescape_markdown(raw.substr(b, e - b));
}

std::vector<std::string> split_markdown_row(const Locator& loc, std::string_view line,
                                            std::size_t offset) {
    std::size_t b = 0;
    while (b < line.size() && std::isspace(static_cast<unsigned char>(line[b]))) ++b;
    std::size_t e = line.size();
    while (e > b && std::isspace(static_cast<unsigned char>(line[e - 1])) &&
           !escaped_at(line, e - 1)) {
        --e;
    }
    if (b >= e || line[b] != '|') throw loc.error(offset + b, "row must start with '|'");
    if (e - b < 2 || line[e - 1] != '|' || escaped_at(line, e - 1)) {
        throw loc.error(offset + e, "row must end with '|'");
    }
    std::vector<std::string> cells;
    std::size_t start = b + 1;
    for (std::size_t i = b + 1; i < e; ++i) {
        if (line[i] == '\\') {
            ++i;
            continue;
        }
        if (line[i] == '|') {
            cells.push_back(decode_markdown_cell(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

bool is_separator_cell(std::string_view cell) {
    cell = text::trim(cell);
    if (!cell.empty() && cell.front() == ':') cell.remove_prefix(1);
    if (!cell.empty() && cell.back() == ':') cell.remove_suffix(1);
    return !cell.empty() && std::all_of(cell.begin(), cell.end(), [](char c) { return c == '-'; });
}

Table parse_markdown(std::string_view s) {
    const Locator loc{s};
    std::vector<std::pair<std::string_view, std::size_t>> lines;
    std::size_t start = 0;
    while (start <= s.size()) {
        std::size_t end = s.find('\n', start);
        if (end == std::string_view::npos) end = s.size();
        std::string_view line = s.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!text::trim(line).empty()) lines.emplace_back(line, start);
        if (end == s.size()) break;
        start = end + 1;
    }
    if (lines.size() < 2) throw loc.error(s.size(), "markdown table needs a header and a separator row");
    std::vector<std::string> header = split_markdown_row(loc, lines[0].first, lines[0].second);
    const auto sep = split_markdown_row(loc, lines[1].first, lines[1].second);
    check_width(loc, lines[1].second, 0, sep.size(), header.size());
    for (const auto& cell : sep) {
        if (!is_separator_cell(cell)) throw loc.error(lines[1].second, "malformed separator row");
    }
    std::vector<std::vector<std::string>> rows;
    for (std::size_t r = 2; r < lines.size(); ++r) {
        auto cells = split_markdown_row(loc, lines[r].first, lines[r].second);
        check_width(loc, lines[r].second, r - 2, cells.size(), header.size());
        rows.push_back(std::move(cells));
    }
    return finish(std::move(header), std::move(rows));
}

// ---------------------------------------------------------------- HTML

std::string decode_entities(const Locator& loc, std::string_view raw, std::size_t offset) {
    std::string out;
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] != '&') {
            out += raw[i];
            continue;
        }
        const std::size_t semi = raw.find(';', i);
        if (semi == std::string_view::npos || semi - i > 10) {
            throw loc.error(offset + i, "unterminated character reference");
        }
        const std::string_view name = raw.substr(i + 1, semi - i - 1);
        if (name == "amp") out += '&';
        else if (name == "lt") out += '<';
        else if (name == "gt") out += '>';
        else if (name == "quot") out += '"';
        else if (name == "apos") out += '\'';
        else if (name == "nbsp") append_utf8(out, 0xA0);
        else if (name.size() > 1 && name[0] == '#') {
            std::uint32_t cp = 0;
            const bool hex = name[1] == 'x' || name[1] == 'X';
            const std::string_view digits = name.substr(hex ? 2 : 1);
            if (digits.empty()) throw loc.error(offset + i, "empty numeric character reference");
            for (char d : digits) {
                int v;
                if (d >= '0' && d <= '9') v = d - '0';
                else if (hex && d >= 'a' && d <= 'f') v = d - 'a' + 10;
                else if (hex && d >= 'A' && d <= 'F') v = d - 'A' + 10;
                else throw loc.error(offset + i, "bad numeric character reference");
                cp = cp * (hex ? 16 : 10) + static_cast<std::uint32_t>(v);
                if (cp > 0x10FFFF) throw loc.error(offset + i, "character reference out of range");
            }
            append_utf8(out, cp);
        } else {
            throw loc.error(offset + i, "unknown entity '&" + std::string(name) + ";'");
        }
        i = semi;
    }
    return out;
}

struct Tag {
    std::string name;  // lowercase, without '/'
    bool closing = false;
    std::size_t begin = 0;
    std::size_t end = 0;  // one past '>'
};

Tag read_tag(const Locator& loc, std::string_view s, std::size_t pos) {
    Tag tag;
    tag.begin = pos;
    const std::size_t close = s.find('>', pos);
    if (close == std::string_view::npos) throw loc.error(pos, "unterminated tag");
    std::size_t i = pos + 1;
    if (i < close && s[i] == '/') {
        tag.closing = true;
        ++i;
    }
    std::size_t j = i;
    while (j < close && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
    if (j == i) throw loc.error(pos, "malformed tag");
    tag.name = text::to_lower(s.substr(i, j - i));
    tag.end = close + 1;
    return tag;
}

Table parse_html(std::string_view s) {
    const Locator loc{s};
    std::vector<std::string> header;
    bool have_header = false;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> row_offsets;
    std::vector<std::string> current;
    bool in_row = false;
    bool row_is_header = false;
    bool in_thead = false;
    bool saw_table = false;
    std::size_t row_offset = 0;

    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] != '<') {
            if (!std::isspace(static_cast<unsigned char>(s[i]))) {
                throw loc.error(i, "unexpected text outside a cell");
            }
            ++i;
            continue;
        }
        if (s.compare(i, 4, "<!--") == 0) {
            const std::size_t end = s.find("-->", i);
            if (end == std::string_view::npos) throw loc.error(i, "unterminated comment");
            i = end + 3;
            continue;
        }
        const Tag tag = read_tag(loc, s, i);
        i = tag.end;
        if (tag.name == "table") {
            saw_table = true;
        } else if (tag.name == "thead") {
            in_thead = !tag.closing;
        } else if (tag.name == "tbody" || tag.name == "tfoot") {
            // structural only
        } else if (tag.name == "caption") {
            if (!tag.closing) {
                const std::size_t end = s.find("</caption>", i);
                if (end == std::string_view::npos) throw loc.error(tag.begin, "unterminated caption");
                i = end + 10;
            }
        } else if (tag.name == "tr") {
            if (!tag.closing) {
                if (in_row) throw loc.error(tag.begin, "nested <tr>");
                in_row = true;
                row_is_header = in_thead;
                row_offset = tag.begin;
                current.clear();
            } else {
                if (!in_row) throw loc.error(tag.begin, "</tr> without <tr>");
                in_row = false;
                if (!have_header && (row_is_header || rows.empty())) {
                    header = std::move(current);
                    have_header = true;
                } else {
                    rows.push_back(std::move(current));
                    row_offsets.push_back(row_offset);
                }
                current.clear();
            }
        } else if (tag.name == "th" || tag.name == "td") {
            if (tag.closing) throw loc.error(tag.begin, "unexpected </" + tag.name + ">");
            if (!in_row) throw loc.error(tag.begin, "cell outside a row");
            const std::string close = "</" + tag.name + ">";
            std::size_t end = i;
            while (end < s.size() && s[end] != '<') ++end;
            if (end >= s.size() ||
                text::to_lower(s.substr(end, close.size())) != close) {
                throw loc.error(end, "expected " + close);
            }
            if (tag.name == "th" && !have_header) row_is_header = true;
            current.push_back(decode_entities(loc, s.substr(i, end - i), i));
            i = end + close.size();
        } else {
            throw loc.error(tag.begin, "unsupported tag <" + tag.name + ">");
        }
    }
    if (!saw_table) throw loc.error(0, "missing <table>");
    if (in_row) throw loc.error(s.size(), "unterminated <tr>");
    if (!have_header) throw loc.error(s.size(), "table has no header row");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        check_width(loc, row_offsets[r], r, rows[r].size(), header.size());
    }
    return finish(std::move(header), std::move(rows));
}

// ---------------------------------------------------------------- JSON

class JsonReader {
public:
    explicit JsonReader(std::string_view s) : s_(s), loc_{s} {}

    Table read() {
        skip_ws();
        expect('[');
        skip_ws();
        std::vector<std::string> header;
        std::vector<std::vector<std::string>> rows;
        if (peek() == ']') throw loc_.error(pos_, "empty array carries no column names");
        for (std::size_t r = 0;; ++r) {
            const std::size_t obj_start = pos_;
            auto [keys, values] = read_object();
            if (r == 0) {
                header = keys;
            } else if (keys != header) {
                values = reorder(obj_start, r, header, keys, values);
            }
            rows.push_back(std::move(values));
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                skip_ws();
                continue;
            }
            expect(']');
            break;
        }
        skip_ws();
        if (pos_ != s_.size()) throw loc_.error(pos_, "trailing characters after array");
        return finish(std::move(header), std::move(rows));
    }

private:
    std::vector<std::string> reorder(std::size_t offset, std::size_t row,
                                     const std::vector<std::string>& header,
                                     const std::vector<std::string>& keys,
                                     const std::vector<std::string>& values) const {
        check_width(loc_, offset, row, keys.size(), header.size());
        std::vector<std::string> sorted_header = header;
        std::sort(sorted_header.begin(), sorted_header.end());
        if (std::adjacent_find(sorted_header.begin(), sorted_header.end()) != sorted_header.end()) {
            throw loc_.error(offset, "row " + std::to_string(row) +
                                         " keys differ from the header order");
        }
        std::vector<std::string> out(header.size());
        for (std::size_t c = 0; c < header.size(); ++c) {
            const auto it = std::find(keys.begin(), keys.end(), header[c]);
            if (it == keys.end()) {
                throw loc_.error(offset, "row " + std::to_string(row) + " lacks key '" +
                                             header[c] + "'");
            }
            out[c] = values[static_cast<std::size_t>(it - keys.begin())];
        }
        return out;
    }

    char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }

    void expect(char c) {
        if (peek() != c) {
            throw loc_.error(pos_, std::string("expected '") + c + "'");
        }
        ++pos_;
    }

    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    std::pair<std::vector<std::string>, std::vector<std::string>> read_object() {
        expect('{');
        std::vector<std::string> keys;
        std::vector<std::string> values;
        skip_ws();
        if (peek() == '}') throw loc_.error(pos_, "empty object");
        for (;;) {
            skip_ws();
            keys.push_back(read_string());
            skip_ws();
            expect(':');
            skip_ws();
            values.push_back(read_value());
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            expect('}');
            return {std::move(keys), std::move(values)};
        }
    }

    std::string read_value() {
        const char c = peek();
        if (c == '"') return read_string();
        if (c == '{' || c == '[') throw loc_.error(pos_, "nested values are not table cells");
        const std::size_t start = pos_;
        while (pos_ < s_.size() && s_[pos_] != ',' && s_[pos_] != '}' &&
               !std::isspace(static_cast<unsigned char>(s_[pos_]))) {
            ++pos_;
        }
        const std::string_view lit = s_.substr(start, pos_ - start);
        if (lit == "null") return "";
        if (lit == "true" || lit == "false") return std::string(lit);
        if (!lit.empty() && text::parse_number(lit)) return std::string(lit);
        throw loc_.error(start, "invalid literal '" + std::string(lit) + "'");
    }

    std::uint32_t read_hex4() {
        if (pos_ + 4 > s_.size()) throw loc_.error(pos_, "truncated \\u escape");
        std::uint32_t v = 0;
        for (int k = 0; k < 4; ++k) {
            const char d = s_[pos_++];
            v <<= 4;
            if (d >= '0' && d <= '9') v |= static_cast<std::uint32_t>(d - '0');
            else if (d >= 'a' && d <= 'f') v |= static_cast<std::uint32_t>(d - 'a' + 10);
            else if (d >= 'A' && d <= 'F') v |= static_cast<std::uint32_t>(d - 'A' + 10);
            else throw loc_.error(pos_ - 1, "bad hex digit in \\u escape");
        }
        return v;
    }

    std::string read_string() {
        expect('"');
        std::string out;
        for (;;) {
            if (pos_ >= s_.size()) throw loc_.error(pos_, "unterminated string");
            const char c = s_[pos_++];
            if (c == '"') return out;
            if (static_cast<unsigned char>(c) < 0x20) {
                throw loc_.error(pos_ - 1, "raw control character in string");
            }
            if (c != '\\') {
                out += c;
                continue;
            }
            if (pos_ >= s_.size()) throw loc_.error(pos_, "unterminated escape");
            const char e = s_[pos_++];
            switch (e) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case '/': out += '/'; break;
                case 'b': out += '\b'; break;
                case 'f': out += '\f'; break;
                case 'n': out += '\n'; break;
                case 'r': out += '\r'; break;
                case 't': out += '\t'; break;
                case 'u': {
                    std::uint32_t cp = read_hex4();
                    if (cp >= 0xD800 && cp < 0xDC00 && s_.substr(pos_, 2) == "\\u") {
                        pos_ += 2;
                        const std::uint32_t low = read_hex4();
                        cp = 0x10000 + ((cp - 0xD800) << 10) + (low - 0xDC00);
                    }
                    append_utf8(out, cp);
                    break;
                }
                default: throw loc_.error(pos_ - 1, "unknown escape");
            }
        }
    }

    std::string_view s_;
    Locator loc_;
    std::size_t pos_ = 0;
};

}  // namespace

Table parse_table(std::string_view text, SerializationFormat format) {
    Table t;
    switch (format) {
        case SerializationFormat::Markdown: t = parse_markdown(text); break;
        case SerializationFormat::Html: t = parse_html(text); break;
        case SerializationFormat::Json: t = JsonReader(text).read(); break;
        case SerializationFormat::Csv: t = parse_csv(text); break;
    }
    try {
        validate(t);
    } catch (const std::invalid_argument& e) {
        throw ParseError(1, 1, e.what());
    }
    return t;
}

}  // namespace tabcal
