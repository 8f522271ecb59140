#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tabcal {

struct Table {
    std::string id;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::optional<std::string> caption;

    std::size_t num_rows() const noexcept { return rows.size(); }
    std::size_t num_columns() const noexcept { return columns.size(); }
};

/// Throws std::invalid_argument when the table is not rectangular, has no
/// columns, or has a blank column name.
void validate(const Table& table);

enum class SerializationFormat { Markdown, Html, Json, Csv };

inline constexpr std::array<SerializationFormat, 4> kAllFormats = {
    SerializationFormat::Markdown, SerializationFormat::Html, SerializationFormat::Json,
    SerializationFormat::Csv};

std::string_view format_name(SerializationFormat format) noexcept;
std::optional<SerializationFormat> parse_format_name(std::string_view name);

/// Lines in the HTML and JSON layouts wrap once they would pass this column.
inline constexpr std::size_t kWrapWidth = 48;

std::string serialize(const Table& table, SerializationFormat format);

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ", column " +
                             std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

/// Inverse of serialize. Ragged rows are an error, never padded.
Table parse_table(std::string_view text, SerializationFormat format);

}  // namespace tabcal
