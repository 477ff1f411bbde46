#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vctrace {

/// A tab-separated table with a header row. Blank lines and lines starting
/// with `#` are skipped.
struct TsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  // 1-based, parallel to rows

    /// Index of a column; throws FormatError naming the file when absent.
    std::size_t column(std::string_view name) const;
    std::optional<std::size_t> find_column(std::string_view name) const;
};

TsvTable parse_tsv(std::string_view text, std::string source,
                   const std::vector<std::string>& required_columns = {});
TsvTable read_tsv(const std::filesystem::path& path,
                  const std::vector<std::string>& required_columns = {});

std::string read_file(const std::filesystem::path& path);

/// Writes through a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Calls `fn(line_number, line)` for every non-blank line.
void for_each_line(std::string_view text,
                   const std::function<void(std::size_t, std::string_view)>& fn);

std::string to_jsonl(const std::vector<nlohmann::json>& records);

double parse_double(std::string_view s, std::string_view what);
long long parse_int(std::string_view s, std::string_view what);

/// JSON number, or null when the value is undefined.
nlohmann::json optional_number(const std::optional<double>& v);

}  // namespace vctrace
