#include "vctrace/io.hpp"

#include "vctrace/error.hpp"
#include "vctrace/text.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace vctrace {

std::optional<std::size_t> TsvTable::find_column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) {
            return i;
        }
    }
    return std::nullopt;
}

std::size_t TsvTable::column(std::string_view name) const {
    auto idx = find_column(name);
    if (!idx) {
        throw FormatError(source + ": missing column '" + std::string(name) + "'");
    }
    return *idx;
}

void for_each_line(std::string_view text,
                   const std::function<void(std::size_t, std::string_view)>& fn) {
    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        auto line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (!trim(line).empty()) {
            fn(line_no, line);
        }
        if (end == std::string_view::npos) {
            break;
        }
        start = end + 1;
    }
}

TsvTable parse_tsv(std::string_view text, std::string source,
                   const std::vector<std::string>& required_columns) {
    TsvTable table;
    table.source = std::move(source);
    bool have_header = false;
    for_each_line(text, [&](std::size_t line_no, std::string_view line) {
        if (line.front() == '#') {
            return;
        }
        auto fields = split(line, '\t');
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            return;
        }
        if (fields.size() < table.header.size()) {
            // Trailing empty columns are often stripped by editors.
            fields.resize(table.header.size());
        }
        if (fields.size() != table.header.size()) {
            throw FormatError(table.source + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.header.size()) + " columns, found " +
                              std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
        table.line_numbers.push_back(line_no);
    });
    if (!have_header) {
        throw FormatError(table.source + ": missing header row");
    }
    for (const auto& col : required_columns) {
        table.column(col);
    }
    return table;
}

TsvTable read_tsv(const std::filesystem::path& path, const std::vector<std::string>& required_columns) {
    return parse_tsv(read_file(path), path.string(), required_columns);
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) {
        throw IoError("read failed: " + path.string());
    }
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) {
            throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
        }
    }
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write " + tmp.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) {
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
    }
}

std::string to_jsonl(const std::vector<nlohmann::json>& records) {
    std::string out;
    for (const auto& r : records) {
        out += r.dump();
        out += '\n';
    }
    return out;
}

double parse_double(std::string_view s, std::string_view what) {
    auto t = trim(s);
    if (!is_decimal_number(t)) {
        throw FormatError("not a number for " + std::string(what) + ": '" + std::string(s) + "'");
    }
    // std::from_chars rejects a leading '+'.
    if (!t.empty() && t.front() == '+') {
        t.remove_prefix(1);
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw FormatError("not a number for " + std::string(what) + ": '" + std::string(s) + "'");
    }
    return v;
}

long long parse_int(std::string_view s, std::string_view what) {
    auto t = trim(s);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
        throw FormatError("not an integer for " + std::string(what) + ": '" + std::string(s) + "'");
    }
    return v;
}

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

}  // namespace vctrace
