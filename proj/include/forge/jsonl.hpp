#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace forge::jsonl {

using json = nlohmann::json;

struct LineError {
    std::size_t line = 0; // 1-based
    std::string message;
};

/// Reads one JSON object per LF-terminated line, skipping blank lines.
/// Holds a single line in memory at a time.
class Reader {
public:
    explicit Reader(const std::filesystem::path& path);

    /// Next parsed object, or nullopt at end of file. Lines that are not a
    /// JSON object are recorded in errors() and skipped.
    std::optional<json> next();

    /// Next raw non-blank line (no parsing).
    std::optional<std::string> next_line();

    std::size_t line_number() const { return line_no_; }
    const std::vector<LineError>& errors() const { return errors_; }
    void add_error(std::string message) { errors_.push_back({line_no_, std::move(message)}); }

private:
    std::ifstream in_;
    std::string buf_;
    std::size_t line_no_ = 0;
    std::vector<LineError> errors_;
};

class Writer {
public:
    explicit Writer(const std::filesystem::path& path);
    void write(const json& obj);
    void write_line(std::string_view line);
    std::size_t count() const { return count_; }
    void close();

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::size_t count_ = 0;
};

/// Compact dump with sorted keys; doubles keep shortest round-trip form.
std::string dump(const json& obj);

/// Counts non-blank lines.
std::size_t count_records(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Required string member; throws ValidationError naming the field.
std::string get_string(const json& obj, const char* field);
std::optional<std::string> get_optional_string(const json& obj, const char* field);

} // namespace forge::jsonl
