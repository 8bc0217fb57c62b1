#include "forge/jsonl.hpp"

#include "forge/error.hpp"

#include <sstream>

namespace forge::jsonl {

namespace {

bool is_blank(const std::string& s) {
    return s.find_first_not_of(" \t\r") == std::string::npos;
}

} // namespace

Reader::Reader(const std::filesystem::path& path) : in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
}

std::optional<std::string> Reader::next_line() {
    while (std::getline(in_, buf_)) {
        ++line_no_;
        if (!buf_.empty() && buf_.back() == '\r') buf_.pop_back();
        if (is_blank(buf_)) continue;
        return buf_;
    }
    return std::nullopt;
}

std::optional<json> Reader::next() {
    while (auto line = next_line()) {
        json obj = json::parse(*line, nullptr, false);
        if (obj.is_discarded()) {
            add_error("malformed JSON");
            continue;
        }
        if (!obj.is_object()) {
            add_error("expected a JSON object");
            continue;
        }
        return obj;
    }
    return std::nullopt;
}

Writer::Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw IoError("cannot write " + path.string());
}

void Writer::write(const json& obj) { write_line(dump(obj)); }

void Writer::write_line(std::string_view line) {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
    ++count_;
}

void Writer::close() {
    out_.close();
    if (out_.fail()) throw IoError("failed writing " + path_.string());
}

std::string dump(const json& obj) {
    return obj.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::size_t count_records(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::size_t n = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (!is_blank(line)) ++n;
    }
    return n;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing " + path.string());
}

std::string get_string(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end()) throw ValidationError(std::string("missing required field \"") + field + "\"");
    if (!it->is_string()) throw ValidationError(std::string("field \"") + field + "\" must be a string");
    return it->get<std::string>();
}

std::optional<std::string> get_optional_string(const json& obj, const char* field) {
    auto it = obj.find(field);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ValidationError(std::string("field \"") + field + "\" must be a string");
    return it->get<std::string>();
}

} // namespace forge::jsonl
