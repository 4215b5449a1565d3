#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "halogen/errors.hpp"
#include "halogen/hashing.hpp"

namespace halogen::jsonl {

using nlohmann::json;

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Writes `text` to `path` atomically (write temp file, then rename).
inline void write_text_atomic(const std::filesystem::path& path, std::string_view text) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp-" + hashing::hex64(hashing::fnv1a64(path.string())).substr(0, 8);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open file for writing: " + tmp.string());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        if (!out) throw IoError("short write: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw IoError("rename failed for " + path.string() + ": " + ec.message());
    }
}

/// Calls fn(parsed_object, line_number) for every non-blank line.
/// Line numbers are 1-based; parse failures name the offending line.
template <class Fn>
void for_each_line(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        bool blank = true;
        for (char c : line) {
            if (c != ' ' && c != '\t') { blank = false; break; }
        }
        if (blank) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) {
            throw ParseError(path.string() + ":" + std::to_string(lineno) +
                             ": malformed JSON line");
        }
        fn(j, lineno);
    }
}

inline std::vector<json> read_file(const std::filesystem::path& path) {
    std::vector<json> out;
    for_each_line(path, [&](json j, std::size_t) { out.push_back(std::move(j)); });
    return out;
}

inline void write_file(const std::filesystem::path& path, const std::vector<json>& rows) {
    std::string text;
    for (const json& row : rows) {
        text += row.dump();
        text += '\n';
    }
    write_text_atomic(path, text);
}

} // namespace halogen::jsonl
