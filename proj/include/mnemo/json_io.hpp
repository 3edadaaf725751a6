#pragma once

#include "mnemo/error.hpp"
#include "mnemo/text.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace mnemo {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace detail {

inline void dump_into(std::string& out, const Json& j, RealFormat mode) {
    switch (j.type()) {
        case Json::value_t::object: {
            out.push_back('{');
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out.push_back(',');
                first = false;
                out += Json(it.key()).dump();
                out.push_back(':');
                dump_into(out, it.value(), mode);
            }
            out.push_back('}');
            break;
        }
        case Json::value_t::array: {
            out.push_back('[');
            bool first = true;
            for (const auto& v : j) {
                if (!first) out.push_back(',');
                first = false;
                dump_into(out, v, mode);
            }
            out.push_back(']');
            break;
        }
        case Json::value_t::number_float:
            out += format_real(j.get<double>(), mode);
            break;
        default:
            out += j.dump(-1, ' ', false, Json::error_handler_t::replace);
            break;
    }
}

} // namespace detail

// Compact single-line JSON with insertion-ordered keys and pinned float formatting.
inline std::string dump_record(const Json& j, RealFormat mode = RealFormat::capped9) {
    std::string out;
    detail::dump_into(out, j, mode);
    return out;
}

inline Json parse_record(std::string_view line) {
    try {
        return Json::parse(line);
    } catch (const Json::exception& e) {
        throw Error(ErrorCode::malformed_record, e.what());
    }
}

inline std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_error, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Splits line-delimited content, skipping blank lines.
inline std::vector<std::string> split_lines(std::string_view content) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < content.size()) {
        auto nl = content.find('\n', pos);
        if (nl == std::string_view::npos) nl = content.size();
        auto line = content.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (!trim(line).empty()) lines.emplace_back(line);
        pos = nl + 1;
    }
    return lines;
}

inline std::vector<Json> read_records(const fs::path& path) {
    std::vector<Json> out;
    for (const auto& line : split_lines(read_file(path))) out.push_back(parse_record(line));
    return out;
}

// Writes through a temporary sibling and renames it into place.
inline void write_file_atomic(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io_error, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error(ErrorCode::io_error, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::io_error, "rename to " + path.string() + ": " + ec.message());
}

inline std::string join_records(const std::vector<Json>& records,
                                RealFormat mode = RealFormat::capped9) {
    std::string out;
    for (const auto& r : records) {
        out += dump_record(r, mode);
        out.push_back('\n');
    }
    return out;
}

} // namespace mnemo
