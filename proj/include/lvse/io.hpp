#pragma once

// File plumbing: atomic text and gzip writers, gzip line reader, CSV helpers.

#include <zlib.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "lvse/error.hpp"

namespace lvse {

namespace fs = std::filesystem;

/// Shortest round-trip text form of a double.
inline std::string fmt_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Fixed-precision form for human-facing tables.
inline std::string fmt_fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(',', start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    if (!out.empty() && !out.back().empty() && out.back().back() == '\r') out.back().pop_back();
    return out;
}

inline double parse_double(const std::string& s, std::string_view what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("invalid number for " + std::string(what) + ": '" + s + "'");
    }
}

inline long long parse_int(const std::string& s, std::string_view what) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("invalid integer for " + std::string(what) + ": '" + s + "'");
    }
}

inline fs::path partial_path(const fs::path& p) { return fs::path(p.string() + ".partial"); }

/// Writes `content` to `<path>.partial`, then renames it into place.
inline void write_text_atomic(const fs::path& path, const std::string& content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = partial_path(path);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Gzip stream written under `<path>.partial`; `commit()` renames it into
/// place. An uncommitted writer leaves the `.partial` file behind.
class GzWriter {
public:
    explicit GzWriter(fs::path path) : path_(std::move(path)) {
        if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
        file_ = gzopen(partial_path(path_).c_str(), "wb6");
        if (!file_) throw Error("cannot write " + partial_path(path_).string());
    }
    GzWriter(const GzWriter&) = delete;
    GzWriter& operator=(const GzWriter&) = delete;
    ~GzWriter() {
        if (file_) gzclose(file_);
    }

    void write(std::string_view s) {
        if (s.empty()) return;
        if (gzwrite(file_, s.data(), static_cast<unsigned>(s.size())) != static_cast<int>(s.size()))
            throw Error("gzip write failed: " + path_.string());
    }
    void line(std::string_view s) {
        buffer_.append(s);
        buffer_.push_back('\n');
        if (buffer_.size() > (1u << 16)) flush_buffer();
    }
    void commit() {
        flush_buffer();
        const int rc = gzclose(file_);
        file_ = nullptr;
        if (rc != Z_OK) throw Error("gzip close failed: " + path_.string());
        fs::rename(partial_path(path_), path_);
    }

private:
    void flush_buffer() {
        write(buffer_);
        buffer_.clear();
    }

    fs::path path_;
    gzFile file_ = nullptr;
    std::string buffer_;
};

/// Calls `fn` on each line of a gzip (or plain) text file.
inline void for_each_gz_line(const fs::path& path, const std::function<void(std::string_view)>& fn) {
    gzFile f = gzopen(path.c_str(), "rb");
    if (!f) throw Error("cannot open " + path.string());
    std::string pending;
    std::vector<char> buf(1 << 16);
    for (;;) {
        const int n = gzread(f, buf.data(), static_cast<unsigned>(buf.size()));
        if (n < 0) {
            gzclose(f);
            throw ParseError("corrupt gzip stream: " + path.string());
        }
        if (n == 0) break;
        pending.append(buf.data(), static_cast<std::size_t>(n));
        std::size_t start = 0;
        for (auto pos = pending.find('\n'); pos != std::string::npos; pos = pending.find('\n', start)) {
            fn(std::string_view(pending).substr(start, pos - start));
            start = pos + 1;
        }
        pending.erase(0, start);
    }
    gzclose(f);
    if (!pending.empty()) fn(pending);
}

} // namespace lvse
