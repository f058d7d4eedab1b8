// CSV emission with shortest round-trip float formatting, so identical runs
// produce byte-identical files on every platform.

#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "idec/errors.hpp"

namespace idec {
namespace csv {

inline std::string field(double x) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    (void)ec;
    return std::string(buf, ptr);
}

inline std::string field(int x) { return std::to_string(x); }

inline std::string field(const std::string& s) { return s; }
inline std::string field(const char* s) { return s; }

class Writer {
public:
    explicit Writer(const std::filesystem::path& path) : path_(path), out_(path) {
        if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    }

    void header(const std::string& line) { raw(line); }

    template <typename... Ts>
    void row(const Ts&... cells) {
        std::string line;
        bool first = true;
        ((line += (first ? "" : ","), line += field(cells), first = false), ...);
        raw(line);
    }

    void raw(const std::string& line) {
        out_ << line << '\n';
        if (!out_) throw IoError("write failed on " + path_.string());
    }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

} // namespace csv
} // namespace idec
