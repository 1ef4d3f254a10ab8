#pragma once

// Locale-independent text formatting: all data files use decimal numbers with
// 17 significant digits so re-parsing reproduces values exactly and re-running
// reproduces files byte for byte.

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "bimodal/errors.hpp"

namespace bimodal {

inline std::string format_double(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

inline std::string format_int(long long x) { return std::to_string(x); }

inline std::string trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_whitespace(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
        std::size_t j = i;
        while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline double parse_double_strict(const std::string& s, const std::string& where) {
    double value = 0.0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, value);
    if (res.ec != std::errc() || res.ptr != e)
        throw ConfigError(where + ": expected a number, got '" + s + "'");
    return value;
}

inline long long parse_int_strict(const std::string& s, const std::string& where) {
    long long value = 0;
    const char* b = s.data();
    const char* e = b + s.size();
    auto res = std::from_chars(b, e, value);
    if (res.ec != std::errc() || res.ptr != e)
        throw ConfigError(where + ": expected an integer, got '" + s + "'");
    return value;
}

// FNV-1a, used for the output checksums in the run manifest.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string fnv1a64_hex(std::string_view bytes) {
    char buf[17];
    std::uint64_t h = fnv1a64(bytes);
    for (int i = 15; i >= 0; --i) {
        buf[i] = "0123456789abcdef"[h & 0xf];
        h >>= 4;
    }
    buf[16] = 0;
    return std::string(buf);
}

} // namespace bimodal
