#pragma once

#include <charconv>
#include <string>
#include <system_error>

#include "xbar/errors.hpp"

namespace xbar {

// Shortest round-tripping decimal form. Keeps emitted artifacts byte-stable
// across runs and lets loaders recover the exact float32.
inline std::string format_float(float v) {
    char buf[48];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw Error("float formatting failed");
    return std::string(buf, ptr);
}

inline float parse_float_strict(std::string_view text, const std::string& what) {
    float v = 0.0f;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw IoError(what + ": bad float '" + std::string(text) + "'");
    return v;
}

inline int parse_int_strict(std::string_view text, const std::string& what) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size())
        throw IoError(what + ": bad integer '" + std::string(text) + "'");
    return v;
}

}  // namespace xbar
