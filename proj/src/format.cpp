#include "mcnet/format.hpp"

#include <charconv>
#include <cmath>

#include "mcnet/error.hpp"

namespace mcnet {

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    if (ec != std::errc{}) throw Error("format_double: conversion failed");
    return std::string(buf, end);
}

double parse_double(std::string_view text) {
    double v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
        throw Error("not a number: '" + std::string(text) + "'");
    }
    return v;
}

long long parse_integer(std::string_view text) {
    long long v = 0;
    const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size() || text.empty()) {
        throw Error("not an integer: '" + std::string(text) + "'");
    }
    return v;
}

} // namespace mcnet
