#pragma once

#include "epiforecast/errors.hpp"

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace epi::kv {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw FormatError("format_double: conversion failed");
    return std::string(buf, p);
}

inline double parse_double(std::string_view s) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw FormatError("expected a real number, found \"" + std::string(s) + "\"");
    }
    return v;
}

inline std::uint64_t parse_count(std::string_view s) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw FormatError("expected a count, found \"" + std::string(s) + "\"");
    }
    return v;
}

/**
 * Line-oriented writer. Each line is `key value...`; arrays are written as
 * `key <n> v1 ... vn`.
 */
class Writer {
public:
    explicit Writer(std::ostream& out) : out_(out) {}

    void tag(std::string_view version) { out_ << version << '\n'; }

    void scalar(std::string_view key, double v) { out_ << key << ' ' << format_double(v) << '\n'; }

    void count(std::string_view key, std::uint64_t v) { out_ << key << ' ' << v << '\n'; }

    void text(std::string_view key, std::string_view v) { out_ << key << ' ' << v << '\n'; }

    void array(std::string_view key, std::span<const double> v) {
        out_ << key << ' ' << v.size();
        for (double x : v) out_ << ' ' << format_double(x);
        out_ << '\n';
    }

private:
    std::ostream& out_;
};

/// Reader for the Writer format. Keys must appear in the expected order.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    void expect_tag(std::string_view version) {
        std::string line;
        if (!std::getline(in_, line) || strip_cr(line) != version) {
            throw FormatError("expected version tag \"" + std::string(version) + "\"");
        }
        ++line_no_;
    }

    double scalar(std::string_view key) {
        auto toks = line_for(key);
        if (toks.size() != 2) throw error(key, "expected one value");
        return parse_double(toks[1]);
    }

    std::uint64_t count(std::string_view key) {
        auto toks = line_for(key);
        if (toks.size() != 2) throw error(key, "expected one count");
        return parse_count(toks[1]);
    }

    std::string text(std::string_view key) {
        auto toks = line_for(key);
        if (toks.size() != 2) throw error(key, "expected one word");
        return toks[1];
    }

    std::vector<double> array(std::string_view key) {
        auto toks = line_for(key);
        if (toks.size() < 2) throw error(key, "missing length");
        const auto n = parse_count(toks[1]);
        if (toks.size() != n + 2) throw error(key, "length does not match value count");
        std::vector<double> out;
        out.reserve(n);
        for (std::size_t i = 0; i < n; ++i) out.push_back(parse_double(toks[i + 2]));
        return out;
    }

private:
    static std::string strip_cr(std::string s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
        return s;
    }

    FormatError error(std::string_view key, std::string_view what) const {
        return FormatError("line " + std::to_string(line_no_) + " (" + std::string(key) + "): " +
                           std::string(what));
    }

    std::vector<std::string> line_for(std::string_view key) {
        std::string line;
        if (!std::getline(in_, line)) {
            throw FormatError("unexpected end of input, expected key \"" + std::string(key) + "\"");
        }
        ++line_no_;
        std::istringstream ss(strip_cr(line));
        std::vector<std::string> toks;
        for (std::string t; ss >> t;) toks.push_back(std::move(t));
        if (toks.empty() || toks[0] != key) {
            throw error(key, "expected key \"" + std::string(key) + "\"");
        }
        return toks;
    }

    std::istream& in_;
    std::size_t line_no_ = 1;
};

} // namespace epi::kv
