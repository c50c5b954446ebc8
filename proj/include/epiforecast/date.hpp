#pragma once

#include "epiforecast/errors.hpp"

#include <charconv>
#include <chrono>
#include <compare>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace epi {

/// Calendar day in the proleptic Gregorian calendar.
class Date {
public:
    Date() = default;
    explicit Date(std::chrono::sys_days d) : days_(d) {}
    Date(int y, unsigned m, unsigned d)
        : days_(std::chrono::year_month_day{std::chrono::year{y}, std::chrono::month{m},
                                            std::chrono::day{d}}) {}

    std::chrono::sys_days days() const noexcept { return days_; }

    Date operator+(int n) const { return Date(days_ + std::chrono::days{n}); }
    long operator-(const Date& other) const { return (days_ - other.days_).count(); }

    friend auto operator<=>(const Date&, const Date&) = default;
    friend bool operator==(const Date&, const Date&) = default;

    /// YYYY-MM-DD
    std::string iso() const {
        const std::chrono::year_month_day ymd{days_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
        return buf;
    }

    /// M/D/YY (the wide-layout column header form).
    std::string mdyy() const {
        const std::chrono::year_month_day ymd{days_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%u/%u/%02d", static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()), static_cast<int>(ymd.year()) % 100);
        return buf;
    }

    /// MM/DD/YYYY (the long-layout ObservationDate form).
    std::string mmddyyyy() const {
        const std::chrono::year_month_day ymd{days_};
        char buf[16];
        std::snprintf(buf, sizeof buf, "%02u/%02u/%04d", static_cast<unsigned>(ymd.month()),
                      static_cast<unsigned>(ymd.day()), static_cast<int>(ymd.year()));
        return buf;
    }

private:
    std::chrono::sys_days days_{};
};

namespace detail {

inline std::optional<unsigned> parse_uint(std::string_view s) {
    if (s.empty() || s.size() > 4) return std::nullopt;
    unsigned v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

} // namespace detail

/**
 * Parse "M/D/Y". A two-digit year is taken as 20YY; otherwise the year must
 * have four digits. Anything after the year separated by a space (a time of
 * day) is ignored. Returns nullopt on malformed or impossible dates.
 */
inline std::optional<Date> parse_mdy(std::string_view text) {
    if (auto sp = text.find(' '); sp != std::string_view::npos) text = text.substr(0, sp);
    const auto a = text.find('/');
    if (a == std::string_view::npos) return std::nullopt;
    const auto b = text.find('/', a + 1);
    if (b == std::string_view::npos) return std::nullopt;
    const auto m = detail::parse_uint(text.substr(0, a));
    const auto d = detail::parse_uint(text.substr(a + 1, b - a - 1));
    const auto ytext = text.substr(b + 1);
    const auto y = detail::parse_uint(ytext);
    if (!m || !d || !y) return std::nullopt;
    int year = 0;
    if (ytext.size() == 2) {
        year = 2000 + static_cast<int>(*y);
    } else if (ytext.size() == 4) {
        year = static_cast<int>(*y);
    } else {
        return std::nullopt;
    }
    const std::chrono::year_month_day ymd{std::chrono::year{year}, std::chrono::month{*m},
                                          std::chrono::day{*d}};
    if (!ymd.ok()) return std::nullopt;
    return Date(std::chrono::sys_days{ymd});
}

/// Parse "YYYY-MM-DD".
inline std::optional<Date> parse_iso(std::string_view text) {
    if (text.size() != 10 || text[4] != '-' || text[7] != '-') return std::nullopt;
    const auto y = detail::parse_uint(text.substr(0, 4));
    const auto m = detail::parse_uint(text.substr(5, 2));
    const auto d = detail::parse_uint(text.substr(8, 2));
    if (!y || !m || !d) return std::nullopt;
    const std::chrono::year_month_day ymd{std::chrono::year{static_cast<int>(*y)},
                                          std::chrono::month{*m}, std::chrono::day{*d}};
    if (!ymd.ok()) return std::nullopt;
    return Date(std::chrono::sys_days{ymd});
}

} // namespace epi
