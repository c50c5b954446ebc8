#pragma once

#include "epiforecast/csv.hpp"
#include "epiforecast/date.hpp"
#include "epiforecast/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

namespace epi {

/// Province/state (optional) within a country/region. Compared as exact strings.
struct RegionKey {
    std::optional<std::string> province_state;
    std::string country_region;

    RegionKey() = default;
    RegionKey(std::string country, std::optional<std::string> province = std::nullopt)
        : province_state(std::move(province)), country_region(std::move(country)) {
        if (province_state && province_state->empty()) province_state.reset();
    }

    /// "Country" or "Country/Province".
    std::string display() const {
        return province_state ? country_region + "/" + *province_state : country_region;
    }

    friend bool operator==(const RegionKey&, const RegionKey&) = default;
    friend bool operator<(const RegionKey& a, const RegionKey& b) {
        return std::tie(a.country_region, a.province_state) <
               std::tie(b.country_region, b.province_state);
    }
};

/// One region's daily cumulative confirmed counts.
struct RegionSeries {
    RegionKey key;
    std::vector<Date> dates;
    std::vector<std::int64_t> confirmed;

    std::size_t size() const noexcept { return dates.size(); }
    bool empty() const noexcept { return dates.empty(); }

    std::vector<double> values() const { return {confirmed.begin(), confirmed.end()}; }

    friend bool operator==(const RegionSeries&, const RegionSeries&) = default;
};

struct DateSpan {
    Date first;
    Date last;
    friend bool operator==(const DateSpan&, const DateSpan&) = default;
};

/// All regions of one ingested file, ordered by key.
struct Dataset {
    std::vector<RegionSeries> regions;
    DateSpan date_span;

    const RegionSeries* find(const RegionKey& key) const {
        auto it = std::lower_bound(regions.begin(), regions.end(), key,
                                   [](const RegionSeries& s, const RegionKey& k) { return s.key < k; });
        return (it != regions.end() && it->key == key) ? &*it : nullptr;
    }

    std::size_t n_dates() const {
        return regions.empty() ? 0 : static_cast<std::size_t>(date_span.last - date_span.first) + 1;
    }

    /// Sum over regions of the final cumulative count.
    std::int64_t total_cases() const {
        std::int64_t total = 0;
        for (const auto& r : regions) {
            if (!r.confirmed.empty()) total += r.confirmed.back();
        }
        return total;
    }

    friend bool operator==(const Dataset&, const Dataset&) = default;
};

namespace detail {

inline std::int64_t parse_count(std::string_view text, std::size_t line, std::string_view column) {
    const auto s = csv::trim(text);
    auto fail = [&] {
        return ParseError("non-numeric " + std::string(column) + " value \"" + std::string(text) + "\"",
                          line);
    };
    if (s.empty()) throw fail();
    std::int64_t iv = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), iv);
    if (ec == std::errc{} && p == s.data() + s.size()) {
        if (iv < 0) throw ParseError("negative " + std::string(column) + " value", line);
        return iv;
    }
    // Some exports write counts as "123.0".
    double dv = 0.0;
    auto [q, ec2] = std::from_chars(s.data(), s.data() + s.size(), dv);
    if (ec2 != std::errc{} || q != s.data() + s.size() || !std::isfinite(dv)) throw fail();
    if (dv < 0.0) throw ParseError("negative " + std::string(column) + " value", line);
    if (dv != std::floor(dv) || dv > 9.0e15) {
        throw ParseError(std::string(column) + " value \"" + std::string(text) + "\" is not a whole count",
                         line);
    }
    return static_cast<std::int64_t>(dv);
}

struct Observation {
    Date date;
    std::int64_t confirmed;
    std::size_t line;
};

inline void finalize(Dataset& ds) {
    std::sort(ds.regions.begin(), ds.regions.end(),
              [](const RegionSeries& a, const RegionSeries& b) { return a.key < b.key; });
    bool first = true;
    for (const auto& r : ds.regions) {
        if (r.empty()) continue;
        if (first) {
            ds.date_span = {r.dates.front(), r.dates.back()};
            first = false;
        } else {
            ds.date_span.first = std::min(ds.date_span.first, r.dates.front());
            ds.date_span.last = std::max(ds.date_span.last, r.dates.back());
        }
    }
}

inline std::size_t require_column(const std::vector<std::string>& header, std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (csv::trim(header[i]) == name) return i;
    }
    throw ParseError("header is missing required column \"" + std::string(name) + "\"", 1);
}

} // namespace detail

/**
 * Read the long layout: one row per (region, date) with columns
 * ObservationDate, Province/State, Country/Region and Confirmed. Other columns
 * are ignored. Per-region dates must be consecutive days without duplicates.
 */
inline Dataset ingest_long_csv(std::istream& in) {
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header) throw ParseError("empty input", 1);
    const auto c_date = detail::require_column(header->fields, "ObservationDate");
    const auto c_prov = detail::require_column(header->fields, "Province/State");
    const auto c_country = detail::require_column(header->fields, "Country/Region");
    const auto c_conf = detail::require_column(header->fields, "Confirmed");
    const auto needed = std::max({c_date, c_prov, c_country, c_conf}) + 1;

    std::map<RegionKey, std::vector<detail::Observation>> groups;
    while (auto rec = reader.next()) {
        const auto& f = rec->fields;
        if (f.size() < needed) {
            throw ParseError("expected at least " + std::to_string(needed) + " fields, found " +
                                 std::to_string(f.size()),
                             rec->line);
        }
        const auto date = parse_mdy(csv::trim(f[c_date]));
        if (!date) throw ParseError("malformed ObservationDate \"" + f[c_date] + "\"", rec->line);
        const std::string country(csv::trim(f[c_country]));
        if (country.empty()) throw ParseError("empty Country/Region", rec->line);
        const std::string province(csv::trim(f[c_prov]));
        const auto confirmed = detail::parse_count(f[c_conf], rec->line, "Confirmed");
        groups[RegionKey(country, province)].push_back({*date, confirmed, rec->line});
    }

    Dataset ds;
    for (auto& [key, obs] : groups) {
        std::stable_sort(obs.begin(), obs.end(),
                         [](const auto& a, const auto& b) { return a.date < b.date; });
        RegionSeries series;
        series.key = key;
        for (std::size_t i = 0; i < obs.size(); ++i) {
            if (i > 0) {
                const long gap = obs[i].date - obs[i - 1].date;
                if (gap == 0) {
                    throw DataError("duplicate observation for " + key.display() + " on " +
                                    obs[i].date.iso() + " at lines " + std::to_string(obs[i - 1].line) +
                                    " and " + std::to_string(obs[i].line));
                }
                if (gap > 1) {
                    throw DataError("missing dates for " + key.display() + " between " +
                                    obs[i - 1].date.iso() + " (line " + std::to_string(obs[i - 1].line) +
                                    ") and " + obs[i].date.iso() + " (line " +
                                    std::to_string(obs[i].line) + ")");
                }
            }
            series.dates.push_back(obs[i].date);
            series.confirmed.push_back(obs[i].confirmed);
        }
        ds.regions.push_back(std::move(series));
    }
    detail::finalize(ds);
    return ds;
}

/**
 * Read the wide layout: Province/State, Country/Region, Lat, Long, then one
 * M/D/YY column per day. One region per row.
 */
inline Dataset ingest_wide_csv(std::istream& in) {
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header) throw ParseError("empty input", 1);
    const auto& h = header->fields;
    if (h.size() < 4 || csv::trim(h[0]) != "Province/State" || csv::trim(h[1]) != "Country/Region" ||
        csv::trim(h[2]) != "Lat" || csv::trim(h[3]) != "Long") {
        throw ParseError("wide header must start with Province/State,Country/Region,Lat,Long", 1);
    }
    std::vector<Date> dates;
    for (std::size_t i = 4; i < h.size(); ++i) {
        const auto d = parse_mdy(csv::trim(h[i]));
        if (!d) throw ParseError("malformed date column \"" + h[i] + "\"", 1);
        if (!dates.empty() && *d - dates.back() != 1) {
            throw DataError("date columns must be consecutive days; \"" + h[i] + "\" follows " +
                            dates.back().iso());
        }
        dates.push_back(*d);
    }

    Dataset ds;
    std::map<RegionKey, std::size_t> seen;
    while (auto rec = reader.next()) {
        const auto& f = rec->fields;
        if (f.size() != h.size()) {
            throw ParseError("expected " + std::to_string(h.size()) + " fields, found " +
                                 std::to_string(f.size()),
                             rec->line);
        }
        const std::string country(csv::trim(f[1]));
        if (country.empty()) throw ParseError("empty Country/Region", rec->line);
        RegionKey key(country, std::string(csv::trim(f[0])));
        if (auto [it, inserted] = seen.emplace(key, rec->line); !inserted) {
            throw DataError("duplicate region " + key.display() + " at lines " +
                            std::to_string(it->second) + " and " + std::to_string(rec->line));
        }
        RegionSeries series;
        series.key = std::move(key);
        series.dates = dates;
        series.confirmed.reserve(dates.size());
        for (std::size_t i = 4; i < f.size(); ++i) {
            series.confirmed.push_back(detail::parse_count(f[i], rec->line, "confirmed"));
        }
        ds.regions.push_back(std::move(series));
    }
    detail::finalize(ds);
    return ds;
}

/// Min-max bounds used to map a region's counts onto [0, 1].
struct ScalerParams {
    double min_value = 0.0;
    double max_value = 0.0;

    friend bool operator==(const ScalerParams&, const ScalerParams&) = default;
};

inline ScalerParams fit_scaler(std::span<const double> values) {
    if (values.empty()) throw DataError("fit_scaler: empty series");
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    return {*lo, *hi};
}

inline ScalerParams fit_scaler(const RegionSeries& series) {
    if (series.empty()) throw DataError("fit_scaler: empty series for " + series.key.display());
    return fit_scaler(series.values());
}

/// Maps [min, max] onto [0, 1]; a zero-width range maps everything to 0.
inline double scale(const ScalerParams& p, double v) noexcept {
    const double range = p.max_value - p.min_value;
    if (!(range > 0.0)) return 0.0;
    return (v - p.min_value) / range;
}

inline double unscale(const ScalerParams& p, double u) noexcept {
    return p.min_value + u * (p.max_value - p.min_value);
}

/// Supervised sample: `lookback` consecutive values and the value that follows.
struct Window {
    std::vector<double> input;
    double target = 0.0;
};

inline std::vector<Window> make_windows(std::span<const double> values, std::size_t lookback) {
    if (lookback < 1) throw DataError("make_windows: lookback must be at least 1");
    if (values.size() < lookback + 1) {
        throw DataError("insufficient history: " + std::to_string(values.size()) +
                        " values for lookback " + std::to_string(lookback));
    }
    std::vector<Window> out;
    out.reserve(values.size() - lookback);
    for (std::size_t i = 0; i + lookback < values.size(); ++i) {
        out.push_back({std::vector<double>(values.begin() + i, values.begin() + i + lookback),
                       values[i + lookback]});
    }
    return out;
}

/// Hold out the final `horizon` observations.
inline std::pair<RegionSeries, RegionSeries> train_test_split(const RegionSeries& series,
                                                              std::size_t horizon) {
    if (horizon < 1) throw DataError("train_test_split: horizon must be at least 1");
    if (horizon >= series.size()) {
        throw DataError("train_test_split: horizon " + std::to_string(horizon) +
                        " leaves no training data for " + series.key.display() + " (length " +
                        std::to_string(series.size()) + ")");
    }
    const auto cut = static_cast<std::ptrdiff_t>(series.size() - horizon);
    RegionSeries train{series.key, {series.dates.begin(), series.dates.begin() + cut},
                       {series.confirmed.begin(), series.confirmed.begin() + cut}};
    RegionSeries test{series.key, {series.dates.begin() + cut, series.dates.end()},
                      {series.confirmed.begin() + cut, series.confirmed.end()}};
    return {std::move(train), std::move(test)};
}

} // namespace epi
