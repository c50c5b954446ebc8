#pragma once

// Batch orchestration behind the command-line tool:
// ingest → split → fit/forecast each model → evaluate → write files.

#include "epiforecast/csv.hpp"
#include "epiforecast/data.hpp"
#include "epiforecast/dspm.hpp"
#include "epiforecast/errors.hpp"
#include "epiforecast/evaluation.hpp"
#include "epiforecast/kv.hpp"
#include "epiforecast/nrm.hpp"
#include "epiforecast/svr.hpp"
#include "epiforecast/version.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

namespace epi::pipeline {

enum class Layout { long_format, wide_format };

enum class ModelKind { svr, dspm, nrm };

/// Report column name for a model.
inline std::string column_name(ModelKind m) {
    switch (m) {
    case ModelKind::svr: return "Baseline";
    case ModelKind::dspm: return "DSPM";
    case ModelKind::nrm: return "NRM";
    }
    return "";
}

inline std::string flag_name(ModelKind m) {
    switch (m) {
    case ModelKind::svr: return "svr";
    case ModelKind::dspm: return "dspm";
    case ModelKind::nrm: return "nrm";
    }
    return "";
}

struct RunConfig {
    std::string input_path;
    Layout layout = Layout::long_format;
    std::vector<ModelKind> models{ModelKind::svr, ModelKind::dspm, ModelKind::nrm};
    std::size_t horizon = 14;
    std::size_t lookback = 7;
    std::uint64_t seed = 42;
    std::string output_dir = "out";
    std::vector<std::string> region_filter;
    std::size_t workers = 1;
    dspm::DspmHyper dspm;
    nrm::NrmConfig nrm;
    std::map<std::string, double> nrm_capacity;  ///< region display → C override
    svr::SvrHyper svr;

    /// Seed and lookback are shared across models.
    void propagate() {
        dspm.seed = seed;
        dspm.lookback = lookback;
        nrm.seed = seed;
        svr.seed = seed;
    }

    void validate() const {
        if (horizon < 1) throw UsageError("horizon must be at least 1");
        if (lookback < 1) throw UsageError("lookback must be at least 1");
        if (models.empty()) throw UsageError("at least one model must be selected");
        if (workers < 1) throw UsageError("workers must be at least 1");
        dspm.validate();
        try {
            nrm.validate();
            svr.validate();
        } catch (const FitError& e) {
            throw UsageError(e.what());
        }
    }
};

namespace detail {

inline std::string trim_copy(std::string_view s) { return std::string(csv::trim(s)); }

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        auto piece = trim_copy(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (!piece.empty()) out.push_back(std::move(piece));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline std::uint64_t to_count(std::string_view key, std::string_view v) {
    try {
        return kv::parse_count(csv::trim(v));
    } catch (const FormatError&) {
        throw UsageError(std::string(key) + ": expected a non-negative integer, got \"" + std::string(v) + "\"");
    }
}

inline double to_real(std::string_view key, std::string_view v) {
    try {
        return kv::parse_double(csv::trim(v));
    } catch (const FormatError&) {
        throw UsageError(std::string(key) + ": expected a number, got \"" + std::string(v) + "\"");
    }
}

inline bool to_flag(std::string_view key, std::string_view v) {
    const auto t = csv::trim(v);
    if (t == "on" || t == "true" || t == "1" || t == "yes") return true;
    if (t == "off" || t == "false" || t == "0" || t == "no") return false;
    throw UsageError(std::string(key) + ": expected on/off, got \"" + std::string(v) + "\"");
}

} // namespace detail

/// Apply one `key = value` setting (config file line or command-line flag).
inline void apply_setting(RunConfig& c, std::string_view key_in, std::string_view value) {
    const std::string key = detail::trim_copy(key_in);
    const std::string v = detail::trim_copy(value);
    using detail::to_count;
    using detail::to_real;
    if (key == "input") {
        c.input_path = v;
    } else if (key == "layout") {
        if (v == "long") c.layout = Layout::long_format;
        else if (v == "wide") c.layout = Layout::wide_format;
        else throw UsageError("layout must be long or wide, got \"" + v + "\"");
    } else if (key == "models") {
        c.models.clear();
        for (const auto& name : detail::split(v, ',')) {
            ModelKind m;
            if (name == "svr") m = ModelKind::svr;
            else if (name == "dspm") m = ModelKind::dspm;
            else if (name == "nrm") m = ModelKind::nrm;
            else throw UsageError("unknown model \"" + name + "\" (expected dspm, nrm, svr)");
            if (std::find(c.models.begin(), c.models.end(), m) == c.models.end()) c.models.push_back(m);
        }
        std::sort(c.models.begin(), c.models.end());
    } else if (key == "horizon") {
        c.horizon = to_count(key, v);
    } else if (key == "lookback") {
        c.lookback = to_count(key, v);
    } else if (key == "seed") {
        c.seed = to_count(key, v);
    } else if (key == "out") {
        c.output_dir = v;
    } else if (key == "regions") {
        c.region_filter = detail::split(v, ';');
    } else if (key == "workers") {
        c.workers = to_count(key, v);
    } else if (key == "dspm.stack_depth") {
        c.dspm.stack_depth = to_count(key, v);
    } else if (key == "dspm.hidden_size") {
        c.dspm.hidden_size = to_count(key, v);
    } else if (key == "dspm.epochs") {
        c.dspm.epochs = to_count(key, v);
    } else if (key == "dspm.learning_rate") {
        c.dspm.learning_rate = to_real(key, v);
    } else if (key == "nrm.n_changepoints") {
        c.nrm.n_changepoints = to_count(key, v);
    } else if (key == "nrm.changepoint_range") {
        c.nrm.changepoint_range = to_real(key, v);
    } else if (key == "nrm.cap_multiplier") {
        c.nrm.cap_multiplier = to_real(key, v);
    } else if (key == "nrm.l1_penalty") {
        c.nrm.l1_penalty = to_real(key, v);
    } else if (key == "nrm.max_iterations") {
        c.nrm.max_iterations = to_count(key, v);
    } else if (key == "nrm.tolerance") {
        c.nrm.tolerance = to_real(key, v);
    } else if (key == "nrm.learning_rate") {
        c.nrm.learning_rate = to_real(key, v);
    } else if (key == "nrm.seasonality") {
        c.nrm.seasonality_enabled = detail::to_flag(key, v);
    } else if (key == "nrm.seasonal_order") {
        c.nrm.seasonal_order = to_count(key, v);
    } else if (key == "nrm.seasonal_period") {
        c.nrm.seasonal_period = to_real(key, v);
    } else if (key.starts_with("nrm.capacity.")) {
        c.nrm_capacity[key.substr(13)] = to_real(key, v);
    } else if (key == "svr.kernel") {
        if (v == "rbf") c.svr.kernel.kind = svr::KernelKind::rbf;
        else if (v == "linear") c.svr.kernel.kind = svr::KernelKind::linear;
        else throw UsageError("svr.kernel must be rbf or linear, got \"" + v + "\"");
    } else if (key == "svr.gamma") {
        c.svr.kernel.gamma = to_real(key, v);
    } else if (key == "svr.c_reg") {
        c.svr.c_reg = to_real(key, v);
    } else if (key == "svr.epsilon_tube") {
        c.svr.epsilon_tube = to_real(key, v);
    } else if (key == "svr.max_passes") {
        c.svr.max_passes = to_count(key, v);
    } else if (key == "svr.tolerance") {
        c.svr.tolerance = to_real(key, v);
    } else if (key == "version") {
        // informational, written into manifests
    } else {
        throw UsageError("unknown setting \"" + key + "\"");
    }
}

/// Flat `key = value` lines; `#` starts a comment line.
inline void load_config(RunConfig& c, std::istream& in) {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        const auto t = csv::trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string_view::npos) {
            throw UsageError("config line " + std::to_string(n) + ": expected key = value");
        }
        apply_setting(c, t.substr(0, eq), t.substr(eq + 1));
    }
}

inline void load_config_file(RunConfig& c, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("config not found: " + path);
    load_config(c, in);
}

/// Every effective setting, in a form load_config reads back.
inline void write_manifest(std::ostream& out, const RunConfig& c) {
    auto real = [](double v) { return kv::format_double(v); };
    out << "# epiforecast run manifest\n";
    out << "version = " << kVersion << '\n';
    const auto input = c.input_path.empty() ? std::string()
                                            : std::filesystem::absolute(c.input_path).lexically_normal().string();
    out << "input = " << input << '\n';
    out << "layout = " << (c.layout == Layout::long_format ? "long" : "wide") << '\n';
    out << "models = ";
    for (std::size_t i = 0; i < c.models.size(); ++i) out << (i ? "," : "") << flag_name(c.models[i]);
    out << '\n';
    out << "horizon = " << c.horizon << '\n';
    out << "lookback = " << c.lookback << '\n';
    out << "seed = " << c.seed << '\n';
    out << "out = " << c.output_dir << '\n';
    out << "regions = ";
    for (std::size_t i = 0; i < c.region_filter.size(); ++i) out << (i ? ";" : "") << c.region_filter[i];
    out << '\n';
    out << "workers = " << c.workers << '\n';
    out << "dspm.stack_depth = " << c.dspm.stack_depth << '\n';
    out << "dspm.hidden_size = " << c.dspm.hidden_size << '\n';
    out << "dspm.epochs = " << c.dspm.epochs << '\n';
    out << "dspm.learning_rate = " << real(c.dspm.learning_rate) << '\n';
    out << "nrm.n_changepoints = " << c.nrm.n_changepoints << '\n';
    out << "nrm.changepoint_range = " << real(c.nrm.changepoint_range) << '\n';
    out << "nrm.cap_multiplier = " << real(c.nrm.cap_multiplier) << '\n';
    out << "nrm.l1_penalty = " << real(c.nrm.l1_penalty) << '\n';
    out << "nrm.max_iterations = " << c.nrm.max_iterations << '\n';
    out << "nrm.tolerance = " << real(c.nrm.tolerance) << '\n';
    out << "nrm.learning_rate = " << real(c.nrm.learning_rate) << '\n';
    out << "nrm.seasonality = " << (c.nrm.seasonality_enabled ? "on" : "off") << '\n';
    out << "nrm.seasonal_order = " << c.nrm.seasonal_order << '\n';
    out << "nrm.seasonal_period = " << real(c.nrm.seasonal_period) << '\n';
    for (const auto& [region, cap] : c.nrm_capacity) out << "nrm.capacity." << region << " = " << real(cap) << '\n';
    out << "svr.kernel = " << (c.svr.kernel.kind == svr::KernelKind::rbf ? "rbf" : "linear") << '\n';
    out << "svr.gamma = " << real(c.svr.kernel.gamma) << '\n';
    out << "svr.c_reg = " << real(c.svr.c_reg) << '\n';
    out << "svr.epsilon_tube = " << real(c.svr.epsilon_tube) << '\n';
    out << "svr.max_passes = " << c.svr.max_passes << '\n';
    out << "svr.tolerance = " << real(c.svr.tolerance) << '\n';
}

inline Dataset load_dataset(const RunConfig& c) {
    if (c.input_path.empty()) throw UsageError("no input file given (--input)");
    std::ifstream in(c.input_path, std::ios::binary);
    if (!in) throw DataError("input not found: " + c.input_path);
    return c.layout == Layout::long_format ? ingest_long_csv(in) : ingest_wide_csv(in);
}

/// Keep only regions named by the filter ("Country" or "Country/Province").
inline Dataset apply_region_filter(const Dataset& ds, const std::vector<std::string>& filter) {
    if (filter.empty()) return ds;
    Dataset out;
    for (const auto& name : filter) {
        auto it = std::find_if(ds.regions.begin(), ds.regions.end(),
                               [&](const RegionSeries& r) { return r.key.display() == name; });
        if (it == ds.regions.end()) throw DataError("region not found in dataset: " + name);
        if (!out.find(it->key)) out.regions.push_back(*it);
        std::sort(out.regions.begin(), out.regions.end(),
                  [](const RegionSeries& a, const RegionSeries& b) { return a.key < b.key; });
    }
    out.date_span = {out.regions.front().dates.front(), out.regions.front().dates.back()};
    for (const auto& r : out.regions) {
        out.date_span.first = std::min(out.date_span.first, r.dates.front());
        out.date_span.last = std::max(out.date_span.last, r.dates.back());
    }
    return out;
}

/// File-name-safe form of a region key, prefixed with its position.
inline std::string region_slug(std::size_t index, const RegionKey& key) {
    std::string s = std::to_string(index) + "_";
    for (char ch : key.display()) {
        const auto uc = static_cast<unsigned char>(ch);
        s.push_back(std::isalnum(uc) ? ch : '_');
    }
    return s;
}

struct DatasetSummary {
    std::size_t regions = 0;
    std::size_t dates = 0;
    Date first;
    Date last;
    std::int64_t total_cases = 0;
};

inline DatasetSummary summarize(const Dataset& ds) {
    return {ds.regions.size(), ds.n_dates(), ds.date_span.first, ds.date_span.last, ds.total_cases()};
}

inline void write_summary(std::ostream& out, const DatasetSummary& s) {
    out << "regions: " << s.regions << '\n';
    out << "dates: " << s.dates << '\n';
    out << "first_date: " << s.first.iso() << '\n';
    out << "last_date: " << s.last.iso() << '\n';
    out << "total_cases: " << s.total_cases << '\n';
}

/// Normalized long-form cache: Province/State,Country/Region,Date,Confirmed.
inline void write_normalized(std::ostream& out, const Dataset& ds) {
    csv::write_row(out, {"Province/State", "Country/Region", "Date", "Confirmed"});
    for (const auto& r : ds.regions) {
        for (std::size_t i = 0; i < r.size(); ++i) {
            csv::write_row(out, {r.key.province_state.value_or(""), r.key.country_region, r.dates[i].iso(),
                                 std::to_string(r.confirmed[i])});
        }
    }
}

inline DatasetSummary cmd_ingest(const RunConfig& c, std::ostream& log) {
    const Dataset ds = apply_region_filter(load_dataset(c), c.region_filter);
    const auto s = summarize(ds);
    write_summary(log, s);
    if (!c.output_dir.empty()) {
        std::filesystem::create_directories(c.output_dir);
        std::ofstream cache(std::filesystem::path(c.output_dir) / "dataset.csv", std::ios::binary);
        write_normalized(cache, ds);
        std::ofstream summary(std::filesystem::path(c.output_dir) / "summary.txt", std::ios::binary);
        write_summary(summary, s);
    }
    return s;
}

/// Everything produced for one region.
struct RegionOutcome {
    RegionKey key;
    std::size_t train_len = 0;
    std::map<std::string, std::vector<double>> forecasts;  ///< column name → H values
    std::map<std::string, std::vector<double>> in_sample;  ///< column name → train_len values
    std::map<std::string, std::string> failures;
    std::map<std::string, std::string> serialized;          ///< flag name → model text
};

inline RegionOutcome run_region(const RegionSeries& series, const RunConfig& c) {
    RegionOutcome out;
    out.key = series.key;
    RegionSeries train;
    try {
        train = train_test_split(series, c.horizon).first;
    } catch (const Error& e) {
        for (auto m : c.models) out.failures[column_name(m)] = e.what();
        return out;
    }
    out.train_len = train.size();
    const std::size_t last_day = train.size() - 1;
    for (auto m : c.models) {
        const auto col = column_name(m);
        try {
            std::ostringstream text;
            if (m == ModelKind::svr) {
                const auto model = svr::svr_fit(train, c.svr);
                out.forecasts[col] = svr::svr_forecast(model, last_day, c.horizon);
                auto& fit = out.in_sample[col];
                for (std::size_t t = 0; t < train.size(); ++t) fit.push_back(svr::svr_predict(model, static_cast<double>(t)));
                svr::write_model(text, model);
            } else if (m == ModelKind::nrm) {
                auto cfg = c.nrm;
                if (auto it = c.nrm_capacity.find(series.key.display()); it != c.nrm_capacity.end()) {
                    cfg.capacity_override = it->second;
                }
                const auto params = nrm::nrm_fit(train, cfg);
                out.forecasts[col] = nrm::nrm_forecast(params, last_day, c.horizon);
                auto& fit = out.in_sample[col];
                for (std::size_t t = 0; t < train.size(); ++t) fit.push_back(nrm::nrm_predict(static_cast<double>(t), params));
                nrm::write_params(text, params);
            } else {
                const auto model = dspm::dspm_train(train, c.dspm);
                out.forecasts[col] = dspm::dspm_forecast(model, train, c.horizon);
                dspm::write_model(text, model);
            }
            out.serialized[flag_name(m)] = text.str();
        } catch (const Error& e) {
            out.forecasts.erase(col);
            out.in_sample.erase(col);
            out.failures[col] = e.what();
        }
    }
    return out;
}

inline void write_plot_data(std::ostream& out, const RegionSeries& series, const RegionOutcome& r,
                            const std::vector<std::string>& columns) {
    std::vector<std::string> header{"Date", "Actual"};
    header.insert(header.end(), columns.begin(), columns.end());
    csv::write_row(out, header);
    for (std::size_t t = 0; t < series.size(); ++t) {
        std::vector<std::string> row{series.dates[t].iso(), std::to_string(series.confirmed[t])};
        for (const auto& col : columns) {
            std::string cell;
            if (t < r.train_len) {
                if (auto it = r.in_sample.find(col); it != r.in_sample.end()) cell = kv::format_double(it->second[t]);
            } else if (auto it = r.forecasts.find(col); it != r.forecasts.end()) {
                cell = kv::format_double(it->second[t - r.train_len]);
            }
            row.push_back(std::move(cell));
        }
        csv::write_row(out, row);
    }
}

/// Province/State,Country/Region,Model,Step,Date,Forecast, with values that read back exactly.
inline void write_forecasts(std::ostream& out, const Dataset& ds, const std::vector<RegionOutcome>& outcomes) {
    csv::write_row(out, {"Province/State", "Country/Region", "Model", "Step", "Date", "Forecast"});
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        const auto& r = outcomes[i];
        const auto& series = ds.regions[i];
        for (const auto& [model, values] : r.forecasts) {
            for (std::size_t h = 0; h < values.size(); ++h) {
                csv::write_row(out, {r.key.province_state.value_or(""), r.key.country_region, model,
                                     std::to_string(h + 1), series.dates[r.train_len + h].iso(),
                                     kv::format_double(values[h])});
            }
        }
    }
}

inline eval::ForecastTable read_forecasts(std::istream& in) {
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header || header->fields.size() != 6 || header->fields[2] != "Model") {
        throw ParseError("forecast file header must be Province/State,Country/Region,Model,Step,Date,Forecast", 1);
    }
    eval::ForecastTable table;
    while (auto rec = reader.next()) {
        const auto& f = rec->fields;
        if (f.size() != 6) throw ParseError("expected 6 fields", rec->line);
        auto& values = table[RegionKey(f[1], f[0])][f[2]];
        std::size_t step = 0;
        double v = 0.0;
        try {
            step = kv::parse_count(f[3]);
            v = kv::parse_double(f[5]);
        } catch (const FormatError& e) {
            throw ParseError(e.what(), rec->line);
        }
        if (step != values.size() + 1) throw ParseError("forecast steps out of order", rec->line);
        values.push_back(v);
    }
    return table;
}

struct RunResult {
    eval::EvalReport report;
    std::vector<RegionOutcome> outcomes;
    bool all_failed = false;
};

inline std::vector<std::string> report_columns(const RunConfig& c) {
    std::vector<std::string> cols;
    for (auto m : c.models) cols.push_back(column_name(m));
    std::vector<std::string> ordered;
    for (const auto& name : eval::model_columns()) {
        if (std::find(cols.begin(), cols.end(), name) != cols.end()) ordered.push_back(name);
    }
    return ordered;
}

/**
 * Train, forecast and score every selected region, then write report.csv,
 * summary.csv, forecasts.csv, plots/, models/ and manifest.txt under the
 * output directory. Regions run on up to `workers` threads; files are
 * written afterwards in region order.
 */
inline RunResult cmd_run(RunConfig c, std::ostream& log) {
    c.propagate();
    c.validate();
    const Dataset ds = apply_region_filter(load_dataset(c), c.region_filter);
    if (ds.regions.empty()) throw DataError("no regions to run");

    RunResult result;
    result.outcomes.resize(ds.regions.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < ds.regions.size(); i = next++) {
            result.outcomes[i] = run_region(ds.regions[i], c);
        }
    };
    const std::size_t n_threads = std::min(c.workers, ds.regions.size());
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    }

    eval::ForecastTable table;
    std::map<RegionKey, std::map<std::string, std::string>> failures;
    std::size_t failed_regions = 0;
    for (const auto& r : result.outcomes) {
        if (!r.forecasts.empty()) table[r.key] = r.forecasts;
        if (!r.failures.empty()) failures[r.key] = r.failures;
        if (r.forecasts.empty()) ++failed_regions;
        for (const auto& [model, why] : r.failures) log << r.key.display() << ": " << model << " failed: " << why << '\n';
    }
    result.all_failed = failed_regions == result.outcomes.size();
    const auto columns = report_columns(c);
    result.report = eval::build_report(ds, table, c.horizon, columns, failures);

    namespace fs = std::filesystem;
    const fs::path root(c.output_dir);
    fs::create_directories(root / "plots");
    fs::create_directories(root / "models");
    {
        std::ofstream f(root / "report.csv", std::ios::binary);
        eval::write_report_csv(f, result.report);
    }
    {
        std::ofstream f(root / "summary.csv", std::ios::binary);
        eval::write_summary_csv(f, result.report);
    }
    {
        std::ofstream f(root / "forecasts.csv", std::ios::binary);
        write_forecasts(f, ds, result.outcomes);
    }
    {
        std::ofstream f(root / "manifest.txt", std::ios::binary);
        write_manifest(f, c);
    }
    for (std::size_t i = 0; i < ds.regions.size(); ++i) {
        const auto slug = region_slug(i, ds.regions[i].key);
        std::ofstream f(root / "plots" / (slug + ".csv"), std::ios::binary);
        write_plot_data(f, ds.regions[i], result.outcomes[i], columns);
        for (const auto& [model, text] : result.outcomes[i].serialized) {
            std::ofstream m(root / "models" / (slug + "." + model + ".txt"), std::ios::binary);
            m << text;
        }
    }
    eval::write_summary_csv(log, result.report);
    return result;
}

/// Rebuild the report and per-model summary from a saved forecasts.csv.
inline eval::EvalReport cmd_report(const RunConfig& c, std::ostream& log) {
    namespace fs = std::filesystem;
    const fs::path path = fs::path(c.output_dir) / "forecasts.csv";
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("forecasts not found: " + path.string());
    const auto table = read_forecasts(in);
    if (table.empty()) throw DataError("forecast file lists no regions: " + path.string());

    std::size_t horizon = 0;
    std::vector<std::string> present;
    for (const auto& [key, models] : table) {
        for (const auto& [model, values] : models) {
            if (horizon == 0) horizon = values.size();
            if (values.size() != horizon) throw DataError("forecasts have inconsistent horizons");
            if (std::find(present.begin(), present.end(), model) == present.end()) present.push_back(model);
        }
    }
    std::vector<std::string> columns;
    for (const auto& name : eval::model_columns()) {
        if (std::find(present.begin(), present.end(), name) != present.end()) columns.push_back(name);
    }
    const Dataset ds = apply_region_filter(load_dataset(c), c.region_filter);
    auto report = eval::build_report(ds, table, horizon, columns);
    {
        std::ofstream f(fs::path(c.output_dir) / "summary.csv", std::ios::binary);
        eval::write_summary_csv(f, report);
    }
    {
        std::ofstream f(fs::path(c.output_dir) / "report.csv", std::ios::binary);
        eval::write_report_csv(f, report);
    }
    eval::write_summary_csv(log, report);
    return report;
}

/// Process exit code for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const UsageError*>(&e)) return 1;
    if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const FitError*>(&e)) return 3;
    return 2;
}

} // namespace epi::pipeline
