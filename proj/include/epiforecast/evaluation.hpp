#pragma once

#include "epiforecast/csv.hpp"
#include "epiforecast/data.hpp"
#include "epiforecast/errors.hpp"
#include "epiforecast/kv.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace epi::eval {

inline double mae(std::span<const double> predicted, std::span<const double> actual) {
    if (predicted.size() != actual.size()) {
        throw MetricError("mae: " + std::to_string(predicted.size()) + " predictions but " +
                          std::to_string(actual.size()) + " actual values");
    }
    if (predicted.empty()) throw MetricError("mae: empty series");
    double s = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) s += std::abs(predicted[i] - actual[i]);
    return s / static_cast<double>(predicted.size());
}

/// Nearest integer, halves away from zero; negatives clamp to 0.
inline std::int64_t round_prediction(double v) {
    const double r = std::round(v);
    return r <= 0.0 ? 0 : static_cast<std::int64_t>(r);
}

inline std::vector<std::int64_t> round_predictions(std::span<const double> values) {
    std::vector<std::int64_t> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(round_prediction(v));
    return out;
}

/// Average MAE relative to the mean final case count per region.
inline double error_rate(double avg_mae, double total_cases, std::size_t n_regions) {
    if (!(total_cases > 0.0)) throw MetricError("error_rate: total cases must be positive");
    if (n_regions == 0) throw MetricError("error_rate: no regions");
    return avg_mae / (total_cases / static_cast<double>(n_regions));
}

/// Display names in report column order.
inline const std::vector<std::string>& model_columns() {
    static const std::vector<std::string> cols{"Baseline", "DSPM", "NRM"};
    return cols;
}

struct ModelPrediction {
    double unrounded = 0.0;   ///< final-day forecast
    std::int64_t rounded = 0;
};

struct EvalRow {
    RegionKey key;
    std::int64_t ground_truth = 0;
    std::map<std::string, ModelPrediction> prediction_per_model;
    std::map<std::string, double> mae_per_model;
    std::map<std::string, std::string> failures;  ///< model → reason
};

struct EvalReport {
    std::vector<std::string> models;  ///< in column order
    std::vector<EvalRow> rows;
    std::map<std::string, double> avg_mae_per_model;
    std::map<std::string, double> error_rate_per_model;
    std::int64_t total_cases = 0;
    std::size_t n_regions = 0;
};

/// per region → per model → H unrounded forecasts
using ForecastTable = std::map<RegionKey, std::map<std::string, std::vector<double>>>;

/// Recompute aggregates from rows.
inline void summarize(EvalReport& report) {
    report.n_regions = report.rows.size();
    report.total_cases = 0;
    for (const auto& row : report.rows) report.total_cases += row.ground_truth;
    report.avg_mae_per_model.clear();
    report.error_rate_per_model.clear();
    for (const auto& model : report.models) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& row : report.rows) {
            if (auto it = row.mae_per_model.find(model); it != row.mae_per_model.end()) {
                sum += it->second;
                ++n;
            }
        }
        if (n == 0) continue;
        const double avg = sum / static_cast<double>(n);
        report.avg_mae_per_model[model] = avg;
        if (report.total_cases > 0) {
            report.error_rate_per_model[model] =
                error_rate(avg, static_cast<double>(report.total_cases), report.n_regions);
        }
    }
}

/**
 * Score forecasts against each region's final `horizon` observations.
 * Ground truth is the last held-out value; MAE uses unrounded forecasts.
 */
inline EvalReport build_report(const Dataset& dataset, const ForecastTable& forecasts, std::size_t horizon,
                               const std::vector<std::string>& models,
                               const std::map<RegionKey, std::map<std::string, std::string>>& failures = {}) {
    std::vector<std::string> missing_in_data, missing_forecast;
    for (const auto& [key, _] : forecasts) {
        if (!dataset.find(key)) missing_in_data.push_back(key.display());
    }
    for (const auto& [key, _] : failures) {
        if (!dataset.find(key)) missing_in_data.push_back(key.display());
    }
    for (const auto& r : dataset.regions) {
        if (!forecasts.contains(r.key) && !failures.contains(r.key)) missing_forecast.push_back(r.key.display());
    }
    if (!missing_in_data.empty() || !missing_forecast.empty()) {
        std::string msg = "report regions disagree with dataset;";
        if (!missing_in_data.empty()) {
            msg += " not in dataset:";
            for (const auto& k : missing_in_data) msg += " [" + k + "]";
        }
        if (!missing_forecast.empty()) {
            msg += " without forecasts:";
            for (const auto& k : missing_forecast) msg += " [" + k + "]";
        }
        throw ReportError(msg);
    }

    EvalReport report;
    report.models = models;
    if (horizon == 0) throw ReportError("build_report: horizon must be at least 1");
    for (const auto& series : dataset.regions) {
        EvalRow row;
        row.key = series.key;
        row.ground_truth = series.confirmed.empty() ? 0 : series.confirmed.back();
        if (auto f = failures.find(series.key); f != failures.end()) row.failures = f->second;
        if (auto it = forecasts.find(series.key); it != forecasts.end()) {
            if (series.size() < horizon) {
                throw ReportError("region " + series.key.display() + " is shorter than the horizon");
            }
            const std::vector<double> actual(series.confirmed.end() - static_cast<std::ptrdiff_t>(horizon),
                                             series.confirmed.end());
            for (const auto& [model, values] : it->second) {
                if (values.size() != horizon) {
                    throw ReportError("forecast for " + series.key.display() + " / " + model + " has " +
                                      std::to_string(values.size()) + " values, expected " +
                                      std::to_string(horizon));
                }
                row.mae_per_model[model] = mae(values, actual);
                row.prediction_per_model[model] = {values.back(), round_prediction(values.back())};
            }
        }
        report.rows.push_back(std::move(row));
    }
    summarize(report);
    return report;
}

inline std::string format_fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Province/State, Country/Region, GroundTruth, <model>..., MAE_<model>..., Status
inline void write_report_csv(std::ostream& out, const EvalReport& report) {
    std::vector<std::string> header{"Province/State", "Country/Region", "GroundTruth"};
    for (const auto& m : report.models) header.push_back(m);
    for (const auto& m : report.models) header.push_back("MAE_" + m);
    header.push_back("Status");
    csv::write_row(out, header);
    for (const auto& row : report.rows) {
        std::vector<std::string> f{row.key.province_state.value_or(""), row.key.country_region,
                                   std::to_string(row.ground_truth)};
        for (const auto& m : report.models) {
            auto it = row.prediction_per_model.find(m);
            f.push_back(it == row.prediction_per_model.end() ? "" : std::to_string(it->second.rounded));
        }
        for (const auto& m : report.models) {
            auto it = row.mae_per_model.find(m);
            f.push_back(it == row.mae_per_model.end() ? "" : format_fixed(it->second, 4));
        }
        std::string status = "ok";
        if (!row.failures.empty()) {
            status = "failed:";
            for (const auto& [m, why] : row.failures) status += " " + m + " (" + why + ")";
        }
        f.push_back(status);
        csv::write_row(out, f);
    }
}

/// Model, AverageMAE, ErrorRate (fraction).
inline void write_summary_csv(std::ostream& out, const EvalReport& report) {
    csv::write_row(out, {"Model", "AverageMAE", "ErrorRate"});
    for (const auto& m : report.models) {
        auto a = report.avg_mae_per_model.find(m);
        auto e = report.error_rate_per_model.find(m);
        csv::write_row(out, {m, a == report.avg_mae_per_model.end() ? "" : format_fixed(a->second, 4),
                             e == report.error_rate_per_model.end() ? "" : format_fixed(e->second, 6)});
    }
}

} // namespace epi::eval
