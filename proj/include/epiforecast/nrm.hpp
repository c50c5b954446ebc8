#pragma once

// Non-parametric regression model: y(t) = g(t) + s(t) with a saturating
// piecewise-logistic trend g and a Fourier seasonal term s. The holiday term
// is identically zero and the residual is not modelled.

#include "epiforecast/data.hpp"
#include "epiforecast/errors.hpp"
#include "epiforecast/kv.hpp"
#include "epiforecast/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace epi::nrm {

struct NrmParams {
    double capacity = 1.0;       ///< C, cases
    double growth_rate = 0.0;    ///< k, 1/day
    double offset = 0.0;         ///< m, day index
    std::vector<double> changepoints;        ///< s_j, ascending day indices
    std::vector<double> rate_adjustments;    ///< δ_j, 1/day
    std::vector<double> offset_corrections;  ///< γ_j, days
    std::vector<double> seasonal_coeffs;     ///< [cos_1, sin_1, cos_2, sin_2, ...]
    double seasonal_period = 7.0;
    std::size_t seasonal_order = 3;

    friend bool operator==(const NrmParams&, const NrmParams&) = default;
};

struct NrmConfig {
    std::size_t n_changepoints = 25;
    double changepoint_range = 0.8;
    double cap_multiplier = 3.0;
    std::optional<double> capacity_override;
    double l1_penalty = 0.05;
    std::size_t max_iterations = 2000;
    double tolerance = 1e-8;
    bool seasonality_enabled = true;
    double seasonal_period = 7.0;
    std::size_t seasonal_order = 3;
    double learning_rate = 0.01;
    std::uint64_t seed = 42;

    void validate() const {
        if (!(changepoint_range > 0.0 && changepoint_range <= 1.0)) {
            throw FitError("NrmConfig: changepoint_range must be in (0, 1]");
        }
        if (!(cap_multiplier > 1.0)) throw FitError("NrmConfig: cap_multiplier must exceed 1");
        if (!(l1_penalty >= 0.0)) throw FitError("NrmConfig: l1_penalty must be non-negative");
        if (!(seasonal_period > 0.0)) throw FitError("NrmConfig: seasonal_period must be positive");
        if (!(learning_rate > 0.0)) throw FitError("NrmConfig: learning_rate must be positive");
    }
};

/**
 * Uniform grid over (0, range·(train_days − 1)], rounded to whole days.
 * Day 0 is dropped (a break there is indistinguishable from k) and duplicates
 * collapse, so the result may be shorter than n_changepoints.
 */
inline std::vector<double> place_changepoints(std::size_t train_days, const NrmConfig& cfg) {
    std::vector<double> out;
    if (cfg.n_changepoints == 0 || train_days < 3) return out;
    const double span = cfg.changepoint_range * static_cast<double>(train_days - 1);
    const double step = span / static_cast<double>(cfg.n_changepoints);
    for (std::size_t j = 1; j <= cfg.n_changepoints; ++j) {
        const double day = std::round(step * static_cast<double>(j));
        if (day < 1.0) continue;
        if (out.empty() || day > out.back()) out.push_back(day);
    }
    return out;
}

/// a_j(t) = 1 if t ≥ s_j.
inline std::vector<int> indicator_a(double t, std::span<const double> s) {
    std::vector<int> a(s.size());
    for (std::size_t j = 0; j < s.size(); ++j) a[j] = t >= s[j] ? 1 : 0;
    return a;
}

/**
 * Offset corrections that keep the trend continuous at each changepoint:
 *   γ_j = (s_j − m − Σ_{l<j} γ_l) · (1 − (k + Σ_{l<j} δ_l) / (k + Σ_{l≤j} δ_l))
 */
inline std::vector<double> compute_gammas(double k, double m, std::span<const double> s,
                                          std::span<const double> delta) {
    if (s.size() != delta.size()) {
        throw ShapeError("compute_gammas: " + std::to_string(s.size()) + " changepoints but " +
                         std::to_string(delta.size()) + " rate adjustments");
    }
    std::vector<double> gamma(s.size());
    double rate_before = k;
    double gamma_sum = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
        const double rate_after = rate_before + delta[j];
        if (rate_after == 0.0) {
            throw NumericError("compute_gammas: growth rate is zero after changepoint " +
                               std::to_string(j + 1));
        }
        gamma[j] = (s[j] - m - gamma_sum) * (1.0 - rate_before / rate_after);
        gamma_sum += gamma[j];
        rate_before = rate_after;
    }
    return gamma;
}

/// g(t) = C / (1 + exp(−(k + a(t)ᵀδ)(t − (m + a(t)ᵀγ))))
inline double logistic_trend(double t, const NrmParams& p) {
    double rate = p.growth_rate;
    double off = p.offset;
    for (std::size_t j = 0; j < p.changepoints.size(); ++j) {
        if (t >= p.changepoints[j]) {
            rate += p.rate_adjustments[j];
            off += p.offset_corrections[j];
        }
    }
    return p.capacity * sigmoid(rate * (t - off));
}

/// Σ_n β_{2n−1} cos(2πnt/P) + β_{2n} sin(2πnt/P)
inline double seasonal_component(double t, const NrmParams& p) {
    double s = 0.0;
    const std::size_t order = std::min(p.seasonal_order, p.seasonal_coeffs.size() / 2);
    for (std::size_t n = 1; n <= order; ++n) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(n) * t / p.seasonal_period;
        s += p.seasonal_coeffs[2 * n - 2] * std::cos(angle) + p.seasonal_coeffs[2 * n - 1] * std::sin(angle);
    }
    return s;
}

inline double nrm_predict(double t, const NrmParams& p) {
    return logistic_trend(t, p) + seasonal_component(t, p);
}

inline std::vector<double> nrm_forecast(const NrmParams& p, std::size_t last_train_day,
                                        std::size_t horizon) {
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t h = 1; h <= horizon; ++h) {
        out.push_back(nrm_predict(static_cast<double>(last_train_day + h), p));
    }
    return out;
}

/// Objective value after every accepted optimizer step (first entry is the start point).
struct FitTrace {
    std::vector<double> objective;
    std::size_t iterations = 0;
};

namespace detail {

/**
 * Fitting-space view of the model. The trend is carried as the logit-space
 * line z(t) = b + k·t + Σ δ_j (t − s_j)₊, which equals the offset-corrected
 * form with m = −b/k. Coordinates are rescaled so every entry is O(1):
 * x = [b, k·T, δ·T, β/C].
 */
struct Problem {
    std::vector<double> y;
    std::vector<double> s;
    double capacity = 1.0;
    double span = 1.0;
    std::size_t order = 0;
    double period = 7.0;
    double tau = 0.0;

    std::size_t n_delta() const { return s.size(); }
    std::size_t dim() const { return 2 + s.size() + 2 * order; }

    NrmParams to_params(std::span<const double> x) const {
        NrmParams p;
        p.capacity = capacity;
        const double b = x[0];
        double k = x[1] / span;
        // A flat logit line (k = 0) is the limit k → 0, m → ∓∞.
        if (k == 0.0) k = 1e-12;
        p.growth_rate = k;
        p.offset = -b / k;
        p.changepoints = s;
        p.rate_adjustments.resize(s.size());
        for (std::size_t j = 0; j < s.size(); ++j) p.rate_adjustments[j] = x[2 + j] / span;
        p.offset_corrections = compute_gammas(p.growth_rate, p.offset, p.changepoints, p.rate_adjustments);
        p.seasonal_order = order;
        p.seasonal_period = period;
        p.seasonal_coeffs.resize(2 * order);
        for (std::size_t i = 0; i < 2 * order; ++i) p.seasonal_coeffs[i] = x[2 + s.size() + i] * capacity;
        return p;
    }

    double penalty(std::span<const double> x) const {
        double pen = 0.0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double d = x[2 + j] / span;
            pen += std::sqrt(d * d + 1e-16);
        }
        return tau * pen;
    }

    /// Objective evaluated through nrm_predict with γ recomputed; +inf if
    /// the parameters are not representable.
    double objective(std::span<const double> x) const {
        NrmParams p;
        try {
            p = to_params(x);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::infinity();
        }
        double sse = 0.0;
        for (std::size_t t = 0; t < y.size(); ++t) {
            const double r = (y[t] - nrm_predict(static_cast<double>(t), p)) / capacity;
            sse += r * r;
        }
        const double j = sse + penalty(x);
        return std::isfinite(j) ? j : std::numeric_limits<double>::infinity();
    }

    std::vector<double> gradient(std::span<const double> x) const {
        std::vector<double> g(dim(), 0.0);
        const double k = x[1] / span;
        for (std::size_t t = 0; t < y.size(); ++t) {
            const double td = static_cast<double>(t);
            double z = x[0] + k * td;
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (td > s[j]) z += (x[2 + j] / span) * (td - s[j]);
            }
            const double sg = sigmoid(z);
            double season = 0.0;
            for (std::size_t n = 1; n <= order; ++n) {
                const double a = 2.0 * std::numbers::pi * static_cast<double>(n) * td / period;
                season += capacity * (x[2 + s.size() + 2 * n - 2] * std::cos(a) +
                                      x[2 + s.size() + 2 * n - 1] * std::sin(a));
            }
            const double pred = capacity * sg + season;
            const double r = (y[t] - pred) / capacity;
            const double d_pred = -2.0 * r / capacity;
            const double d_z = d_pred * capacity * sg * (1.0 - sg);
            g[0] += d_z;
            g[1] += d_z * td / span;
            for (std::size_t j = 0; j < s.size(); ++j) {
                if (td > s[j]) g[2 + j] += d_z * (td - s[j]) / span;
            }
            for (std::size_t n = 1; n <= order; ++n) {
                const double a = 2.0 * std::numbers::pi * static_cast<double>(n) * td / period;
                g[2 + s.size() + 2 * n - 2] += d_pred * capacity * std::cos(a);
                g[2 + s.size() + 2 * n - 1] += d_pred * capacity * std::sin(a);
            }
        }
        for (std::size_t j = 0; j < s.size(); ++j) {
            const double d = x[2 + j] / span;
            g[2 + j] += tau * (d / std::sqrt(d * d + 1e-16)) / span;
        }
        return g;
    }

    /// Weighted least squares on logit(y/C) for the trend, then ordinary least
    /// squares of the remaining residual on the Fourier basis.
    std::vector<double> initial_point() const {
        const std::size_t T = y.size();
        const std::size_t nt = 2 + s.size();
        Eigen::MatrixXd A(T, nt);
        Eigen::VectorXd z(T), w(T);
        for (std::size_t t = 0; t < T; ++t) {
            const double td = static_cast<double>(t);
            const double p = std::clamp(y[t] / capacity, 1e-9, 1.0 - 1e-9);
            z(t) = std::log(p / (1.0 - p));
            w(t) = p * (1.0 - p) * p * (1.0 - p);
            A(t, 0) = 1.0;
            A(t, 1) = td / span;
            for (std::size_t j = 0; j < s.size(); ++j) A(t, 2 + j) = std::max(0.0, td - s[j]) / span;
        }
        w /= w.maxCoeff();
        Eigen::MatrixXd N = A.transpose() * w.asDiagonal() * A;
        Eigen::VectorXd rhs = A.transpose() * (w.array() * z.array()).matrix();
        const double ridge = 1e-8 * std::max(1e-300, N.diagonal().maxCoeff());
        for (std::size_t j = 0; j < nt; ++j) N(j, j) += j < 2 ? ridge * 1e-4 : ridge;
        Eigen::VectorXd trend = N.ldlt().solve(rhs);

        std::vector<double> x(dim(), 0.0);
        for (std::size_t i = 0; i < nt; ++i) x[i] = std::isfinite(trend(i)) ? trend(i) : 0.0;

        if (order > 0) {
            Eigen::MatrixXd F(T, 2 * order);
            Eigen::VectorXd r(T);
            for (std::size_t t = 0; t < T; ++t) {
                const double td = static_cast<double>(t);
                double zt = x[0] + x[1] * td / span;
                for (std::size_t j = 0; j < s.size(); ++j) zt += x[2 + j] * std::max(0.0, td - s[j]) / span;
                r(t) = (y[t] - capacity * sigmoid(zt)) / capacity;
                for (std::size_t n = 1; n <= order; ++n) {
                    const double a = 2.0 * std::numbers::pi * static_cast<double>(n) * td / period;
                    F(t, 2 * n - 2) = std::cos(a);
                    F(t, 2 * n - 1) = std::sin(a);
                }
            }
            Eigen::MatrixXd FtF = F.transpose() * F;
            FtF.diagonal().array() += 1e-9 * static_cast<double>(T);
            Eigen::VectorXd beta = FtF.ldlt().solve(F.transpose() * r);
            for (std::size_t i = 0; i < 2 * order; ++i) {
                x[nt + i] = std::isfinite(beta(i)) ? beta(i) : 0.0;
            }
        }
        return x;
    }
};

} // namespace detail

/**
 * Penalized least-squares fit of one region's training series.
 *
 * C is fixed (override, or cap_multiplier × max observed). Minimizes
 *   Σ_t ((y_t − ŷ_t)/C)² + τ Σ_j √(δ_j² + 1e−16)
 * over (k, m, δ, β) with Adam, rejecting any step that raises the objective
 * (the learning rate halves on rejection). Stops after max_iterations, when
 * the learning rate collapses, or when the relative improvement over the last
 * 25 accepted steps falls below tolerance.
 */
inline NrmParams nrm_fit(const RegionSeries& series, const NrmConfig& cfg, FitTrace* trace = nullptr) {
    cfg.validate();
    if (series.size() < 5) {
        throw DataError("nrm_fit: " + series.key.display() + " has " + std::to_string(series.size()) +
                        " observations, need at least 5");
    }
    detail::Problem prob;
    prob.y = series.values();
    const double observed_max = *std::max_element(prob.y.begin(), prob.y.end());
    if (cfg.capacity_override) {
        if (!(*cfg.capacity_override >= observed_max && *cfg.capacity_override > 0.0)) {
            throw FitError("nrm_fit: capacity override must be positive and at least the observed maximum " +
                           kv::format_double(observed_max));
        }
        prob.capacity = *cfg.capacity_override;
    } else {
        prob.capacity = cfg.cap_multiplier * std::max(observed_max, 1.0);
    }
    prob.s = place_changepoints(series.size(), cfg);
    prob.span = static_cast<double>(series.size() - 1);
    prob.order = cfg.seasonality_enabled ? cfg.seasonal_order : 0;
    prob.period = cfg.seasonal_period;
    prob.tau = cfg.l1_penalty;

    std::vector<double> x = prob.initial_point();
    double best = prob.objective(x);
    if (!std::isfinite(best)) {
        // Initial line may sit on a zero-rate segment; restart from a plain logistic.
        std::fill(x.begin() + 2, x.end(), 0.0);
        if (x[1] == 0.0) x[1] = 1e-3;
        best = prob.objective(x);
    }
    if (!std::isfinite(best)) {
        throw FitError("nrm_fit: non-finite objective at the initial point for " + series.key.display());
    }
    if (trace) trace->objective.push_back(best);

    OptimizerState opt(x.size(), cfg.learning_rate);
    std::vector<double> history{best};
    constexpr std::size_t kWindow = 25;
    std::size_t it = 0;
    for (; it < cfg.max_iterations; ++it) {
        const auto g = prob.gradient(x);
        if (!all_finite(g)) throw FitError("nrm_fit: non-finite gradient for " + series.key.display());
        std::vector<double> candidate = x;
        OptimizerState saved = opt;
        optimizer_step(opt, candidate, g);
        const double value = prob.objective(candidate);
        if (value <= best) {
            x = std::move(candidate);
            best = value;
            history.push_back(best);
            if (trace) trace->objective.push_back(best);
            if (history.size() > kWindow) {
                const double old = history[history.size() - 1 - kWindow];
                if (old - best <= cfg.tolerance * std::max(old, 1e-300)) {
                    ++it;
                    break;
                }
            }
        } else {
            opt = std::move(saved);
            opt.learning_rate *= 0.5;
            if (opt.learning_rate < 1e-12) {
                ++it;
                break;
            }
        }
    }
    if (trace) trace->iterations = it;
    if (!std::isfinite(best)) throw FitError("nrm_fit: non-finite objective for " + series.key.display());
    return prob.to_params(x);
}

inline constexpr const char* kFormatTag = "NRM1";

inline void write_params(std::ostream& out, const NrmParams& p) {
    kv::Writer w(out);
    w.tag(kFormatTag);
    w.scalar("capacity", p.capacity);
    w.scalar("growth_rate", p.growth_rate);
    w.scalar("offset", p.offset);
    w.array("changepoints", p.changepoints);
    w.array("rate_adjustments", p.rate_adjustments);
    w.array("offset_corrections", p.offset_corrections);
    w.scalar("seasonal_period", p.seasonal_period);
    w.count("seasonal_order", p.seasonal_order);
    w.array("seasonal_coeffs", p.seasonal_coeffs);
}

inline NrmParams read_params(std::istream& in) {
    kv::Reader r(in);
    r.expect_tag(kFormatTag);
    NrmParams p;
    p.capacity = r.scalar("capacity");
    p.growth_rate = r.scalar("growth_rate");
    p.offset = r.scalar("offset");
    p.changepoints = r.array("changepoints");
    p.rate_adjustments = r.array("rate_adjustments");
    p.offset_corrections = r.array("offset_corrections");
    p.seasonal_period = r.scalar("seasonal_period");
    p.seasonal_order = r.count("seasonal_order");
    p.seasonal_coeffs = r.array("seasonal_coeffs");
    if (p.rate_adjustments.size() != p.changepoints.size() ||
        p.offset_corrections.size() != p.changepoints.size()) {
        throw FormatError("NRM1: changepoint arrays differ in length");
    }
    if (p.seasonal_coeffs.size() != 2 * p.seasonal_order) {
        throw FormatError("NRM1: seasonal_coeffs length must be 2 * seasonal_order");
    }
    return p;
}

} // namespace epi::nrm
