#pragma once

// ε-insensitive support vector regression from day index to cumulative cases.
// Inputs and targets are min-max scaled to [0, 1]; the dual is solved in the
// β = α − α* form by sequential pairwise updates.

#include "epiforecast/data.hpp"
#include "epiforecast/errors.hpp"
#include "epiforecast/kv.hpp"
#include "epiforecast/numerics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace epi::svr {

enum class KernelKind { linear, rbf };

struct Kernel {
    KernelKind kind = KernelKind::rbf;
    double gamma = 0.1;

    double operator()(double a, double b) const noexcept {
        if (kind == KernelKind::linear) return a * b;
        const double d = a - b;
        return std::exp(-gamma * d * d);
    }

    friend bool operator==(const Kernel&, const Kernel&) = default;
};

struct SvrHyper {
    Kernel kernel{};
    double c_reg = 10.0;
    double epsilon_tube = 0.01;
    std::size_t max_passes = 1000;
    double tolerance = 1e-4;
    std::uint64_t seed = 42;

    void validate() const {
        if (kernel.kind == KernelKind::rbf && !(kernel.gamma > 0.0)) {
            throw FitError("SvrHyper: rbf gamma must be positive");
        }
        if (!(c_reg > 0.0)) throw FitError("SvrHyper: C_reg must be positive");
        if (!(epsilon_tube >= 0.0)) throw FitError("SvrHyper: epsilon_tube must be non-negative");
        if (max_passes < 1) throw FitError("SvrHyper: max_passes must be at least 1");
        if (!(tolerance > 0.0)) throw FitError("SvrHyper: tolerance must be positive");
    }
};

struct SvrModel {
    std::vector<double> support_inputs;  ///< raw day indices
    std::vector<double> dual_coeffs;     ///< α − α*, one per support input
    double bias = 0.0;                   ///< scaled-target space
    Kernel kernel{};
    double c_reg = 10.0;
    double epsilon_tube = 0.01;
    ScalerParams input_scaler;
    ScalerParams target_scaler;

    friend bool operator==(const SvrModel&, const SvrModel&) = default;
};

/// ½ βᵀKβ − yᵀβ + ε Σ|β_i|, all in scaled space.
inline double dual_objective(const Kernel& kernel, std::span<const double> xs,
                             std::span<const double> ys, std::span<const double> beta, double eps) {
    double quad = 0.0, lin = 0.0, l1 = 0.0;
    for (std::size_t i = 0; i < beta.size(); ++i) {
        for (std::size_t j = 0; j < beta.size(); ++j) quad += beta[i] * beta[j] * kernel(xs[i], xs[j]);
        lin += ys[i] * beta[i];
        l1 += std::abs(beta[i]);
    }
    return 0.5 * quad - lin + eps * l1;
}

namespace detail {

struct Solution {
    std::vector<double> beta;
    double bias = 0.0;
    std::size_t iterations = 0;
};

/**
 * Pairwise dual solver. Each iteration picks the maximal violating pair
 * (steepest feasible ascent/descent directions of the subgradient) and
 * minimizes the objective exactly along β_i += t, β_j −= t.
 */
inline Solution solve_dual(const std::vector<double>& K, std::span<const double> y, double C, double eps,
                           std::size_t max_iterations, double tol) {
    const std::size_t n = y.size();
    Solution sol;
    sol.beta.assign(n, 0.0);
    auto& beta = sol.beta;
    std::vector<double> G(y.begin(), y.end());
    for (double& g : G) g = -g;  // G = Kβ − y at β = 0

    auto d_up = [&](std::size_t i) { return G[i] + (beta[i] >= 0.0 ? eps : -eps); };
    auto d_down = [&](std::size_t i) { return G[i] + (beta[i] > 0.0 ? eps : -eps); };

    for (; sol.iterations < max_iterations; ++sol.iterations) {
        std::size_t i = n, j = n;
        double best_up = std::numeric_limits<double>::infinity();
        double best_down = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < n; ++a) {
            if (beta[a] < C && d_up(a) < best_up) {
                best_up = d_up(a);
                i = a;
            }
            if (beta[a] > -C && d_down(a) > best_down) {
                best_down = d_down(a);
                j = a;
            }
        }
        if (i == n || j == n || i == j || best_down - best_up < tol) break;

        const double kii = K[i * n + i], kjj = K[j * n + j], kij = K[i * n + j];
        const double eta = kii + kjj - 2.0 * kij;
        const double dg = G[i] - G[j];
        const double lo = std::max(-C - beta[i], beta[j] - C);
        const double hi = std::min(C - beta[i], beta[j] + C);
        auto phi = [&](double t) {
            return 0.5 * eta * t * t + dg * t + eps * (std::abs(beta[i] + t) + std::abs(beta[j] - t));
        };
        std::array<double, 8> cand{lo, hi, -beta[i], beta[j], lo, lo, lo, lo};
        std::size_t nc = 4;
        if (eta > 1e-12) {
            for (double s1 : {-1.0, 1.0}) {
                for (double s2 : {-1.0, 1.0}) cand[nc++] = -(dg + eps * (s1 - s2)) / eta;
            }
        }
        double t_best = 0.0, phi_best = phi(0.0);
        for (std::size_t c = 0; c < nc; ++c) {
            const double t = std::clamp(cand[c], lo, hi);
            const double v = phi(t);
            if (v < phi_best) {
                phi_best = v;
                t_best = t;
            }
        }
        if (t_best == 0.0) break;
        beta[i] += t_best;
        beta[j] -= t_best;
        beta[i] = std::clamp(beta[i], -C, C);
        beta[j] = std::clamp(beta[j], -C, C);
        for (std::size_t a = 0; a < n; ++a) G[a] += t_best * (K[a * n + i] - K[a * n + j]);
    }

    double free_sum = 0.0;
    std::size_t free_count = 0;
    double up = std::numeric_limits<double>::infinity();
    double down = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n; ++a) {
        const double m = std::abs(beta[a]);
        if (m > 0.0 && m < C) {
            free_sum += -G[a] - (beta[a] > 0.0 ? eps : -eps);
            ++free_count;
        }
        if (beta[a] < C) up = std::min(up, d_up(a));
        if (beta[a] > -C) down = std::max(down, d_down(a));
    }
    if (free_count > 0) {
        sol.bias = free_sum / static_cast<double>(free_count);
    } else if (std::isfinite(up) && std::isfinite(down)) {
        sol.bias = -(up + down) / 2.0;
    } else if (std::isfinite(up)) {
        sol.bias = -up;
    } else if (std::isfinite(down)) {
        sol.bias = -down;
    }
    return sol;
}

} // namespace detail

/// Fit on the full series: day index 0..n−1 against confirmed counts.
inline SvrModel svr_fit(const RegionSeries& series, const SvrHyper& hyper) {
    hyper.validate();
    if (series.size() < 2) {
        throw DataError("svr_fit: " + series.key.display() + " needs at least 2 observations");
    }
    const std::size_t n = series.size();
    std::vector<double> days(n);
    for (std::size_t i = 0; i < n; ++i) days[i] = static_cast<double>(i);
    const auto y_raw = series.values();

    SvrModel m;
    m.kernel = hyper.kernel;
    m.c_reg = hyper.c_reg;
    m.epsilon_tube = hyper.epsilon_tube;
    m.input_scaler = fit_scaler(days);
    m.target_scaler = fit_scaler(y_raw);

    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = scale(m.input_scaler, days[i]);
        ys[i] = scale(m.target_scaler, y_raw[i]);
    }
    if (m.target_scaler.max_value == m.target_scaler.min_value && hyper.epsilon_tube == 0.0) {
        return m;  // bias-only
    }

    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) K[i * n + j] = m.kernel(xs[i], xs[j]);
    }
    const auto sol = detail::solve_dual(K, ys, hyper.c_reg, hyper.epsilon_tube, hyper.max_passes * n,
                                        hyper.tolerance);
    m.bias = sol.bias;
    for (std::size_t i = 0; i < n; ++i) {
        if (sol.beta[i] != 0.0) {
            m.support_inputs.push_back(days[i]);
            m.dual_coeffs.push_back(sol.beta[i]);
        }
    }
    return m;
}

/// Scaled-space decision value Σ β_i K(t, x_i) + b.
inline double svr_decision(const SvrModel& m, double day) {
    const double x = scale(m.input_scaler, day);
    double f = m.bias;
    for (std::size_t i = 0; i < m.support_inputs.size(); ++i) {
        f += m.dual_coeffs[i] * m.kernel(x, scale(m.input_scaler, m.support_inputs[i]));
    }
    return f;
}

inline double svr_predict(const SvrModel& m, double day) {
    return unscale(m.target_scaler, svr_decision(m, day));
}

/// Dual objective of a fitted model against the series it was fit on.
inline double dual_objective(const SvrModel& m, const RegionSeries& train) {
    std::vector<double> xs, ys;
    for (double day : m.support_inputs) {
        const auto idx = static_cast<std::size_t>(day);
        if (idx >= train.size()) throw DataError("dual_objective: support input outside series");
        xs.push_back(scale(m.input_scaler, day));
        ys.push_back(scale(m.target_scaler, static_cast<double>(train.confirmed[idx])));
    }
    return dual_objective(m.kernel, xs, ys, m.dual_coeffs, m.epsilon_tube);
}

inline std::vector<double> svr_forecast(const SvrModel& m, std::size_t last_train_day, std::size_t horizon) {
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t h = 1; h <= horizon; ++h) out.push_back(svr_predict(m, static_cast<double>(last_train_day + h)));
    return out;
}

inline constexpr const char* kFormatTag = "SVR1";

inline void write_model(std::ostream& out, const SvrModel& m) {
    kv::Writer w(out);
    w.tag(kFormatTag);
    w.text("kernel", m.kernel.kind == KernelKind::rbf ? "rbf" : "linear");
    w.scalar("gamma", m.kernel.gamma);
    w.scalar("c_reg", m.c_reg);
    w.scalar("epsilon_tube", m.epsilon_tube);
    w.scalar("input_min", m.input_scaler.min_value);
    w.scalar("input_max", m.input_scaler.max_value);
    w.scalar("target_min", m.target_scaler.min_value);
    w.scalar("target_max", m.target_scaler.max_value);
    w.array("support_inputs", m.support_inputs);
    w.array("dual_coeffs", m.dual_coeffs);
    w.scalar("bias", m.bias);
}

inline SvrModel read_model(std::istream& in) {
    kv::Reader r(in);
    r.expect_tag(kFormatTag);
    SvrModel m;
    const auto kernel = r.text("kernel");
    if (kernel == "rbf") {
        m.kernel.kind = KernelKind::rbf;
    } else if (kernel == "linear") {
        m.kernel.kind = KernelKind::linear;
    } else {
        throw FormatError("SVR1: unknown kernel \"" + kernel + "\"");
    }
    m.kernel.gamma = r.scalar("gamma");
    m.c_reg = r.scalar("c_reg");
    m.epsilon_tube = r.scalar("epsilon_tube");
    m.input_scaler = {r.scalar("input_min"), r.scalar("input_max")};
    m.target_scaler = {r.scalar("target_min"), r.scalar("target_max")};
    m.support_inputs = r.array("support_inputs");
    m.dual_coeffs = r.array("dual_coeffs");
    m.bias = r.scalar("bias");
    if (m.support_inputs.size() != m.dual_coeffs.size()) {
        throw FormatError("SVR1: support_inputs and dual_coeffs differ in length");
    }
    return m;
}

} // namespace epi::svr
