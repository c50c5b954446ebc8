#pragma once

// Independent checks for the SVR dual solver: exhaustive grid search over
// the dual, and the primal objective for a duality-gap certificate.

#include "epiforecast/svr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace svr_oracle {

struct Problem {
    std::vector<double> K;  ///< n × n kernel matrix
    std::vector<double> y;
    double C = 1.0;
    double eps = 0.0;

    std::size_t n() const { return y.size(); }

    double dual(const std::vector<double>& b) const {
        double v = 0.0;
        for (std::size_t i = 0; i < n(); ++i) {
            for (std::size_t j = 0; j < n(); ++j) v += 0.5 * b[i] * b[j] * K[i * n() + j];
            v += -y[i] * b[i] + eps * std::abs(b[i]);
        }
        return v;
    }

    /// ½‖w‖² + C Σ max(0, |y − f| − ε) with w = Σ β φ and the best bias.
    double primal(const std::vector<double>& beta) const {
        std::vector<double> wx(n(), 0.0);
        double ww = 0.0;
        for (std::size_t i = 0; i < n(); ++i) {
            for (std::size_t j = 0; j < n(); ++j) {
                wx[i] += beta[j] * K[j * n() + i];
                ww += beta[i] * beta[j] * K[i * n() + j];
            }
        }
        // The loss is convex piecewise linear in the bias; its minimum sits at a breakpoint.
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n(); ++i) {
            for (double sgn : {-1.0, 1.0}) {
                const double bias = y[i] - wx[i] + sgn * eps;
                double loss = 0.0;
                for (std::size_t k = 0; k < n(); ++k) loss += std::max(0.0, std::abs(y[k] - wx[k] - bias) - eps);
                best = std::min(best, C * loss);
            }
        }
        return 0.5 * ww + best;
    }
};

/// Minimum of the dual over β_i ∈ {−C, −C + h, …, C} with Σ β = 0, h = C/100.
/// The last coordinate is determined by the others; the second-to-last is
/// swept with the objective expanded as a quadratic in it.
inline double grid_minimum(const Problem& p) {
    const std::size_t n = p.n();
    const int steps = 200;
    const double h = 2.0 * p.C / steps;
    auto value_at = [&](int idx) { return -p.C + h * idx; };
    if (n == 1) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    std::vector<double> b(n, 0.0);
    std::vector<int> idx(n - 2, 0);
    const std::size_t u = n - 2, v = n - 1;
    while (true) {
        double S = 0.0;
        for (std::size_t i = 0; i < u; ++i) {
            b[i] = value_at(idx[i]);
            S += b[i];
        }
        // Fixed part over the first u coordinates.
        double fixed = 0.0;
        std::vector<double> lu(2, 0.0);  // Σ_i b_i K(i,u), Σ_i b_i K(i,v)
        for (std::size_t i = 0; i < u; ++i) {
            for (std::size_t j = 0; j < u; ++j) fixed += 0.5 * b[i] * b[j] * p.K[i * n + j];
            fixed += -p.y[i] * b[i] + p.eps * std::abs(b[i]);
            lu[0] += b[i] * p.K[i * n + u];
            lu[1] += b[i] * p.K[i * n + v];
        }
        for (int k = 0; k <= steps; ++k) {
            const double bu = value_at(k);
            const double bv = -(S + bu);
            if (bv < -p.C - 1e-12 || bv > p.C + 1e-12) continue;
            const double val = fixed + bu * lu[0] + bv * lu[1] + 0.5 * bu * bu * p.K[u * n + u] +
                               0.5 * bv * bv * p.K[v * n + v] + bu * bv * p.K[u * n + v] - p.y[u] * bu -
                               p.y[v] * bv + p.eps * (std::abs(bu) + std::abs(bv));
            best = std::min(best, val);
        }
        std::size_t pos = 0;
        while (pos < u && ++idx[pos] > steps) idx[pos++] = 0;
        if (pos == u) break;
    }
    return best;
}

/// Scaled-space problem an svr_fit call solves for `series`.
inline Problem problem_for(const epi::RegionSeries& series, const epi::svr::SvrHyper& hyper) {
    Problem p;
    const std::size_t n = series.size();
    std::vector<double> days(n);
    for (std::size_t i = 0; i < n; ++i) days[i] = static_cast<double>(i);
    const auto in = epi::fit_scaler(days);
    const auto out = epi::fit_scaler(series);
    std::vector<double> xs(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = epi::scale(in, days[i]);
        p.y.push_back(epi::scale(out, static_cast<double>(series.confirmed[i])));
    }
    p.K.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) p.K[i * n + j] = hyper.kernel(xs[i], xs[j]);
    }
    p.C = hyper.c_reg;
    p.eps = hyper.epsilon_tube;
    return p;
}

/// Full-length β from a fitted model (zeros for non-support points).
inline std::vector<double> full_beta(const epi::svr::SvrModel& m, std::size_t n) {
    std::vector<double> b(n, 0.0);
    for (std::size_t i = 0; i < m.support_inputs.size(); ++i) {
        b[static_cast<std::size_t>(m.support_inputs[i])] = m.dual_coeffs[i];
    }
    return b;
}

} // namespace svr_oracle
