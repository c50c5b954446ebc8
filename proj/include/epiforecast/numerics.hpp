#pragma once

#include "epiforecast/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace epi {

using Vector = std::vector<double>;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_) {
            throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                             " != rows*cols " + std::to_string(rows_ * cols_));
        }
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> values() noexcept { return data_; }
    std::span<const double> values() const noexcept { return data_; }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

inline bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Logistic function, branching on sign so exp never overflows.
inline double sigmoid(double x) noexcept {
    if (x >= 0.0) {
        const double z = std::exp(-x);
        return 1.0 / (1.0 + z);
    }
    const double z = std::exp(x);
    return z / (1.0 + z);
}

inline double tanh_act(double x) noexcept { return std::tanh(x); }

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/**
 * out = W * concat(h, x) + b.
 *
 * W must have len(b) rows and len(h) + len(x) columns. The concatenation is
 * never materialized.
 */
inline void affine_concat_into(const Matrix& W, std::span<const double> h,
                               std::span<const double> x, std::span<const double> b,
                               std::span<double> out) {
    if (W.cols() != h.size() + x.size()) {
        throw ShapeError("affine_concat: W has " + std::to_string(W.cols()) +
                         " columns but [h, x] has length " + std::to_string(h.size() + x.size()));
    }
    if (W.rows() != b.size()) {
        throw ShapeError("affine_concat: b has length " + std::to_string(b.size()) +
                         " but W has " + std::to_string(W.rows()) + " rows");
    }
    if (out.size() != b.size()) {
        throw ShapeError("affine_concat: output has length " + std::to_string(out.size()) +
                         ", expected " + std::to_string(b.size()));
    }
    const std::size_t nh = h.size();
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const auto w = W.row(r);
        out[r] = b[r] + dot(w.first(nh), h) + dot(w.subspan(nh), x);
    }
}

inline Vector affine_concat(const Matrix& W, std::span<const double> h, std::span<const double> x,
                            std::span<const double> b) {
    Vector out(b.size());
    affine_concat_into(W, h, x, b, out);
    return out;
}

/// Adam moment state for a flat parameter vector.
struct OptimizerState {
    std::uint64_t step_count = 0;
    Vector first_moment;
    Vector second_moment;
    double learning_rate = 1e-3;
    double decay1 = 0.9;
    double decay2 = 0.999;
    double epsilon = 1e-8;

    OptimizerState() = default;
    explicit OptimizerState(std::size_t n_params, double lr = 1e-3)
        : first_moment(n_params, 0.0), second_moment(n_params, 0.0), learning_rate(lr) {}
};

/**
 * One bias-corrected Adam update of `params` in place.
 *
 * An all-zero gradient leaves both parameters and state untouched. A
 * non-finite gradient entry throws TrainingError naming its index before any
 * parameter is modified.
 */
inline void optimizer_step(OptimizerState& state, std::span<double> params,
                           std::span<const double> grads) {
    if (params.size() != grads.size()) {
        throw ShapeError("optimizer_step: " + std::to_string(params.size()) + " params but " +
                         std::to_string(grads.size()) + " gradients");
    }
    if (state.first_moment.size() != params.size() || state.second_moment.size() != params.size()) {
        throw ShapeError("optimizer_step: optimizer state sized for " +
                         std::to_string(state.first_moment.size()) + " params, got " +
                         std::to_string(params.size()));
    }
    bool any_nonzero = false;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        if (!std::isfinite(grads[i])) {
            throw TrainingError("optimizer_step: non-finite gradient at parameter index " +
                                std::to_string(i));
        }
        any_nonzero = any_nonzero || grads[i] != 0.0;
    }
    if (!any_nonzero) return;

    ++state.step_count;
    const double t = static_cast<double>(state.step_count);
    const double c1 = 1.0 - std::pow(state.decay1, t);
    const double c2 = 1.0 - std::pow(state.decay2, t);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double& m = state.first_moment[i];
        double& v = state.second_moment[i];
        m = state.decay1 * m + (1.0 - state.decay1) * g;
        v = state.decay2 * v + (1.0 - state.decay2) * g * g;
        const double m_hat = m / c1;
        const double v_hat = v / c2;
        params[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
}

/**
 * Compare an analytic gradient with central differences.
 *
 * Returns max_i |a_i - d_i| / max(1, |a_i| + |d_i|).
 */
inline double gradient_check(const std::function<double(std::span<const double>)>& f,
                             std::span<const double> analytic, std::span<const double> params,
                             double h) {
    if (analytic.size() != params.size()) {
        throw ShapeError("gradient_check: gradient length " + std::to_string(analytic.size()) +
                         " != parameter count " + std::to_string(params.size()));
    }
    Vector p(params.begin(), params.end());
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double saved = p[i];
        p[i] = saved + h;
        const double fp = f(p);
        p[i] = saved - h;
        const double fm = f(p);
        p[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) /
                           std::max(1.0, std::abs(analytic[i]) + std::abs(numeric));
        worst = std::max(worst, err);
    }
    return worst;
}

/**
 * Seeded generator. Uniform draws are built from raw mt19937_64 bits so the
 * stream is identical across standard library implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
};

} // namespace epi
