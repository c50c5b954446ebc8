#pragma once

// Deep sequential prediction model: a stack of LSTM layers with a dense
// scalar head, trained per region on min-max scaled sliding windows and
// forecasting by feeding its own one-step predictions back in.

#include "epiforecast/data.hpp"
#include "epiforecast/errors.hpp"
#include "epiforecast/kv.hpp"
#include "epiforecast/numerics.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace epi::dspm {

/// Gate weights of one LSTM layer. Every matrix is hidden x (hidden + input).
struct LstmLayerParams {
    Matrix forget_w, input_w, candidate_w, output_w;
    Vector forget_b, input_b, candidate_b, output_b;

    static LstmLayerParams zeros(std::size_t hidden, std::size_t input) {
        LstmLayerParams p;
        for (Matrix* m : {&p.forget_w, &p.input_w, &p.candidate_w, &p.output_w}) {
            *m = Matrix(hidden, hidden + input);
        }
        for (Vector* b : {&p.forget_b, &p.input_b, &p.candidate_b, &p.output_b}) {
            b->assign(hidden, 0.0);
        }
        return p;
    }

    std::size_t hidden_size() const noexcept { return forget_b.size(); }
    std::size_t input_size() const noexcept { return forget_w.cols() - forget_b.size(); }

    /// Visit every parameter array in serialization order.
    template <class F>
    void for_each_array(F&& f) {
        f("forget_w", forget_w.values());
        f("input_w", input_w.values());
        f("candidate_w", candidate_w.values());
        f("output_w", output_w.values());
        f("forget_b", std::span<double>(forget_b));
        f("input_b", std::span<double>(input_b));
        f("candidate_b", std::span<double>(candidate_b));
        f("output_b", std::span<double>(output_b));
    }
    template <class F>
    void for_each_array(F&& f) const {
        const_cast<LstmLayerParams*>(this)->for_each_array(
            [&](const char* name, std::span<double> s) { f(name, std::span<const double>(s)); });
    }

    void validate() const {
        const std::size_t h = hidden_size();
        const std::size_t cols = forget_w.cols();
        for (const Matrix* m : {&forget_w, &input_w, &candidate_w, &output_w}) {
            if (m->rows() != h || m->cols() != cols) {
                throw ShapeError("LstmLayerParams: gate matrices must all be " + std::to_string(h) +
                                 "x" + std::to_string(cols));
            }
        }
        for (const Vector* b : {&input_b, &candidate_b, &output_b}) {
            if (b->size() != h) throw ShapeError("LstmLayerParams: bias length mismatch");
        }
        if (cols <= h) throw ShapeError("LstmLayerParams: input size must be at least 1");
    }

    friend bool operator==(const LstmLayerParams&, const LstmLayerParams&) = default;
};

/// Hidden output H and cell memory C.
struct LstmState {
    Vector H;
    Vector C;

    static LstmState zeros(std::size_t n) { return {Vector(n, 0.0), Vector(n, 0.0)}; }
};

struct GateValues {
    Vector forget;
    Vector input;
    Vector candidate;
    Vector output;
};

struct CellStep {
    LstmState state;
    GateValues gates;
};

/**
 * One LSTM time step:
 *   f = σ(W_f[H,x] + b_f)     i = σ(W_i[H,x] + b_i)
 *   c̃ = tanh(W_C[H,x] + b_C)  o = σ(W_o[H,x] + b_o)
 *   C' = f⊙C + i⊙c̃           H' = o⊙tanh(C')
 */
inline CellStep lstm_cell_step(const LstmLayerParams& p, std::span<const double> x,
                               const LstmState& prev) {
    const std::size_t n = p.hidden_size();
    if (x.size() != p.input_size()) {
        throw ShapeError("lstm_cell_step: input has length " + std::to_string(x.size()) +
                         ", layer expects " + std::to_string(p.input_size()));
    }
    if (prev.H.size() != n || prev.C.size() != n) {
        throw ShapeError("lstm_cell_step: state length does not match hidden size " +
                         std::to_string(n));
    }
    CellStep s;
    GateValues& g = s.gates;
    g.forget.resize(n);
    g.input.resize(n);
    g.candidate.resize(n);
    g.output.resize(n);
    affine_concat_into(p.forget_w, prev.H, x, p.forget_b, g.forget);
    affine_concat_into(p.input_w, prev.H, x, p.input_b, g.input);
    affine_concat_into(p.candidate_w, prev.H, x, p.candidate_b, g.candidate);
    affine_concat_into(p.output_w, prev.H, x, p.output_b, g.output);
    s.state.H.resize(n);
    s.state.C.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        g.forget[k] = sigmoid(g.forget[k]);
        g.input[k] = sigmoid(g.input[k]);
        g.candidate[k] = tanh_act(g.candidate[k]);
        g.output[k] = sigmoid(g.output[k]);
        s.state.C[k] = g.forget[k] * prev.C[k] + g.input[k] * g.candidate[k];
        s.state.H[k] = g.output[k] * tanh_act(s.state.C[k]);
    }
    return s;
}

/// Trainable parameters of the stack plus head. Also used to hold gradients.
struct DspmParams {
    std::vector<LstmLayerParams> layers;
    Vector output_weights;
    double output_bias = 0.0;

    static DspmParams zeros(std::size_t depth, std::size_t hidden) {
        DspmParams p;
        for (std::size_t l = 0; l < depth; ++l) {
            p.layers.push_back(LstmLayerParams::zeros(hidden, l == 0 ? 1 : hidden));
        }
        p.output_weights.assign(hidden, 0.0);
        return p;
    }

    std::size_t parameter_count() const {
        std::size_t n = output_weights.size() + 1;
        for (const auto& l : layers) {
            l.for_each_array([&](const char*, std::span<const double> s) { n += s.size(); });
        }
        return n;
    }

    /// Flatten in serialization order (layers, head weights, head bias).
    Vector pack() const {
        Vector out;
        out.reserve(parameter_count());
        for (const auto& l : layers) {
            l.for_each_array(
                [&](const char*, std::span<const double> s) { out.insert(out.end(), s.begin(), s.end()); });
        }
        out.insert(out.end(), output_weights.begin(), output_weights.end());
        out.push_back(output_bias);
        return out;
    }

    void unpack(std::span<const double> flat) {
        if (flat.size() != parameter_count()) {
            throw ShapeError("DspmParams::unpack: expected " + std::to_string(parameter_count()) +
                             " values, got " + std::to_string(flat.size()));
        }
        std::size_t pos = 0;
        for (auto& l : layers) {
            l.for_each_array([&](const char*, std::span<double> s) {
                std::copy(flat.begin() + pos, flat.begin() + pos + s.size(), s.begin());
                pos += s.size();
            });
        }
        std::copy(flat.begin() + pos, flat.begin() + pos + output_weights.size(), output_weights.begin());
        pos += output_weights.size();
        output_bias = flat[pos];
    }

    friend bool operator==(const DspmParams&, const DspmParams&) = default;
};

struct DspmModel {
    DspmParams params;
    ScalerParams scaler;
    std::size_t lookback = 7;
    std::size_t hidden_size = 32;

    std::size_t stack_depth() const noexcept { return params.layers.size(); }

    /// Checks the stacking invariants: depth ≥ 1, layer 1 reads a scalar,
    /// later layers read the hidden output below them.
    void validate() const {
        if (params.layers.empty()) throw ShapeError("DspmModel: stack depth must be at least 1");
        if (lookback < 1) throw ShapeError("DspmModel: lookback must be at least 1");
        for (std::size_t l = 0; l < params.layers.size(); ++l) {
            const auto& layer = params.layers[l];
            layer.validate();
            if (layer.hidden_size() != hidden_size) {
                throw ShapeError("DspmModel: layer " + std::to_string(l) + " hidden size mismatch");
            }
            const std::size_t want = l == 0 ? 1 : hidden_size;
            if (layer.input_size() != want) {
                throw ShapeError("DspmModel: layer " + std::to_string(l) + " expects input size " +
                                 std::to_string(want));
            }
        }
        if (params.output_weights.size() != hidden_size) {
            throw ShapeError("DspmModel: output head length mismatch");
        }
    }

    friend bool operator==(const DspmModel&, const DspmModel&) = default;
};

/// One recorded cell evaluation.
struct CellRecord {
    Vector x;
    LstmState prev;
    CellStep step;
};

/// Everything a backward pass needs: steps[layer][t].
struct Tape {
    std::vector<std::vector<CellRecord>> steps;
    double prediction = 0.0;
};

struct ForwardResult {
    double prediction = 0.0;
    Tape tape;
};

/// Run a scaled window through the stack; state starts at zero each call.
inline ForwardResult dspm_forward(const DspmModel& model, std::span<const double> window) {
    if (window.size() != model.lookback) {
        throw ShapeError("dspm_forward: window has length " + std::to_string(window.size()) +
                         ", model lookback is " + std::to_string(model.lookback));
    }
    const std::size_t depth = model.stack_depth();
    const std::size_t T = window.size();
    ForwardResult r;
    r.tape.steps.assign(depth, {});
    std::vector<LstmState> state(depth, LstmState::zeros(model.hidden_size));
    for (std::size_t t = 0; t < T; ++t) {
        Vector x{window[t]};
        for (std::size_t l = 0; l < depth; ++l) {
            CellStep step = lstm_cell_step(model.params.layers[l], x, state[l]);
            Vector next_x = step.state.H;
            r.tape.steps[l].push_back({std::move(x), state[l], step});
            state[l] = std::move(step.state);
            x = std::move(next_x);
        }
    }
    r.prediction = model.params.output_bias + dot(model.params.output_weights, state.back().H);
    r.tape.prediction = r.prediction;
    return r;
}

namespace detail {

inline void add_outer(Matrix& W, std::span<const double> dz, std::span<const double> h,
                      std::span<const double> x) {
    const std::size_t nh = h.size();
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        auto row = W.row(r);
        for (std::size_t c = 0; c < nh; ++c) row[c] += d * h[c];
        for (std::size_t c = 0; c < x.size(); ++c) row[nh + c] += d * x[c];
    }
}

inline void add_transpose_times(const Matrix& W, std::span<const double> dz, std::span<double> dh,
                                std::span<double> dx) {
    const std::size_t nh = dh.size();
    for (std::size_t r = 0; r < W.rows(); ++r) {
        const double d = dz[r];
        if (d == 0.0) continue;
        const auto row = W.row(r);
        for (std::size_t c = 0; c < nh; ++c) dh[c] += d * row[c];
        for (std::size_t c = 0; c < dx.size(); ++c) dx[c] += d * row[nh + c];
    }
}

} // namespace detail

/**
 * Backpropagation through time for the loss ½(prediction − target)².
 * Accumulates into `grads`, which must be shaped like `model.params`.
 */
inline void dspm_backward_into(const DspmModel& model, const Tape& tape, double target,
                               DspmParams& grads) {
    const std::size_t depth = model.stack_depth();
    const std::size_t n = model.hidden_size;
    if (tape.steps.size() != depth) throw ShapeError("dspm_backward: tape depth mismatch");
    const std::size_t T = tape.steps.back().size();

    const double d_pred = tape.prediction - target;
    const Vector& h_last = tape.steps.back().back().step.state.H;
    for (std::size_t k = 0; k < n; ++k) grads.output_weights[k] += d_pred * h_last[k];
    grads.output_bias += d_pred;

    // dH contributions arriving from the layer above (or the head), per time step.
    std::vector<Vector> d_from_above(T, Vector(n, 0.0));
    for (std::size_t k = 0; k < n; ++k) d_from_above[T - 1][k] = d_pred * model.params.output_weights[k];

    Vector dz_f(n), dz_i(n), dz_c(n), dz_o(n);
    for (std::size_t li = depth; li-- > 0;) {
        const LstmLayerParams& P = model.params.layers[li];
        LstmLayerParams& G = grads.layers[li];
        const std::size_t nin = P.input_size();
        std::vector<Vector> d_input(T, Vector(nin, 0.0));
        Vector dh_next(n, 0.0), dc_next(n, 0.0);
        for (std::size_t t = T; t-- > 0;) {
            const CellRecord& rec = tape.steps[li][t];
            const GateValues& g = rec.step.gates;
            const Vector& C = rec.step.state.C;
            for (std::size_t k = 0; k < n; ++k) {
                const double dH = d_from_above[t][k] + dh_next[k];
                const double tc = std::tanh(C[k]);
                const double d_o = dH * tc;
                const double dC = dc_next[k] + dH * g.output[k] * (1.0 - tc * tc);
                const double d_f = dC * rec.prev.C[k];
                const double d_i = dC * g.candidate[k];
                const double d_c = dC * g.input[k];
                dc_next[k] = dC * g.forget[k];
                dz_f[k] = d_f * g.forget[k] * (1.0 - g.forget[k]);
                dz_i[k] = d_i * g.input[k] * (1.0 - g.input[k]);
                dz_c[k] = d_c * (1.0 - g.candidate[k] * g.candidate[k]);
                dz_o[k] = d_o * g.output[k] * (1.0 - g.output[k]);
                G.forget_b[k] += dz_f[k];
                G.input_b[k] += dz_i[k];
                G.candidate_b[k] += dz_c[k];
                G.output_b[k] += dz_o[k];
            }
            detail::add_outer(G.forget_w, dz_f, rec.prev.H, rec.x);
            detail::add_outer(G.input_w, dz_i, rec.prev.H, rec.x);
            detail::add_outer(G.candidate_w, dz_c, rec.prev.H, rec.x);
            detail::add_outer(G.output_w, dz_o, rec.prev.H, rec.x);
            std::fill(dh_next.begin(), dh_next.end(), 0.0);
            detail::add_transpose_times(P.forget_w, dz_f, dh_next, d_input[t]);
            detail::add_transpose_times(P.input_w, dz_i, dh_next, d_input[t]);
            detail::add_transpose_times(P.candidate_w, dz_c, dh_next, d_input[t]);
            detail::add_transpose_times(P.output_w, dz_o, dh_next, d_input[t]);
        }
        if (li > 0) d_from_above = std::move(d_input);
    }
}

inline DspmParams dspm_backward(const DspmModel& model, const Tape& tape, double target) {
    DspmParams grads = DspmParams::zeros(model.stack_depth(), model.hidden_size);
    dspm_backward_into(model, tape, target, grads);
    return grads;
}

struct DspmHyper {
    std::size_t stack_depth = 4;
    std::size_t hidden_size = 32;
    std::size_t epochs = 200;
    double learning_rate = 1e-3;
    std::size_t lookback = 7;
    std::uint64_t seed = 42;

    void validate() const {
        if (stack_depth < 1 || hidden_size < 1 || epochs < 1 || lookback < 1) {
            throw DataError("DspmHyper: counts must be at least 1");
        }
        if (!(learning_rate > 0.0)) throw DataError("DspmHyper: learning_rate must be positive");
    }
};

/// Seeded uniform(−s, s) init with s = 1/√(fan-in); forget bias starts at 1.
inline DspmModel dspm_init(const DspmHyper& hyper, ScalerParams scaler) {
    hyper.validate();
    Rng rng(hyper.seed);
    DspmModel m;
    m.hidden_size = hyper.hidden_size;
    m.lookback = hyper.lookback;
    m.scaler = scaler;
    m.params = DspmParams::zeros(hyper.stack_depth, hyper.hidden_size);
    for (auto& layer : m.params.layers) {
        const double s = 1.0 / std::sqrt(static_cast<double>(layer.forget_w.cols()));
        for (Matrix* W : {&layer.forget_w, &layer.input_w, &layer.candidate_w, &layer.output_w}) {
            for (double& w : W->values()) w = rng.uniform(-s, s);
        }
        std::fill(layer.forget_b.begin(), layer.forget_b.end(), 1.0);
    }
    const double s_head = 1.0 / std::sqrt(static_cast<double>(hyper.hidden_size));
    for (double& w : m.params.output_weights) w = rng.uniform(-s_head, s_head);
    return m;
}

/// Mean squared error (scaled space) before each update, and after the last.
struct TrainTrace {
    std::vector<double> epoch_loss;
    double final_loss = 0.0;
};

namespace detail {

inline double mean_squared_error(const DspmModel& model, const std::vector<Window>& windows) {
    double sse = 0.0;
    for (const auto& w : windows) {
        const double e = dspm_forward(model, w.input).prediction - w.target;
        sse += e * e;
    }
    return sse / static_cast<double>(windows.size());
}

} // namespace detail

/**
 * Fit one region. The scaler is fit on `series`, windows are built from the
 * scaled values, and each epoch takes one full-batch Adam step on the mean of
 * ½(prediction − target)².
 */
inline DspmModel dspm_train(const RegionSeries& series, const DspmHyper& hyper,
                            TrainTrace* trace = nullptr) {
    hyper.validate();
    if (series.size() < hyper.lookback + 1) {
        throw DataError("insufficient history: " + series.key.display() + " has " +
                        std::to_string(series.size()) + " observations, lookback " +
                        std::to_string(hyper.lookback) + " needs at least " +
                        std::to_string(hyper.lookback + 1));
    }
    const ScalerParams scaler = fit_scaler(series);
    Vector scaled;
    scaled.reserve(series.size());
    for (auto v : series.confirmed) scaled.push_back(scale(scaler, static_cast<double>(v)));
    const auto windows = make_windows(scaled, hyper.lookback);

    DspmModel model = dspm_init(hyper, scaler);
    Vector flat = model.params.pack();
    OptimizerState opt(flat.size(), hyper.learning_rate);
    const double inv_n = 1.0 / static_cast<double>(windows.size());

    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        DspmParams grads = DspmParams::zeros(hyper.stack_depth, hyper.hidden_size);
        double sse = 0.0;
        for (const auto& w : windows) {
            auto fwd = dspm_forward(model, w.input);
            const double e = fwd.prediction - w.target;
            sse += e * e;
            dspm_backward_into(model, fwd.tape, w.target, grads);
        }
        const double loss = sse * inv_n;
        if (!std::isfinite(loss)) {
            throw TrainingError("dspm_train: non-finite loss at epoch " + std::to_string(epoch) +
                                " for " + series.key.display());
        }
        if (trace) trace->epoch_loss.push_back(loss);
        Vector g = grads.pack();
        for (double& x : g) x *= inv_n;
        optimizer_step(opt, flat, g);
        model.params.unpack(flat);
    }
    if (trace) trace->final_loss = detail::mean_squared_error(model, windows);
    return model;
}

/**
 * Iterated one-step forecast of the `horizon` days after `history`. The
 * scaled window slides forward over the model's own predictions; outputs are
 * unscaled and unrounded.
 */
inline std::vector<double> dspm_forecast(const DspmModel& model, const RegionSeries& history,
                                         std::size_t horizon) {
    if (history.size() < model.lookback) {
        throw DataError("insufficient history: forecast needs " + std::to_string(model.lookback) +
                        " observations, " + history.key.display() + " has " +
                        std::to_string(history.size()));
    }
    std::vector<double> out;
    out.reserve(horizon);
    if (horizon == 0) return out;
    Vector window;
    window.reserve(model.lookback);
    for (std::size_t i = history.size() - model.lookback; i < history.size(); ++i) {
        window.push_back(scale(model.scaler, static_cast<double>(history.confirmed[i])));
    }
    for (std::size_t h = 0; h < horizon; ++h) {
        const double p = dspm_forward(model, window).prediction;
        out.push_back(unscale(model.scaler, p));
        window.erase(window.begin());
        window.push_back(p);
    }
    return out;
}

inline constexpr const char* kFormatTag = "DSPM1";

/// Textual dump; layout documented in docs/formats.md.
inline void write_model(std::ostream& out, const DspmModel& model) {
    model.validate();
    kv::Writer w(out);
    w.tag(kFormatTag);
    w.count("stack_depth", model.stack_depth());
    w.count("hidden_size", model.hidden_size);
    w.count("lookback", model.lookback);
    w.scalar("scaler_min", model.scaler.min_value);
    w.scalar("scaler_max", model.scaler.max_value);
    for (std::size_t l = 0; l < model.stack_depth(); ++l) {
        const auto& layer = model.params.layers[l];
        w.count("layer", l);
        w.count("input_size", layer.input_size());
        layer.for_each_array([&](const char* name, std::span<const double> s) { w.array(name, s); });
    }
    w.array("head_w", model.params.output_weights);
    w.scalar("head_b", model.params.output_bias);
}

inline DspmModel read_model(std::istream& in) {
    kv::Reader r(in);
    r.expect_tag(kFormatTag);
    DspmModel m;
    const auto depth = r.count("stack_depth");
    m.hidden_size = r.count("hidden_size");
    m.lookback = r.count("lookback");
    m.scaler.min_value = r.scalar("scaler_min");
    m.scaler.max_value = r.scalar("scaler_max");
    if (depth < 1 || depth > 1024 || m.hidden_size < 1 || m.hidden_size > 65536) {
        throw FormatError("DSPM1: implausible dimensions");
    }
    m.params = DspmParams::zeros(depth, m.hidden_size);
    for (std::size_t l = 0; l < depth; ++l) {
        if (r.count("layer") != l) throw FormatError("DSPM1: layers out of order");
        auto& layer = m.params.layers[l];
        if (r.count("input_size") != layer.input_size()) {
            throw FormatError("DSPM1: layer " + std::to_string(l) + " has wrong input size");
        }
        layer.for_each_array([&](const char* name, std::span<double> s) {
            const auto v = r.array(name);
            if (v.size() != s.size()) {
                throw FormatError("DSPM1: " + std::string(name) + " has wrong length");
            }
            std::copy(v.begin(), v.end(), s.begin());
        });
    }
    m.params.output_weights = r.array("head_w");
    m.params.output_bias = r.scalar("head_b");
    m.validate();
    return m;
}

} // namespace epi::dspm
