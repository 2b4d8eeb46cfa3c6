#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cande/error.hpp"
#include "cande/film.hpp"
#include "cande/matrix.hpp"

namespace cande::nn {

enum class Activation { ReLU, Sigmoid, Linear };

inline const char* activation_name(Activation a) {
    switch (a) {
        case Activation::ReLU: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Linear: return "linear";
    }
    throw Error("E_INTERNAL", "unknown activation");
}

inline Activation activation_from_name(const std::string& name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "linear") return Activation::Linear;
    throw FormatError("unknown activation name '" + name + "'");
}

template <typename T>
struct DenseLayer {
    Matrix<T> weight;      // in_dim x out_dim
    std::vector<T> bias;   // out_dim
    Activation activation = Activation::Linear;

    std::size_t in_dim() const { return weight.rows; }
    std::size_t out_dim() const { return weight.cols; }
};

template <typename T>
void apply_activation(Matrix<T>& m, Activation act) {
    switch (act) {
        case Activation::ReLU:
            for (T& x : m.data) x = x > T(0) ? x : T(0);
            break;
        case Activation::Sigmoid:
            for (T& x : m.data) x = T(1) / (T(1) + std::exp(-x));
            break;
        case Activation::Linear:
            break;
    }
}

/// In-place: upstream dL/dA -> dL/dM given M (pre-activation) and A = act(M).
template <typename T>
void apply_activation_grad(Matrix<T>& upstream, const Matrix<T>& pre, const Matrix<T>& out,
                           Activation act) {
    switch (act) {
        case Activation::ReLU:
            for (std::size_t i = 0; i < upstream.data.size(); ++i) {
                if (!(pre.data[i] > T(0))) upstream.data[i] = T(0);
            }
            break;
        case Activation::Sigmoid:
            for (std::size_t i = 0; i < upstream.data.size(); ++i) {
                upstream.data[i] *= out.data[i] * (T(1) - out.data[i]);
            }
            break;
        case Activation::Linear:
            break;
    }
}

/// activation(input * W + b); shape (input.rows x out_dim).
template <typename T>
Matrix<T> dense_forward(const DenseLayer<T>& layer, const Matrix<T>& input) {
    if (input.cols != layer.in_dim()) {
        throw ShapeError("dense_forward: input cols " + std::to_string(input.cols) +
                         " != layer in_dim " + std::to_string(layer.in_dim()));
    }
    Matrix<T> out = matmul(input, layer.weight);
    add_row_vector(out, std::span<const T>(layer.bias));
    apply_activation(out, layer.activation);
    return out;
}

/// A dense stack, optionally FiLM-conditioned. When `generators` is nonempty
/// it holds exactly one generator per hidden layer (every layer except the
/// last), matching the width of the layer it modulates.
template <typename T>
struct FeedForward {
    std::vector<DenseLayer<T>> layers;
    std::vector<film::FilmGenerator<T>> generators;

    bool conditioned() const { return !generators.empty(); }
    std::size_t input_dim() const { return layers.front().in_dim(); }
    std::size_t output_dim() const { return layers.back().out_dim(); }
    std::size_t context_dim() const {
        return generators.empty() ? 0 : generators.front().context_dim();
    }
    bool layer_conditioned(std::size_t k) const { return k < generators.size(); }

    void validate() const {
        if (layers.empty()) throw ShapeError("network has no layers");
        for (std::size_t k = 0; k + 1 < layers.size(); ++k) {
            if (layers[k].out_dim() != layers[k + 1].in_dim()) {
                throw ShapeError("layer " + std::to_string(k) + " out_dim != layer " +
                                 std::to_string(k + 1) + " in_dim");
            }
        }
        for (std::size_t k = 0; k < layers.size(); ++k) {
            if (layers[k].bias.size() != layers[k].out_dim()) {
                throw ShapeError("layer " + std::to_string(k) + " bias size mismatch");
            }
        }
        if (!generators.empty()) {
            if (generators.size() != layers.size() - 1) {
                throw ShapeError("conditioned network must have one generator per hidden layer");
            }
            for (std::size_t k = 0; k < generators.size(); ++k) {
                generators[k].validate();
                if (generators[k].width() != layers[k].out_dim()) {
                    throw ShapeError("generator " + std::to_string(k) +
                                     " width != conditioned layer width");
                }
                if (generators[k].context_dim() != generators[0].context_dim()) {
                    throw ShapeError("generators disagree on context dim");
                }
            }
        }
    }
};

/// Cached per-layer inputs and pre-activations from the most recent forward
/// pass. `modulated[k]` is filled only for conditioned layers.
template <typename T>
struct GradientTape {
    std::vector<Matrix<T>> activations;  // layers+1 entries; [0] is the input
    std::vector<Matrix<T>> pre;          // pre-activation before FiLM
    std::vector<Matrix<T>> gamma;
    std::vector<Matrix<T>> beta;
    std::vector<Matrix<T>> modulated;    // after FiLM, before the nonlinearity
    Matrix<T> context;                   // per-example conditioning rows
    bool valid = false;

    const Matrix<T>& output() const { return activations.back(); }
};

template <typename T>
void check_forward_inputs(const FeedForward<T>& net, const Matrix<T>& input,
                          const Matrix<T>& context) {
    if (input.cols != net.input_dim()) {
        throw ShapeError("forward: input dim " + std::to_string(input.cols) + " != network dim " +
                         std::to_string(net.input_dim()));
    }
    if (net.conditioned()) {
        if (context.rows != input.rows || context.cols != net.context_dim()) {
            throw ShapeError("forward: conditioned network needs a context row per example "
                             "(dim " + std::to_string(net.context_dim()) + ")");
        }
    } else if (!context.empty()) {
        throw ShapeError("forward: context rows supplied to an unconditioned network");
    }
}

template <typename T>
const Matrix<T>& forward(const FeedForward<T>& net, const Matrix<T>& input,
                         const Matrix<T>& context, GradientTape<T>& tape) {
    check_forward_inputs(net, input, context);
    const std::size_t n_layers = net.layers.size();
    tape.activations.assign(1, input);
    tape.activations.reserve(n_layers + 1);
    tape.pre.assign(n_layers, Matrix<T>());
    tape.gamma.assign(n_layers, Matrix<T>());
    tape.beta.assign(n_layers, Matrix<T>());
    tape.modulated.assign(n_layers, Matrix<T>());
    tape.context = context;

    for (std::size_t k = 0; k < n_layers; ++k) {
        const DenseLayer<T>& layer = net.layers[k];
        Matrix<T> pre = matmul(tape.activations[k], layer.weight);
        add_row_vector(pre, std::span<const T>(layer.bias));
        Matrix<T> act;
        if (net.layer_conditioned(k)) {
            auto [gamma, beta] = film::film_params_batch(net.generators[k], context);
            Matrix<T> mod = pre;
            film::film_apply_batch(mod, gamma, beta);
            act = mod;
            apply_activation(act, layer.activation);
            tape.gamma[k] = std::move(gamma);
            tape.beta[k] = std::move(beta);
            tape.modulated[k] = std::move(mod);
        } else {
            act = pre;
            apply_activation(act, layer.activation);
        }
        tape.pre[k] = std::move(pre);
        tape.activations.push_back(std::move(act));
    }
    require_finite(tape.output(), "forward pass output");
    tape.valid = true;
    return tape.output();
}

/// Lean forward without caching; used for scoring frozen models.
template <typename T>
Matrix<T> forward(const FeedForward<T>& net, const Matrix<T>& input,
                  const Matrix<T>& context = {}) {
    check_forward_inputs(net, input, context);
    Matrix<T> act = input;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const DenseLayer<T>& layer = net.layers[k];
        Matrix<T> pre = matmul(act, layer.weight);
        add_row_vector(pre, std::span<const T>(layer.bias));
        if (net.layer_conditioned(k)) {
            auto [gamma, beta] = film::film_params_batch(net.generators[k], context);
            film::film_apply_batch(pre, gamma, beta);
        }
        apply_activation(pre, layer.activation);
        act = std::move(pre);
    }
    require_finite(act, "forward pass output");
    return act;
}

template <typename T>
struct LayerGrads {
    Matrix<T> weight;
    std::vector<T> bias;
};

template <typename T>
struct FilmParamGrads {
    Matrix<T> w_gamma;
    std::vector<T> b_gamma;
    Matrix<T> w_beta;
    std::vector<T> b_beta;
};

template <typename T>
struct NetworkGrads {
    std::vector<LayerGrads<T>> layers;
    std::vector<FilmParamGrads<T>> generators;
    Matrix<T> input;    // dL/dX
    Matrix<T> context;  // dL/dH; conditioning inputs are frozen, so training discards this
};

/// Exact reverse-mode gradients for every parameter reached in the forward
/// pass recorded on `tape`.
template <typename T>
NetworkGrads<T> backward(const FeedForward<T>& net, const GradientTape<T>& tape,
                         const Matrix<T>& output_grad) {
    if (!tape.valid || tape.activations.size() != net.layers.size() + 1) {
        throw ShapeError("backward: stale or missing gradient tape");
    }
    if (!output_grad.same_shape(tape.output())) {
        throw ShapeError("backward: output_grad shape != forward output shape");
    }
    const std::size_t n_layers = net.layers.size();
    NetworkGrads<T> grads;
    grads.layers.resize(n_layers);
    grads.generators.resize(net.generators.size());
    if (net.conditioned()) grads.context = Matrix<T>(tape.context.rows, tape.context.cols);

    Matrix<T> upstream = output_grad;  // dL/dA_k while walking down
    for (std::size_t k = n_layers; k-- > 0;) {
        const DenseLayer<T>& layer = net.layers[k];
        const bool cond = net.layer_conditioned(k);
        const Matrix<T>& pre_nonlin = cond ? tape.modulated[k] : tape.pre[k];
        apply_activation_grad(upstream, pre_nonlin, tape.activations[k + 1], layer.activation);

        Matrix<T> d_pre;
        if (cond) {
            film::FilmGradients<T> fg = film::film_backward(
                net.generators[k], tape.context, tape.pre[k], tape.gamma[k], upstream);
            grads.generators[k] = FilmParamGrads<T>{std::move(fg.w_gamma), std::move(fg.b_gamma),
                                                    std::move(fg.w_beta), std::move(fg.b_beta)};
            d_pre = std::move(fg.pre_activation);
            for (std::size_t i = 0; i < grads.context.data.size(); ++i) {
                grads.context.data[i] += fg.context.data[i];
            }
        } else {
            d_pre = std::move(upstream);
        }

        grads.layers[k].weight = matmul_transpose_a(tape.activations[k], d_pre);
        grads.layers[k].bias = column_sums(d_pre);
        upstream = matmul_transpose_b(d_pre, layer.weight);
    }
    grads.input = std::move(upstream);
    return grads;
}

// ---------------------------------------------------------------------------
// Parameter flattening: fixed order shared by Adam, checkpoints and tests.
// Layers first (weight then bias), then generators (w_gamma, b_gamma,
// w_beta, b_beta).
// ---------------------------------------------------------------------------

template <typename T>
struct ParamRef {
    std::string name;
    std::span<T> values;
    std::size_t rows;  // 0 for vectors
    std::size_t cols;
};

template <typename T>
std::vector<ParamRef<T>> named_params(FeedForward<T>& net) {
    std::vector<ParamRef<T>> refs;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
        auto& l = net.layers[k];
        refs.push_back({"layer" + std::to_string(k) + ".weight", std::span<T>(l.weight.data),
                        l.weight.rows, l.weight.cols});
        refs.push_back({"layer" + std::to_string(k) + ".bias", std::span<T>(l.bias), 0,
                        l.bias.size()});
    }
    for (std::size_t k = 0; k < net.generators.size(); ++k) {
        auto& g = net.generators[k];
        const std::string p = "film" + std::to_string(k);
        refs.push_back({p + ".w_gamma", std::span<T>(g.w_gamma.data), g.w_gamma.rows,
                        g.w_gamma.cols});
        refs.push_back({p + ".b_gamma", std::span<T>(g.b_gamma), 0, g.b_gamma.size()});
        refs.push_back({p + ".w_beta", std::span<T>(g.w_beta.data), g.w_beta.rows,
                        g.w_beta.cols});
        refs.push_back({p + ".b_beta", std::span<T>(g.b_beta), 0, g.b_beta.size()});
    }
    return refs;
}

template <typename T>
std::vector<std::span<T>> grad_views(NetworkGrads<T>& grads) {
    std::vector<std::span<T>> views;
    for (auto& l : grads.layers) {
        views.push_back(std::span<T>(l.weight.data));
        views.push_back(std::span<T>(l.bias));
    }
    for (auto& g : grads.generators) {
        views.push_back(std::span<T>(g.w_gamma.data));
        views.push_back(std::span<T>(g.b_gamma));
        views.push_back(std::span<T>(g.w_beta.data));
        views.push_back(std::span<T>(g.b_beta));
    }
    return views;
}

template <typename T>
std::size_t param_count(const FeedForward<T>& net) {
    std::size_t n = 0;
    for (const auto& l : net.layers) n += l.weight.size() + l.bias.size();
    for (const auto& g : net.generators) {
        n += g.w_gamma.size() + g.b_gamma.size() + g.w_beta.size() + g.b_beta.size();
    }
    return n;
}

template <typename T>
std::vector<T> flatten_params(const FeedForward<T>& net) {
    std::vector<T> flat;
    flat.reserve(param_count(net));
    auto refs = named_params(const_cast<FeedForward<T>&>(net));
    for (const auto& r : refs) flat.insert(flat.end(), r.values.begin(), r.values.end());
    return flat;
}

template <typename T>
void load_flat_params(FeedForward<T>& net, std::span<const T> flat) {
    if (flat.size() != param_count(net)) {
        throw ShapeError("load_flat_params: size " + std::to_string(flat.size()) +
                         " != param count " + std::to_string(param_count(net)));
    }
    std::size_t offset = 0;
    for (auto& r : named_params(net)) {
        std::copy(flat.begin() + offset, flat.begin() + offset + r.values.size(),
                  r.values.begin());
        offset += r.values.size();
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

template <typename T>
struct AdamState {
    T learning_rate = T(1e-3);
    T beta1 = T(0.9);
    T beta2 = T(0.999);
    T epsilon = T(1e-8);
    std::uint64_t step = 0;
    std::vector<T> m;  // first moment, flat in parameter order
    std::vector<T> v;  // second moment

    static AdamState for_network(const FeedForward<T>& net, T lr = T(1e-3)) {
        AdamState s;
        s.learning_rate = lr;
        s.m.assign(param_count(net), T{});
        s.v.assign(param_count(net), T{});
        return s;
    }
};

/// Standard Adam update with bias correction over flattened views.
template <typename T>
void adam_step(const std::vector<std::span<T>>& params,
               const std::vector<std::span<const T>>& grads, AdamState<T>& state) {
    std::size_t total = 0;
    for (const auto& p : params) total += p.size();
    if (total != state.m.size()) {
        throw ShapeError("adam_step: state sized for " + std::to_string(state.m.size()) +
                         " params, got " + std::to_string(total));
    }
    if (params.size() != grads.size()) throw ShapeError("adam_step: param/grad view mismatch");

    state.step += 1;
    const T c1 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta1),
                                                static_cast<double>(state.step)));
    const T c2 = T(1) - static_cast<T>(std::pow(static_cast<double>(state.beta2),
                                                static_cast<double>(state.step)));
    std::size_t off = 0;
    for (std::size_t t = 0; t < params.size(); ++t) {
        std::span<T> p = params[t];
        std::span<const T> g = grads[t];
        if (p.size() != g.size()) throw ShapeError("adam_step: param/grad shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            T& m = state.m[off + i];
            T& v = state.v[off + i];
            m = state.beta1 * m + (T(1) - state.beta1) * g[i];
            v = state.beta2 * v + (T(1) - state.beta2) * g[i] * g[i];
            const T m_hat = m / c1;
            const T v_hat = v / c2;
            p[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
        }
        off += p.size();
    }
}

template <typename T>
void adam_step(FeedForward<T>& net, NetworkGrads<T>& grads, AdamState<T>& state) {
    std::vector<std::span<T>> params;
    for (auto& r : named_params(net)) params.push_back(r.values);
    std::vector<std::span<const T>> gviews;
    for (auto& g : grad_views(grads)) gviews.emplace_back(g);
    adam_step(params, gviews, state);
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

template <typename T>
struct LossValue {
    T value;
    Matrix<T> grad;
};

/// Mean over all entries of the squared difference; grad w.r.t. x_prime.
template <typename T>
LossValue<T> mse_loss(const Matrix<T>& x, const Matrix<T>& x_prime) {
    if (!x.same_shape(x_prime)) throw ShapeError("mse_loss: shape mismatch");
    const T n = static_cast<T>(x.size());
    LossValue<T> out{T{}, Matrix<T>(x.rows, x.cols)};
    T acc{};
    for (std::size_t i = 0; i < x.data.size(); ++i) {
        const T d = x_prime.data[i] - x.data[i];
        acc += d * d;
        out.grad.data[i] = T(2) * d / n;
    }
    out.value = acc / n;
    if (!std::isfinite(static_cast<double>(out.value))) {
        throw NumericError("mse_loss produced a non-finite value; aborting run");
    }
    return out;
}

/// Row-wise softmax with max subtraction.
template <typename T>
Matrix<T> softmax(const Matrix<T>& logits) {
    Matrix<T> out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const T* in = logits.data.data() + i * logits.cols;
        T* o = out.data.data() + i * logits.cols;
        T mx = in[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, in[j]);
        T sum{};
        for (std::size_t j = 0; j < logits.cols; ++j) {
            o[j] = std::exp(in[j] - mx);
            sum += o[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) o[j] /= sum;
    }
    return out;
}

/// Mean over rows of -log softmax(logits)[target]; grad = (softmax - onehot)/n.
template <typename T>
LossValue<T> softmax_xent_loss(const Matrix<T>& logits, std::span<const std::size_t> targets) {
    if (targets.size() != logits.rows) {
        throw ShapeError("softmax_xent_loss: one target per logits row required");
    }
    for (std::size_t i = 0; i < targets.size(); ++i) {
        if (targets[i] >= logits.cols) {
            throw ShapeError("softmax_xent_loss: target class " + std::to_string(targets[i]) +
                             " out of range (" + std::to_string(logits.cols) + " classes)");
        }
    }
    LossValue<T> out{T{}, softmax(logits)};
    const T inv_n = T(1) / static_cast<T>(logits.rows);
    T acc{};
    for (std::size_t i = 0; i < logits.rows; ++i) {
        T* row = out.grad.data.data() + i * logits.cols;
        const T p = row[targets[i]];
        acc += -std::log(std::max(p, std::numeric_limits<T>::min()));
        row[targets[i]] -= T(1);
        for (std::size_t j = 0; j < logits.cols; ++j) row[j] *= inv_n;
    }
    out.value = acc * inv_n;
    if (!std::isfinite(static_cast<double>(out.value))) {
        throw NumericError("softmax_xent_loss produced a non-finite value; aborting run");
    }
    return out;
}

template <typename T>
LossValue<T> softmax_xent_loss(const Matrix<T>& logits, std::size_t target_class) {
    const std::size_t targets[] = {target_class};
    if (logits.rows != 1) {
        throw ShapeError("softmax_xent_loss single-target form expects one logits row");
    }
    return softmax_xent_loss(logits, std::span<const std::size_t>(targets));
}

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

enum class FilmInit {
    Glorot,    // W ~ Glorot, b_gamma = 1, b_beta = 0 (default)
    Identity,  // all generator weights 0, b_gamma = 1, b_beta = 0
};

template <typename T>
void init_glorot(Matrix<T>& w, std::mt19937_64& engine) {
    const double limit = std::sqrt(6.0 / static_cast<double>(w.rows + w.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (T& x : w.data) x = static_cast<T>(dist(engine));
}

template <typename T>
DenseLayer<T> make_dense(std::size_t in_dim, std::size_t out_dim, Activation act,
                         std::mt19937_64& engine) {
    DenseLayer<T> layer;
    layer.weight = Matrix<T>(in_dim, out_dim);
    layer.bias.assign(out_dim, T{});
    layer.activation = act;
    init_glorot(layer.weight, engine);
    return layer;
}

template <typename T>
film::FilmGenerator<T> make_film_generator(std::size_t context_dim, std::size_t width,
                                           FilmInit init, std::mt19937_64& engine) {
    film::FilmGenerator<T> gen;
    gen.w_gamma = Matrix<T>(context_dim, width);
    gen.w_beta = Matrix<T>(context_dim, width);
    gen.b_gamma.assign(width, T(1));
    gen.b_beta.assign(width, T{});
    if (init == FilmInit::Glorot) {
        init_glorot(gen.w_gamma, engine);
        init_glorot(gen.w_beta, engine);
    }
    return gen;
}

/// Build a dense stack; if context_dim > 0, every layer except the last gets
/// a FiLM generator.
template <typename T>
FeedForward<T> make_feedforward(std::size_t input_dim, const std::vector<std::size_t>& widths,
                                const std::vector<Activation>& activations,
                                std::size_t context_dim, FilmInit film_init,
                                std::mt19937_64& engine) {
    if (widths.empty() || widths.size() != activations.size()) {
        throw ShapeError("make_feedforward: need one activation per layer width");
    }
    FeedForward<T> net;
    std::size_t in = input_dim;
    for (std::size_t k = 0; k < widths.size(); ++k) {
        net.layers.push_back(make_dense<T>(in, widths[k], activations[k], engine));
        in = widths[k];
    }
    if (context_dim > 0) {
        for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
            net.generators.push_back(
                make_film_generator<T>(context_dim, widths[k], film_init, engine));
        }
    }
    net.validate();
    return net;
}

template <typename To, typename From>
FeedForward<To> convert_network(const FeedForward<From>& net) {
    FeedForward<To> out;
    for (const auto& l : net.layers) {
        DenseLayer<To> nl;
        nl.weight = convert_matrix<To>(l.weight);
        nl.bias.assign(l.bias.begin(), l.bias.end());
        nl.activation = l.activation;
        out.layers.push_back(std::move(nl));
    }
    for (const auto& g : net.generators) {
        film::FilmGenerator<To> ng;
        ng.w_gamma = convert_matrix<To>(g.w_gamma);
        ng.w_beta = convert_matrix<To>(g.w_beta);
        ng.b_gamma.assign(g.b_gamma.begin(), g.b_gamma.end());
        ng.b_beta.assign(g.b_beta.begin(), g.b_beta.end());
        out.generators.push_back(std::move(ng));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle
// ---------------------------------------------------------------------------

/// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|,
/// 1e-8), central differences. Run on a double-precision copy of the model
/// for headroom; `loss_fn(output) -> LossValue` defines the objective.
template <typename T, typename LossFn>
T grad_check(FeedForward<T> net, const Matrix<T>& input, const Matrix<T>& context,
             LossFn&& loss_fn, T step = T(1e-5)) {
    net.validate();
    GradientTape<T> tape;
    forward(net, input, context, tape);
    LossValue<T> loss = loss_fn(tape.output());
    NetworkGrads<T> grads = backward(net, tape, loss.grad);

    std::vector<T> analytic;
    for (auto g : grad_views(grads)) analytic.insert(analytic.end(), g.begin(), g.end());

    T max_rel{};
    std::size_t flat_index = 0;
    for (auto& ref : named_params(net)) {
        for (std::size_t i = 0; i < ref.values.size(); ++i, ++flat_index) {
            const T saved = ref.values[i];
            ref.values[i] = saved + step;
            const T up = loss_fn(forward(net, input, context)).value;
            ref.values[i] = saved - step;
            const T down = loss_fn(forward(net, input, context)).value;
            ref.values[i] = saved;
            const T numeric = (up - down) / (T(2) * step);
            const T a = analytic[flat_index];
            const T denom = std::max({std::abs(a), std::abs(numeric), T(1e-8)});
            max_rel = std::max(max_rel, std::abs(a - numeric) / denom);
        }
    }
    return max_rel;
}

}  // namespace cande::nn
