#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cande/matrix.hpp"

namespace cande::film {

/// Per-layer affine generators: map a context vector h_c (length p) to the
/// scale gamma and shift beta applied to a layer of width q.
template <typename T>
struct FilmGenerator {
    nn::Matrix<T> w_gamma;    // p x q
    std::vector<T> b_gamma;   // q
    nn::Matrix<T> w_beta;     // p x q
    std::vector<T> b_beta;    // q

    std::size_t context_dim() const { return w_gamma.rows; }
    std::size_t width() const { return w_gamma.cols; }

    void validate() const {
        if (w_beta.rows != w_gamma.rows || w_beta.cols != w_gamma.cols ||
            b_gamma.size() != w_gamma.cols || b_beta.size() != w_gamma.cols) {
            throw ShapeError("FilmGenerator: inconsistent generator shapes");
        }
    }
};

/// gamma = h_c * W_gamma + b_gamma, beta likewise; both length q.
template <typename T>
std::pair<std::vector<T>, std::vector<T>> film_params(const FilmGenerator<T>& gen,
                                                      std::span<const T> context) {
    gen.validate();
    if (context.size() != gen.context_dim()) {
        throw ShapeError("film_params: context vector length " + std::to_string(context.size()) +
                         " != generator context dim " + std::to_string(gen.context_dim()));
    }
    const std::size_t q = gen.width();
    std::vector<T> gamma(gen.b_gamma.begin(), gen.b_gamma.end());
    std::vector<T> beta(gen.b_beta.begin(), gen.b_beta.end());
    for (std::size_t i = 0; i < context.size(); ++i) {
        const T h = context[i];
        const T* wg = gen.w_gamma.data.data() + i * q;
        const T* wb = gen.w_beta.data.data() + i * q;
        for (std::size_t j = 0; j < q; ++j) {
            gamma[j] += h * wg[j];
            beta[j] += h * wb[j];
        }
    }
    return {std::move(gamma), std::move(beta)};
}

/// Batch form: one (gamma, beta) row per context row.
template <typename T>
std::pair<nn::Matrix<T>, nn::Matrix<T>> film_params_batch(const FilmGenerator<T>& gen,
                                                          const nn::Matrix<T>& context_rows) {
    gen.validate();
    if (context_rows.cols != gen.context_dim()) {
        throw ShapeError("film_params_batch: context dim mismatch");
    }
    nn::Matrix<T> gamma = nn::matmul(context_rows, gen.w_gamma);
    nn::Matrix<T> beta = nn::matmul(context_rows, gen.w_beta);
    nn::add_row_vector(gamma, std::span<const T>(gen.b_gamma));
    nn::add_row_vector(beta, std::span<const T>(gen.b_beta));
    return {std::move(gamma), std::move(beta)};
}

/// z' = gamma (.) z + beta. The caller applies the layer nonlinearity after.
template <typename T>
std::vector<T> film_apply(std::span<const T> z, std::span<const T> gamma,
                          std::span<const T> beta) {
    if (z.size() != gamma.size() || z.size() != beta.size()) {
        throw ShapeError("film_apply: vector length mismatch");
    }
    std::vector<T> out(z.size());
    for (std::size_t j = 0; j < z.size(); ++j) out[j] = gamma[j] * z[j] + beta[j];
    return out;
}

/// In-place batch form over aligned rows.
template <typename T>
void film_apply_batch(nn::Matrix<T>& z, const nn::Matrix<T>& gamma, const nn::Matrix<T>& beta) {
    if (!z.same_shape(gamma) || !z.same_shape(beta)) {
        throw ShapeError("film_apply_batch: shape mismatch");
    }
    for (std::size_t i = 0; i < z.data.size(); ++i) {
        z.data[i] = gamma.data[i] * z.data[i] + beta.data[i];
    }
}

template <typename T>
struct FilmGradients {
    nn::Matrix<T> w_gamma;
    std::vector<T> b_gamma;
    nn::Matrix<T> w_beta;
    std::vector<T> b_beta;
    nn::Matrix<T> pre_activation;  // dL/dz
    nn::Matrix<T> context;         // dL/dh_c; computed but discarded by training
};

/// Reverse pass through film_params + film_apply for a batch. `upstream` is
/// dL/dz' with any activation mask already applied by the caller.
template <typename T>
FilmGradients<T> film_backward(const FilmGenerator<T>& gen, const nn::Matrix<T>& context_rows,
                               const nn::Matrix<T>& pre_activation, const nn::Matrix<T>& gamma,
                               const nn::Matrix<T>& upstream) {
    if (!upstream.same_shape(pre_activation) || !upstream.same_shape(gamma)) {
        throw ShapeError("film_backward: stale or mismatched tape");
    }
    FilmGradients<T> g;
    nn::Matrix<T> d_gamma(upstream.rows, upstream.cols);
    for (std::size_t i = 0; i < upstream.data.size(); ++i) {
        d_gamma.data[i] = upstream.data[i] * pre_activation.data[i];
    }
    const nn::Matrix<T>& d_beta = upstream;

    g.w_gamma = nn::matmul_transpose_a(context_rows, d_gamma);
    g.b_gamma = nn::column_sums(d_gamma);
    g.w_beta = nn::matmul_transpose_a(context_rows, d_beta);
    g.b_beta = nn::column_sums(d_beta);

    g.pre_activation = nn::Matrix<T>(upstream.rows, upstream.cols);
    for (std::size_t i = 0; i < upstream.data.size(); ++i) {
        g.pre_activation.data[i] = upstream.data[i] * gamma.data[i];
    }

    nn::Matrix<T> dh = nn::matmul_transpose_b(d_gamma, gen.w_gamma);
    const nn::Matrix<T> dh_beta = nn::matmul_transpose_b(d_beta, gen.w_beta);
    for (std::size_t i = 0; i < dh.data.size(); ++i) dh.data[i] += dh_beta.data[i];
    g.context = std::move(dh);
    return g;
}

}  // namespace cande::film
