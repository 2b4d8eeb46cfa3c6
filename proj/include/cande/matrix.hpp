#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cande/error.hpp"

namespace cande::nn {

/// Dense row-major matrix. The batch dimension is always the leading one.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<T> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const T> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    std::size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }

    bool same_shape(const Matrix& other) const {
        return rows == other.rows && cols == other.cols;
    }
};

template <typename T>
void require_shape(const Matrix<T>& m, std::size_t rows, std::size_t cols,
                   const std::string& what) {
    if (m.rows != rows || m.cols != cols) {
        throw ShapeError(what + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows) + "x" +
                         std::to_string(m.cols));
    }
}

/// C = A * B. Fixed ikj loop order: deterministic accumulation, contiguous
/// inner stride.
template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols != b.rows) {
        throw ShapeError("matmul: inner dims differ (" + std::to_string(a.cols) + " vs " +
                         std::to_string(b.rows) + ")");
    }
    Matrix<T> c(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* ci = c.data.data() + i * c.cols;
        for (std::size_t k = 0; k < a.cols; ++k) {
            const T aik = a(i, k);
            const T* bk = b.data.data() + k * b.cols;
            for (std::size_t j = 0; j < b.cols; ++j) ci[j] += aik * bk[j];
        }
    }
    return c;
}

/// C = A^T * B without materializing the transpose (A: n x m, B: n x q).
template <typename T>
Matrix<T> matmul_transpose_a(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.rows != b.rows) {
        throw ShapeError("matmul_transpose_a: leading dims differ");
    }
    Matrix<T> c(a.cols, b.cols);
    for (std::size_t n = 0; n < a.rows; ++n) {
        const T* an = a.data.data() + n * a.cols;
        const T* bn = b.data.data() + n * b.cols;
        for (std::size_t m = 0; m < a.cols; ++m) {
            const T anm = an[m];
            T* cm = c.data.data() + m * c.cols;
            for (std::size_t q = 0; q < b.cols; ++q) cm[q] += anm * bn[q];
        }
    }
    return c;
}

/// C = A * B^T (A: n x q, B: d x q).
template <typename T>
Matrix<T> matmul_transpose_b(const Matrix<T>& a, const Matrix<T>& b) {
    if (a.cols != b.cols) {
        throw ShapeError("matmul_transpose_b: trailing dims differ");
    }
    Matrix<T> c(a.rows, b.rows);
    for (std::size_t n = 0; n < a.rows; ++n) {
        const T* an = a.data.data() + n * a.cols;
        for (std::size_t d = 0; d < b.rows; ++d) {
            const T* bd = b.data.data() + d * b.cols;
            T acc{};
            for (std::size_t q = 0; q < a.cols; ++q) acc += an[q] * bd[q];
            c(n, d) = acc;
        }
    }
    return c;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
    Matrix<T> t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

template <typename T>
std::vector<T> column_sums(const Matrix<T>& a) {
    std::vector<T> sums(a.cols, T{});
    for (std::size_t i = 0; i < a.rows; ++i) {
        const T* ai = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j) sums[j] += ai[j];
    }
    return sums;
}

/// a[i, :] += v for every row i.
template <typename T>
void add_row_vector(Matrix<T>& a, std::span<const T> v) {
    if (v.size() != a.cols) throw ShapeError("add_row_vector: length mismatch");
    for (std::size_t i = 0; i < a.rows; ++i) {
        T* ai = a.data.data() + i * a.cols;
        for (std::size_t j = 0; j < a.cols; ++j) ai[j] += v[j];
    }
}

template <typename T>
bool all_finite(const Matrix<T>& a) {
    for (const T& x : a.data)
        if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
}

template <typename T>
void require_finite(const Matrix<T>& a, const std::string& what) {
    if (!all_finite(a)) {
        throw NumericError(what + ": non-finite values encountered; aborting run");
    }
}

template <typename To, typename From>
Matrix<To> convert_matrix(const Matrix<From>& a) {
    Matrix<To> out(a.rows, a.cols);
    for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = static_cast<To>(a.data[i]);
    return out;
}

}  // namespace cande::nn
