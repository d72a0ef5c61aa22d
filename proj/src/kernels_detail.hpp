#pragma once

// Row kernels shared by the serial and OpenMP backends. Keeping one row
// routine per product is what makes the two backends bit-identical.

#include <algorithm>
#include <cmath>
#include <string>

#include "mffnc/error.hpp"
#include "mffnc/matrix.hpp"

namespace mffnc::kernels::detail {

inline std::size_t check_nn(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw DimensionError("matmul: incompatible shapes " + a.shape_string() + " and " +
                             b.shape_string());
    return a.rows * a.cols * b.cols;
}

inline std::size_t check_nt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw DimensionError("matmul_nt: incompatible shapes " + a.shape_string() + " and " +
                             b.shape_string() + "^T");
    return a.rows * a.cols * b.rows;
}

inline std::size_t check_tn(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows)
        throw DimensionError("matmul_tn: incompatible shapes " + a.shape_string() + "^T and " +
                             b.shape_string());
    return a.cols * a.rows * b.cols;
}

inline void prepare_output(Matrix& c, std::size_t rows, std::size_t cols, bool accumulate) {
    if (accumulate) {
        if (c.rows != rows || c.cols != cols)
            throw DimensionError("matmul: accumulator shape " + c.shape_string() + " expected (" +
                                 std::to_string(rows) + "x" + std::to_string(cols) + ")");
        return;
    }
    c = Matrix(rows, cols);
}

// c[i,:] += sum_k a[i,k] * b[k,:]
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    double* __restrict out = c.data.data() + i * c.cols;
    const double* arow = a.data.data() + i * a.cols;
    for (std::size_t k = 0; k < a.cols; ++k) {
        const double aik = arow[k];
        const double* __restrict brow = b.data.data() + k * b.cols;
        for (std::size_t j = 0; j < b.cols; ++j) out[j] += aik * brow[j];
    }
}

// c[i,j] += dot(a[i,:], b[j,:])
inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    double* out = c.data.data() + i * c.cols;
    const double* arow = a.data.data() + i * a.cols;
    for (std::size_t j = 0; j < b.rows; ++j) {
        const double* brow = b.data.data() + j * b.cols;
        double acc = 0.0;
        for (std::size_t k = 0; k < a.cols; ++k) acc += arow[k] * brow[k];
        out[j] += acc;
    }
}

// c[i,:] += sum_k a[k,i] * b[k,:]
inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    double* __restrict out = c.data.data() + i * c.cols;
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double aki = a.data[k * a.cols + i];
        const double* __restrict brow = b.data.data() + k * b.cols;
        for (std::size_t j = 0; j < b.cols; ++j) out[j] += aki * brow[j];
    }
}

inline void softmax_row(const Matrix& x, Matrix& y, std::size_t i) {
    const double* in = x.data.data() + i * x.cols;
    double* out = y.data.data() + i * y.cols;
    const double peak = *std::max_element(in, in + x.cols);
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
        out[j] = std::exp(in[j] - peak);
        total += out[j];
    }
    for (std::size_t j = 0; j < x.cols; ++j) out[j] /= total;
}

}  // namespace mffnc::kernels::detail
