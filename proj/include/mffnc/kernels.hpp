#pragma once

#include <cstddef>

#include "mffnc/matrix.hpp"

// Dense kernels used by the tensor engine. Each kernel exists twice: a plain
// serial reference and an OpenMP version parallel over output rows. Both
// accumulate every output element in the same order (inner index ascending),
// so results are bit-identical regardless of thread count. Tests compare the
// two; bench/ measures them.
namespace mffnc::kernels {

enum class Backend { serial, parallel };

// Process-wide backend used by the dispatching entry points below.
void set_backend(Backend b);
Backend backend();

// Products below this many multiply-adds run serially even on the parallel
// backend; the fork/join cost dominates for the tiny shapes in gradient checks.
inline constexpr std::size_t kParallelWorkThreshold = 16384;

namespace serial {
// c = a * b            (m x k) * (k x n)
void matmul(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c = a * b^T          (m x k) * (n x k)^T
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c = a^T * b          (k x m)^T * (k x n)
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// Row-wise softmax with max subtraction.
void softmax_rows(const Matrix& x, Matrix& y);
}  // namespace serial

namespace parallel {
void matmul(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void softmax_rows(const Matrix& x, Matrix& y);
}  // namespace parallel

void matmul(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void softmax_rows(const Matrix& x, Matrix& y);

}  // namespace mffnc::kernels
