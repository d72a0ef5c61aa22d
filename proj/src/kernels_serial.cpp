#include <algorithm>
#include <atomic>
#include <cmath>

#include "kernels_detail.hpp"
#include "mffnc/kernels.hpp"

namespace mffnc::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
}

void set_backend(Backend b) { g_backend.store(b, std::memory_order_relaxed); }
Backend backend() { return g_backend.load(std::memory_order_relaxed); }

namespace serial {

void matmul(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    detail::check_nn(a, b);
    detail::prepare_output(c, a.rows, b.cols, accumulate);
    for (std::size_t i = 0; i < a.rows; ++i) detail::matmul_row(a, b, c, i);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    detail::check_nt(a, b);
    detail::prepare_output(c, a.rows, b.rows, accumulate);
    for (std::size_t i = 0; i < a.rows; ++i) detail::matmul_nt_row(a, b, c, i);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    detail::check_tn(a, b);
    detail::prepare_output(c, a.cols, b.cols, accumulate);
    for (std::size_t i = 0; i < a.cols; ++i) detail::matmul_tn_row(a, b, c, i);
}

void softmax_rows(const Matrix& x, Matrix& y) {
    y = Matrix(x.rows, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) detail::softmax_row(x, y, i);
}

}  // namespace serial

void matmul(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    backend() == Backend::serial ? serial::matmul(a, b, c, accumulate)
                                 : parallel::matmul(a, b, c, accumulate);
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    backend() == Backend::serial ? serial::matmul_nt(a, b, c, accumulate)
                                 : parallel::matmul_nt(a, b, c, accumulate);
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    backend() == Backend::serial ? serial::matmul_tn(a, b, c, accumulate)
                                 : parallel::matmul_tn(a, b, c, accumulate);
}

void softmax_rows(const Matrix& x, Matrix& y) {
    backend() == Backend::serial ? serial::softmax_rows(x, y) : parallel::softmax_rows(x, y);
}

}  // namespace mffnc::kernels
