#include <cstddef>

#include "kernels_detail.hpp"
#include "mffnc/kernels.hpp"

namespace mffnc::kernels::parallel {

void matmul(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    const std::size_t work = detail::check_nn(a, b);
    detail::prepare_output(c, a.rows, b.cols, accumulate);
    const auto rows = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static) if (work >= kParallelWorkThreshold)
    for (std::ptrdiff_t i = 0; i < rows; ++i) detail::matmul_row(a, b, c, static_cast<std::size_t>(i));
}

void matmul_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    const std::size_t work = detail::check_nt(a, b);
    detail::prepare_output(c, a.rows, b.rows, accumulate);
    const auto rows = static_cast<std::ptrdiff_t>(a.rows);
#pragma omp parallel for schedule(static) if (work >= kParallelWorkThreshold)
    for (std::ptrdiff_t i = 0; i < rows; ++i) detail::matmul_nt_row(a, b, c, static_cast<std::size_t>(i));
}

void matmul_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
    const std::size_t work = detail::check_tn(a, b);
    detail::prepare_output(c, a.cols, b.cols, accumulate);
    const auto rows = static_cast<std::ptrdiff_t>(a.cols);
#pragma omp parallel for schedule(static) if (work >= kParallelWorkThreshold)
    for (std::ptrdiff_t i = 0; i < rows; ++i) detail::matmul_tn_row(a, b, c, static_cast<std::size_t>(i));
}

void softmax_rows(const Matrix& x, Matrix& y) {
    y = Matrix(x.rows, x.cols);
    const auto rows = static_cast<std::ptrdiff_t>(x.rows);
#pragma omp parallel for schedule(static) if (x.size() >= kParallelWorkThreshold)
    for (std::ptrdiff_t i = 0; i < rows; ++i) detail::softmax_row(x, y, static_cast<std::size_t>(i));
}

}  // namespace mffnc::kernels::parallel
