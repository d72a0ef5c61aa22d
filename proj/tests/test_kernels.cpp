#include <doctest.h>

#include "gradcheck.hpp"
#include "mffnc/error.hpp"
#include "mffnc/kernels.hpp"

using namespace mffnc;

TEST_CASE("serial and parallel kernels are bit-identical") {
    Rng rng(21);
    // Small shapes stay under the parallel threshold, large ones cross it.
    for (auto [m, k, n] : std::vector<std::array<std::size_t, 3>>{{1, 1, 1}, {3, 5, 2}, {8, 8, 8}, {64, 48, 40},
                                                                  {200, 33, 70}, {257, 32, 32}}) {
        const Matrix a = gc::random_matrix(rng, m, k);
        const Matrix b = gc::random_matrix(rng, k, n);
        const Matrix bt = gc::random_matrix(rng, n, k);
        const Matrix at = gc::random_matrix(rng, k, m);
        Matrix s, p;
        kernels::serial::matmul(a, b, s);
        kernels::parallel::matmul(a, b, p);
        CHECK(s == p);
        kernels::serial::matmul_nt(a, bt, s);
        kernels::parallel::matmul_nt(a, bt, p);
        CHECK(s == p);
        kernels::serial::matmul_tn(at, b, s);
        kernels::parallel::matmul_tn(at, b, p);
        CHECK(s == p);
        // Accumulation adds on top of the existing contents.
        Matrix s2 = s, p2 = p;
        kernels::serial::matmul_tn(at, b, s2, true);
        kernels::parallel::matmul_tn(at, b, p2, true);
        CHECK(s2 == p2);
        CHECK(s2.data[0] == doctest::Approx(2 * s.data[0]));
        const Matrix x = gc::random_matrix(rng, m, n, 20.0);
        Matrix ys, yp;
        kernels::serial::softmax_rows(x, ys);
        kernels::parallel::softmax_rows(x, yp);
        CHECK(ys == yp);
    }
}

TEST_CASE("kernels against a naive triple loop") {
    Rng rng(5);
    const Matrix a = gc::random_matrix(rng, 7, 5);
    const Matrix b = gc::random_matrix(rng, 5, 3);
    Matrix c;
    kernels::matmul(a, b, c);
    for (std::size_t i = 0; i < 7; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0;
            for (std::size_t k = 0; k < 5; ++k) acc += a(i, k) * b(k, j);
            CHECK(c(i, j) == doctest::Approx(acc).epsilon(1e-14));
        }
}

TEST_CASE("backend switch") {
    const auto before = kernels::backend();
    kernels::set_backend(kernels::Backend::serial);
    CHECK(kernels::backend() == kernels::Backend::serial);
    kernels::set_backend(before);
}

TEST_CASE("kernel shape errors") {
    Matrix c;
    CHECK_THROWS_AS(kernels::serial::matmul(Matrix(2, 3), Matrix(2, 3), c), DimensionError);
    CHECK_THROWS_AS(kernels::parallel::matmul_nt(Matrix(2, 3), Matrix(2, 4), c), DimensionError);
    CHECK_THROWS_AS(kernels::parallel::matmul_tn(Matrix(2, 3), Matrix(3, 3), c), DimensionError);
    Matrix wrong(1, 1);
    CHECK_THROWS_AS(kernels::serial::matmul(Matrix(2, 3), Matrix(3, 2), wrong, true), DimensionError);
}
