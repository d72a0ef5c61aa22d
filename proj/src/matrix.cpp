#include "mffnc/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "mffnc/error.hpp"

namespace mffnc {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c)
        throw DimensionError("matrix data has " + std::to_string(data.size()) + " values, shape " +
                             std::to_string(r) + "x" + std::to_string(c) + " needs " +
                             std::to_string(r * c));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

bool Matrix::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

std::string Matrix::shape_string() const {
    return "(" + std::to_string(rows) + "x" + std::to_string(cols) + ")";
}

}  // namespace mffnc
