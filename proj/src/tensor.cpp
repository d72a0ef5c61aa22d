#include "mffnc/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "mffnc/error.hpp"
#include "mffnc/kernels.hpp"

namespace mffnc {

namespace detail {

struct Node {
    Matrix value;
    std::optional<Matrix> grad;
    bool requires_grad = false;
    bool leaf = true;
    bool released = false;
    const char* name = "leaf";
    std::vector<std::shared_ptr<Node>> inputs;
    Tensor::BackwardFn backward;
};

}  // namespace detail

namespace {

thread_local bool t_grad_enabled = true;

void require(bool ok, const std::string& message) {
    if (!ok) throw DimensionError(message);
}

std::string shapes(const char* op, const Matrix& a, const Matrix& b) {
    return std::string(op) + ": incompatible shapes " + a.shape_string() + " and " + b.shape_string();
}

// True when b broadcasts as a single row over a.
bool row_broadcast(const Matrix& a, const Matrix& b) {
    return b.rows == 1 && a.rows != 1 && a.cols == b.cols;
}

void add_into(Matrix& dst, const Matrix& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst.data[i] += src.data[i];
}

// Accumulates g into the gradient of a broadcast operand (column sums when
// the operand was a broadcast row).
void add_reduced(Matrix& dst, const Matrix& g) {
    if (dst.rows == g.rows) {
        add_into(dst, g);
        return;
    }
    for (std::size_t i = 0; i < g.rows; ++i)
        for (std::size_t j = 0; j < g.cols; ++j) dst.data[j] += g(i, j);
}

}  // namespace

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_enabled() { return t_grad_enabled; }

Tensor Tensor::constant(Matrix value) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    return Tensor(std::move(n));
}

Tensor Tensor::parameter(Matrix value) {
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    n->requires_grad = true;
    return Tensor(std::move(n));
}

Tensor Tensor::from_op(const char* name, Matrix value, std::vector<Tensor> inputs, BackwardFn backward) {
    if (!value.all_finite()) throw NumericalError(std::string("non-finite value produced by ") + name);
    auto n = std::make_shared<detail::Node>();
    n->value = std::move(value);
    n->leaf = false;
    n->name = name;
    const bool any = t_grad_enabled && std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (any) {
        n->requires_grad = true;
        n->inputs.reserve(inputs.size());
        for (auto& t : inputs) n->inputs.push_back(t.node_);
        n->backward = std::move(backward);
    }
    return Tensor(std::move(n));
}

const Matrix& Tensor::value() const {
    if (!node_) throw UsageError("use of an undefined tensor");
    return node_->value;
}

Matrix& Tensor::mutable_value() {
    if (!node_) throw UsageError("use of an undefined tensor");
    if (!node_->leaf) throw UsageError("mutable_value is only allowed on leaf tensors");
    return node_->value;
}

double Tensor::item() const {
    const Matrix& v = value();
    if (v.rows != 1 || v.cols != 1) throw DimensionError("item() on non-scalar tensor " + v.shape_string());
    return v.data[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::has_grad() const { return node_ && node_->grad.has_value(); }

const Matrix& Tensor::grad() const {
    if (!has_grad()) throw UsageError("tensor has no gradient");
    return *node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.reset();
}

void Tensor::backward() const {
    const Matrix& v = value();
    if (v.rows != 1 || v.cols != 1)
        throw UsageError("backward() requires a 1x1 tensor, got " + v.shape_string());
    if (node_->released) throw UsageError("backward() already ran on this graph");
    if (!node_->requires_grad) throw UsageError("backward() on a tensor that does not require grad");

    // Iterative post-order DFS; reversed it is a topological order.
    std::vector<detail::Node*> order;
    std::unordered_set<detail::Node*> visited;
    std::vector<std::pair<detail::Node*, std::size_t>> stack{{node_.get(), 0}};
    visited.insert(node_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            detail::Node* child = node->inputs[next++].get();
            if (child->requires_grad && visited.insert(child).second) stack.push_back({child, 0});
            continue;
        }
        order.push_back(node);
        stack.pop_back();
    }

    node_->grad = Matrix(1, 1, 1.0);
    std::vector<Matrix*> input_grads;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::Node* node = *it;
        if (node->leaf || !node->backward || !node->grad) continue;
        input_grads.clear();
        for (auto& in : node->inputs) {
            if (!in->requires_grad) {
                input_grads.push_back(nullptr);
                continue;
            }
            if (!in->grad) in->grad = Matrix(in->value.rows, in->value.cols);
            input_grads.push_back(&*in->grad);
        }
        node->backward(node->value, *node->grad, input_grads);
    }

    for (detail::Node* node : order) {
        if (node->leaf) continue;
        node->inputs.clear();
        node->backward = nullptr;
        node->released = true;
    }
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    Matrix out;
    kernels::matmul(a.value(), b.value(), out);
    return Tensor::from_op("matmul", std::move(out), {a, b},
                           [a, b](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               if (grads[0]) kernels::matmul_nt(g, b.value(), *grads[0], true);
                               if (grads[1]) kernels::matmul_tn(a.value(), g, *grads[1], true);
                           });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    Matrix out;
    kernels::matmul_nt(a.value(), b.value(), out);
    return Tensor::from_op("matmul_nt", std::move(out), {a, b},
                           [a, b](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               if (grads[0]) kernels::matmul(g, b.value(), *grads[0], true);
                               if (grads[1]) kernels::matmul_tn(g, a.value(), *grads[1], true);
                           });
}

Tensor add(const Tensor& a, const Tensor& b) {
    const Matrix& x = a.value();
    const Matrix& y = b.value();
    const bool bcast = row_broadcast(x, y);
    require(x.same_shape(y) || bcast, shapes("add", x, y));
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) += bcast ? y.data[j] : y(i, j);
    return Tensor::from_op("add", std::move(out), {a, b},
                           [](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               if (grads[0]) add_into(*grads[0], g);
                               if (grads[1]) add_reduced(*grads[1], g);
                           });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    const Matrix& x = a.value();
    const Matrix& y = b.value();
    const bool bcast = row_broadcast(x, y);
    require(x.same_shape(y) || bcast, shapes("mul", x, y));
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) *= bcast ? y.data[j] : y(i, j);
    return Tensor::from_op("mul", std::move(out), {a, b},
                           [a, b, bcast](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               const Matrix& x = a.value();
                               const Matrix& y = b.value();
                               for (std::size_t i = 0; i < g.rows; ++i)
                                   for (std::size_t j = 0; j < g.cols; ++j) {
                                       const double yv = bcast ? y.data[j] : y(i, j);
                                       if (grads[0]) (*grads[0])(i, j) += g(i, j) * yv;
                                       if (grads[1]) (bcast ? grads[1]->data[j] : (*grads[1])(i, j)) += g(i, j) * x(i, j);
                                   }
                           });
}

Tensor mul_col(const Tensor& a, const Tensor& column) {
    const Matrix& x = a.value();
    const Matrix& c = column.value();
    require(c.cols == 1 && c.rows == x.rows, shapes("mul_col", x, c));
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) *= c.data[i];
    return Tensor::from_op("mul_col", std::move(out), {a, column},
                           [a, column](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               const Matrix& x = a.value();
                               const Matrix& c = column.value();
                               for (std::size_t i = 0; i < g.rows; ++i)
                                   for (std::size_t j = 0; j < g.cols; ++j) {
                                       if (grads[0]) (*grads[0])(i, j) += g(i, j) * c.data[i];
                                       if (grads[1]) grads[1]->data[i] += g(i, j) * x(i, j);
                                   }
                           });
}

Tensor scale(const Tensor& a, double s) {
    Matrix out = a.value();
    for (double& v : out.data) v *= s;
    return Tensor::from_op("scale", std::move(out), {a},
                           [s](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               for (std::size_t i = 0; i < g.size(); ++i) grads[0]->data[i] += s * g.data[i];
                           });
}

Tensor relu(const Tensor& a) {
    Matrix out = a.value();
    for (double& v : out.data) v = std::max(v, 0.0);
    return Tensor::from_op("relu", std::move(out), {a},
                           [](const Matrix& y, const Matrix& g, std::span<Matrix* const> grads) {
                               for (std::size_t i = 0; i < g.size(); ++i)
                                   if (y.data[i] > 0.0) grads[0]->data[i] += g.data[i];
                           });
}

Tensor softmax_rows(const Tensor& a) {
    Matrix out;
    kernels::softmax_rows(a.value(), out);
    return Tensor::from_op("softmax_rows", std::move(out), {a},
                           [](const Matrix& y, const Matrix& g, std::span<Matrix* const> grads) {
                               Matrix& dx = *grads[0];
                               for (std::size_t i = 0; i < y.rows; ++i) {
                                   double dot = 0.0;
                                   for (std::size_t j = 0; j < y.cols; ++j) dot += g(i, j) * y(i, j);
                                   for (std::size_t j = 0; j < y.cols; ++j) dx(i, j) += y(i, j) * (g(i, j) - dot);
                               }
                           });
}

Tensor mean_rows(const Tensor& a) {
    const Matrix& x = a.value();
    if (x.rows == 0) throw DimensionError("mean_rows: empty input " + x.shape_string());
    Matrix out(1, x.cols);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < x.cols; ++j) out.data[j] += x(i, j);
    const double inv = 1.0 / static_cast<double>(x.rows);
    for (double& v : out.data) v *= inv;
    return Tensor::from_op("mean_rows", std::move(out), {a},
                           [inv](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               Matrix& dx = *grads[0];
                               for (std::size_t i = 0; i < dx.rows; ++i)
                                   for (std::size_t j = 0; j < dx.cols; ++j) dx(i, j) += g.data[j] * inv;
                           });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double v : a.value().data) total += v;
    return Tensor::from_op("sum", Matrix(1, 1, total), {a},
                           [](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               for (double& v : grads[0]->data) v += g.data[0];
                           });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    const Matrix& x = a.value();
    const Matrix& y = b.value();
    require(x.rows == y.rows, shapes("concat_cols", x, y));
    Matrix out(x.rows, x.cols + y.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        std::copy(x.row(i).begin(), x.row(i).end(), out.row(i).begin());
        std::copy(y.row(i).begin(), y.row(i).end(), out.row(i).begin() + static_cast<std::ptrdiff_t>(x.cols));
    }
    const std::size_t split = x.cols;
    return Tensor::from_op("concat_cols", std::move(out), {a, b},
                           [split](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               for (std::size_t i = 0; i < g.rows; ++i)
                                   for (std::size_t j = 0; j < g.cols; ++j) {
                                       if (j < split) {
                                           if (grads[0]) (*grads[0])(i, j) += g(i, j);
                                       } else if (grads[1]) {
                                           (*grads[1])(i, j - split) += g(i, j);
                                       }
                                   }
                           });
}

Tensor concat_rows(std::span<const Tensor> parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const std::size_t cols = parts.front().cols();
    std::size_t rows = 0;
    for (const Tensor& p : parts) {
        require(p.cols() == cols, shapes("concat_rows", parts.front().value(), p.value()));
        rows += p.rows();
    }
    Matrix out(rows, cols);
    std::size_t offset = 0;
    for (const Tensor& p : parts) {
        std::copy(p.value().data.begin(), p.value().data.end(), out.data.begin() + static_cast<std::ptrdiff_t>(offset));
        offset += p.value().size();
    }
    std::vector<std::size_t> sizes;
    sizes.reserve(parts.size());
    for (const Tensor& p : parts) sizes.push_back(p.value().size());
    return Tensor::from_op("concat_rows", std::move(out), std::vector<Tensor>(parts.begin(), parts.end()),
                           [sizes = std::move(sizes)](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               std::size_t off = 0;
                               for (std::size_t p = 0; p < grads.size(); ++p) {
                                   if (Matrix* d = grads[p])
                                       for (std::size_t k = 0; k < sizes[p]; ++k) d->data[k] += g.data[off + k];
                                   off += sizes[p];
                               }
                           });
}

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count) {
    const Matrix& x = a.value();
    if (begin + count > x.rows)
        throw DimensionError("slice_rows: rows [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of range for " + x.shape_string());
    Matrix out(count, x.cols);
    std::copy(x.data.begin() + static_cast<std::ptrdiff_t>(begin * x.cols),
              x.data.begin() + static_cast<std::ptrdiff_t>((begin + count) * x.cols), out.data.begin());
    return Tensor::from_op("slice_rows", std::move(out), {a},
                           [begin](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               Matrix& dx = *grads[0];
                               for (std::size_t k = 0; k < g.size(); ++k) dx.data[begin * dx.cols + k] += g.data[k];
                           });
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
    const Matrix& x = a.value();
    if (begin + count > x.cols)
        throw DimensionError("slice_cols: cols [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                             ") out of range for " + x.shape_string());
    Matrix out(x.rows, count);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
    return Tensor::from_op("slice_cols", std::move(out), {a},
                           [begin](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               Matrix& dx = *grads[0];
                               for (std::size_t i = 0; i < g.rows; ++i)
                                   for (std::size_t j = 0; j < g.cols; ++j) dx(i, begin + j) += g(i, j);
                           });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
    const Matrix& t = table.value();
    Matrix out(ids.size(), t.cols);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] >= t.rows)
            throw UsageError("gather_rows: id " + std::to_string(ids[r]) + " out of range for table " +
                             t.shape_string());
        std::copy(t.row(ids[r]).begin(), t.row(ids[r]).end(), out.row(r).begin());
    }
    std::vector<std::size_t> index(ids.begin(), ids.end());
    return Tensor::from_op("gather_rows", std::move(out), {table},
                           [index = std::move(index)](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               Matrix& dt = *grads[0];
                               for (std::size_t r = 0; r < index.size(); ++r)
                                   for (std::size_t j = 0; j < g.cols; ++j) dt(index[r], j) += g(r, j);
                           });
}

Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols) {
    const Matrix& x = a.value();
    if (rows * cols != x.size())
        throw DimensionError("reshape: cannot view " + x.shape_string() + " as (" + std::to_string(rows) + "x" +
                             std::to_string(cols) + ")");
    return Tensor::from_op("reshape", Matrix(rows, cols, x.data), {a},
                           [](const Matrix&, const Matrix& g, std::span<Matrix* const> grads) {
                               add_into(*grads[0], g);
                           });
}

Tensor normalize_rows(const Tensor& a, double eps) {
    const Matrix& x = a.value();
    Matrix out(x.rows, x.cols);
    std::vector<double> inv_sigma(x.rows);
    const double n = static_cast<double>(x.cols);
    for (std::size_t i = 0; i < x.rows; ++i) {
        double mean = 0.0;
        for (double v : x.row(i)) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : x.row(i)) var += (v - mean) * (v - mean);
        var /= n;
        inv_sigma[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < x.cols; ++j) out(i, j) = (x(i, j) - mean) * inv_sigma[i];
    }
    return Tensor::from_op("normalize_rows", std::move(out), {a},
                           [inv_sigma = std::move(inv_sigma), n](const Matrix& y, const Matrix& g,
                                                                 std::span<Matrix* const> grads) {
                               Matrix& dx = *grads[0];
                               for (std::size_t i = 0; i < y.rows; ++i) {
                                   double mean_g = 0.0, mean_gy = 0.0;
                                   for (std::size_t j = 0; j < y.cols; ++j) {
                                       mean_g += g(i, j);
                                       mean_gy += g(i, j) * y(i, j);
                                   }
                                   mean_g /= n;
                                   mean_gy /= n;
                                   for (std::size_t j = 0; j < y.cols; ++j)
                                       dx(i, j) += inv_sigma[i] * (g(i, j) - mean_g - y(i, j) * mean_gy);
                               }
                           });
}

}  // namespace mffnc
