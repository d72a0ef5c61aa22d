#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mffnc/matrix.hpp"

namespace mffnc {

namespace detail {
struct Node;
}

// Handle to a node of a reverse-mode autodiff graph. Copies share the node.
//
// Leaves are created with constant() or parameter(). Every op returns a new
// node that remembers its inputs when any input requires a gradient; the
// graph lives as long as the resulting tensors and is released by backward().
class Tensor {
public:
    // Backward rule of an op: given the op's output value and the gradient
    // flowing into it, add contributions to input_grads[i] for each input.
    // input_grads[i] is null when input i does not require a gradient.
    using BackwardFn = std::function<void(const Matrix& output, const Matrix& grad_output,
                                          std::span<Matrix* const> input_grads)>;

    Tensor() = default;

    static Tensor constant(Matrix value);
    static Tensor parameter(Matrix value);

    // Records a custom op. Throws NumericalError if value has a non-finite
    // entry; `name` appears in that message.
    static Tensor from_op(const char* name, Matrix value, std::vector<Tensor> inputs, BackwardFn backward);

    bool defined() const { return node_ != nullptr; }
    const Matrix& value() const;
    // Direct write access for optimizers and fixtures; only valid on leaves.
    Matrix& mutable_value();

    std::size_t rows() const { return value().rows; }
    std::size_t cols() const { return value().cols; }
    double item() const;

    bool requires_grad() const;
    bool has_grad() const;
    const Matrix& grad() const;  // throws UsageError when absent
    void zero_grad();            // drops the gradient buffer

    // Populates gradients of every tensor that requires one. The receiver must
    // be 1x1. The graph is released afterwards; a second call on the same
    // result throws UsageError.
    void backward() const;

    bool same_node(const Tensor& o) const { return node_ == o.node_; }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
    std::shared_ptr<detail::Node> node_;
};

// While alive, ops on this thread record no graph (inference mode).
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Differentiable operations. Shape mismatches raise DimensionError naming both
// operand shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
// Elementwise sum. b may also be a 1 x c row broadcast over a's rows.
Tensor add(const Tensor& a, const Tensor& b);
// Elementwise product, with the same row broadcast rule as add.
Tensor mul(const Tensor& a, const Tensor& b);
// Scales row i of a by column[i]; column is r x 1.
Tensor mul_col(const Tensor& a, const Tensor& column);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor mean_rows(const Tensor& a);  // 1 x c
Tensor sum(const Tensor& a);        // 1 x 1
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);
Tensor reshape(const Tensor& a, std::size_t rows, std::size_t cols);
// Per-row standardization (x - mean) / sqrt(var + eps), population variance.
Tensor normalize_rows(const Tensor& a, double eps);

}  // namespace mffnc
