#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nw {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Storage plus the op record that produced it. Leaves have no op.
struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // empty until first touched
    bool requires_grad = false;

    const char* op = nullptr;
    std::vector<std::shared_ptr<TensorNode>> inputs;
    std::function<void(TensorNode& self)> backward;

    std::vector<double>& grad_buffer() {
        if (grad.size() != value.size()) {
            grad.assign(value.size(), 0.0);
        }
        return grad;
    }
};

/// Dense row-major f64 tensor with reverse-mode gradient recording.
///
/// Copies share storage. Ops only record themselves when at least one
/// input requires a gradient, so inference runs without building a tape.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor scalar(double value);

    bool defined() const noexcept { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t rank() const { return node_->shape.size(); }
    std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
    std::size_t numel() const { return node_->value.size(); }
    /// Leading dimension; 1 for scalars.
    std::size_t rows() const;
    /// Product of the trailing dimensions.
    std::size_t cols() const;

    std::span<const double> values() const { return node_->value; }
    /// Direct write access; used by optimizers and finite-difference probes.
    std::span<double> mutable_values() { return node_->value; }
    double item() const;
    double at(std::size_t flat) const { return node_->value.at(flat); }

    bool requires_grad() const { return node_ && node_->requires_grad; }
    /// Accumulated gradient; zeros when backward never reached this tensor.
    std::span<const double> grad() const;
    void zero_grad();

    /// Same values, no history.
    Tensor detach() const;

    const std::shared_ptr<TensorNode>& node() const { return node_; }
    explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

private:
    std::shared_ptr<TensorNode> node_;
};

/// Reverse topological order of every recorded op reachable from a root.
class Tape {
public:
    explicit Tape(const Tensor& root);

    std::size_t size() const noexcept { return order_.size(); }
    /// Seeds d(root)/d(root) = 1 and replays each record once, last first.
    void backward();

private:
    std::shared_ptr<TensorNode> root_;
    std::vector<TensorNode*> order_;  // topological: inputs before outputs
};

/// backward on a 1-element loss. Throws ShapeError otherwise.
void backward(const Tensor& loss);

namespace detail {

/// Builds an op result; records `backward` only when an input needs grad.
Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                   std::function<void(TensorNode& self)> backward);
Tensor make_result(const char* op, Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
                   std::function<void(TensorNode& self)> backward);

} // namespace detail

} // namespace nw
