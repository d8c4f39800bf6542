#include "nw/tensor.hpp"

#include "nw/error.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace nw {

std::size_t shape_numel(const Shape& shape) noexcept {
    std::size_t n = 1;
    for (auto d : shape) {
        n *= d;
    }
    return n;
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        out += (i ? "," : "") + std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    auto node = std::make_shared<TensorNode>();
    node->value.assign(shape_numel(shape), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape_numel(shape) != values.size()) {
        fail(ErrorKind::ShapeError, "Tensor::from: " + std::to_string(values.size()) + " values for shape " +
                                        shape_string(shape));
    }
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value) { return from({1}, {value}); }

std::size_t Tensor::rows() const { return rank() == 0 ? 1 : node_->shape[0]; }

std::size_t Tensor::cols() const {
    const std::size_t r = rows();
    return r == 0 ? 0 : numel() / r;
}

double Tensor::item() const {
    if (numel() != 1) {
        fail(ErrorKind::ShapeError, "item() on tensor of shape " + shape_string(shape()));
    }
    return node_->value[0];
}

std::span<const double> Tensor::grad() const { return node_->grad_buffer(); }

void Tensor::zero_grad() {
    if (node_) {
        node_->grad.assign(node_->value.size(), 0.0);
    }
}

Tensor Tensor::detach() const { return from(shape(), node_->value, false); }

Tape::Tape(const Tensor& root) : root_(root.node()) {
    if (!root_ || !root_->requires_grad) {
        return;
    }
    // Iterative post-order DFS.
    std::unordered_set<TensorNode*> seen;
    std::vector<std::pair<TensorNode*, std::size_t>> stack;
    stack.emplace_back(root_.get(), 0);
    seen.insert(root_.get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->inputs.size()) {
            TensorNode* child = node->inputs[next++].get();
            if (child->requires_grad && seen.insert(child).second) {
                stack.emplace_back(child, 0);
            }
            continue;
        }
        order_.push_back(node);
        stack.pop_back();
    }
}

void Tape::backward() {
    if (order_.empty()) {
        return;
    }
    // Intermediate gradients start from zero on every replay.
    for (TensorNode* node : order_) {
        if (node->backward) {
            node->grad.assign(node->value.size(), 0.0);
        }
    }
    auto& seed = root_->grad_buffer();
    std::fill(seed.begin(), seed.end(), 1.0);
    for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
        TensorNode* node = *it;
        if (node->backward) {
            node->backward(*node);
        }
    }
}

void backward(const Tensor& loss) {
    if (!loss.defined() || loss.numel() != 1) {
        fail(ErrorKind::ShapeError, "backward requires a 1-element loss");
    }
    Tape(loss).backward();
}

namespace detail {

Tensor make_result(const char* op, Shape shape, std::vector<double> value, const std::vector<Tensor>& inputs,
                   std::function<void(TensorNode& self)> backward) {
    auto node = std::make_shared<TensorNode>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->op = op;
    const bool needs = std::any_of(inputs.begin(), inputs.end(), [](const Tensor& t) { return t.requires_grad(); });
    if (needs) {
        node->requires_grad = true;
        node->inputs.reserve(inputs.size());
        for (const auto& t : inputs) {
            node->inputs.push_back(t.node());
        }
        node->backward = std::move(backward);
    }
    return Tensor(std::move(node));
}

Tensor make_result(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Tensor> inputs,
                   std::function<void(TensorNode& self)> backward) {
    return make_result(op, std::move(shape), std::move(value), std::vector<Tensor>(inputs), std::move(backward));
}

} // namespace detail

} // namespace nw
