#include "nw/nn.hpp"

#include "nw/error.hpp"

#include <algorithm>
#include <cmath>

namespace nw {

Tensor ParameterStore::add(const std::string& name, Tensor t) {
    for (const auto& [existing, _] : params_) {
        if (existing == name) {
            fail(ErrorKind::ConfigError, "duplicate parameter " + name);
        }
    }
    params_.emplace_back(name, t);
    return t;
}

Tensor ParameterStore::uniform(const std::string& name, Shape shape, std::size_t fan_in) {
    const double bound = fan_in > 0 ? 1.0 / std::sqrt(static_cast<double>(fan_in)) : 0.0;
    std::vector<double> v(shape_numel(shape));
    for (auto& x : v) {
        x = bound > 0.0 ? uniform_real(rng_, -bound, bound) : 0.0;
    }
    return add(name, Tensor::from(std::move(shape), std::move(v), true));
}

Tensor ParameterStore::constant(const std::string& name, Shape shape, double value) {
    return add(name, Tensor::full(std::move(shape), value, true));
}

Tensor ParameterStore::values(const std::string& name, Shape shape, std::vector<double> values) {
    return add(name, Tensor::from(std::move(shape), std::move(values), true));
}

std::vector<Tensor> ParameterStore::tensors() const {
    std::vector<Tensor> out;
    out.reserve(params_.size());
    for (const auto& [_, t] : params_) {
        out.push_back(t);
    }
    return out;
}

Tensor ParameterStore::get(const std::string& name) const {
    for (const auto& [n, t] : params_) {
        if (n == name) {
            return t;
        }
    }
    fail(ErrorKind::ConfigError, "unknown parameter " + name);
}

std::size_t ParameterStore::numel() const {
    std::size_t n = 0;
    for (const auto& [_, t] : params_) {
        n += t.numel();
    }
    return n;
}

void ParameterStore::assign(const NamedTensors& source) {
    for (auto& [name, t] : params_) {
        auto it = std::find_if(source.begin(), source.end(), [&](const auto& p) { return p.first == name; });
        if (it == source.end()) {
            fail(ErrorKind::ConfigError, "checkpoint lacks parameter " + name);
        }
        if (it->second.shape() != t.shape()) {
            fail(ErrorKind::ConfigError, "parameter " + name + " has shape " + shape_string(it->second.shape()) +
                                             ", expected " + shape_string(t.shape()));
        }
        fill(t, it->second.values());
    }
}

NamedTensors ParameterStore::snapshot() const {
    NamedTensors out;
    for (const auto& [name, t] : params_) {
        out.emplace_back(name, t.detach());
    }
    return out;
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool use_bias)
    : weight(store.uniform(name + ".weight", {in, out}, in)) {
    if (use_bias) {
        bias = store.constant(name + ".bias", {out}, 0.0);
    }
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim)
    : gamma(store.constant(name + ".gamma", {dim}, 1.0)), beta(store.constant(name + ".beta", {dim}, 0.0)) {}

Mlp::Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
         Activation act)
    : first(store, name + ".0", in, hidden), second(store, name + ".1", hidden, out), act(act) {}

Tensor Mlp::operator()(const Tensor& x) const {
    const Tensor h = first(x);
    return second(act == Activation::relu ? ops::relu(h) : ops::gelu(h));
}

void fill(Tensor& t, double value) {
    auto v = t.mutable_values();
    std::fill(v.begin(), v.end(), value);
}

void fill(Tensor& t, std::span<const double> values) {
    auto v = t.mutable_values();
    if (values.size() != v.size()) {
        fail(ErrorKind::ShapeError, "fill: size mismatch");
    }
    std::copy(values.begin(), values.end(), v.begin());
}

} // namespace nw
