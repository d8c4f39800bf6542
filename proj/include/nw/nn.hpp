#pragma once

#include "nw/ops.hpp"
#include "nw/rng.hpp"
#include "nw/tensor.hpp"
#include "nw/tensor_io.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace nw {

/// Named trainable tensors in creation order. Initialization draws from a
/// single engine, so a seed and a construction sequence fix every value.
class ParameterStore {
public:
    explicit ParameterStore(std::uint64_t seed = 0) : rng_(seed) {}

    /// uniform(-1/sqrt(fan_in), +1/sqrt(fan_in))
    Tensor uniform(const std::string& name, Shape shape, std::size_t fan_in);
    Tensor constant(const std::string& name, Shape shape, double value);
    Tensor values(const std::string& name, Shape shape, std::vector<double> values);

    const NamedTensors& named() const noexcept { return params_; }
    std::vector<Tensor> tensors() const;
    Tensor get(const std::string& name) const;
    std::size_t numel() const;

    /// Copies values by name. Throws ConfigError on a missing name or shape mismatch.
    void assign(const NamedTensors& source);
    /// Deep copy of the current values.
    NamedTensors snapshot() const;

    Engine& rng() noexcept { return rng_; }

private:
    Tensor add(const std::string& name, Tensor t);

    Engine rng_;
    NamedTensors params_;
};

struct Linear {
    Tensor weight;  // [in, out]
    Tensor bias;    // [out]; undefined when disabled

    Linear() = default;
    Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, bool use_bias = true);

    Tensor operator()(const Tensor& x) const { return ops::linear(x, weight, bias); }
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;

    LayerNorm() = default;
    LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim);

    Tensor operator()(const Tensor& x) const { return ops::layernorm(x, gamma, beta); }
};

enum class Activation { relu, gelu };

/// Linear -> activation -> Linear.
struct Mlp {
    Linear first;
    Linear second;
    Activation act = Activation::relu;

    Mlp() = default;
    Mlp(ParameterStore& store, const std::string& name, std::size_t in, std::size_t hidden, std::size_t out,
        Activation act = Activation::relu);

    Tensor operator()(const Tensor& x) const;
};

/// Sets every entry of t to value (parameter surgery in tests and reductions).
void fill(Tensor& t, double value);
void fill(Tensor& t, std::span<const double> values);

} // namespace nw
