#include "nw/sequence_layers.hpp"

#include "nw/error.hpp"

#include <cmath>

namespace nw {
namespace {

constexpr double kMasked = -1e30;

double softplus_inverse(double y) { return y > 30.0 ? y : std::log(std::expm1(y)); }

// z with z * sigmoid(z) == target, by Newton's method from z = target + 1.
double silu_inverse(double target) {
    double z = target + 1.0;
    for (int i = 0; i < 100; ++i) {
        const double s = 1.0 / (1.0 + std::exp(-z));
        const double f = z * s - target;
        const double df = s * (1.0 + z * (1.0 - s));
        const double step = f / df;
        z -= step;
        if (std::abs(step) < 1e-17) {
            break;
        }
    }
    return z;
}

Tensor broadcast_row(const Tensor& row, std::size_t rows) {
    return ops::add_row(Tensor::zeros({rows, row.numel()}), row);
}

std::vector<std::uint8_t> reversed_mask(RowMask mask, std::size_t seq_len) {
    std::vector<std::uint8_t> out(mask.size());
    for (std::size_t i = 0; i < mask.size(); ++i) {
        const std::size_t s = i / seq_len;
        const std::size_t t = i % seq_len;
        out[i] = mask[s * seq_len + (seq_len - 1 - t)];
    }
    return out;
}

void require_divisible(std::size_t rows, std::size_t seq_len) {
    if (seq_len == 0 || rows % seq_len != 0) {
        fail(ErrorKind::ShapeError, "sequence batch of " + std::to_string(rows) + " rows is not a multiple of " +
                                        std::to_string(seq_len));
    }
}

} // namespace

std::string_view to_string(SequenceKind kind) noexcept {
    switch (kind) {
    case SequenceKind::identity:
        return "identity";
    case SequenceKind::conv:
        return "conv";
    case SequenceKind::attention:
        return "attention";
    case SequenceKind::ssm_s4:
        return "s4";
    case SequenceKind::ssm_selective:
        return "selective";
    }
    return "?";
}

SequenceKind parse_sequence_kind(std::string_view text) {
    for (auto k : {SequenceKind::identity, SequenceKind::conv, SequenceKind::attention, SequenceKind::ssm_s4,
                   SequenceKind::ssm_selective}) {
        if (text == to_string(k)) {
            return k;
        }
    }
    fail(ErrorKind::ConfigError, "unknown sequence layer kind '" + std::string(text) + "'");
}

Tensor apply_mask(const Tensor& x, RowMask mask) {
    if (mask.empty()) {
        return x;
    }
    std::vector<double> w(mask.begin(), mask.end());
    return ops::scale_rows(x, w);
}

Tensor IdentityLayer::forward(const Tensor& x, std::size_t seq_len, RowMask mask) const {
    require_divisible(x.rows(), seq_len);
    return apply_mask(x, mask);
}

ConvLayer::ConvLayer(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t k) {
    if (k % 2 == 0) {
        fail(ErrorKind::BadKernel, "conv kernel size " + std::to_string(k) + " must be odd");
    }
    kernel = store.uniform(name + ".kernel", {k, dim}, k);
    pointwise = Linear(store, name + ".pointwise", dim, dim);
}

Tensor ConvLayer::forward(const Tensor& x, std::size_t seq_len, RowMask mask) const {
    const Tensor in = apply_mask(x, mask);
    const Tensor y = ops::add(in, pointwise(ops::gelu(ops::conv1d(in, kernel, seq_len))));
    return apply_mask(y, mask);
}

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, std::size_t dim,
                                       std::size_t n_heads)
    : heads(n_heads) {
    if (n_heads == 0 || dim % n_heads != 0) {
        fail(ErrorKind::BadHeads, "width " + std::to_string(dim) + " is not divisible by " +
                                      std::to_string(n_heads) + " heads");
    }
    query = Linear(store, name + ".query", dim, dim);
    key = Linear(store, name + ".key", dim, dim);
    value = Linear(store, name + ".value", dim, dim);
    output = Linear(store, name + ".output", dim, dim);
}

std::vector<Tensor> MultiHeadAttention::weights(const Tensor& x, std::size_t block, const Tensor& bias) const {
    require_divisible(x.rows(), block);
    const std::size_t n_blocks = x.rows() / block;
    const std::size_t dim = x.cols();
    const std::size_t dh = dim / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const Tensor q = query(x);
    const Tensor k = key(x);
    std::vector<Tensor> out;
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor qh = ops::reshape(ops::slice_cols(q, h * dh, (h + 1) * dh), {n_blocks, block, dh});
        const Tensor kh = ops::reshape(ops::slice_cols(k, h * dh, (h + 1) * dh), {n_blocks, block, dh});
        Tensor scores = ops::scale(ops::bmm(qh, kh, true), inv_sqrt);
        if (bias.defined()) {
            scores = ops::add(scores, bias);
        }
        out.push_back(ops::softmax(scores));
    }
    return out;
}

Tensor MultiHeadAttention::operator()(const Tensor& x, std::size_t block, const Tensor& bias) const {
    const std::size_t n_blocks = x.rows() / block;
    const std::size_t dh = x.cols() / heads;
    const auto w = weights(x, block, bias);
    const Tensor v = value(x);
    std::vector<Tensor> parts;
    for (std::size_t h = 0; h < heads; ++h) {
        const Tensor vh = ops::reshape(ops::slice_cols(v, h * dh, (h + 1) * dh), {n_blocks, block, dh});
        parts.push_back(ops::reshape(ops::bmm(w[h], vh), {n_blocks * block, dh}));
    }
    return output(heads == 1 ? parts.front() : ops::concat_cols(parts));
}

Tensor key_mask_bias(RowMask mask, std::size_t n_blocks, std::size_t block) {
    if (mask.empty()) {
        return {};
    }
    std::vector<double> bias(n_blocks * block * block, 0.0);
    for (std::size_t b = 0; b < n_blocks; ++b) {
        for (std::size_t j = 0; j < block; ++j) {
            if (!mask[b * block + j]) {
                for (std::size_t i = 0; i < block; ++i) {
                    bias[(b * block + i) * block + j] = kMasked;
                }
            }
        }
    }
    return Tensor::from({n_blocks, block, block}, std::move(bias));
}

AttentionLayer::AttentionLayer(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads)
    : mha(store, name + ".mha", dim, heads), ffn(store, name + ".ffn", dim, 2 * dim, dim, Activation::gelu) {}

Tensor AttentionLayer::forward(const Tensor& x, std::size_t seq_len, RowMask mask) const {
    require_divisible(x.rows(), seq_len);
    const Tensor in = apply_mask(x, mask);
    const Tensor a = ops::add(in, mha(in, seq_len, key_mask_bias(mask, x.rows() / seq_len, seq_len)));
    return apply_mask(ops::add(a, ffn(a)), mask);
}

S4Layer::S4Layer(ParameterStore& store, const std::string& name, std::size_t d, const SequenceLayerConfig& config)
    : dim(d), state(config.state), mode(config.scan) {
    std::vector<double> a0(dim * state);
    for (std::size_t c = 0; c < dim; ++c) {
        for (std::size_t n = 0; n < state; ++n) {
            a0[c * state + n] = -(1.0 + static_cast<double>(n));
        }
    }
    a = store.values(name + ".a", {dim, state}, std::move(a0));
    std::vector<double> dt0(dim);
    for (auto& v : dt0) {
        v = uniform_real(store.rng(), std::log(config.dt_min), std::log(config.dt_max));
    }
    log_dt = store.values(name + ".log_dt", {dim}, std::move(dt0));
    b = store.constant(name + ".b", {state}, 1.0);
    c = store.uniform(name + ".c", {state}, state);
    out = Linear(store, name + ".out", dim, dim);
}

void S4Layer::set_timestep(std::span<const double> dt) {
    if (dt.size() != dim) {
        fail(ErrorKind::ShapeError, "set_timestep: one step per channel required");
    }
    std::vector<double> logs(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        if (!(dt[i] > 0.0)) {
            fail(ErrorKind::BadTimestep, "time step must be positive, got " + std::to_string(dt[i]));
        }
        logs[i] = std::log(dt[i]);
    }
    fill(log_dt, logs);
}

Tensor S4Layer::scan(const Tensor& x, std::size_t seq_len) const {
    require_divisible(x.rows(), seq_len);
    const std::size_t rows = x.rows();
    const std::size_t width = dim * state;
    const Tensor dt = ops::repeat_cols(ops::reshape(ops::exp(log_dt), {1, dim}), state);
    const Tensor dA = ops::mul(dt, ops::reshape(a, {1, width}));
    const Tensor decay = ops::exp(dA);
    const Tensor gain =
        ops::mul(ops::mul(dt, ops::expm1_ratio(dA)), ops::tile_cols(ops::reshape(b, {1, state}), dim));
    const Tensor h = ops::associative_scan(broadcast_row(decay, rows), ops::mul_row(ops::repeat_cols(x, state), gain),
                                           seq_len, mode);
    return ops::sum_col_groups(ops::mul_row(h, ops::tile_cols(ops::reshape(c, {1, state}), dim)), state);
}

Tensor S4Layer::forward(const Tensor& x, std::size_t seq_len, RowMask mask) const {
    const Tensor in = apply_mask(x, mask);
    return apply_mask(ops::add(in, out(scan(in, seq_len))), mask);
}

SelectiveLayer::SelectiveLayer(ParameterStore& store, const std::string& name, std::size_t d,
                               const SequenceLayerConfig& config)
    : dim(d), state(config.state), mode(config.scan) {
    std::vector<double> a0(dim * state);
    for (std::size_t ch = 0; ch < dim; ++ch) {
        for (std::size_t n = 0; n < state; ++n) {
            a0[ch * state + n] = -(1.0 + static_cast<double>(n));
        }
    }
    a = store.values(name + ".a", {dim, state}, std::move(a0));
    dt = Linear(store, name + ".dt", dim, dim);
    // Bias so softplus(bias) is log-uniform in [dt_min, dt_max].
    std::vector<double> bias(dim);
    for (auto& v : bias) {
        v = softplus_inverse(std::exp(uniform_real(store.rng(), std::log(config.dt_min), std::log(config.dt_max))));
    }
    fill(dt.bias, bias);
    b = Linear(store, name + ".b", dim, state);
    c = Linear(store, name + ".c", dim, state);
    gate = Linear(store, name + ".gate", dim, dim);
    out = Linear(store, name + ".out", dim, dim);
}

Tensor SelectiveLayer::scan(const Tensor& x, std::size_t seq_len) const {
    require_divisible(x.rows(), seq_len);
    const Tensor step = ops::repeat_cols(ops::softplus(dt(x)), state);
    const Tensor dA = ops::mul_row(step, ops::reshape(a, {1, dim * state}));
    const Tensor gain = ops::mul(ops::mul(step, ops::expm1_ratio(dA)), ops::tile_cols(b(x), dim));
    const Tensor h = ops::associative_scan(ops::exp(dA), ops::mul(gain, ops::repeat_cols(x, state)), seq_len, mode);
    const Tensor y = ops::sum_col_groups(ops::mul(h, ops::tile_cols(c(x), dim)), state);
    return ops::mul(y, ops::silu(gate(x)));
}

Tensor SelectiveLayer::forward(const Tensor& x, std::size_t seq_len, RowMask mask) const {
    const Tensor in = apply_mask(x, mask);
    return apply_mask(ops::add(in, out(scan(in, seq_len))), mask);
}

void SelectiveLayer::freeze_to(const S4Layer& s4) {
    if (s4.dim != dim || s4.state != state) {
        fail(ErrorKind::ShapeError, "freeze_to: layer sizes differ");
    }
    fill(a, s4.a.values());
    for (Linear* l : {&dt, &b, &c, &gate}) {
        fill(l->weight, 0.0);
    }
    std::vector<double> bias(dim);
    for (std::size_t i = 0; i < dim; ++i) {
        bias[i] = softplus_inverse(std::exp(s4.log_dt.at(i)));
    }
    fill(dt.bias, bias);
    fill(b.bias, s4.b.values());
    fill(c.bias, s4.c.values());
    fill(gate.bias, silu_inverse(1.0));
}

BidirectionalLayer::BidirectionalLayer(std::unique_ptr<SequenceLayer> forward_layer,
                                       std::unique_ptr<SequenceLayer> backward_layer)
    : fwd(std::move(forward_layer)), bwd(std::move(backward_layer)) {}

Tensor BidirectionalLayer::forward(const Tensor& x, std::size_t seq_len, RowMask mask) const {
    const auto rmask = reversed_mask(mask, seq_len);
    const Tensor f = fwd->forward(x, seq_len, mask);
    const Tensor g = ops::reverse_sequences(bwd->forward(ops::reverse_sequences(x, seq_len), seq_len, rmask), seq_len);
    return ops::scale(ops::add(f, g), 0.5);
}

std::unique_ptr<SequenceLayer> make_sequence_layer(ParameterStore& store, const std::string& name, std::size_t dim,
                                                   const SequenceLayerConfig& config) {
    auto one = [&](const std::string& n) -> std::unique_ptr<SequenceLayer> {
        switch (config.kind) {
        case SequenceKind::identity:
            return std::make_unique<IdentityLayer>();
        case SequenceKind::conv:
            return std::make_unique<ConvLayer>(store, n, dim, config.kernel);
        case SequenceKind::attention:
            return std::make_unique<AttentionLayer>(store, n, dim, config.heads);
        case SequenceKind::ssm_s4:
            return std::make_unique<S4Layer>(store, n, dim, config);
        case SequenceKind::ssm_selective:
            return std::make_unique<SelectiveLayer>(store, n, dim, config);
        }
        fail(ErrorKind::ConfigError, "unknown sequence layer kind");
    };
    if (!config.bidirectional) {
        return one(name);
    }
    auto f = one(name + ".fwd");
    auto g = one(name + ".bwd");
    return std::make_unique<BidirectionalLayer>(std::move(f), std::move(g));
}

} // namespace nw
