#pragma once

// Sequence layers map a batch of equal-length sequences [(S*T), d] to the
// same shape. A per-row mask marks padded positions: they are zeroed on
// the way in and on the way out, and attention never uses them as keys.

#include "nw/nn.hpp"
#include "nw/ops.hpp"

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace nw {

enum class SequenceKind { identity, conv, attention, ssm_s4, ssm_selective };

std::string_view to_string(SequenceKind kind) noexcept;
SequenceKind parse_sequence_kind(std::string_view text);

struct SequenceLayerConfig {
    SequenceKind kind = SequenceKind::conv;
    bool bidirectional = false;
    std::size_t kernel = 9;
    std::size_t heads = 4;
    std::size_t state = 16;
    double dt_min = 1e-3;
    double dt_max = 1e-1;
    ops::ScanMode scan = ops::ScanMode::sequential;
};

using RowMask = std::span<const std::uint8_t>;

class SequenceLayer {
public:
    virtual ~SequenceLayer() = default;
    /// x is [(S*T), d]; mask is empty (all valid) or one entry per row.
    virtual Tensor forward(const Tensor& x, std::size_t seq_len, RowMask mask) const = 0;
};

/// Zeroes masked rows; returns x unchanged when the mask is empty.
Tensor apply_mask(const Tensor& x, RowMask mask);

class IdentityLayer final : public SequenceLayer {
public:
    Tensor forward(const Tensor& x, std::size_t seq_len, RowMask mask) const override;
};

/// x + pointwise(gelu(depthwise_conv(x)))
class ConvLayer final : public SequenceLayer {
public:
    ConvLayer(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t kernel);
    Tensor forward(const Tensor& x, std::size_t seq_len, RowMask mask) const override;

    Tensor kernel;  // [k, d]
    Linear pointwise;
};

/// Multi-head scaled dot-product attention inside blocks of T rows.
struct MultiHeadAttention {
    MultiHeadAttention() = default;
    MultiHeadAttention(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads);

    /// Additive bias is [B, T, T] (0 or -1e30) or undefined.
    Tensor operator()(const Tensor& x, std::size_t block, const Tensor& bias) const;
    /// Per-head attention weights, each [B, T, T].
    std::vector<Tensor> weights(const Tensor& x, std::size_t block, const Tensor& bias) const;

    std::size_t heads = 1;
    Linear query;
    Linear key;
    Linear value;
    Linear output;
};

/// Key-padding bias for blocks of length T: -1e30 where the key row is masked.
Tensor key_mask_bias(RowMask mask, std::size_t n_blocks, std::size_t block);

/// a = x + MHA(x); y = a + FFN(a)
class AttentionLayer final : public SequenceLayer {
public:
    AttentionLayer(ParameterStore& store, const std::string& name, std::size_t dim, std::size_t heads);
    Tensor forward(const Tensor& x, std::size_t seq_len, RowMask mask) const override;

    MultiHeadAttention mha;
    Mlp ffn;
};

/// Diagonal state-space layer with zero-order-hold discretization:
/// h_t = exp(dt*A) h_{t-1} + dt*phi(dt*A)*B x_t, y_t = C h_t, phi(z) = expm1(z)/z.
/// Output is x + out(core(x)).
class S4Layer final : public SequenceLayer {
public:
    S4Layer(ParameterStore& store, const std::string& name, std::size_t dim, const SequenceLayerConfig& config);
    Tensor forward(const Tensor& x, std::size_t seq_len, RowMask mask) const override;
    /// Recurrence output alone, [(S*T), d].
    Tensor scan(const Tensor& x, std::size_t seq_len) const;
    /// Sets dt per channel. Throws BadTimestep unless every entry is > 0.
    void set_timestep(std::span<const double> dt);

    std::size_t dim;
    std::size_t state;
    ops::ScanMode mode;
    Tensor a;       // [d, N]
    Tensor log_dt;  // [d]
    Tensor b;       // [N]
    Tensor c;       // [N]
    Linear out;
};

/// Input-dependent dt_t, B_t, C_t and a silu gate:
/// y_t = (C_t . h_t) * silu(z(x_t)).
class SelectiveLayer final : public SequenceLayer {
public:
    SelectiveLayer(ParameterStore& store, const std::string& name, std::size_t dim,
                   const SequenceLayerConfig& config);
    Tensor forward(const Tensor& x, std::size_t seq_len, RowMask mask) const override;
    Tensor scan(const Tensor& x, std::size_t seq_len) const;
    /// Freezes projections to constants reproducing `s4`'s recurrence.
    void freeze_to(const S4Layer& s4);

    std::size_t dim;
    std::size_t state;
    ops::ScanMode mode;
    Tensor a;  // [d, N]
    Linear dt;
    Linear b;
    Linear c;
    Linear gate;
    Linear out;
};

/// 0.5 * (f(x) + rev(g(rev(x)))) with separate parameters for f and g.
class BidirectionalLayer final : public SequenceLayer {
public:
    BidirectionalLayer(std::unique_ptr<SequenceLayer> forward_layer, std::unique_ptr<SequenceLayer> backward_layer);
    Tensor forward(const Tensor& x, std::size_t seq_len, RowMask mask) const override;

    std::unique_ptr<SequenceLayer> fwd;
    std::unique_ptr<SequenceLayer> bwd;
};

std::unique_ptr<SequenceLayer> make_sequence_layer(ParameterStore& store, const std::string& name, std::size_t dim,
                                                   const SequenceLayerConfig& config);

} // namespace nw
