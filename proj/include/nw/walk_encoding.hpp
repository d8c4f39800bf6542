#pragma once

#include "nw/graph.hpp"
#include "nw/walk_sampler.hpp"

#include <cstdint>
#include <span>

namespace nw {

struct EncodingConfig {
    std::size_t window = 8;  // s
    bool identity = true;
    bool adjacency = true;

    /// d_pe = s*[identity] + (s-1)*[adjacency]
    std::size_t pe_dim() const noexcept {
        return (identity ? window : 0) + (adjacency && window > 0 ? window - 1 : 0);
    }
};

/// Positional encodings of one walk.
///   id[i][j]  = 1 iff w_i == w_{i-j-1} and i-j >= 1,   j in [0, s)
///   adj[i][j] = 1 iff (w_i, w_{i-j-1}) is an edge and i-j >= 1,   j in [0, s-1)
/// Rows of padded positions are zero.
struct WalkPE {
    Matrix id;   // (l+1) x s
    Matrix adj;  // (l+1) x (s-1)

    /// Columns [identity | adjacency], honoring the config's include flags.
    Matrix concat(const EncodingConfig& config) const;
};

/// Throws BadWindow for s == 0, BadIndex for out-of-range nodes.
WalkPE encode_walk(const Graph& g, std::span<const NodeId> walk, std::span<const std::uint8_t> mask,
                   const EncodingConfig& config);
WalkPE encode_walk(const Graph& g, std::span<const NodeId> walk, const EncodingConfig& config);

/// Encodings of every walk stacked walk-major: (m*(l+1)) x d_pe.
Matrix encode_walks(const Graph& g, const WalkBatch& walks, const EncodingConfig& config);

/// Walk feature matrix X_W with rows (x(w_i), z(w_i w_{i+1}), h_pe[i]).
///
/// Column layout is [node (d) | edge (d') | identity (s) | adjacency (s-1)].
/// The edge block of the last row is zero, as are padded rows. window = 0
/// selects s = l.
Matrix walk_feature_matrix(const Graph& g, std::span<const NodeId> walk, std::span<const SlotId> slots,
                           std::span<const std::uint8_t> mask, std::size_t window = 0);
Matrix walk_feature_matrix(const Graph& g, const WalkBatch& walks, std::size_t j, std::size_t window = 0);

/// d + d' + d_pe for the given walk length and window (0 = l).
std::size_t walk_feature_dim(const Graph& g, std::size_t length, std::size_t window = 0);

/// Sum of adj[2][1] over every length-2 walk (backtracking allowed).
/// Equals 6 * (number of triangles) on simple undirected graphs.
std::uint64_t count_triangle_flags(const Graph& g);

} // namespace nw
