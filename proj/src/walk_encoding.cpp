#include "nw/walk_encoding.hpp"

#include "nw/error.hpp"

#include <algorithm>
#include <array>

namespace nw {
namespace {

// Writes id (s cols) and adj (s-1 cols) rows for one walk into raw buffers.
void fill_encodings(const Graph& g, std::span<const NodeId> walk, std::span<const std::uint8_t> mask,
                    std::size_t s, double* id, std::size_t id_stride, double* adj, std::size_t adj_stride) {
    const std::size_t positions = walk.size();
    for (std::size_t i = 0; i < positions; ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        const NodeId wi = walk[i];
        const std::size_t reach = std::min(s, i);  // j <= i-1
        for (std::size_t j = 0; j < reach; ++j) {
            const NodeId earlier = walk[i - j - 1];
            if (id != nullptr && wi == earlier) {
                id[i * id_stride + j] = 1.0;
            }
            if (adj != nullptr && j + 1 < s && g.has_edge(wi, earlier)) {
                adj[i * adj_stride + j] = 1.0;
            }
        }
    }
}

void check_walk(const Graph& g, std::span<const NodeId> walk, std::span<const std::uint8_t> mask) {
    if (!mask.empty() && mask.size() != walk.size()) {
        fail(ErrorKind::ShapeError, "walk and mask lengths differ");
    }
    for (NodeId v : walk) {
        if (v >= g.num_nodes()) {
            fail(ErrorKind::BadIndex, "walk node " + std::to_string(v) + " out of range");
        }
    }
}

} // namespace

Matrix WalkPE::concat(const EncodingConfig& config) const {
    const std::size_t rows = id.rows;
    const std::size_t id_cols = config.identity ? id.cols : 0;
    const std::size_t adj_cols = config.adjacency ? adj.cols : 0;
    Matrix out(rows, id_cols + adj_cols);
    for (std::size_t i = 0; i < rows; ++i) {
        auto dst = out.row(i);
        if (id_cols) {
            std::copy_n(id.row(i).begin(), id_cols, dst.begin());
        }
        if (adj_cols) {
            std::copy_n(adj.row(i).begin(), adj_cols, dst.begin() + static_cast<std::ptrdiff_t>(id_cols));
        }
    }
    return out;
}

WalkPE encode_walk(const Graph& g, std::span<const NodeId> walk, std::span<const std::uint8_t> mask,
                   const EncodingConfig& config) {
    const std::size_t s = config.window;
    if (s == 0) {
        fail(ErrorKind::BadWindow, "encoding window must be >= 1");
    }
    check_walk(g, walk, mask);
    WalkPE pe{Matrix(walk.size(), s), Matrix(walk.size(), s - 1)};
    fill_encodings(g, walk, mask, s, pe.id.values.data(), s, pe.adj.values.data(), s - 1);
    return pe;
}

WalkPE encode_walk(const Graph& g, std::span<const NodeId> walk, const EncodingConfig& config) {
    return encode_walk(g, walk, {}, config);
}

Matrix encode_walks(const Graph& g, const WalkBatch& walks, const EncodingConfig& config) {
    const std::size_t s = config.window;
    if (s == 0) {
        fail(ErrorKind::BadWindow, "encoding window must be >= 1");
    }
    const std::size_t positions = walks.positions();
    const std::size_t d_pe = config.pe_dim();
    const std::size_t id_cols = config.identity ? s : 0;
    Matrix out(walks.num_walks * positions, d_pe);
    for (std::size_t j = 0; j < walks.num_walks; ++j) {
        double* base = out.values.data() + j * positions * d_pe;
        check_walk(g, walks.walk(j), walks.walk_mask(j));
        fill_encodings(g, walks.walk(j), walks.walk_mask(j), s, config.identity ? base : nullptr, d_pe,
                       config.adjacency ? base + id_cols : nullptr, d_pe);
    }
    return out;
}

std::size_t walk_feature_dim(const Graph& g, std::size_t length, std::size_t window) {
    const std::size_t s = window == 0 ? length : window;
    return g.node_dim() + g.edge_dim() + s + (s - 1);
}

Matrix walk_feature_matrix(const Graph& g, std::span<const NodeId> walk, std::span<const SlotId> slots,
                           std::span<const std::uint8_t> mask, std::size_t window) {
    if (walk.empty()) {
        fail(ErrorKind::ShapeError, "empty walk");
    }
    const std::size_t length = walk.size() - 1;
    if (slots.size() != length) {
        fail(ErrorKind::ShapeError, "walk needs one slot per step");
    }
    const EncodingConfig config{window == 0 ? length : window, true, true};
    if (config.window == 0) {
        fail(ErrorKind::BadWindow, "walk of length 0 has no Def-1 window");
    }
    const WalkPE pe = encode_walk(g, walk, mask, config);
    const std::size_t d = g.node_dim();
    const std::size_t de = g.edge_dim();
    const std::size_t s = config.window;
    Matrix x(walk.size(), d + de + s + (s - 1));
    for (std::size_t i = 0; i < walk.size(); ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        auto row = x.row(i);
        const auto node = g.node_features().row(walk[i]);
        std::copy(node.begin(), node.end(), row.begin());
        if (i < length && slots[i] != kNoSlot) {
            const auto edge = g.edge_features().row(static_cast<std::size_t>(slots[i]));
            std::copy(edge.begin(), edge.end(), row.begin() + static_cast<std::ptrdiff_t>(d));
        }
        std::copy(pe.id.row(i).begin(), pe.id.row(i).end(), row.begin() + static_cast<std::ptrdiff_t>(d + de));
        std::copy(pe.adj.row(i).begin(), pe.adj.row(i).end(),
                  row.begin() + static_cast<std::ptrdiff_t>(d + de + s));
    }
    return x;
}

Matrix walk_feature_matrix(const Graph& g, const WalkBatch& walks, std::size_t j, std::size_t window) {
    return walk_feature_matrix(g, walks.walk(j), walks.walk_slots(j), walks.walk_mask(j), window);
}

std::uint64_t count_triangle_flags(const Graph& g) {
    const EncodingConfig config{3, false, true};
    std::uint64_t flags = 0;
    std::array<NodeId, 3> walk{};
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        walk[0] = u;
        for (NodeId v : g.neighbors(u)) {
            walk[1] = v;
            for (NodeId w : g.neighbors(v)) {
                walk[2] = w;
                const WalkPE pe = encode_walk(g, walk, config);
                flags += pe.adj(2, 1) != 0.0 ? 1 : 0;
            }
        }
    }
    return flags;
}

} // namespace nw
