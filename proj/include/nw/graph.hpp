#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nw {

using NodeId = std::uint32_t;
using SlotId = std::int64_t;  // edge slot index; -1 means "no edge"

inline constexpr SlotId kNoSlot = -1;

// Dense row-major matrix of f64 values.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), values(r * c, fill) {}

    std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {values.data() + i * cols, cols}; }
    double& operator()(std::size_t i, std::size_t j) { return values[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

    bool operator==(const Matrix&) const = default;
};

struct EdgeRecord {
    NodeId u = 0;
    NodeId v = 0;
    std::vector<double> features;
};

/// Attributed graph in CSR form.
///
/// Every stored adjacency position is an edge slot. Slots are sorted by
/// (source, target), so neighbors(v) is ascending. An undirected edge
/// occupies two slots with identical feature rows. Immutable once built.
class Graph {
public:
    Graph() = default;

    std::size_t num_nodes() const noexcept { return row_offsets_.empty() ? 0 : row_offsets_.size() - 1; }
    std::size_t num_slots() const noexcept { return col_indices_.size(); }
    /// Logical edge count: slots / 2 when undirected.
    std::size_t num_edges() const noexcept { return directed_ ? num_slots() : num_slots() / 2; }
    bool directed() const noexcept { return directed_; }

    std::size_t node_dim() const noexcept { return node_features_.cols; }
    std::size_t edge_dim() const noexcept { return edge_features_.cols; }

    std::span<const NodeId> neighbors(NodeId v) const;
    std::size_t degree(NodeId v) const;
    /// First slot of v's CSR row.
    std::size_t row_begin(NodeId v) const { return row_offsets_[v]; }

    /// Slot of the edge (u, v), if present. O(log degree(u)).
    std::optional<std::size_t> slot_of(NodeId u, NodeId v) const;
    bool has_edge(NodeId u, NodeId v) const { return slot_of(u, v).has_value(); }
    /// Source node of a slot.
    NodeId slot_source(std::size_t slot) const { return slot_source_[slot]; }
    NodeId slot_target(std::size_t slot) const { return col_indices_[slot]; }

    std::span<const std::size_t> row_offsets() const noexcept { return row_offsets_; }
    std::span<const NodeId> col_indices() const noexcept { return col_indices_; }
    std::span<const NodeId> slot_sources() const noexcept { return slot_source_; }
    const Matrix& node_features() const noexcept { return node_features_; }
    const Matrix& edge_features() const noexcept { return edge_features_; }

    bool operator==(const Graph&) const = default;

    friend Graph build_graph(std::span<const EdgeRecord>, Matrix, bool, std::size_t);

private:
    std::vector<std::size_t> row_offsets_;
    std::vector<NodeId> col_indices_;
    std::vector<NodeId> slot_source_;
    Matrix node_features_;
    Matrix edge_features_;
    bool directed_ = false;
};

/// Builds a CSR graph. Undirected input is mirrored into both slots.
/// edge_dim is the width of every edge feature vector (needed when edges is empty).
/// Throws DuplicateEdge, BadIndex, SelfLoop, ShapeError.
Graph build_graph(std::span<const EdgeRecord> edges, Matrix node_features, bool directed,
                  std::size_t edge_dim = 0);

/// Convenience: featureless edges, constant unit node feature (d = 1).
Graph build_graph(std::size_t n_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                  bool directed = false);

Graph load_graph(const std::filesystem::path& path);
Graph parse_graph(const std::string& text);
void save_graph(const Graph& g, const std::filesystem::path& path);
std::string format_graph(const Graph& g);

/// Undirected edge list with u < v (each logical edge once).
std::vector<std::pair<NodeId, NodeId>> undirected_edges(const Graph& g);

bool is_connected(const Graph& g);

} // namespace nw
