#pragma once

#include "nw/graph.hpp"
#include "nw/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace nw {

// Small named graphs, undirected, unit node features, no edge features.
Graph complete_graph(std::size_t n);
Graph cycle_graph(std::size_t n);
Graph path_graph(std::size_t n);
/// Star with center 0 and n_leaves leaves 1..n_leaves.
Graph star_graph(std::size_t n_leaves);
Graph erdos_renyi(std::size_t n, double p, Engine& rng);
/// Random simple d-regular graph (pairing with retry on conflict). n*d must be even.
Graph random_regular(std::size_t n, std::size_t d, std::uint64_t seed);

/// Relabels nodes: node v of g becomes perm[v]. Features move with their nodes.
Graph relabel(const Graph& g, std::span<const NodeId> perm);

/// Disjoint union of graphs plus the bookkeeping needed to pool per graph.
struct GraphBatch {
    Graph merged;
    std::vector<std::size_t> node_offsets;  // length n_graphs + 1
    std::vector<std::size_t> slot_offsets;  // length n_graphs + 1
    std::vector<std::int64_t> node_graph;   // graph id of each merged node

    std::size_t num_graphs() const noexcept { return node_offsets.size() - 1; }
};

GraphBatch make_batch(std::span<const Graph* const> graphs);
GraphBatch make_batch(const Graph& g);

} // namespace nw
