#include "nw/graph.hpp"

#include "nw/error.hpp"

#include <algorithm>
#include <numeric>
#include <queue>

namespace nw {

std::span<const NodeId> Graph::neighbors(NodeId v) const {
    if (v >= num_nodes()) {
        fail(ErrorKind::BadIndex, "node " + std::to_string(v) + " out of range");
    }
    return {col_indices_.data() + row_offsets_[v], row_offsets_[v + 1] - row_offsets_[v]};
}

std::size_t Graph::degree(NodeId v) const {
    if (v >= num_nodes()) {
        fail(ErrorKind::BadIndex, "node " + std::to_string(v) + " out of range");
    }
    return row_offsets_[v + 1] - row_offsets_[v];
}

std::optional<std::size_t> Graph::slot_of(NodeId u, NodeId v) const {
    if (u >= num_nodes() || v >= num_nodes()) {
        return std::nullopt;
    }
    const auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[u]);
    const auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[u + 1]);
    const auto it = std::lower_bound(begin, end, v);
    if (it == end || *it != v) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - col_indices_.begin());
}

Graph build_graph(std::span<const EdgeRecord> edges, Matrix node_features, bool directed,
                  std::size_t edge_dim) {
    const std::size_t n = node_features.rows;
    if (node_features.values.size() != node_features.rows * node_features.cols) {
        fail(ErrorKind::ShapeError, "node feature matrix has inconsistent size");
    }

    struct Slot {
        NodeId src;
        NodeId dst;
        std::size_t record;
    };
    std::vector<Slot> slots;
    slots.reserve(directed ? edges.size() : 2 * edges.size());
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto& e = edges[i];
        if (e.u >= n || e.v >= n) {
            fail(ErrorKind::BadIndex, "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                          ") references a node >= " + std::to_string(n));
        }
        if (e.u == e.v) {
            fail(ErrorKind::SelfLoop, "self-loop at node " + std::to_string(e.u));
        }
        if (e.features.size() != edge_dim) {
            fail(ErrorKind::ShapeError, "edge feature width " + std::to_string(e.features.size()) +
                                            " != " + std::to_string(edge_dim));
        }
        slots.push_back({e.u, e.v, i});
        if (!directed) {
            slots.push_back({e.v, e.u, i});
        }
    }
    std::sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
        return a.src != b.src ? a.src < b.src : a.dst < b.dst;
    });
    for (std::size_t i = 1; i < slots.size(); ++i) {
        if (slots[i].src == slots[i - 1].src && slots[i].dst == slots[i - 1].dst) {
            fail(ErrorKind::DuplicateEdge, "duplicate edge (" + std::to_string(slots[i].src) + "," +
                                               std::to_string(slots[i].dst) + ")");
        }
    }

    Graph g;
    g.directed_ = directed;
    g.row_offsets_.assign(n + 1, 0);
    g.col_indices_.resize(slots.size());
    g.slot_source_.resize(slots.size());
    g.edge_features_ = Matrix(slots.size(), edge_dim);
    for (std::size_t s = 0; s < slots.size(); ++s) {
        g.row_offsets_[slots[s].src + 1] += 1;
        g.col_indices_[s] = slots[s].dst;
        g.slot_source_[s] = slots[s].src;
        const auto& f = edges[slots[s].record].features;
        std::copy(f.begin(), f.end(), g.edge_features_.row(s).begin());
    }
    std::partial_sum(g.row_offsets_.begin(), g.row_offsets_.end(), g.row_offsets_.begin());
    g.node_features_ = std::move(node_features);
    return g;
}

Graph build_graph(std::size_t n_nodes, std::span<const std::pair<NodeId, NodeId>> edges, bool directed) {
    std::vector<EdgeRecord> records;
    records.reserve(edges.size());
    for (const auto& [u, v] : edges) {
        records.push_back({u, v, {}});
    }
    return build_graph(records, Matrix(n_nodes, 1, 1.0), directed, 0);
}

std::vector<std::pair<NodeId, NodeId>> undirected_edges(const Graph& g) {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
        for (NodeId v : g.neighbors(u)) {
            if (g.directed() || u < v) {
                out.emplace_back(u, v);
            }
        }
    }
    return out;
}

bool is_connected(const Graph& g) {
    const std::size_t n = g.num_nodes();
    if (n <= 1) {
        return true;
    }
    // Weak connectivity: follow slots in both directions.
    std::vector<std::vector<NodeId>> reverse;
    if (g.directed()) {
        reverse.resize(n);
        for (std::size_t s = 0; s < g.num_slots(); ++s) {
            reverse[g.slot_target(s)].push_back(g.slot_source(s));
        }
    }
    std::vector<char> seen(n, 0);
    std::queue<NodeId> frontier;
    frontier.push(0);
    seen[0] = 1;
    std::size_t count = 1;
    auto visit = [&](NodeId w) {
        if (!seen[w]) {
            seen[w] = 1;
            ++count;
            frontier.push(w);
        }
    };
    while (!frontier.empty()) {
        const NodeId v = frontier.front();
        frontier.pop();
        for (NodeId w : g.neighbors(v)) {
            visit(w);
        }
        if (g.directed()) {
            for (NodeId w : reverse[v]) {
                visit(w);
            }
        }
    }
    return count == n;
}

} // namespace nw
