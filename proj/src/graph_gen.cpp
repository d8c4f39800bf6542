#include "nw/graph_gen.hpp"

#include "nw/error.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_set>

namespace nw {
namespace {

using EdgeList = std::vector<std::pair<NodeId, NodeId>>;

NodeId id(std::size_t v) { return static_cast<NodeId>(v); }

} // namespace

Graph complete_graph(std::size_t n) {
    EdgeList edges;
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = u + 1; v < n; ++v) {
            edges.emplace_back(id(u), id(v));
        }
    }
    return build_graph(n, edges);
}

Graph cycle_graph(std::size_t n) {
    if (n < 3) {
        fail(ErrorKind::BadIndex, "cycle needs at least 3 nodes");
    }
    EdgeList edges;
    for (std::size_t v = 0; v < n; ++v) {
        edges.emplace_back(id(v), id((v + 1) % n));
    }
    return build_graph(n, edges);
}

Graph path_graph(std::size_t n) {
    EdgeList edges;
    for (std::size_t v = 0; v + 1 < n; ++v) {
        edges.emplace_back(id(v), id(v + 1));
    }
    return build_graph(n, edges);
}

Graph star_graph(std::size_t n_leaves) {
    EdgeList edges;
    for (std::size_t v = 1; v <= n_leaves; ++v) {
        edges.emplace_back(0, id(v));
    }
    return build_graph(n_leaves + 1, edges);
}

Graph erdos_renyi(std::size_t n, double p, Engine& rng) {
    EdgeList edges;
    std::bernoulli_distribution coin(p);
    for (std::size_t u = 0; u < n; ++u) {
        for (std::size_t v = u + 1; v < n; ++v) {
            if (coin(rng)) {
                edges.emplace_back(id(u), id(v));
            }
        }
    }
    return build_graph(n, edges);
}

Graph random_regular(std::size_t n, std::size_t d, std::uint64_t seed) {
    if ((n * d) % 2 != 0 || d >= n) {
        fail(ErrorKind::BadIndex, "random_regular: need n*d even and d < n");
    }
    Engine rng(seed);
    auto key = [n](std::size_t a, std::size_t b) {
        return a < b ? a * n + b : b * n + a;
    };
    for (int attempt = 0; attempt < 100; ++attempt) {
        std::vector<NodeId> stubs;
        stubs.reserve(n * d);
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t k = 0; k < d; ++k) {
                stubs.push_back(id(v));
            }
        }
        std::unordered_set<std::size_t> present;
        present.reserve(n * d);
        EdgeList edges;
        edges.reserve(n * d / 2);
        bool stuck = false;
        // Pair two random open stubs at a time; conflicting draws are retried.
        while (!stubs.empty() && !stuck) {
            bool placed = false;
            for (int tries = 0; tries < 200 && !placed; ++tries) {
                const std::size_t i = uniform_index(rng, stubs.size());
                const std::size_t j = uniform_index(rng, stubs.size());
                const NodeId a = stubs[i];
                const NodeId b = stubs[j];
                if (i == j || a == b || present.count(key(a, b))) {
                    continue;
                }
                present.insert(key(a, b));
                edges.emplace_back(a, b);
                const std::size_t hi = std::max(i, j);
                const std::size_t lo = std::min(i, j);
                stubs[hi] = stubs.back();
                stubs.pop_back();
                stubs[lo] = stubs.back();
                stubs.pop_back();
                placed = true;
            }
            stuck = !placed;
        }
        if (!stuck) {
            return build_graph(n, edges);
        }
    }
    fail(ErrorKind::TooLarge, "random_regular: pairing did not converge");
}

Graph relabel(const Graph& g, std::span<const NodeId> perm) {
    const std::size_t n = g.num_nodes();
    if (perm.size() != n) {
        fail(ErrorKind::ShapeError, "relabel: permutation size mismatch");
    }
    Matrix nodes(n, g.node_dim());
    for (std::size_t v = 0; v < n; ++v) {
        const auto src = g.node_features().row(v);
        std::copy(src.begin(), src.end(), nodes.row(perm[v]).begin());
    }
    std::vector<EdgeRecord> edges;
    for (std::size_t s = 0; s < g.num_slots(); ++s) {
        const NodeId u = g.slot_source(s);
        const NodeId v = g.slot_target(s);
        if (!g.directed() && u > v) {
            continue;
        }
        const auto f = g.edge_features().row(s);
        edges.push_back({perm[u], perm[v], std::vector<double>(f.begin(), f.end())});
    }
    return build_graph(edges, std::move(nodes), g.directed(), g.edge_dim());
}

GraphBatch make_batch(std::span<const Graph* const> graphs) {
    GraphBatch batch;
    batch.node_offsets.push_back(0);
    batch.slot_offsets.push_back(0);
    if (graphs.empty()) {
        batch.merged = build_graph(0, EdgeList{});
        return batch;
    }
    const std::size_t d = graphs.front()->node_dim();
    const std::size_t de = graphs.front()->edge_dim();
    const bool directed = graphs.front()->directed();
    std::size_t total_nodes = 0;
    for (const Graph* g : graphs) {
        if (g->node_dim() != d || g->edge_dim() != de || g->directed() != directed) {
            fail(ErrorKind::ShapeError, "make_batch: graphs disagree on feature widths or directedness");
        }
        total_nodes += g->num_nodes();
    }
    Matrix nodes(total_nodes, d);
    std::vector<EdgeRecord> edges;
    std::size_t offset = 0;
    for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
        const Graph& g = *graphs[gi];
        for (std::size_t v = 0; v < g.num_nodes(); ++v) {
            const auto src = g.node_features().row(v);
            std::copy(src.begin(), src.end(), nodes.row(offset + v).begin());
            batch.node_graph.push_back(static_cast<std::int64_t>(gi));
        }
        for (std::size_t s = 0; s < g.num_slots(); ++s) {
            const NodeId u = g.slot_source(s);
            const NodeId v = g.slot_target(s);
            if (!directed && u > v) {
                continue;
            }
            const auto f = g.edge_features().row(s);
            edges.push_back({id(u + offset), id(v + offset), std::vector<double>(f.begin(), f.end())});
        }
        offset += g.num_nodes();
        batch.node_offsets.push_back(offset);
        batch.slot_offsets.push_back(batch.slot_offsets.back() + g.num_slots());
    }
    batch.merged = build_graph(edges, std::move(nodes), directed, de);
    return batch;
}

GraphBatch make_batch(const Graph& g) {
    const Graph* one[] = {&g};
    return make_batch(std::span<const Graph* const>(one));
}

} // namespace nw
