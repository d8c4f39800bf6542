#pragma once

// Deliberately simple references used as oracles by the tests.

#include "nw/graph.hpp"
#include "nw/walk_sampler.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

namespace nw::testing {

/// Pairwise identity / adjacency flags straight from the definitions.
/// Rows of masked positions are left zero.
inline Matrix naive_identity(std::span<const NodeId> walk, std::size_t s, std::span<const std::uint8_t> mask = {}) {
    Matrix m(walk.size(), s);
    for (std::size_t i = 0; i < walk.size(); ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        for (std::size_t j = 0; j < s; ++j) {
            if (i >= j + 1 && walk[i] == walk[i - j - 1]) {
                m(i, j) = 1.0;
            }
        }
    }
    return m;
}

inline Matrix naive_adjacency(const Graph& g, std::span<const NodeId> walk, std::size_t s,
                              std::span<const std::uint8_t> mask = {}) {
    Matrix m(walk.size(), s - 1);
    for (std::size_t i = 0; i < walk.size(); ++i) {
        if (!mask.empty() && !mask[i]) {
            continue;
        }
        for (std::size_t j = 0; j + 1 < s; ++j) {
            if (i >= j + 1) {
                const NodeId a = walk[i];
                const NodeId b = walk[i - j - 1];
                bool edge = false;
                for (auto [u, v] : undirected_edges(g)) {
                    edge = edge || (u == a && v == b) || (u == b && v == a);
                }
                if (edge) {
                    m(i, j) = 1.0;
                }
            }
        }
    }
    return m;
}

/// 1-WL with hashed multisets; colors are arbitrary ids, only the partition matters.
inline std::vector<std::uint64_t> naive_wl(const Graph& g) {
    const std::size_t n = g.num_nodes();
    std::vector<std::uint64_t> color(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        std::uint64_t h = 1469598103934665603ULL;
        for (double x : g.node_features().row(v)) {
            h = (h ^ std::hash<double>{}(x)) * 1099511628211ULL;
        }
        color[v] = h;
    }
    for (std::size_t round = 0; round < n; ++round) {
        std::vector<std::uint64_t> next(n);
        for (std::size_t v = 0; v < n; ++v) {
            std::vector<std::uint64_t> nb;
            for (NodeId u : g.neighbors(static_cast<NodeId>(v))) {
                nb.push_back(color[u]);
            }
            std::sort(nb.begin(), nb.end());
            std::uint64_t h = color[v] * 0x9E3779B97F4A7C15ULL + 17;
            for (auto c : nb) {
                h = (h ^ c) * 1099511628211ULL + 0x632BE59BD9B4E019ULL;
            }
            next[v] = h;
        }
        color = std::move(next);
    }
    return color;
}

/// True when two colorings induce the same partition of the nodes.
template <typename A, typename B>
bool same_partition(const std::vector<A>& a, const std::vector<B>& b) {
    if (a.size() != b.size()) {
        return false;
    }
    std::map<A, B> ab;
    std::map<B, A> ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        auto [it1, new1] = ab.emplace(a[i], b[i]);
        auto [it2, new2] = ba.emplace(b[i], a[i]);
        if (it1->second != b[i] || it2->second != a[i]) {
            return false;
        }
    }
    return true;
}

} // namespace nw::testing
