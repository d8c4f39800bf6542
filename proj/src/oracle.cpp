#include "nw/oracle.hpp"

#include "nw/error.hpp"
#include "nw/graph_gen.hpp"
#include "nw/walk_encoding.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <set>

namespace nw::oracle {
namespace {

struct Enumerator {
    const Graph& g;
    std::size_t length;
    bool non_backtracking;
    std::size_t limit;
    CompleteWalkSet out;
    std::vector<NodeId> nodes;
    std::vector<SlotId> slots;
    std::vector<std::uint8_t> mask;

    void emit(double p) {
        if (out.probabilities.size() >= limit) {
            fail(ErrorKind::TooLarge, "more than " + std::to_string(limit) + " walks");
        }
        out.walks.nodes.insert(out.walks.nodes.end(), nodes.begin(), nodes.end());
        out.walks.edge_slots.insert(out.walks.edge_slots.end(), slots.begin(), slots.end());
        out.walks.mask.insert(out.walks.mask.end(), mask.begin(), mask.end());
        out.probabilities.push_back(p);
    }

    void extend(std::size_t i, SlotId arrived, double p) {
        if (i == length) {
            emit(p);
            return;
        }
        const NodeId cur = nodes[i];
        const auto begin = g.row_begin(cur);
        const auto nbrs = g.neighbors(cur);
        if (nbrs.empty()) {
            for (std::size_t k = i + 1; k <= length; ++k) {
                nodes[k] = cur;
                mask[k] = 0;
            }
            for (std::size_t k = i; k < length; ++k) {
                slots[k] = kNoSlot;
            }
            emit(p);
            for (std::size_t k = i + 1; k <= length; ++k) {
                mask[k] = 1;
            }
            return;
        }
        const NodeId prev = arrived == kNoSlot ? cur : g.slot_source(static_cast<std::size_t>(arrived));
        std::size_t allowed = nbrs.size();
        if (non_backtracking && arrived != kNoSlot) {
            const auto back = static_cast<std::size_t>(std::count(nbrs.begin(), nbrs.end(), prev));
            if (back < nbrs.size()) {
                allowed -= back;
            }
        }
        const bool skip_back = non_backtracking && arrived != kNoSlot && allowed < nbrs.size();
        for (std::size_t k = 0; k < nbrs.size(); ++k) {
            if (skip_back && nbrs[k] == prev) {
                continue;
            }
            nodes[i + 1] = nbrs[k];
            slots[i] = static_cast<SlotId>(begin + k);
            extend(i + 1, slots[i], p / static_cast<double>(allowed));
        }
    }
};

std::vector<std::uint32_t> ranks(const std::vector<std::vector<double>>& signatures) {
    std::vector<std::vector<double>> sorted = signatures;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    std::vector<std::uint32_t> out(signatures.size());
    for (std::size_t v = 0; v < signatures.size(); ++v) {
        out[v] = static_cast<std::uint32_t>(std::lower_bound(sorted.begin(), sorted.end(), signatures[v]) -
                                            sorted.begin());
    }
    return out;
}

std::size_t distinct(const std::vector<std::uint32_t>& colors) {
    return std::set<std::uint32_t>(colors.begin(), colors.end()).size();
}

std::uint64_t adjacency_mask(const Graph& g, std::span<const std::size_t> perm) {
    const std::size_t n = g.num_nodes();
    std::uint64_t bits = 0;
    std::size_t bit = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j, ++bit) {
            if (g.has_edge(static_cast<NodeId>(perm[i]), static_cast<NodeId>(perm[j]))) {
                bits |= std::uint64_t{1} << bit;
            }
        }
    }
    return bits;
}

void require_small(const Graph& g) {
    if (g.num_nodes() > 8) {
        fail(ErrorKind::TooLarge, "brute-force isomorphism is limited to 8 nodes");
    }
}

} // namespace

CompleteWalkSet enumerate_walks(const Graph& g, std::size_t length, bool non_backtracking, std::size_t limit) {
    if (g.num_nodes() == 0) {
        fail(ErrorKind::BadIndex, "empty graph");
    }
    Enumerator e{g, length, non_backtracking, limit, {}, std::vector<NodeId>(length + 1),
                 std::vector<SlotId>(length, kNoSlot), std::vector<std::uint8_t>(length + 1, 1)};
    e.out.walks.length = length;
    const double p0 = 1.0 / static_cast<double>(g.num_nodes());
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        e.nodes[0] = v;
        e.extend(0, kNoSlot, p0);
    }
    e.out.walks.num_walks = e.out.probabilities.size();
    return std::move(e.out);
}

double exact_expectation(const Graph& g, std::size_t length, bool non_backtracking, const WalkFunctional& f,
                         std::size_t window) {
    const CompleteWalkSet set = enumerate_walks(g, length, non_backtracking);
    double total = 0.0;
    for (std::size_t j = 0; j < set.walks.num_walks; ++j) {
        total += set.probabilities[j] * f(walk_feature_matrix(g, set.walks, j, window));
    }
    return total;
}

WLColoring wl_refinement(const Graph& g, std::size_t max_rounds) {
    const std::size_t n = g.num_nodes();
    std::vector<std::vector<double>> sig(n);
    for (std::size_t v = 0; v < n; ++v) {
        const auto row = g.node_features().row(v);
        sig[v].assign(row.begin(), row.end());
    }
    WLColoring out;
    out.rounds.push_back(ranks(sig));
    for (std::size_t r = 0; r < std::min(max_rounds, n); ++r) {
        const auto& prev = out.rounds.back();
        for (std::size_t v = 0; v < n; ++v) {
            std::vector<double> nb;
            for (NodeId u : g.neighbors(static_cast<NodeId>(v))) {
                nb.push_back(prev[u]);
            }
            std::sort(nb.begin(), nb.end());
            sig[v].assign(1, prev[v]);
            sig[v].insert(sig[v].end(), nb.begin(), nb.end());
        }
        auto next = ranks(sig);
        const bool stable = distinct(next) == distinct(prev);
        out.rounds.push_back(std::move(next));
        if (stable) {
            break;
        }
    }
    out.colors = out.rounds.back();
    for (auto c : out.colors) {
        ++out.histogram[c];
    }
    return out;
}

std::vector<std::map<std::uint32_t, std::size_t>> wl_histograms(std::span<const Graph* const> graphs) {
    const GraphBatch batch = make_batch(graphs);
    const WLColoring joint = wl_refinement(batch.merged);
    std::vector<std::map<std::uint32_t, std::size_t>> out(graphs.size());
    for (std::size_t v = 0; v < joint.colors.size(); ++v) {
        ++out[static_cast<std::size_t>(batch.node_graph[v])][joint.colors[v]];
    }
    return out;
}

bool wl_indistinguishable(const Graph& a, const Graph& b) {
    const Graph* both[] = {&a, &b};
    const auto h = wl_histograms(both);
    return h[0] == h[1];
}

Witness separation_witness(const Graph& a, const Graph& b, std::size_t length, bool non_backtracking) {
    const std::size_t window = length + 1;
    auto moments = [&](const Graph& g) {
        const CompleteWalkSet set = enumerate_walks(g, length, non_backtracking);
        std::vector<double> acc;
        for (std::size_t j = 0; j < set.walks.num_walks; ++j) {
            const Matrix x = walk_feature_matrix(g, set.walks, j, window);
            if (acc.empty()) {
                acc.assign(2 * x.cols + x.rows * x.cols, 0.0);
            }
            const double p = set.probabilities[j];
            for (std::size_t c = 0; c < x.cols; ++c) {
                double s1 = 0.0;
                double s2 = 0.0;
                for (std::size_t i = 0; i < x.rows; ++i) {
                    s1 += x(i, c);
                    s2 += x(i, c) * x(i, c);
                    acc[2 * x.cols + i * x.cols + c] += p * x(i, c);
                }
                acc[c] += p * s1 / static_cast<double>(x.rows);
                acc[x.cols + c] += p * s2 / static_cast<double>(x.rows);
            }
        }
        return acc;
    };
    if (a.node_dim() != b.node_dim() || a.edge_dim() != b.edge_dim()) {
        fail(ErrorKind::ShapeError, "graphs carry features of different widths");
    }
    const auto ma = moments(a);
    const auto mb = moments(b);
    const std::size_t cols = walk_feature_dim(a, length, window);
    const std::size_t d = a.node_dim();
    const std::size_t de = a.edge_dim();
    auto column = [&](std::size_t c) {
        if (c < d) {
            return "node" + std::to_string(c);
        }
        if (c < d + de) {
            return "edge" + std::to_string(c - d);
        }
        if (c < d + de + window) {
            return "id" + std::to_string(c - d - de);
        }
        return "adj" + std::to_string(c - d - de - window);
    };
    Witness w;
    for (std::size_t k = 0; k < ma.size(); ++k) {
        const double gap = std::abs(ma[k] - mb[k]);
        if (gap > w.gap) {
            w.gap = gap;
            w.value_a = ma[k];
            w.value_b = mb[k];
            if (k < cols) {
                w.functional = "mean[" + column(k) + "]";
            } else if (k < 2 * cols) {
                w.functional = "second_moment[" + column(k - cols) + "]";
            } else {
                const std::size_t e = k - 2 * cols;
                w.functional = "entry[" + std::to_string(e / cols) + "," + column(e % cols) + "]";
            }
        }
    }
    return w;
}

std::uint64_t triangle_count(const Graph& g) {
    const NodeId n = static_cast<NodeId>(g.num_nodes());
    std::uint64_t count = 0;
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j = i + 1; j < n; ++j) {
            if (!g.has_edge(i, j)) {
                continue;
            }
            for (NodeId k = j + 1; k < n; ++k) {
                if (g.has_edge(j, k) && g.has_edge(i, k)) {
                    ++count;
                }
            }
        }
    }
    return count;
}

bool isomorphic(const Graph& a, const Graph& b) {
    require_small(a);
    if (a.num_nodes() != b.num_nodes() || a.num_slots() != b.num_slots() || a.directed() != b.directed() ||
        a.node_dim() != b.node_dim()) {
        return false;
    }
    const std::size_t n = a.num_nodes();
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), NodeId{0});
    do {
        bool ok = true;
        for (NodeId v = 0; v < n && ok; ++v) {
            const auto fa = a.node_features().row(v);
            const auto fb = b.node_features().row(perm[v]);
            ok = std::equal(fa.begin(), fa.end(), fb.begin(), fb.end());
            for (NodeId u : a.neighbors(v)) {
                if (!ok) {
                    break;
                }
                ok = b.has_edge(perm[v], perm[u]);
            }
        }
        if (ok) {
            return true;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));
    return false;
}

std::uint64_t canonical_form(const Graph& g) {
    require_small(g);
    std::vector<std::size_t> perm(g.num_nodes());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::uint64_t best = ~std::uint64_t{0};
    do {
        best = std::min(best, adjacency_mask(g, perm));
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

std::vector<Graph> connected_graphs(std::size_t n) {
    if (n == 0 || n > 6) {
        fail(ErrorKind::TooLarge, "connected graph enumeration supports 1..6 nodes");
    }
    std::vector<std::pair<NodeId, NodeId>> pairs;
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j = i + 1; j < n; ++j) {
            pairs.emplace_back(i, j);
        }
    }
    std::set<std::uint64_t> seen;
    std::vector<Graph> out;
    for (std::uint64_t subset = 0; subset < (std::uint64_t{1} << pairs.size()); ++subset) {
        if (std::popcount(subset) + 1 < static_cast<int>(n)) {
            continue;
        }
        std::vector<std::pair<NodeId, NodeId>> edges;
        for (std::size_t k = 0; k < pairs.size(); ++k) {
            if (subset >> k & 1U) {
                edges.push_back(pairs[k]);
            }
        }
        Graph g = build_graph(n, edges);
        if (!is_connected(g)) {
            continue;
        }
        if (seen.insert(canonical_form(g)).second) {
            out.push_back(std::move(g));
        }
    }
    return out;
}

} // namespace nw::oracle
