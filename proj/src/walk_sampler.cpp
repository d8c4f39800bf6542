#include "nw/walk_sampler.hpp"

#include "nw/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

namespace nw {
namespace {

constexpr std::uint64_t kStartStream = 0x5354415254ULL;  // "START"

void check_length(std::size_t length) {
    if (length == 0) {
        fail(ErrorKind::BadLength, "walk length must be >= 1");
    }
}

// Fills one walk in place from its start node.
void run_walk(const Graph& g, NodeId start, std::size_t length, bool non_backtracking, WalkEngine& rng,
              NodeId* nodes, SlotId* slots, std::uint8_t* mask) {
    nodes[0] = start;
    mask[0] = 1;
    NodeId current = start;
    SlotId previous = kNoSlot;
    bool stuck = false;
    for (std::size_t i = 1; i <= length; ++i) {
        if (!stuck) {
            const Step step = transition(g, current, previous, non_backtracking, rng);
            if (step.slot == kNoSlot) {
                stuck = true;
            } else {
                slots[i - 1] = step.slot;
                current = step.node;
                previous = step.slot;
                nodes[i] = current;
                mask[i] = 1;
                continue;
            }
        }
        slots[i - 1] = kNoSlot;
        nodes[i] = current;
        mask[i] = 0;
    }
}

WalkBatch allocate(std::size_t m, std::size_t length) {
    WalkBatch batch;
    batch.num_walks = m;
    batch.length = length;
    batch.nodes.assign(m * (length + 1), 0);
    batch.edge_slots.assign(m * length, kNoSlot);
    batch.mask.assign(m * (length + 1), 0);
    return batch;
}

// Runs body(j) for j in [0, m) on up to `threads` workers over disjoint ranges.
template <typename Body>
void parallel_walks(std::size_t m, unsigned threads, Body&& body) {
    const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(threads, m / 1024 + 1));
    if (workers == 1) {
        for (std::size_t j = 0; j < m; ++j) {
            body(j);
        }
        return;
    }
    std::vector<std::jthread> pool;
    const std::size_t chunk = (m + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(m, begin + chunk);
        pool.emplace_back([begin, end, &body] {
            for (std::size_t j = begin; j < end; ++j) {
                body(j);
            }
        });
    }
}

std::vector<NodeId> draw_starts_range(const Graph& g, std::size_t begin, std::size_t end, std::size_t m,
                                      StartDistribution dist, std::uint64_t seed) {
    const std::size_t n = end - begin;
    if (m > n) {
        fail(ErrorKind::TooManyWalks, "requested " + std::to_string(m) + " walks on " + std::to_string(n) +
                                          " nodes; start nodes are drawn without replacement");
    }
    Engine rng(child_seed(seed, kStartStream));
    std::vector<NodeId> order(n);
    std::iota(order.begin(), order.end(), static_cast<NodeId>(begin));
    if (dist == StartDistribution::uniform) {
        std::shuffle(order.begin(), order.end(), rng);
    } else {
        // Efraimidis-Spirakis: largest log(u)/w wins; weight-0 nodes go last.
        std::vector<double> key(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            const double w = static_cast<double>(g.degree(order[i]));
            key[i] = w > 0.0 ? std::log(u) / w : -std::numeric_limits<double>::infinity();
        }
        std::vector<std::size_t> idx(n);
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return key[a] > key[b]; });
        std::vector<NodeId> sorted(n);
        for (std::size_t i = 0; i < n; ++i) {
            sorted[i] = order[idx[i]];
        }
        order = std::move(sorted);
    }
    order.resize(m);
    return order;
}

} // namespace

std::size_t SamplerConfig::num_walks(std::size_t n_nodes) const {
    if (count) {
        return *count;
    }
    if (!(rate > 0.0) || rate > 1.0) {
        fail(ErrorKind::BadRate, "sampling rate must be in (0, 1]");
    }
    const auto m = static_cast<std::size_t>(std::llround(rate * static_cast<double>(n_nodes)));
    return std::max<std::size_t>(1, m);
}

std::vector<NodeId> WalkBatch::start_nodes() const {
    std::vector<NodeId> out(num_walks);
    for (std::size_t j = 0; j < num_walks; ++j) {
        out[j] = start_node(j);
    }
    return out;
}

Step transition(const Graph& g, NodeId current, SlotId previous_slot, bool non_backtracking, WalkEngine& rng) {
    const auto nbrs = g.neighbors(current);
    const std::size_t deg = nbrs.size();
    const std::size_t row = g.row_begin(current);
    if (deg == 0) {
        return {current, kNoSlot};
    }
    if (!non_backtracking || previous_slot == kNoSlot || deg == 1) {
        // deg == 1 under non-backtracking is a dead end: fall back to the only neighbor.
        const std::size_t r = deg == 1 ? 0 : uniform_index(rng, deg);
        return {nbrs[r], static_cast<SlotId>(row + r)};
    }
    const NodeId prev = g.slot_source(static_cast<std::size_t>(previous_slot));
    const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), prev);
    if (it == nbrs.end() || *it != prev) {
        // Directed graph without a reverse edge: nothing to exclude.
        const std::size_t r = uniform_index(rng, deg);
        return {nbrs[r], static_cast<SlotId>(row + r)};
    }
    const auto excluded = static_cast<std::size_t>(it - nbrs.begin());
    std::size_t r = uniform_index(rng, deg - 1);
    if (r >= excluded) {
        ++r;
    }
    return {nbrs[r], static_cast<SlotId>(row + r)};
}

std::vector<NodeId> draw_start_nodes(const Graph& g, std::size_t m, StartDistribution dist, std::uint64_t seed) {
    return draw_starts_range(g, 0, g.num_nodes(), m, dist, seed);
}

WalkBatch sample_walks_from(const Graph& g, std::span<const NodeId> starts, const SamplerConfig& config) {
    check_length(config.length);
    const std::size_t m = starts.size();
    const std::size_t len = config.length;
    WalkBatch batch = allocate(m, len);
    for (NodeId s : starts) {
        if (s >= g.num_nodes()) {
            fail(ErrorKind::BadIndex, "start node " + std::to_string(s) + " out of range");
        }
    }
    parallel_walks(m, config.threads, [&](std::size_t j) {
        WalkEngine rng(child_seed(config.seed, j));
        run_walk(g, starts[j], len, config.non_backtracking, rng, batch.nodes.data() + j * (len + 1),
                 batch.edge_slots.data() + j * len, batch.mask.data() + j * (len + 1));
    });
    return batch;
}

WalkBatch sample_walks(const Graph& g, const SamplerConfig& config) {
    if (g.num_nodes() == 0) {
        fail(ErrorKind::BadIndex, "cannot sample walks on an empty graph");
    }
    check_length(config.length);
    const std::size_t m = config.num_walks(g.num_nodes());
    const auto starts = draw_start_nodes(g, m, config.start, config.seed);
    return sample_walks_from(g, starts, config);
}

WalkBatch sample_walks_iid(const Graph& g, const SamplerConfig& config, std::size_t count) {
    if (g.num_nodes() == 0) {
        fail(ErrorKind::BadIndex, "cannot sample walks on an empty graph");
    }
    check_length(config.length);
    const std::size_t len = config.length;
    WalkBatch batch = allocate(count, len);
    std::vector<double> cumulative;
    if (config.start == StartDistribution::stationary) {
        const auto pi = stationary_distribution(g);
        cumulative.resize(pi.size());
        std::partial_sum(pi.begin(), pi.end(), cumulative.begin());
    }
    const auto by_degree = [&](WalkEngine& rng) {
        const double u = uniform_real(rng, 0.0, cumulative.back());
        const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        return static_cast<NodeId>(std::min<std::size_t>(it - cumulative.begin(), cumulative.size() - 1));
    };
    parallel_walks(count, config.threads, [&](std::size_t j) {
        WalkEngine rng(child_seed(config.seed, j));
        const NodeId start = config.start == StartDistribution::uniform
                                 ? static_cast<NodeId>(uniform_index(rng, g.num_nodes()))
                                 : by_degree(rng);
        run_walk(g, start, len, config.non_backtracking, rng, batch.nodes.data() + j * (len + 1),
                 batch.edge_slots.data() + j * len, batch.mask.data() + j * (len + 1));
    });
    return batch;
}

WalkBatch sample_walks_batched(const GraphBatch& batch, const SamplerConfig& config,
                               std::span<const std::uint64_t> seeds) {
    check_length(config.length);
    if (seeds.size() != batch.num_graphs()) {
        fail(ErrorKind::ShapeError, "sample_walks_batched: one seed per graph required");
    }
    const Graph& g = batch.merged;
    std::vector<NodeId> starts;
    std::vector<std::uint64_t> walk_seeds;
    for (std::size_t gi = 0; gi < batch.num_graphs(); ++gi) {
        const std::size_t begin = batch.node_offsets[gi];
        const std::size_t end = batch.node_offsets[gi + 1];
        if (begin == end) {
            continue;
        }
        const std::uint64_t graph_seed = child_seed(config.seed, seeds[gi]);
        const std::size_t m = config.num_walks(end - begin);
        const auto s = draw_starts_range(g, begin, end, m, config.start, graph_seed);
        for (std::size_t j = 0; j < m; ++j) {
            starts.push_back(s[j]);
            walk_seeds.push_back(child_seed(graph_seed, j));
        }
    }
    const std::size_t len = config.length;
    WalkBatch out = allocate(starts.size(), len);
    parallel_walks(starts.size(), config.threads, [&](std::size_t j) {
        WalkEngine rng(walk_seeds[j]);
        run_walk(g, starts[j], len, config.non_backtracking, rng, out.nodes.data() + j * (len + 1),
                 out.edge_slots.data() + j * len, out.mask.data() + j * (len + 1));
    });
    return out;
}

WalkBatch concat_walks(std::span<const WalkBatch> parts) {
    WalkBatch out;
    if (parts.empty()) {
        return out;
    }
    out.length = parts.front().length;
    for (const auto& p : parts) {
        if (p.length != out.length) {
            fail(ErrorKind::ShapeError, "concat_walks: walk lengths differ");
        }
        out.num_walks += p.num_walks;
        out.nodes.insert(out.nodes.end(), p.nodes.begin(), p.nodes.end());
        out.edge_slots.insert(out.edge_slots.end(), p.edge_slots.begin(), p.edge_slots.end());
        out.mask.insert(out.mask.end(), p.mask.begin(), p.mask.end());
    }
    return out;
}

CoverageStats coverage(const Graph& g, const WalkBatch& walks) {
    CoverageStats stats;
    stats.visit_counts.assign(g.num_nodes(), 0);
    for (std::size_t k = 0; k < walks.nodes.size(); ++k) {
        if (walks.mask[k]) {
            stats.visit_counts[walks.nodes[k]] += 1;
        }
    }
    const auto visited = std::count_if(stats.visit_counts.begin(), stats.visit_counts.end(),
                                       [](std::uint64_t c) { return c > 0; });
    stats.visited_fraction =
        g.num_nodes() == 0 ? 0.0 : static_cast<double>(visited) / static_cast<double>(g.num_nodes());
    return stats;
}

std::vector<double> stationary_distribution(const Graph& g) {
    if (g.directed()) {
        fail(ErrorKind::Unsupported, "stationary distribution d(v)/2|E| requires an undirected graph");
    }
    if (g.num_slots() == 0) {
        fail(ErrorKind::Unsupported, "stationary distribution undefined without edges");
    }
    const double two_e = static_cast<double>(g.num_slots());
    std::vector<double> pi(g.num_nodes());
    for (NodeId v = 0; v < g.num_nodes(); ++v) {
        pi[v] = static_cast<double>(g.degree(v)) / two_e;
    }
    return pi;
}

CoverTimeResult measure_cover_time(const Graph& g, std::size_t trials, std::uint64_t seed) {
    const std::size_t n = g.num_nodes();
    if (n == 0 || !is_connected(g)) {
        fail(ErrorKind::NeverCovers, "graph is not connected; a walk never covers it");
    }
    CoverTimeResult result;
    result.per_trial.reserve(trials);
    std::vector<std::uint32_t> seen_in(n, 0);
    for (std::size_t t = 0; t < trials; ++t) {
        WalkEngine rng(child_seed(seed, t));
        const auto stamp = static_cast<std::uint32_t>(t + 1);
        NodeId v = static_cast<NodeId>(uniform_index(rng, n));
        seen_in[v] = stamp;
        std::size_t remaining = n - 1;
        std::uint64_t steps = 0;
        while (remaining > 0) {
            v = transition(g, v, kNoSlot, false, rng).node;
            ++steps;
            if (seen_in[v] != stamp) {
                seen_in[v] = stamp;
                --remaining;
            }
        }
        result.per_trial.push_back(steps);
    }
    double total = 0.0;
    for (auto s : result.per_trial) {
        total += static_cast<double>(s);
    }
    result.mean = trials == 0 ? 0.0 : total / static_cast<double>(trials);
    return result;
}

} // namespace nw
