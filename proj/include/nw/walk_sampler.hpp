#pragma once

#include "nw/graph.hpp"
#include "nw/graph_gen.hpp"
#include "nw/rng.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace nw {

enum class StartDistribution { uniform, stationary };

struct SamplerConfig {
    std::size_t length = 10;              // walk length l (l + 1 positions)
    double rate = 1.0;                    // walks per node, used when count is unset
    std::optional<std::size_t> count;     // explicit number of walks m
    bool non_backtracking = true;
    StartDistribution start = StartDistribution::uniform;
    std::uint64_t seed = 0;
    unsigned threads = 1;                 // never changes the result

    /// m = count, or max(1, round(rate * n)).
    std::size_t num_walks(std::size_t n_nodes) const;
};

/// m walks of fixed length, stored row-major.
///
/// nodes: m x (l+1); edge_slots: m x l (slot of (w_i, w_{i+1}), or kNoSlot when
/// the step is padding); mask: m x (l+1), 1 = real position.
struct WalkBatch {
    std::size_t num_walks = 0;
    std::size_t length = 0;
    std::vector<NodeId> nodes;
    std::vector<SlotId> edge_slots;
    std::vector<std::uint8_t> mask;

    std::size_t positions() const noexcept { return length + 1; }
    std::span<const NodeId> walk(std::size_t j) const { return {nodes.data() + j * positions(), positions()}; }
    std::span<const SlotId> walk_slots(std::size_t j) const { return {edge_slots.data() + j * length, length}; }
    std::span<const std::uint8_t> walk_mask(std::size_t j) const { return {mask.data() + j * positions(), positions()}; }
    NodeId start_node(std::size_t j) const { return nodes[j * positions()]; }
    std::vector<NodeId> start_nodes() const;

    bool operator==(const WalkBatch&) const = default;
};

struct CoverageStats {
    double visited_fraction = 0.0;
    std::vector<std::uint64_t> visit_counts;  // N_v
};

struct Step {
    NodeId node;
    SlotId slot;  // kNoSlot when no move was possible
};

/// One transition. previous_slot is the slot used to arrive at `current`
/// (kNoSlot at the walk start). Non-backtracking excludes the node we came
/// from unless it is the only neighbor; isolated nodes stay put with no slot.
Step transition(const Graph& g, NodeId current, SlotId previous_slot, bool non_backtracking, WalkEngine& rng);

/// Samples m walks from distinct start nodes. Walk j draws from the stream
/// WalkEngine(child_seed(seed, j)), so the batch does not depend on thread count.
/// Throws TooManyWalks, BadLength, BadRate.
WalkBatch sample_walks(const Graph& g, const SamplerConfig& config);

/// Walks from explicitly given start nodes (one walk per entry).
WalkBatch sample_walks_from(const Graph& g, std::span<const NodeId> starts, const SamplerConfig& config);

/// Samples i.i.d. walks (start nodes drawn with replacement from the start
/// distribution); m may exceed n. Used by the Monte-Carlo estimators.
WalkBatch sample_walks_iid(const Graph& g, const SamplerConfig& config, std::size_t count);

/// Samples per component of a batched graph; graph i uses child_seed(config.seed, seeds[i]).
WalkBatch sample_walks_batched(const GraphBatch& batch, const SamplerConfig& config,
                               std::span<const std::uint64_t> seeds);

/// Start nodes for m walks: seeded permutation prefix (uniform) or a seeded
/// weighted draw without replacement by d(v)/2|E| (stationary).
std::vector<NodeId> draw_start_nodes(const Graph& g, std::size_t m, StartDistribution dist, std::uint64_t seed);

WalkBatch concat_walks(std::span<const WalkBatch> parts);

CoverageStats coverage(const Graph& g, const WalkBatch& walks);

/// pi(v) = d(v) / 2|E|. Throws Unsupported on directed graphs or graphs without edges.
std::vector<double> stationary_distribution(const Graph& g);

struct CoverTimeResult {
    double mean = 0.0;
    std::vector<std::uint64_t> per_trial;
};

/// Runs a simple random walk from a uniform start until every node is seen.
/// Throws NeverCovers on disconnected graphs.
CoverTimeResult measure_cover_time(const Graph& g, std::size_t trials, std::uint64_t seed);

} // namespace nw
