#pragma once

// Brute-force references for small graphs.

#include "nw/graph.hpp"
#include "nw/walk_sampler.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace nw::oracle {

inline constexpr std::size_t kWalkLimit = 10'000'000;

/// Every walk of the given length with its probability under a uniform
/// start and uniform transitions (non-backtracking falls back to
/// backtracking at dead ends; isolated starts stay put and are padded).
struct CompleteWalkSet {
    WalkBatch walks;
    std::vector<double> probabilities;
};

/// Throws TooLarge when more than `limit` walks exist.
CompleteWalkSet enumerate_walks(const Graph& g, std::size_t length, bool non_backtracking,
                                std::size_t limit = kWalkLimit);

using WalkFunctional = std::function<double(const Matrix& features)>;

/// Sum over the complete walk set of p(W) f(X_W); window 0 selects s = l.
double exact_expectation(const Graph& g, std::size_t length, bool non_backtracking, const WalkFunctional& f,
                         std::size_t window = 0);

/// Stable 1-WL colors. Colors are ranks of sorted signatures, so they are
/// canonical: relabeling the graph permutes colors with the nodes.
struct WLColoring {
    std::vector<std::vector<std::uint32_t>> rounds;  // rounds[0] from node features
    std::vector<std::uint32_t> colors;               // stable coloring
    std::map<std::uint32_t, std::size_t> histogram;
};

WLColoring wl_refinement(const Graph& g, std::size_t max_rounds = SIZE_MAX);

/// Stable histograms of several graphs refined jointly on their disjoint
/// union, so color ids are comparable across graphs.
std::vector<std::map<std::uint32_t, std::size_t>> wl_histograms(std::span<const Graph* const> graphs);
bool wl_indistinguishable(const Graph& a, const Graph& b);

struct Witness {
    double gap = 0.0;
    std::string functional;  // name of the maximizing battery entry
    double value_a = 0.0;
    double value_b = 0.0;
};

/// Largest |g_f(a) - g_f(b)| over column means, column second moments and
/// single entries of X_W, using the complete walk sets and window l+1.
Witness separation_witness(const Graph& a, const Graph& b, std::size_t length, bool non_backtracking = false);

/// Triple loop over node triples.
std::uint64_t triangle_count(const Graph& g);

/// Brute force over all permutations (n <= 8); compares structure and node features.
bool isomorphic(const Graph& a, const Graph& b);
/// Lexicographically smallest adjacency bitmask over node permutations (n <= 8, unlabeled).
std::uint64_t canonical_form(const Graph& g);
/// One representative per isomorphism class of connected simple graphs on n <= 6 nodes.
std::vector<Graph> connected_graphs(std::size_t n);

} // namespace nw::oracle
