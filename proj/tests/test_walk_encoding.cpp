#include <doctest.h>

#include "naive.hpp"
#include "nw/error.hpp"
#include "nw/graph_gen.hpp"
#include "nw/oracle.hpp"
#include "nw/walk_encoding.hpp"

using namespace nw;

namespace {

// Walk 6 -> 1 -> 2 -> 3 -> 6 closes a 4-cycle back at node 6.
Graph closing_cycle_graph() {
    return build_graph(8, std::vector<std::pair<NodeId, NodeId>>{{6, 1}, {1, 2}, {2, 3}, {3, 6}, {0, 6}, {4, 5}, {5, 7}, {2, 4}});
}

} // namespace

TEST_CASE("pinned closing-cycle walk") {
    const Graph g = closing_cycle_graph();
    const std::vector<NodeId> walk{6, 1, 2, 3, 6};
    EncodingConfig c;
    c.window = 4;
    const WalkPE pe = encode_walk(g, walk, c);
    CHECK(pe.id(4, 3) == 1.0);
    CHECK(pe.adj(3, 2) == 1.0);
    CHECK(pe.id.rows == 5);
    CHECK(pe.id.cols == 4);
    CHECK(pe.adj.cols == 3);
    for (std::size_t j = 0; j < 4; ++j) {
        CHECK(pe.id(0, j) == 0.0);
    }
    for (std::size_t j = 0; j < 3; ++j) {
        CHECK(pe.adj(0, j) == 0.0);
    }
}

TEST_CASE("encodings match the naive pairwise reference on small connected graphs") {
    for (std::size_t n = 1; n <= 6; ++n) {
        const auto graphs = oracle::connected_graphs(n);
        for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
            const Graph& g = graphs[gi];
            SamplerConfig sc;
            sc.length = 7;
            sc.non_backtracking = gi % 2 == 0;
            sc.seed = child_seed(n, gi);
            const WalkBatch walks = sample_walks_iid(g, sc, 100);
            for (std::size_t s : {1, 3, 8}) {
                EncodingConfig ec;
                ec.window = s;
                for (std::size_t j = 0; j < walks.num_walks; ++j) {
                    const WalkPE pe = encode_walk(g, walks.walk(j), walks.walk_mask(j), ec);
                    REQUIRE(pe.id == testing::naive_identity(walks.walk(j), s, walks.walk_mask(j)));
                    REQUIRE(pe.adj == testing::naive_adjacency(g, walks.walk(j), s, walks.walk_mask(j)));
                }
            }
        }
    }
}

TEST_CASE("padded positions encode to zero") {
    const Graph g = build_graph(3, std::vector<std::pair<NodeId, NodeId>>{{0, 1}});
    const std::vector<NodeId> walk(5, 2);
    const std::vector<std::uint8_t> mask{1, 0, 0, 0, 0};
    EncodingConfig c;
    c.window = 4;
    const WalkPE pe = encode_walk(g, walk, mask, c);
    CHECK(pe.id == Matrix(5, 4));
    CHECK(pe.adj == Matrix(5, 3));
}

TEST_CASE("concatenation order and include flags") {
    const Graph g = complete_graph(3);
    const std::vector<NodeId> walk{0, 1, 2, 0};
    EncodingConfig c;
    c.window = 3;
    CHECK(c.pe_dim() == 5);
    const WalkPE pe = encode_walk(g, walk, c);
    const Matrix both = pe.concat(c);
    CHECK(both.cols == 5);
    CHECK(both(3, 2) == pe.id(3, 2));
    CHECK(both(2, 3 + 1) == pe.adj(2, 1));
    c.identity = false;
    CHECK(pe.concat(c) == pe.adj);
    c.identity = true;
    c.adjacency = false;
    CHECK(pe.concat(c) == pe.id);
}

TEST_CASE("window errors") {
    EncodingConfig c;
    c.window = 0;
    const std::vector<NodeId> walk{0, 1};
    try {
        encode_walk(complete_graph(3), walk, c);
        FAIL("window 0 accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadWindow);
    }
    c.window = 2;
    const std::vector<NodeId> bad{0, 9};
    try {
        encode_walk(complete_graph(3), bad, c);
        FAIL("bad node accepted");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BadIndex);
    }
}

TEST_CASE("walk feature matrix layout") {
    Matrix x(3, 2);
    for (std::size_t v = 0; v < 3; ++v) {
        x(v, 0) = 10.0 + v;
        x(v, 1) = 20.0 + v;
    }
    const std::vector<EdgeRecord> edges{{0, 1, {0.5}}, {1, 2, {1.5}}, {0, 2, {2.5}}};
    const Graph g = build_graph(edges, x, false, 1);
    CHECK(walk_feature_dim(g, 4) == 10);

    const std::vector<NodeId> walk{0, 1, 2, 0, 1};
    std::vector<SlotId> slots;
    for (std::size_t i = 0; i + 1 < walk.size(); ++i) {
        slots.push_back(static_cast<SlotId>(*g.slot_of(walk[i], walk[i + 1])));
    }
    const std::vector<std::uint8_t> mask(5, 1);
    const Matrix xw = walk_feature_matrix(g, walk, slots, mask);
    CHECK(xw.rows == 5);
    CHECK(xw.cols == 10);
    CHECK(xw(1, 0) == 11.0);
    CHECK(xw(1, 1) == 21.0);
    CHECK(xw(0, 2) == 0.5);
    CHECK(xw(1, 2) == 1.5);
    CHECK(xw(2, 2) == 2.5);
    CHECK(xw(4, 2) == 0.0);
    // id block starts at column 3, adj block at 3 + 4.
    CHECK(xw(3, 3 + 2) == 1.0);
    CHECK(xw(2, 7 + 1) == 1.0);
    CHECK(xw(4, 3 + 2) == 1.0);
}

TEST_CASE("triangle closure flag") {
    const Graph k3 = complete_graph(3);
    const std::vector<NodeId> walk{0, 1, 2, 0};
    EncodingConfig c;
    c.window = 3;
    CHECK(encode_walk(k3, walk, c).adj(2, 1) == 1.0);
}

TEST_CASE("triangle flag counts") {
    CHECK(count_triangle_flags(complete_graph(3)) == 6);
    CHECK(count_triangle_flags(cycle_graph(6)) == 0);
    CHECK(count_triangle_flags(complete_graph(4)) == 24);
    Engine rng(2024);
    for (int t = 0; t < 200; ++t) {
        const std::size_t n = 1 + uniform_index(rng, 8);
        const Graph g = erdos_renyi(n, uniform_real(rng, 0.0, 1.0), rng);
        REQUIRE(count_triangle_flags(g) == 6 * oracle::triangle_count(g));
    }
}
