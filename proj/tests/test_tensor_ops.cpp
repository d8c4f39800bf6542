#include <doctest.h>

#include "gradcheck.hpp"
#include "nw/error.hpp"
#include "nw/ops.hpp"
#include "nw/optim.hpp"
#include "nw/tensor_io.hpp"

#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>

using namespace nw;
using testing::gradcheck;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

using OutFn = std::function<Tensor(const std::vector<Tensor>&)>;

void check_op(const char* name, std::vector<Tensor> leaves, const OutFn& f, double tol = 1e-4) {
    const auto result = gradcheck([&] { return weighted_sum(f(leaves)); }, leaves, 20, 5);
    INFO(name << " max_rel=" << result.max_rel);
    CHECK(result.probes == 20);
    CHECK(result.max_rel < tol);
}

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

ErrorKind kind_of(auto&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("expected an nw::Error");
    return ErrorKind::ConfigError;
}

} // namespace

TEST_CASE("elementwise gradients") {
    Engine rng(1);
    auto a = [&] { return random_tensor({4, 5}, rng); };
    check_op("add", {a(), a()}, [](auto& t) { return ops::add(t[0], t[1]); });
    check_op("sub", {a(), a()}, [](auto& t) { return ops::sub(t[0], t[1]); });
    check_op("mul", {a(), a()}, [](auto& t) { return ops::mul(t[0], t[1]); });
    check_op("scale", {a()}, [](auto& t) { return ops::scale(t[0], -2.5); });
    check_op("add_scalar", {a()}, [](auto& t) { return ops::add_scalar(t[0], 0.3); });
    check_op("add_row", {a(), random_tensor({5}, rng)}, [](auto& t) { return ops::add_row(t[0], t[1]); });
    check_op("mul_row", {a(), random_tensor({5}, rng)}, [](auto& t) { return ops::mul_row(t[0], t[1]); });
    const std::vector<double> w{0.5, -1.0, 2.0, 0.0};
    check_op("scale_rows", {a()}, [&](auto& t) { return ops::scale_rows(t[0], w); });
    check_op("relu", {a()}, [](auto& t) { return ops::relu(t[0]); });
    check_op("gelu", {a()}, [](auto& t) { return ops::gelu(t[0]); });
    check_op("sigmoid", {a()}, [](auto& t) { return ops::sigmoid(t[0]); });
    check_op("exp", {a()}, [](auto& t) { return ops::exp(t[0]); });
    check_op("softplus", {a()}, [](auto& t) { return ops::softplus(t[0]); });
    check_op("silu", {a()}, [](auto& t) { return ops::silu(t[0]); });
    check_op("tanh", {a()}, [](auto& t) { return ops::tanh(t[0]); });
    check_op("expm1_ratio", {a()}, [](auto& t) { return ops::expm1_ratio(t[0]); });
    check_op("sum", {a()}, [](auto& t) { return ops::sum(t[0]); });
    check_op("mean", {a()}, [](auto& t) { return ops::mean(t[0]); });
}

TEST_CASE("linear algebra gradients") {
    Engine rng(2);
    check_op("matmul", {random_tensor({3, 4}, rng), random_tensor({4, 6}, rng)},
             [](auto& t) { return ops::matmul(t[0], t[1]); });
    check_op("matmul rank3", {random_tensor({2, 3, 4}, rng), random_tensor({12, 2}, rng)},
             [](auto& t) { return ops::matmul(t[0], t[1]); });
    check_op("linear", {random_tensor({5, 3}, rng), random_tensor({3, 4}, rng), random_tensor({4}, rng)},
             [](auto& t) { return ops::linear(t[0], t[1], t[2]); });
    check_op("bmm", {random_tensor({2, 3, 4}, rng), random_tensor({2, 4, 5}, rng)},
             [](auto& t) { return ops::bmm(t[0], t[1]); });
    check_op("bmm trans", {random_tensor({2, 3, 4}, rng), random_tensor({2, 5, 4}, rng)},
             [](auto& t) { return ops::bmm(t[0], t[1], true); });
    check_op("softmax", {random_tensor({3, 6}, rng, -3, 3)}, [](auto& t) { return ops::softmax(t[0]); });
    check_op("log_softmax", {random_tensor({3, 6}, rng, -3, 3)}, [](auto& t) { return ops::log_softmax(t[0]); });
    check_op("layernorm", {random_tensor({4, 6}, rng), random_tensor({6}, rng), random_tensor({6}, rng)},
             [](auto& t) { return ops::layernorm(t[0], t[1], t[2]); });
    const std::vector<double> target{0.1, -0.4, 2.0, 0.7};
    check_op("mse", {random_tensor({4, 1}, rng)}, [&](auto& t) { return ops::mse_loss(t[0], target); });
    check_op("l1", {random_tensor({4, 1}, rng)}, [&](auto& t) { return ops::l1_loss(t[0], target); });
    const std::vector<std::int64_t> labels{0, 2, 1, 2};
    check_op("cross_entropy", {random_tensor({4, 3}, rng)}, [&](auto& t) { return ops::cross_entropy(t[0], labels); });
}

TEST_CASE("structured gradients") {
    Engine rng(3);
    const std::vector<std::int64_t> ids{0, 2, -1, 2, 1, 0};
    check_op("segment_sum", {random_tensor({6, 3}, rng)}, [&](auto& t) { return ops::segment_sum(t[0], ids, 4); });
    check_op("segment_mean", {random_tensor({6, 3}, rng)}, [&](auto& t) { return ops::segment_mean(t[0], ids, 4); });
    check_op("scatter_add", {random_tensor({6, 3}, rng)}, [&](auto& t) { return ops::scatter_add(t[0], ids, 3); });
    const std::vector<std::int64_t> index{1, 1, -1, 0, 3};
    check_op("gather_rows", {random_tensor({4, 3}, rng)}, [&](auto& t) { return ops::gather_rows(t[0], index); });
    check_op("conv1d", {random_tensor({14, 3}, rng), random_tensor({5, 3}, rng)},
             [](auto& t) { return ops::conv1d(t[0], t[1], 7); });
    for (auto mode : {ops::ScanMode::sequential, ops::ScanMode::chunked}) {
        check_op("scan", {random_tensor({40, 3}, rng, -0.9, 0.9), random_tensor({40, 3}, rng)},
                 [mode](auto& t) { return ops::associative_scan(t[0], t[1], 20, mode); });
    }
    check_op("reverse", {random_tensor({6, 2}, rng)}, [](auto& t) { return ops::reverse_sequences(t[0], 3); });
    check_op("reshape", {random_tensor({6, 2}, rng)}, [](auto& t) { return ops::reshape(t[0], {3, 4}); });
    check_op("concat_cols", {random_tensor({3, 2}, rng), random_tensor({3, 4}, rng)},
             [](auto& t) { return ops::concat_cols({t[0], t[1]}); });
    check_op("concat_rows", {random_tensor({3, 2}, rng), random_tensor({1, 2}, rng)},
             [](auto& t) { return ops::concat_rows({t[0], t[1]}); });
    check_op("slice_cols", {random_tensor({3, 5}, rng)}, [](auto& t) { return ops::slice_cols(t[0], 1, 4); });
    check_op("slice_rows", {random_tensor({5, 3}, rng)}, [](auto& t) { return ops::slice_rows(t[0], 2, 5); });
    check_op("repeat_cols", {random_tensor({3, 2}, rng)}, [](auto& t) { return ops::repeat_cols(t[0], 3); });
    check_op("tile_cols", {random_tensor({3, 2}, rng)}, [](auto& t) { return ops::tile_cols(t[0], 3); });
    check_op("sum_col_groups", {random_tensor({3, 6}, rng)}, [](auto& t) { return ops::sum_col_groups(t[0], 3); });
}

TEST_CASE("segment mean example") {
    const Tensor x = Tensor::from({3, 1}, {1, 3, 5});
    const std::vector<std::int64_t> ids{0, 0, 1};
    CHECK(vals(ops::segment_mean(x, ids, 2)) == std::vector<double>{2, 5});
    CHECK(vals(ops::segment_mean(x, ids, 3)) == std::vector<double>{2, 5, 0});
    const std::vector<std::int64_t> bad{0, 4, 1};
    CHECK(kind_of([&] { ops::segment_sum(x, bad, 2); }) == ErrorKind::BadIndex);
}

TEST_CASE("scan with unit decay gives prefix sums") {
    const Tensor a = Tensor::full({5, 1}, 1.0);
    const Tensor b = Tensor::from({5, 1}, {1, 2, 3, 4, 5});
    CHECK(vals(ops::associative_scan(a, b, 5)) == std::vector<double>{1, 3, 6, 10, 15});
    CHECK(vals(ops::associative_scan(a, b, 5, ops::ScanMode::chunked)) == std::vector<double>{1, 3, 6, 10, 15});
}

TEST_CASE("chunked scan matches sequential") {
    Engine rng(4);
    for (std::size_t t : {1, 15, 16, 17, 50, 200}) {
        const Tensor a = random_tensor({3 * t, 4}, rng, -1.0, 1.0, false);
        const Tensor b = random_tensor({3 * t, 4}, rng, -1.0, 1.0, false);
        const auto seq = ops::associative_scan(a, b, t);
        const auto chk = ops::associative_scan(a, b, t, ops::ScanMode::chunked);
        for (std::size_t i = 0; i < seq.numel(); ++i) {
            REQUIRE(std::abs(seq.at(i) - chk.at(i)) < 1e-12);
        }
    }
}

TEST_CASE("conv1d box and delta kernels") {
    const Tensor x = Tensor::from({5, 1}, {1, 2, 3, 4, 5});
    const Tensor box = Tensor::full({3, 1}, 1.0);
    CHECK(vals(ops::conv1d(x, box, 5)) == std::vector<double>{3, 6, 9, 12, 9});
    const Tensor delta = Tensor::from({3, 1}, {0, 1, 0});
    CHECK(vals(ops::conv1d(x, delta, 5)) == vals(x));
    // Two sequences do not leak into each other.
    const Tensor two = Tensor::from({4, 1}, {1, 1, 1, 1});
    CHECK(vals(ops::conv1d(two, box, 2)) == std::vector<double>{2, 2, 2, 2});
    CHECK(kind_of([&] { ops::conv1d(x, Tensor::full({2, 1}, 1.0), 5); }) == ErrorKind::BadKernel);
}

TEST_CASE("segment sum is permutation equivariant") {
    Engine rng(5);
    const Tensor x = random_tensor({6, 2}, rng, -1, 1, false);
    const std::vector<std::int64_t> ids{0, 1, 2, 0, 1, 2};
    const std::vector<std::int64_t> perm{2, 0, 1};
    std::vector<std::int64_t> permuted(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
        permuted[i] = perm[static_cast<std::size_t>(ids[i])];
    }
    const Tensor a = ops::segment_sum(x, ids, 3);
    const Tensor b = ops::segment_sum(x, permuted, 3);
    for (std::size_t s = 0; s < 3; ++s) {
        for (std::size_t c = 0; c < 2; ++c) {
            CHECK(a.at(s * 2 + c) == b.at(static_cast<std::size_t>(perm[s]) * 2 + c));
        }
    }
}

TEST_CASE("tape") {
    Engine rng(6);
    SUBCASE("a tensor used twice accumulates both gradients") {
        Tensor x = Tensor::from({2}, {1.5, -2.0}, true);
        backward(ops::sum(ops::mul(x, x)));
        CHECK(vals(Tensor::from({2}, {x.grad()[0], x.grad()[1]})) == std::vector<double>{3.0, -4.0});
    }
    SUBCASE("backward twice doubles accumulated gradients") {
        Tensor x = Tensor::from({1}, {2.0}, true);
        backward(ops::scale(x, 3.0));
        backward(ops::scale(x, 3.0));
        CHECK(x.grad()[0] == 6.0);
        x.zero_grad();
        CHECK(x.grad()[0] == 0.0);
    }
    SUBCASE("non scalar backward is rejected") {
        Tensor x = random_tensor({3}, rng);
        CHECK(kind_of([&] { backward(ops::relu(x)); }) == ErrorKind::ShapeError);
    }
    SUBCASE("no tape without gradients") {
        const Tensor x = random_tensor({3}, rng, -1, 1, false);
        const Tensor y = ops::exp(x);
        CHECK_FALSE(y.requires_grad());
        CHECK(y.node()->inputs.empty());
    }
    SUBCASE("replaying the same graph is deterministic") {
        Tensor w = random_tensor({4, 4}, rng);
        const Tensor x = random_tensor({3, 4}, rng, -1, 1, false);
        auto run = [&] {
            w.zero_grad();
            backward(weighted_sum(ops::gelu(ops::matmul(x, w))));
            return std::vector<double>(w.grad().begin(), w.grad().end());
        };
        CHECK(run() == run());
    }
    SUBCASE("shape mismatch") {
        CHECK(kind_of([&] { ops::add(random_tensor({2, 3}, rng), random_tensor({3, 2}, rng)); }) ==
              ErrorKind::ShapeError);
        CHECK(kind_of([&] { ops::matmul(random_tensor({2, 3}, rng), random_tensor({2, 3}, rng)); }) ==
              ErrorKind::ShapeError);
    }
}

TEST_CASE("softmax rows sum to one and tolerate large logits") {
    const Tensor x = Tensor::from({2, 3}, {1000, 1001, 1002, -5, 0, 5});
    const Tensor p = ops::softmax(x);
    for (std::size_t r = 0; r < 2; ++r) {
        CHECK(p.at(3 * r) + p.at(3 * r + 1) + p.at(3 * r + 2) == doctest::Approx(1.0).epsilon(1e-15));
    }
    CHECK(std::isfinite(ops::log_softmax(x).at(0)));
}

TEST_CASE("learning rate schedule") {
    CHECK(lr_schedule(0, 10, 100, 1.0) == 0.0);
    CHECK(lr_schedule(5, 10, 100, 1.0) == doctest::Approx(0.5));
    CHECK(lr_schedule(10, 10, 100, 1.0) == doctest::Approx(1.0));
    CHECK(lr_schedule(55, 10, 100, 1.0) == doctest::Approx(0.5));
    CHECK(lr_schedule(100, 10, 100, 1.0) == doctest::Approx(0.0));
    CHECK(lr_schedule(0, 0, 10, 2.0) == doctest::Approx(2.0));
    CHECK(kind_of([] { lr_schedule(0, 11, 10, 1.0); }) == ErrorKind::BadSchedule);
    CHECK(kind_of([] { lr_schedule(11, 1, 10, 1.0); }) == ErrorKind::BadSchedule);
}

TEST_CASE("adamw first step moves by lr against the gradient sign") {
    Tensor p = Tensor::from({3}, {1.0, -1.0, 0.5}, true);
    AdamW opt({p});
    backward(ops::sum(ops::mul(p, Tensor::from({3}, {2.0, -3.0, 0.0}))));
    opt.step(0.1);
    CHECK(p.at(0) == doctest::Approx(0.9));
    CHECK(p.at(1) == doctest::Approx(-0.9));
    CHECK(p.at(2) == doctest::Approx(0.5));
    CHECK(opt.steps_taken() == 1);
    opt.zero_grad();
    CHECK(p.grad()[0] == 0.0);

    Tensor q = Tensor::from({1}, {2.0}, true);
    AdamW decay({q}, AdamWConfig{.weight_decay = 0.5});
    backward(ops::scale(q, 0.0));
    decay.step(0.1);
    CHECK(q.at(0) == doctest::Approx(2.0 * (1 - 0.1 * 0.5)));
}

TEST_CASE("adamw minimizes a quadratic") {
    Tensor p = Tensor::from({2}, {3.0, -2.0}, true);
    AdamW opt({p});
    for (int i = 0; i < 2000; ++i) {
        opt.zero_grad();
        backward(ops::sum(ops::mul(p, p)));
        opt.step(0.01);
    }
    CHECK(std::abs(p.at(0)) < 1e-2);
    CHECK(std::abs(p.at(1)) < 1e-2);
}

TEST_CASE("nwtf round trip") {
    Engine rng(7);
    const Tensor t = random_tensor({2, 3, 4}, rng, -1e10, 1e10, false);
    std::stringstream buf;
    write_nwtf(buf, t);
    const Tensor back = read_nwtf(buf);
    CHECK(back.shape() == t.shape());
    CHECK(vals(back) == vals(t));
    CHECK(buf.str().substr(0, 4) == "NWTF");

    const auto dir = std::filesystem::temp_directory_path();
    const NamedTensors named{{"a", t}, {"b.weight", Tensor::scalar(3.25)}};
    save_named(named, dir / "nw_named.nwtf", dir / "nw_named.json");
    const NamedTensors loaded = load_named(dir / "nw_named.nwtf", dir / "nw_named.json");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[1].first == "b.weight");
    CHECK(loaded[1].second.item() == 3.25);
    CHECK(vals(loaded[0].second) == vals(t));
    std::filesystem::remove(dir / "nw_named.nwtf");
    std::filesystem::remove(dir / "nw_named.json");
}
