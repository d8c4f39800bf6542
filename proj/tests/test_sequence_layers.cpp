#include <doctest.h>

#include "gradcheck.hpp"
#include "nw/error.hpp"
#include "nw/optim.hpp"
#include "nw/sequence_layers.hpp"

#include <algorithm>
#include <cmath>

using namespace nw;
using testing::random_tensor;
using testing::weighted_sum;

namespace {

SequenceLayerConfig kind_config(SequenceKind kind, bool bidirectional = false) {
    SequenceLayerConfig c;
    c.kind = kind;
    c.bidirectional = bidirectional;
    c.kernel = 3;
    c.heads = 2;
    c.state = 4;
    return c;
}

const SequenceKind kAllKinds[] = {SequenceKind::identity, SequenceKind::conv, SequenceKind::attention,
                                  SequenceKind::ssm_s4, SequenceKind::ssm_selective};

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

TEST_CASE("kind names") {
    for (auto kind : kAllKinds) {
        CHECK(parse_sequence_kind(to_string(kind)) == kind);
    }
    CHECK(parse_sequence_kind("s4") == SequenceKind::ssm_s4);
    CHECK_THROWS_AS(parse_sequence_kind("lstm"), Error);
}

TEST_CASE("every kind preserves shape") {
    Engine rng(1);
    for (auto kind : kAllKinds) {
        for (bool bi : {false, true}) {
            ParameterStore store(3);
            const auto layer = make_sequence_layer(store, "seq", 4, kind_config(kind, bi));
            for (std::size_t length : {1, 2, 50, 200}) {
                const std::size_t t = length + 1;
                const Tensor x = random_tensor({3 * t, 4}, rng, -1, 1, false);
                const Tensor y = layer->forward(x, t, {});
                CHECK(y.shape() == x.shape());
                CHECK(std::all_of(y.values().begin(), y.values().end(), [](double v) { return std::isfinite(v); }));
            }
        }
    }
}

TEST_CASE("conv layer with a delta kernel and zero mixing is the identity") {
    ParameterStore store(1);
    ConvLayer conv(store, "conv", 2, 3);
    fill(conv.kernel, std::vector<double>{0, 0, 1, 1, 0, 0});
    fill(conv.pointwise.weight, 0.0);
    fill(conv.pointwise.bias, 0.0);
    Engine rng(2);
    const Tensor x = random_tensor({10, 2}, rng, -1, 1, false);
    CHECK(vals(conv.forward(x, 5, {})) == vals(x));
}

TEST_CASE("box kernel averages neighbours") {
    const Tensor x = Tensor::from({5, 1}, {0, 1, 0, 0, 0});
    const Tensor box = Tensor::full({3, 1}, 1.0 / 3.0);
    const auto y = vals(ops::conv1d(x, box, 5));
    CHECK(y == std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3, 0, 0});
}

TEST_CASE("constructor errors") {
    ParameterStore store(1);
    CHECK(kind_of([&] { ConvLayer(store, "c", 2, 4); }) == ErrorKind::BadKernel);
    CHECK(kind_of([&] { AttentionLayer(store, "a", 6, 4); }) == ErrorKind::BadHeads);
    S4Layer s4(store, "s4", 2, kind_config(SequenceKind::ssm_s4));
    CHECK(kind_of([&] { s4.set_timestep(std::vector<double>{0.1, 0.0}); }) == ErrorKind::BadTimestep);
    CHECK(kind_of([&] { s4.set_timestep(std::vector<double>{-1.0, 0.1}); }) == ErrorKind::BadTimestep);
}

TEST_CASE("s4 integrator limit gives prefix sums") {
    ParameterStore store(1);
    SequenceLayerConfig c = kind_config(SequenceKind::ssm_s4);
    c.state = 1;
    S4Layer s4(store, "s4", 2, c);
    fill(s4.a, 0.0);
    fill(s4.b, 1.0);
    fill(s4.c, 1.0);
    s4.set_timestep(std::vector<double>{1.0, 1.0});
    const Tensor x = Tensor::from({4, 2}, {1, -1, 2, 0.5, 3, 0, 4, 2});
    const auto y = vals(s4.scan(x, 4));
    const std::vector<double> expected{1, -1, 3, -0.5, 6, -0.5, 10, 1.5};
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    }
}

TEST_CASE("zero input gives zero scan output") {
    ParameterStore store(4);
    S4Layer s4(store, "s4", 3, kind_config(SequenceKind::ssm_s4));
    SelectiveLayer sel(store, "sel", 3, kind_config(SequenceKind::ssm_selective));
    const Tensor x = Tensor::zeros({12, 3});
    CHECK(vals(s4.scan(x, 6)) == std::vector<double>(36, 0.0));
    CHECK(vals(sel.scan(x, 6)) == std::vector<double>(36, 0.0));
}

TEST_CASE("selective layer frozen to s4 constants reproduces s4") {
    ParameterStore store(5);
    const auto config = kind_config(SequenceKind::ssm_s4);
    S4Layer s4(store, "s4", 3, config);
    SelectiveLayer sel(store, "sel", 3, config);
    sel.freeze_to(s4);
    Engine rng(6);
    const Tensor x = random_tensor({20, 3}, rng, -1, 1, false);
    const auto a = vals(s4.scan(x, 10));
    const auto b = vals(sel.scan(x, 10));
    for (std::size_t i = 0; i < a.size(); ++i) {
        REQUIRE(std::abs(a[i] - b[i]) < 1e-10);
    }
}

TEST_CASE("state-space layers are causal") {
    Engine rng(7);
    for (auto kind : {SequenceKind::ssm_s4, SequenceKind::ssm_selective}) {
        ParameterStore store(8);
        const auto layer = make_sequence_layer(store, "seq", 3, kind_config(kind));
        const std::size_t t = 12;
        const Tensor x = random_tensor({t, 3}, rng, -1, 1, false);
        const auto base = vals(layer->forward(x, t, {}));
        for (std::size_t probe = 1; probe < t; ++probe) {
            Tensor changed = Tensor::from({t, 3}, vals(x));
            auto v = changed.mutable_values();
            for (std::size_t c = 0; c < 3; ++c) {
                v[probe * 3 + c] += 5.0;
            }
            const auto y = vals(layer->forward(changed, t, {}));
            for (std::size_t i = 0; i < probe * 3; ++i) {
                REQUIRE(y[i] == base[i]);
            }
            CHECK(y[probe * 3] != base[probe * 3]);
        }
    }
}

TEST_CASE("masked positions never influence unmasked outputs") {
    Engine rng(9);
    const std::size_t t = 7;
    const std::vector<std::uint8_t> mask{1, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0};
    for (auto kind : kAllKinds) {
        for (bool bi : {false, true}) {
            ParameterStore store(10);
            const auto layer = make_sequence_layer(store, "seq", 4, kind_config(kind, bi));
            const Tensor x = random_tensor({2 * t, 4}, rng, -1, 1, false);
            Tensor noisy = Tensor::from({2 * t, 4}, vals(x));
            auto v = noisy.mutable_values();
            for (std::size_t r = 0; r < mask.size(); ++r) {
                if (!mask[r]) {
                    for (std::size_t c = 0; c < 4; ++c) {
                        v[r * 4 + c] = uniform_real(rng, -100, 100);
                    }
                }
            }
            const auto a = vals(layer->forward(x, t, mask));
            const auto b = vals(layer->forward(noisy, t, mask));
            for (std::size_t r = 0; r < mask.size(); ++r) {
                for (std::size_t c = 0; c < 4; ++c) {
                    if (mask[r]) {
                        REQUIRE(std::abs(a[r * 4 + c] - b[r * 4 + c]) < 1e-12);
                    } else {
                        REQUIRE(b[r * 4 + c] == 0.0);
                    }
                }
            }
        }
    }
}

TEST_CASE("attention single key returns its value projection") {
    ParameterStore store(11);
    MultiHeadAttention mha(store, "mha", 4, 2);
    Engine rng(12);
    const Tensor x = random_tensor({3, 4}, rng, -1, 1, false);
    const auto y = vals(mha(x, 1, Tensor()));
    const auto expected = vals(mha.output(mha.value(x)));
    for (std::size_t i = 0; i < y.size(); ++i) {
        CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-14));
    }
}

TEST_CASE("attention weights are uniform over unmasked keys for equal inputs") {
    ParameterStore store(13);
    MultiHeadAttention mha(store, "mha", 4, 2);
    const Tensor x = Tensor::full({5, 4}, 0.3);
    for (const auto& w : mha.weights(x, 5, Tensor())) {
        for (double p : w.values()) {
            CHECK(p == doctest::Approx(0.2).epsilon(1e-14));
        }
    }
    const std::vector<std::uint8_t> mask{1, 0, 1, 1, 0};
    for (const auto& w : mha.weights(x, 5, key_mask_bias(mask, 1, 5))) {
        const auto v = vals(w);
        for (std::size_t q = 0; q < 5; ++q) {
            for (std::size_t k = 0; k < 5; ++k) {
                CHECK(v[q * 5 + k] == doctest::Approx(mask[k] ? 1.0 / 3.0 : 0.0).epsilon(1e-14));
            }
        }
    }
}

TEST_CASE("bidirectional wrapper") {
    Engine rng(14);
    SUBCASE("identity inside gives identity") {
        BidirectionalLayer bi(std::make_unique<IdentityLayer>(), std::make_unique<IdentityLayer>());
        const Tensor x = random_tensor({8, 3}, rng, -1, 1, false);
        CHECK(vals(bi.forward(x, 4, {})) == vals(x));
    }
    SUBCASE("tied parameters keep palindromes palindromic") {
        ParameterStore sa(15), sb(15);
        const auto config = kind_config(SequenceKind::ssm_s4);
        BidirectionalLayer bi(std::make_unique<S4Layer>(sa, "s4", 2, config),
                              std::make_unique<S4Layer>(sb, "s4", 2, config));
        const std::size_t t = 7;
        Tensor x = Tensor::zeros({t, 2});
        auto v = x.mutable_values();
        for (std::size_t i = 0; i <= t / 2; ++i) {
            for (std::size_t c = 0; c < 2; ++c) {
                const double r = uniform_real(rng, -1, 1);
                v[i * 2 + c] = r;
                v[(t - 1 - i) * 2 + c] = r;
            }
        }
        const auto y = vals(bi.forward(x, t, {}));
        for (std::size_t i = 0; i < t; ++i) {
            for (std::size_t c = 0; c < 2; ++c) {
                CHECK(y[i * 2 + c] == doctest::Approx(y[(t - 1 - i) * 2 + c]).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("layer gradients match finite differences") {
    Engine rng(16);
    for (auto kind : {SequenceKind::conv, SequenceKind::attention, SequenceKind::ssm_s4, SequenceKind::ssm_selective}) {
        for (bool bi : {false, true}) {
            ParameterStore store(17);
            const auto layer = make_sequence_layer(store, "seq", 4, kind_config(kind, bi));
            const std::vector<std::uint8_t> mask{1, 1, 1, 1, 1, 0, 1, 1, 1, 1};
            Tensor x = random_tensor({10, 4}, rng);
            std::vector<Tensor> leaves = store.tensors();
            leaves.push_back(x);
            const auto result =
                testing::gradcheck([&] { return weighted_sum(layer->forward(x, 5, mask)); }, leaves, 20, 18);
            INFO(std::string(to_string(kind)) << (bi ? " bidirectional" : "") << " max_rel=" << result.max_rel);
            CHECK(result.max_rel < 1e-4);
        }
    }
}

TEST_CASE("s4 gradient reaches the timestep") {
    ParameterStore store(19);
    S4Layer s4(store, "s4", 3, kind_config(SequenceKind::ssm_s4));
    Engine rng(20);
    const Tensor x = random_tensor({8, 3}, rng, -1, 1, false);
    const auto result = testing::gradcheck([&] { return weighted_sum(s4.forward(x, 8, {})); }, {s4.log_dt}, 20, 21);
    CHECK(result.max_rel < 1e-4);
    CHECK(std::any_of(s4.log_dt.grad().begin(), s4.log_dt.grad().end(), [](double g) { return g != 0.0; }));
}

namespace {

// Bits b_t; the target at t is b_{t+1} (0 at the last step). A causal layer
// cannot see it, a bidirectional one can.
double train_next_bit(bool bidirectional, std::uint64_t seed) {
    ParameterStore store(seed);
    const std::size_t d = 8, t = 16, batch = 16;
    Linear in(store, "in", 1, d);
    SequenceLayerConfig c = kind_config(SequenceKind::ssm_s4, bidirectional);
    const auto layer = make_sequence_layer(store, "seq", d, c);
    Linear head(store, "head", d, 1);
    AdamW opt(store.tensors());
    Engine data(child_seed(seed, 99));
    auto make = [&](std::vector<double>& target) {
        std::vector<double> bits(batch * t);
        for (auto& b : bits) {
            b = static_cast<double>(uniform_index(data, 2));
        }
        target.assign(batch * t, 0.0);
        for (std::size_t s = 0; s < batch; ++s) {
            for (std::size_t i = 0; i + 1 < t; ++i) {
                target[s * t + i] = bits[s * t + i + 1];
            }
        }
        return Tensor::from({batch * t, 1}, std::move(bits));
    };
    auto loss_of = [&](const Tensor& x, const std::vector<double>& target) {
        return ops::mse_loss(head(layer->forward(in(x), t, {})), target);
    };
    for (int step = 0; step < 300; ++step) {
        std::vector<double> target;
        const Tensor x = make(target);
        opt.zero_grad();
        backward(loss_of(x, target));
        opt.step(1e-2);
    }
    double total = 0.0;
    for (int k = 0; k < 8; ++k) {
        std::vector<double> target;
        const Tensor x = make(target);
        total += loss_of(x, target).item();
    }
    return total / 8.0;
}

} // namespace

TEST_CASE("bidirectional beats unidirectional on next-bit prediction") {
    std::vector<double> uni, bi;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        uni.push_back(train_next_bit(false, seed));
        bi.push_back(train_next_bit(true, seed));
    }
    std::sort(uni.begin(), uni.end());
    std::sort(bi.begin(), bi.end());
    MESSAGE("median loss uni=" << uni[2] << " bi=" << bi[2]);
    CHECK(bi[2] <= uni[2]);
}
