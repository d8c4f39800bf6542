#include <doctest.h>

#include "nw/kernels.hpp"
#include "nw/rng.hpp"

#include <cmath>
#include <vector>

using namespace nw;

namespace {

std::vector<double> random_vector(std::size_t n, Engine& rng) {
    std::vector<double> v(n);
    for (auto& x : v) {
        x = uniform_real(rng, -1.0, 1.0);
    }
    return v;
}

const kernels::KernelTable* vector_table() {
    const auto* t = kernels::avx2_table();
    return t != nullptr && kernels::cpu_supports(kernels::Isa::avx2) ? t : nullptr;
}

} // namespace

TEST_CASE("scalar gemm against a triple loop") {
    Engine rng(1);
    const std::size_t m = 5, k = 7, n = 3;
    const auto a = random_vector(m * k, rng);
    const auto b = random_vector(k * n, rng);
    std::vector<double> c(m * n, 1.0);
    kernels::scalar_table().gemm(a.data(), b.data(), c.data(), m, k, n, false, false, true);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double acc = 1.0;
            for (std::size_t p = 0; p < k; ++p) {
                acc += a[i * k + p] * b[p * n + j];
            }
            CHECK(c[i * n + j] == doctest::Approx(acc).epsilon(1e-14));
        }
    }
}

TEST_CASE("avx2 gemm agrees with scalar for every transpose combination") {
    const auto* vec = vector_table();
    if (vec == nullptr) {
        MESSAGE("avx2 unavailable; skipping");
        return;
    }
    Engine rng(2);
    const std::size_t shapes[][3] = {{1, 1, 1}, {4, 8, 8}, {5, 3, 9}, {17, 33, 15}, {64, 16, 40}, {3, 0, 4}};
    for (const auto& s : shapes) {
        const std::size_t m = s[0], k = s[1], n = s[2];
        for (int flags = 0; flags < 8; ++flags) {
            const bool ta = flags & 1, tb = flags & 2, acc = flags & 4;
            const auto a = random_vector(m * k, rng);
            const auto b = random_vector(k * n, rng);
            auto c0 = random_vector(m * n, rng);
            auto c1 = c0;
            kernels::scalar_table().gemm(a.data(), b.data(), c0.data(), m, k, n, ta, tb, acc);
            vec->gemm(a.data(), b.data(), c1.data(), m, k, n, ta, tb, acc);
            for (std::size_t i = 0; i < m * n; ++i) {
                REQUIRE(std::abs(c0[i] - c1[i]) <= 1e-13 * (1.0 + static_cast<double>(k)));
            }
        }
    }
}

TEST_CASE("avx2 dot and axpy agree with scalar") {
    const auto* vec = vector_table();
    if (vec == nullptr) {
        return;
    }
    Engine rng(3);
    for (std::size_t n : {0, 1, 3, 4, 7, 8, 9, 31, 100}) {
        const auto x = random_vector(n, rng);
        auto y0 = random_vector(n, rng);
        auto y1 = y0;
        CHECK(std::abs(kernels::scalar_table().dot(x.data(), y0.data(), n) - vec->dot(x.data(), y0.data(), n)) <
              1e-13);
        kernels::scalar_table().axpy(0.7, x.data(), y0.data(), n);
        vec->axpy(0.7, x.data(), y1.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(std::abs(y0[i] - y1[i]) < 1e-15);
        }
    }
}

TEST_CASE("recurrence kernels are bit identical across ISAs") {
    const auto* vec = vector_table();
    if (vec == nullptr) {
        return;
    }
    Engine rng(4);
    for (std::size_t channels : {1, 4, 5, 16, 19}) {
        const std::size_t steps = 23;
        const auto a = random_vector(steps * channels, rng);
        const auto b = random_vector(steps * channels, rng);
        const auto gh = random_vector(steps * channels, rng);
        std::vector<double> h0(steps * channels), h1(steps * channels);
        kernels::scalar_table().recurrence_forward(a.data(), b.data(), h0.data(), steps, channels);
        vec->recurrence_forward(a.data(), b.data(), h1.data(), steps, channels);
        CHECK(h0 == h1);
        std::vector<double> ga0(steps * channels), gb0(steps * channels), ga1(steps * channels),
            gb1(steps * channels);
        kernels::scalar_table().recurrence_backward(a.data(), h0.data(), gh.data(), ga0.data(), gb0.data(), steps,
                                                    channels);
        vec->recurrence_backward(a.data(), h1.data(), gh.data(), ga1.data(), gb1.data(), steps, channels);
        CHECK(ga0 == ga1);
        CHECK(gb0 == gb1);
    }
}

TEST_CASE("recurrence computes prefix sums when a is one") {
    const std::vector<double> a(4, 1.0);
    const std::vector<double> b{1, 2, 3, 4};
    std::vector<double> h(4);
    kernels::scalar_table().recurrence_forward(a.data(), b.data(), h.data(), 4, 1);
    CHECK(h == std::vector<double>{1, 3, 6, 10});
}

TEST_CASE("selection") {
    const auto& before = kernels::active();
    kernels::select(kernels::Isa::scalar);
    CHECK(kernels::active().isa == kernels::Isa::scalar);
    if (vector_table() != nullptr) {
        kernels::select(kernels::Isa::avx2);
        CHECK(kernels::active().isa == kernels::Isa::avx2);
    }
    kernels::select(before.isa);
}
