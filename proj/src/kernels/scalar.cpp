#include "nw/kernels.hpp"

#include <algorithm>

namespace nw::kernels {
namespace {

void gemm_scalar(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                 bool trans_a, bool trans_b, bool accumulate) {
    if (!accumulate) {
        std::fill(c, c + m * n, 0.0);
    }
    if (!trans_b) {
        for (std::size_t i = 0; i < m; ++i) {
            double* crow = c + i * n;
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = trans_a ? a[p * m + i] : a[i * k + p];
                const double* brow = b + p * n;
                for (std::size_t j = 0; j < n; ++j) {
                    crow[j] += aip * brow[j];
                }
            }
        }
        return;
    }
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = trans_a ? a[p * m + i] : a[i * k + p];
                acc += aip * brow[p];
            }
            c[i * n + j] += acc;
        }
    }
}

double dot_scalar(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void recurrence_forward_scalar(const double* a, const double* b, double* h, std::size_t steps,
                               std::size_t channels) {
    if (steps == 0) {
        return;
    }
    std::copy(b, b + channels, h);
    for (std::size_t t = 1; t < steps; ++t) {
        const double* at = a + t * channels;
        const double* bt = b + t * channels;
        const double* prev = h + (t - 1) * channels;
        double* ht = h + t * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            ht[c] = at[c] * prev[c] + bt[c];
        }
    }
}

void recurrence_backward_scalar(const double* a, const double* h, const double* grad_h, double* grad_a,
                                double* grad_b, std::size_t steps, std::size_t channels) {
    if (steps == 0) {
        return;
    }
    // g[t] = grad_h[t] + a[t+1] * g[t+1]; grad_b = g; grad_a[t] = g[t] * h[t-1].
    const std::size_t last = steps - 1;
    std::copy(grad_h + last * channels, grad_h + steps * channels, grad_b + last * channels);
    for (std::size_t t = last; t-- > 0;) {
        const double* an = a + (t + 1) * channels;
        const double* gn = grad_b + (t + 1) * channels;
        const double* gh = grad_h + t * channels;
        double* gt = grad_b + t * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            gt[c] = an[c] * gn[c] + gh[c];
        }
    }
    std::fill(grad_a, grad_a + channels, 0.0);
    for (std::size_t t = 1; t < steps; ++t) {
        const double* prev = h + (t - 1) * channels;
        const double* gt = grad_b + t * channels;
        double* ga = grad_a + t * channels;
        for (std::size_t c = 0; c < channels; ++c) {
            ga[c] = gt[c] * prev[c];
        }
    }
}

constexpr KernelTable kScalar{
    Isa::scalar,
    "scalar",
    &gemm_scalar,
    &dot_scalar,
    &axpy_scalar,
    &recurrence_forward_scalar,
    &recurrence_backward_scalar,
};

} // namespace

const KernelTable& scalar_table() { return kScalar; }

} // namespace nw::kernels
