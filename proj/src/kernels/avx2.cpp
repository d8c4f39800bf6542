#include "nw/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <vector>

namespace nw::kernels {
namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        acc += x[i] * y[i];
    }
    return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

// C[i0:i0+4, j0:j0+8] += op(A)[i0:i0+4, :] * B[:, j0:j0+8], B row-major k x n.
inline void block_4x8(const double* a, std::size_t lda_row, std::size_t lda_col, const double* b, double* c,
                      std::size_t k, std::size_t n) {
    __m256d c00 = _mm256_loadu_pd(c), c01 = _mm256_loadu_pd(c + 4);
    __m256d c10 = _mm256_loadu_pd(c + n), c11 = _mm256_loadu_pd(c + n + 4);
    __m256d c20 = _mm256_loadu_pd(c + 2 * n), c21 = _mm256_loadu_pd(c + 2 * n + 4);
    __m256d c30 = _mm256_loadu_pd(c + 3 * n), c31 = _mm256_loadu_pd(c + 3 * n + 4);
    for (std::size_t p = 0; p < k; ++p) {
        const __m256d b0 = _mm256_loadu_pd(b + p * n);
        const __m256d b1 = _mm256_loadu_pd(b + p * n + 4);
        const double* ap = a + p * lda_col;
        __m256d av = _mm256_broadcast_sd(ap);
        c00 = _mm256_fmadd_pd(av, b0, c00);
        c01 = _mm256_fmadd_pd(av, b1, c01);
        av = _mm256_broadcast_sd(ap + lda_row);
        c10 = _mm256_fmadd_pd(av, b0, c10);
        c11 = _mm256_fmadd_pd(av, b1, c11);
        av = _mm256_broadcast_sd(ap + 2 * lda_row);
        c20 = _mm256_fmadd_pd(av, b0, c20);
        c21 = _mm256_fmadd_pd(av, b1, c21);
        av = _mm256_broadcast_sd(ap + 3 * lda_row);
        c30 = _mm256_fmadd_pd(av, b0, c30);
        c31 = _mm256_fmadd_pd(av, b1, c31);
    }
    _mm256_storeu_pd(c, c00);
    _mm256_storeu_pd(c + 4, c01);
    _mm256_storeu_pd(c + n, c10);
    _mm256_storeu_pd(c + n + 4, c11);
    _mm256_storeu_pd(c + 2 * n, c20);
    _mm256_storeu_pd(c + 2 * n + 4, c21);
    _mm256_storeu_pd(c + 3 * n, c30);
    _mm256_storeu_pd(c + 3 * n + 4, c31);
}

void gemm_avx2(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
               bool trans_a, bool trans_b, bool accumulate) {
    if (!accumulate) {
        std::fill(c, c + m * n, 0.0);
    }
    std::vector<double> packed;
    if (trans_b) {
        // op(B) = B^T with B stored n x k; repack as k x n.
        packed.resize(k * n);
        for (std::size_t j = 0; j < n; ++j) {
            for (std::size_t p = 0; p < k; ++p) {
                packed[p * n + j] = b[j * k + p];
            }
        }
        b = packed.data();
    }
    // Element (i, p) of op(A) lives at a[i * lda_row + p * lda_col].
    const std::size_t lda_row = trans_a ? 1 : k;
    const std::size_t lda_col = trans_a ? m : 1;
    const std::size_t m4 = m - m % 4;
    const std::size_t n8 = n - n % 8;
    for (std::size_t i = 0; i < m4; i += 4) {
        for (std::size_t j = 0; j < n8; j += 8) {
            block_4x8(a + i * lda_row, lda_row, lda_col, b + j, c + i * n + j, k, n);
        }
    }
    // Column remainder for blocked rows, then leftover rows.
    if (n8 < n) {
        for (std::size_t i = 0; i < m4; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
                const double aip = a[i * lda_row + p * lda_col];
                for (std::size_t j = n8; j < n; ++j) {
                    c[i * n + j] += aip * b[p * n + j];
                }
            }
        }
    }
    for (std::size_t i = m4; i < m; ++i) {
        for (std::size_t p = 0; p < k; ++p) {
            axpy_avx2(a[i * lda_row + p * lda_col], b + p * n, c + i * n, n);
        }
    }
}

void recurrence_forward_avx2(const double* a, const double* b, double* h, std::size_t steps,
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
        std::size_t c = 0;
        for (; c + 4 <= channels; c += 4) {
            const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(at + c), _mm256_loadu_pd(prev + c));
            _mm256_storeu_pd(ht + c, _mm256_add_pd(prod, _mm256_loadu_pd(bt + c)));
        }
        for (; c < channels; ++c) {
            ht[c] = at[c] * prev[c] + bt[c];
        }
    }
}

void recurrence_backward_avx2(const double* a, const double* h, const double* grad_h, double* grad_a,
                              double* grad_b, std::size_t steps, std::size_t channels) {
    if (steps == 0) {
        return;
    }
    const std::size_t last = steps - 1;
    std::copy(grad_h + last * channels, grad_h + steps * channels, grad_b + last * channels);
    for (std::size_t t = last; t-- > 0;) {
        const double* an = a + (t + 1) * channels;
        const double* gn = grad_b + (t + 1) * channels;
        const double* gh = grad_h + t * channels;
        double* gt = grad_b + t * channels;
        std::size_t c = 0;
        for (; c + 4 <= channels; c += 4) {
            const __m256d prod = _mm256_mul_pd(_mm256_loadu_pd(an + c), _mm256_loadu_pd(gn + c));
            _mm256_storeu_pd(gt + c, _mm256_add_pd(prod, _mm256_loadu_pd(gh + c)));
        }
        for (; c < channels; ++c) {
            gt[c] = an[c] * gn[c] + gh[c];
        }
    }
    std::fill(grad_a, grad_a + channels, 0.0);
    for (std::size_t t = 1; t < steps; ++t) {
        const double* prev = h + (t - 1) * channels;
        const double* gt = grad_b + t * channels;
        double* ga = grad_a + t * channels;
        std::size_t c = 0;
        for (; c + 4 <= channels; c += 4) {
            _mm256_storeu_pd(ga + c, _mm256_mul_pd(_mm256_loadu_pd(gt + c), _mm256_loadu_pd(prev + c)));
        }
        for (; c < channels; ++c) {
            ga[c] = gt[c] * prev[c];
        }
    }
}

constexpr KernelTable kAvx2{
    Isa::avx2,
    "avx2",
    &gemm_avx2,
    &dot_avx2,
    &axpy_avx2,
    &recurrence_forward_avx2,
    &recurrence_backward_avx2,
};

} // namespace

const KernelTable* avx2_table() { return &kAvx2; }

} // namespace nw::kernels
