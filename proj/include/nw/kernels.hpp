#pragma once

// Dense inner loops used by the tensor ops. Each kernel has a scalar
// reference and, where the target allows, an AVX2/FMA variant chosen at
// runtime. The AVX2 linear recurrence is bit-identical to the scalar one;
// the gemm and dot variants use FMA and agree to rounding.

#include <cstddef>

namespace nw::kernels {

enum class Isa { scalar, avx2 };

struct KernelTable {
    Isa isa;
    const char* name;

    /// C(m x n) = op(A) op(B) (+ C when accumulate). op(A) is m x k: A is
    /// stored m x k, or k x m when trans_a. op(B) is k x n: B is stored
    /// k x n, or n x k when trans_b. All row-major, densely packed.
    void (*gemm)(const double* a, const double* b, double* c, std::size_t m, std::size_t k, std::size_t n,
                 bool trans_a, bool trans_b, bool accumulate);
    double (*dot)(const double* x, const double* y, std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// h[t] = a[t] * h[t-1] + b[t] over `steps` rows of `channels`, h[-1] = 0.
    void (*recurrence_forward)(const double* a, const double* b, double* h, std::size_t steps,
                               std::size_t channels);
    /// Adjoint of recurrence_forward. Overwrites grad_a and grad_b.
    void (*recurrence_backward)(const double* a, const double* h, const double* grad_h, double* grad_a,
                                double* grad_b, std::size_t steps, std::size_t channels);
};

const KernelTable& scalar_table();
/// nullptr when the AVX2 variant was not compiled in.
const KernelTable* avx2_table();

bool cpu_supports(Isa isa);

/// The table in use. Defaults to the best supported ISA; the environment
/// variable NW_KERNELS=scalar forces the reference kernels.
const KernelTable& active();

/// Overrides the selection. Throws Unsupported when the ISA is unavailable.
void select(Isa isa);

} // namespace nw::kernels
