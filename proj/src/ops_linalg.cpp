#include "nw/ops.hpp"

#include "nw/error.hpp"
#include "nw/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace nw::ops {

Tensor matmul(const Tensor& a, const Tensor& b) {
    const std::size_t n = a.rows();
    const std::size_t k = a.cols();
    if (b.rank() != 2 || b.dim(0) != k) {
        fail(ErrorKind::ShapeError, "matmul: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    const std::size_t m = b.dim(1);
    std::vector<double> out(n * m, 0.0);
    if (n * m > 0 && k > 0) {
        kernels::active().gemm(a.values().data(), b.values().data(), out.data(), n, k, m, false, false, false);
    }
    return detail::make_result("matmul", {n, m}, std::move(out), {a, b}, [n, k, m](TensorNode& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        if (n * m == 0 || k == 0) {
            return;
        }
        const auto& kt = kernels::active();
        if (A.requires_grad) {
            // dA = dC B^T
            kt.gemm(self.grad.data(), B.value.data(), A.grad_buffer().data(), n, m, k, false, true, true);
        }
        if (B.requires_grad) {
            // dB = A^T dC
            kt.gemm(A.value.data(), self.grad.data(), B.grad_buffer().data(), k, n, m, true, false, true);
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& bias) {
    Tensor y = matmul(x, w);
    return bias.defined() ? add_row(y, bias) : y;
}

Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b) {
    if (a.rank() != 3 || b.rank() != 3 || a.dim(0) != b.dim(0)) {
        fail(ErrorKind::ShapeError, "bmm: " + shape_string(a.shape()) + " x " + shape_string(b.shape()));
    }
    const std::size_t batch = a.dim(0);
    const std::size_t n = a.dim(1);
    const std::size_t k = a.dim(2);
    const std::size_t kb = trans_b ? b.dim(2) : b.dim(1);
    const std::size_t m = trans_b ? b.dim(1) : b.dim(2);
    if (kb != k) {
        fail(ErrorKind::ShapeError, "bmm: inner dimensions differ");
    }
    std::vector<double> out(batch * n * m, 0.0);
    const auto& kt = kernels::active();
    for (std::size_t i = 0; i < batch; ++i) {
        kt.gemm(a.values().data() + i * n * k, b.values().data() + i * k * m, out.data() + i * n * m, n, k, m,
                false, trans_b, false);
    }
    return detail::make_result("bmm", {batch, n, m}, std::move(out), {a, b},
                               [batch, n, k, m, trans_b](TensorNode& self) {
                                   auto& A = *self.inputs[0];
                                   auto& B = *self.inputs[1];
                                   const auto& kt2 = kernels::active();
                                   for (std::size_t i = 0; i < batch; ++i) {
                                       const double* dc = self.grad.data() + i * n * m;
                                       const double* av = A.value.data() + i * n * k;
                                       const double* bv = B.value.data() + i * k * m;
                                       if (A.requires_grad) {
                                           // dA = dC op(B)^T
                                           double* da = A.grad_buffer().data() + i * n * k;
                                           kt2.gemm(dc, bv, da, n, m, k, false, !trans_b, true);
                                       }
                                       if (B.requires_grad) {
                                           double* db = B.grad_buffer().data() + i * k * m;
                                           if (trans_b) {
                                               // B stored [m, k]: dB = dC^T A
                                               kt2.gemm(dc, av, db, m, n, k, true, false, true);
                                           } else {
                                               kt2.gemm(av, dc, db, k, n, m, true, false, true);
                                           }
                                       }
                                   }
                               });
}

Tensor softmax(const Tensor& a) {
    const std::size_t c = a.rank() == 0 ? 1 : a.shape().back();
    const std::size_t r = c == 0 ? 0 : a.numel() / c;
    const auto x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = x.data() + i * c;
        double* yi = y.data() + i * c;
        const double mx = *std::max_element(xi, xi + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            yi[j] = std::exp(xi[j] - mx);
            total += yi[j];
        }
        for (std::size_t j = 0; j < c; ++j) {
            yi[j] /= total;
        }
    }
    return detail::make_result("softmax", a.shape(), std::move(y), {a}, [r, c](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            const double* yi = self.value.data() + i * c;
            const double* gy = self.grad.data() + i * c;
            double dot = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                dot += gy[j] * yi[j];
            }
            for (std::size_t j = 0; j < c; ++j) {
                g[i * c + j] += yi[j] * (gy[j] - dot);
            }
        }
    });
}

Tensor log_softmax(const Tensor& a) {
    const std::size_t c = a.rank() == 0 ? 1 : a.shape().back();
    const std::size_t r = c == 0 ? 0 : a.numel() / c;
    const auto x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = x.data() + i * c;
        const double mx = *std::max_element(xi, xi + c);
        double total = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            total += std::exp(xi[j] - mx);
        }
        const double lse = mx + std::log(total);
        for (std::size_t j = 0; j < c; ++j) {
            y[i * c + j] = xi[j] - lse;
        }
    }
    return detail::make_result("log_softmax", a.shape(), std::move(y), {a}, [r, c](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            const double* yi = self.value.data() + i * c;
            const double* gy = self.grad.data() + i * c;
            double total = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                total += gy[j];
            }
            for (std::size_t j = 0; j < c; ++j) {
                g[i * c + j] += gy[j] - std::exp(yi[j]) * total;
            }
        }
    });
}

Tensor layernorm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    const std::size_t c = x.rank() == 0 ? 1 : x.shape().back();
    if (gamma.numel() != c || beta.numel() != c) {
        fail(ErrorKind::ShapeError, "layernorm: affine parameters need " + std::to_string(c) + " entries");
    }
    const std::size_t r = c == 0 ? 0 : x.numel() / c;
    const auto xv = x.values();
    const auto gv = gamma.values();
    const auto bv = beta.values();
    std::vector<double> y(xv.size());
    std::vector<double> xhat(xv.size());
    std::vector<double> inv_std(r);
    for (std::size_t i = 0; i < r; ++i) {
        const double* xi = xv.data() + i * c;
        double mu = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            mu += xi[j];
        }
        mu /= static_cast<double>(c);
        double var = 0.0;
        for (std::size_t j = 0; j < c; ++j) {
            var += (xi[j] - mu) * (xi[j] - mu);
        }
        var /= static_cast<double>(c);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < c; ++j) {
            xhat[i * c + j] = (xi[j] - mu) * inv_std[i];
            y[i * c + j] = gv[j] * xhat[i * c + j] + bv[j];
        }
    }
    return detail::make_result(
        "layernorm", x.shape(), std::move(y), {x, gamma, beta},
        [r, c, xhat = std::move(xhat), inv_std = std::move(inv_std)](TensorNode& self) {
            auto& in = *self.inputs[0];
            auto& gam = *self.inputs[1];
            auto& bet = *self.inputs[2];
            if (gam.requires_grad || bet.requires_grad) {
                auto& gg = gam.grad_buffer();
                auto& gb = bet.grad_buffer();
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) {
                        gg[j] += self.grad[i * c + j] * xhat[i * c + j];
                        gb[j] += self.grad[i * c + j];
                    }
                }
            }
            if (!in.requires_grad) {
                return;
            }
            auto& gx = in.grad_buffer();
            const double inv_c = 1.0 / static_cast<double>(c);
            for (std::size_t i = 0; i < r; ++i) {
                double mean_d = 0.0;
                double mean_dx = 0.0;
                for (std::size_t j = 0; j < c; ++j) {
                    const double d = self.grad[i * c + j] * gam.value[j];
                    mean_d += d;
                    mean_dx += d * xhat[i * c + j];
                }
                mean_d *= inv_c;
                mean_dx *= inv_c;
                for (std::size_t j = 0; j < c; ++j) {
                    const double d = self.grad[i * c + j] * gam.value[j];
                    gx[i * c + j] += inv_std[i] * (d - mean_d - xhat[i * c + j] * mean_dx);
                }
            }
        });
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::int64_t> labels) {
    const std::size_t r = logits.rows();
    const std::size_t c = logits.cols();
    if (labels.size() != r) {
        fail(ErrorKind::ShapeError, "cross_entropy: one label per row required");
    }
    const Tensor lsm = log_softmax(reshape(logits, {r, c}));
    std::vector<std::int64_t> picks(r);
    for (std::size_t i = 0; i < r; ++i) {
        if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c) {
            fail(ErrorKind::BadIndex, "cross_entropy: label out of range");
        }
        picks[i] = static_cast<std::int64_t>(i * c) + labels[i];
    }
    // Pick log-probabilities by flattening to one column.
    const Tensor flat = reshape(lsm, {r * c, 1});
    const Tensor picked = gather_rows(flat, picks);
    return scale(mean(picked), -1.0);
}

} // namespace nw::ops
