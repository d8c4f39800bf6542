#include "nw/ops.hpp"

#include "nw/error.hpp"
#include "nw/kernels.hpp"

#include <cmath>
#include <numbers>

namespace nw::ops {
namespace {

void require_same(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        fail(ErrorKind::ShapeError, std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                                        shape_string(b.shape()) + " differ");
    }
}

// y = f(x) elementwise; df(x, y) is the local derivative.
template <typename F, typename DF>
Tensor unary(const char* op, const Tensor& a, F f, DF df) {
    const auto x = a.values();
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] = f(x[i]);
    }
    return detail::make_result(op, a.shape(), std::move(y), {a}, [df](TensorNode& self) {
        auto& in = *self.inputs[0];
        auto& g = in.grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i] * df(in.value[i], self.value[i]);
        }
    });
}

double sigmoid_of(double x) {
    if (x >= 0.0) {
        return 1.0 / (1.0 + std::exp(-x));
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

constexpr double kSeriesCutoff = 1e-2;

double expm1_ratio_of(double z) {
    if (std::abs(z) < kSeriesCutoff) {
        // sum_k z^k / (k+1)!
        return 1.0 + z * (1.0 / 2 + z * (1.0 / 6 + z * (1.0 / 24 + z * (1.0 / 120 + z * (1.0 / 720 + z / 5040)))));
    }
    return std::expm1(z) / z;
}

double expm1_ratio_grad(double z) {
    if (std::abs(z) < kSeriesCutoff) {
        // sum_k k z^(k-1) / (k+1)!
        return 1.0 / 2 +
               z * (1.0 / 3 + z * (1.0 / 8 + z * (1.0 / 30 + z * (1.0 / 144 + z * (1.0 / 840 + z / 5760)))));
    }
    return (std::exp(z) * (z - 1.0) + 1.0) / (z * z);
}

} // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same(a, b, "add");
    const auto x = a.values();
    const auto y = b.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + y[i];
    }
    return detail::make_result("add", a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        for (auto& in : self.inputs) {
            if (in->requires_grad) {
                auto& g = in->grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += self.grad[i];
                }
            }
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same(a, b, "sub");
    const auto x = a.values();
    const auto y = b.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] - y[i];
    }
    return detail::make_result("sub", a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        const double sign[2] = {1.0, -1.0};
        for (std::size_t k = 0; k < 2; ++k) {
            auto& in = *self.inputs[k];
            if (in.requires_grad) {
                auto& g = in.grad_buffer();
                for (std::size_t i = 0; i < g.size(); ++i) {
                    g[i] += sign[k] * self.grad[i];
                }
            }
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same(a, b, "mul");
    const auto x = a.values();
    const auto y = b.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * y[i];
    }
    return detail::make_result("mul", a.shape(), std::move(out), {a, b}, [](TensorNode& self) {
        auto& lhs = *self.inputs[0];
        auto& rhs = *self.inputs[1];
        if (lhs.requires_grad) {
            auto& g = lhs.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * rhs.value[i];
            }
        }
        if (rhs.requires_grad) {
            auto& g = rhs.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * lhs.value[i];
            }
        }
    });
}

Tensor scale(const Tensor& a, double factor) {
    return unary("scale", a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
    return unary("add_scalar", a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor add_row(const Tensor& a, const Tensor& row) {
    const std::size_t c = a.cols();
    if (row.numel() != c) {
        fail(ErrorKind::ShapeError, "add_row: row has " + std::to_string(row.numel()) + " entries, need " +
                                        std::to_string(c));
    }
    const auto x = a.values();
    const auto r = row.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + r[i % c];
    }
    return detail::make_result("add_row", a.shape(), std::move(out), {a, row}, [c](TensorNode& self) {
        auto& in = *self.inputs[0];
        auto& rw = *self.inputs[1];
        if (in.requires_grad) {
            auto& g = in.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i];
            }
        }
        if (rw.requires_grad) {
            auto& g = rw.grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i % c] += self.grad[i];
            }
        }
    });
}

Tensor mul_row(const Tensor& a, const Tensor& row) {
    const std::size_t c = a.cols();
    if (row.numel() != c) {
        fail(ErrorKind::ShapeError, "mul_row: row has " + std::to_string(row.numel()) + " entries, need " +
                                        std::to_string(c));
    }
    const auto x = a.values();
    const auto r = row.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] * r[i % c];
    }
    return detail::make_result("mul_row", a.shape(), std::move(out), {a, row}, [c](TensorNode& self) {
        auto& in = *self.inputs[0];
        auto& rw = *self.inputs[1];
        if (in.requires_grad) {
            auto& g = in.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += self.grad[i] * rw.value[i % c];
            }
        }
        if (rw.requires_grad) {
            auto& g = rw.grad_buffer();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                g[i % c] += self.grad[i] * in.value[i];
            }
        }
    });
}

Tensor scale_rows(const Tensor& a, std::span<const double> weights) {
    const std::size_t r = a.rows();
    const std::size_t c = a.cols();
    if (weights.size() != r) {
        fail(ErrorKind::ShapeError, "scale_rows: " + std::to_string(weights.size()) + " weights for " +
                                        std::to_string(r) + " rows");
    }
    std::vector<double> w(weights.begin(), weights.end());
    const auto x = a.values();
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            out[i * c + j] = x[i * c + j] * w[i];
        }
    }
    return detail::make_result("scale_rows", a.shape(), std::move(out), {a},
                               [w = std::move(w), c](TensorNode& self) {
                                   auto& g = self.inputs[0]->grad_buffer();
                                   for (std::size_t i = 0; i < w.size(); ++i) {
                                       for (std::size_t j = 0; j < c; ++j) {
                                           g[i * c + j] += self.grad[i * c + j] * w[i];
                                       }
                                   }
                               });
}

Tensor relu(const Tensor& a) {
    return unary("relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Tensor gelu(const Tensor& a) {
    return unary(
        "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); },
        [](double x, double) {
            const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
            const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
            return cdf + x * pdf;
        });
}

Tensor sigmoid(const Tensor& a) {
    return unary("sigmoid", a, sigmoid_of, [](double, double y) { return y * (1.0 - y); });
}

Tensor exp(const Tensor& a) {
    return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor softplus(const Tensor& a) {
    return unary(
        "softplus", a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
        [](double x, double) { return sigmoid_of(x); });
}

Tensor silu(const Tensor& a) {
    return unary(
        "silu", a, [](double x) { return x * sigmoid_of(x); },
        [](double x, double) {
            const double s = sigmoid_of(x);
            return s * (1.0 + x * (1.0 - s));
        });
}

Tensor tanh(const Tensor& a) {
    return unary("tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor expm1_ratio(const Tensor& a) {
    return unary("expm1_ratio", a, expm1_ratio_of, [](double x, double) { return expm1_ratio_grad(x); });
}

Tensor sum(const Tensor& a) {
    double total = 0.0;
    for (double x : a.values()) {
        total += x;
    }
    return detail::make_result("sum", {1}, {total}, {a}, [](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (auto& v : g) {
            v += self.grad[0];
        }
    });
}

Tensor mean(const Tensor& a) {
    const std::size_t n = a.numel();
    if (n == 0) {
        fail(ErrorKind::ShapeError, "mean of empty tensor");
    }
    return scale(sum(a), 1.0 / static_cast<double>(n));
}

Tensor mse_loss(const Tensor& pred, std::span<const double> target) {
    if (target.size() != pred.numel()) {
        fail(ErrorKind::ShapeError, "mse_loss: target size mismatch");
    }
    const Tensor t = Tensor::from(pred.shape(), std::vector<double>(target.begin(), target.end()));
    const Tensor diff = sub(pred, t);
    return mean(mul(diff, diff));
}

Tensor l1_loss(const Tensor& pred, std::span<const double> target) {
    if (target.size() != pred.numel()) {
        fail(ErrorKind::ShapeError, "l1_loss: target size mismatch");
    }
    const Tensor t = Tensor::from(pred.shape(), std::vector<double>(target.begin(), target.end()));
    const Tensor diff = sub(pred, t);
    const Tensor abs_diff = unary("abs", diff, [](double x) { return std::abs(x); },
                                  [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
    return mean(abs_diff);
}

} // namespace nw::ops
