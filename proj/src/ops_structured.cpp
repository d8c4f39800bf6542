#include "nw/ops.hpp"

#include "nw/error.hpp"
#include "nw/kernels.hpp"

#include <algorithm>
#include <memory>

namespace nw::ops {
namespace {

void require_rows(const Tensor& x, std::size_t seq_len, const char* op) {
    if (seq_len == 0 || x.rows() % seq_len != 0) {
        fail(ErrorKind::ShapeError, std::string(op) + ": " + std::to_string(x.rows()) +
                                        " rows do not split into sequences of " + std::to_string(seq_len));
    }
}

Shape with_rows(const Tensor& x, std::size_t rows) {
    Shape s = x.rank() == 0 ? Shape{1} : x.shape();
    s[0] = rows;
    return s;
}

constexpr std::size_t kScanChunk = 16;

} // namespace

Tensor segment_sum(const Tensor& values, std::span<const std::int64_t> ids, std::size_t n_segments) {
    const std::size_t r = values.rows();
    const std::size_t c = values.cols();
    if (ids.size() != r) {
        fail(ErrorKind::ShapeError, "segment_sum: one id per row required");
    }
    for (auto id : ids) {
        if (id < -1 || id >= static_cast<std::int64_t>(n_segments)) {
            fail(ErrorKind::BadIndex, "segment_sum: segment id " + std::to_string(id) + " out of range");
        }
    }
    const auto x = values.values();
    std::vector<double> out(n_segments * c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        if (ids[i] < 0) {
            continue;
        }
        double* o = out.data() + static_cast<std::size_t>(ids[i]) * c;
        const double* xi = x.data() + i * c;
        for (std::size_t j = 0; j < c; ++j) {
            o[j] += xi[j];
        }
    }
    std::vector<std::int64_t> idx(ids.begin(), ids.end());
    return detail::make_result("segment_sum", with_rows(values, n_segments), std::move(out), {values},
                               [idx = std::move(idx), c](TensorNode& self) {
                                   auto& g = self.inputs[0]->grad_buffer();
                                   for (std::size_t i = 0; i < idx.size(); ++i) {
                                       if (idx[i] < 0) {
                                           continue;
                                       }
                                       const double* go = self.grad.data() + static_cast<std::size_t>(idx[i]) * c;
                                       for (std::size_t j = 0; j < c; ++j) {
                                           g[i * c + j] += go[j];
                                       }
                                   }
                               });
}

Tensor segment_mean(const Tensor& values, std::span<const std::int64_t> ids, std::size_t n_segments) {
    std::vector<double> counts(n_segments, 0.0);
    for (auto id : ids) {
        if (id >= 0 && id < static_cast<std::int64_t>(n_segments)) {
            counts[static_cast<std::size_t>(id)] += 1.0;
        }
    }
    for (auto& cnt : counts) {
        cnt = cnt > 0.0 ? 1.0 / cnt : 0.0;
    }
    return scale_rows(segment_sum(values, ids, n_segments), counts);
}

Tensor scatter_add(const Tensor& values, std::span<const std::int64_t> index, std::size_t n_out) {
    return segment_sum(values, index, n_out);
}

Tensor gather_rows(const Tensor& x, std::span<const std::int64_t> index) {
    const std::size_t r = x.rows();
    const std::size_t c = x.cols();
    for (auto id : index) {
        if (id < -1 || id >= static_cast<std::int64_t>(r)) {
            fail(ErrorKind::BadIndex, "gather_rows: row " + std::to_string(id) + " out of range");
        }
    }
    const auto xv = x.values();
    std::vector<double> out(index.size() * c, 0.0);
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (index[i] >= 0) {
            std::copy_n(xv.data() + static_cast<std::size_t>(index[i]) * c, c, out.data() + i * c);
        }
    }
    std::vector<std::int64_t> idx(index.begin(), index.end());
    return detail::make_result("gather_rows", with_rows(x, index.size()), std::move(out), {x},
                               [idx = std::move(idx), c](TensorNode& self) {
                                   auto& g = self.inputs[0]->grad_buffer();
                                   for (std::size_t i = 0; i < idx.size(); ++i) {
                                       if (idx[i] < 0) {
                                           continue;
                                       }
                                       double* gi = g.data() + static_cast<std::size_t>(idx[i]) * c;
                                       for (std::size_t j = 0; j < c; ++j) {
                                           gi[j] += self.grad[i * c + j];
                                       }
                                   }
                               });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, std::size_t seq_len) {
    require_rows(x, seq_len, "conv1d");
    const std::size_t c = x.cols();
    if (kernel.rows() % 2 == 0) {
        fail(ErrorKind::BadKernel, "conv1d: kernel size " + std::to_string(kernel.rows()) + " must be odd");
    }
    if (kernel.cols() != c) {
        fail(ErrorKind::ShapeError, "conv1d: kernel has " + std::to_string(kernel.cols()) + " channels, input " +
                                        std::to_string(c));
    }
    const std::size_t k = kernel.rows();
    const auto half = static_cast<std::ptrdiff_t>(k / 2);
    const std::size_t n_seq = x.rows() / seq_len;
    const auto T = static_cast<std::ptrdiff_t>(seq_len);
    const auto xv = x.values();
    const auto kv = kernel.values();
    std::vector<double> out(xv.size(), 0.0);
    for (std::size_t s = 0; s < n_seq; ++s) {
        const std::size_t base = s * seq_len;
        for (std::ptrdiff_t t = 0; t < T; ++t) {
            double* o = out.data() + (base + static_cast<std::size_t>(t)) * c;
            for (std::size_t r = 0; r < k; ++r) {
                const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(r) - half;
                if (src < 0 || src >= T) {
                    continue;
                }
                const double* xi = xv.data() + (base + static_cast<std::size_t>(src)) * c;
                const double* kr = kv.data() + r * c;
                for (std::size_t j = 0; j < c; ++j) {
                    o[j] += kr[j] * xi[j];
                }
            }
        }
    }
    return detail::make_result(
        "conv1d", x.shape(), std::move(out), {x, kernel}, [n_seq, seq_len, k, c, half](TensorNode& self) {
            auto& X = *self.inputs[0];
            auto& K = *self.inputs[1];
            const auto T2 = static_cast<std::ptrdiff_t>(seq_len);
            for (std::size_t s = 0; s < n_seq; ++s) {
                const std::size_t base = s * seq_len;
                for (std::ptrdiff_t t = 0; t < T2; ++t) {
                    const double* go = self.grad.data() + (base + static_cast<std::size_t>(t)) * c;
                    for (std::size_t r = 0; r < k; ++r) {
                        const std::ptrdiff_t src = t + static_cast<std::ptrdiff_t>(r) - half;
                        if (src < 0 || src >= T2) {
                            continue;
                        }
                        const std::size_t row = (base + static_cast<std::size_t>(src)) * c;
                        if (X.requires_grad) {
                            double* gx = X.grad_buffer().data() + row;
                            const double* kr = K.value.data() + r * c;
                            for (std::size_t j = 0; j < c; ++j) {
                                gx[j] += kr[j] * go[j];
                            }
                        }
                        if (K.requires_grad) {
                            double* gk = K.grad_buffer().data() + r * c;
                            const double* xi = X.value.data() + row;
                            for (std::size_t j = 0; j < c; ++j) {
                                gk[j] += xi[j] * go[j];
                            }
                        }
                    }
                }
            }
        });
}

Tensor associative_scan(const Tensor& a, const Tensor& b, std::size_t seq_len, ScanMode mode) {
    if (a.shape() != b.shape()) {
        fail(ErrorKind::ShapeError, "associative_scan: coefficient shapes differ");
    }
    require_rows(a, seq_len, "associative_scan");
    const std::size_t c = a.cols();
    const std::size_t n_seq = a.rows() / seq_len;
    const auto av = a.values();
    const auto bv = b.values();
    std::vector<double> h(av.size(), 0.0);
    const auto& kt = kernels::active();
    if (mode == ScanMode::sequential) {
        for (std::size_t s = 0; s < n_seq; ++s) {
            const std::size_t off = s * seq_len * c;
            kt.recurrence_forward(av.data() + off, bv.data() + off, h.data() + off, seq_len, c);
        }
    } else {
        // Local scans per chunk with zero carry-in, then a carry pass that
        // folds in the running state through the chunk's cumulative decay.
        std::vector<double> decay(c);
        std::vector<double> carry(c);
        for (std::size_t s = 0; s < n_seq; ++s) {
            const std::size_t off = s * seq_len * c;
            for (std::size_t start = 0; start < seq_len; start += kScanChunk) {
                const std::size_t len = std::min(kScanChunk, seq_len - start);
                kt.recurrence_forward(av.data() + off + start * c, bv.data() + off + start * c,
                                      h.data() + off + start * c, len, c);
            }
            std::fill(carry.begin(), carry.end(), 0.0);
            for (std::size_t start = 0; start < seq_len; start += kScanChunk) {
                const std::size_t len = std::min(kScanChunk, seq_len - start);
                std::fill(decay.begin(), decay.end(), 1.0);
                for (std::size_t t = start; t < start + len; ++t) {
                    const double* at = av.data() + off + t * c;
                    double* ht = h.data() + off + t * c;
                    for (std::size_t j = 0; j < c; ++j) {
                        decay[j] *= at[j];
                        ht[j] += decay[j] * carry[j];
                    }
                }
                std::copy_n(h.data() + off + (start + len - 1) * c, c, carry.begin());
            }
        }
    }
    return detail::make_result("associative_scan", a.shape(), std::move(h), {a, b}, [n_seq, seq_len, c](TensorNode& self) {
        auto& A = *self.inputs[0];
        auto& B = *self.inputs[1];
        std::vector<double> ga(self.value.size());
        std::vector<double> gb(self.value.size());
        const auto& kt2 = kernels::active();
        for (std::size_t s = 0; s < n_seq; ++s) {
            const std::size_t off = s * seq_len * c;
            kt2.recurrence_backward(A.value.data() + off, self.value.data() + off, self.grad.data() + off,
                                    ga.data() + off, gb.data() + off, seq_len, c);
        }
        if (A.requires_grad) {
            auto& g = A.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += ga[i];
            }
        }
        if (B.requires_grad) {
            auto& g = B.grad_buffer();
            for (std::size_t i = 0; i < g.size(); ++i) {
                g[i] += gb[i];
            }
        }
    });
}

Tensor reverse_sequences(const Tensor& x, std::size_t seq_len) {
    require_rows(x, seq_len, "reverse_sequences");
    std::vector<std::int64_t> index(x.rows());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const std::size_t s = i / seq_len;
        const std::size_t t = i % seq_len;
        index[i] = static_cast<std::int64_t>(s * seq_len + (seq_len - 1 - t));
    }
    return gather_rows(x, index);
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.numel()) {
        fail(ErrorKind::ShapeError, "reshape: " + shape_string(x.shape()) + " to " + shape_string(shape));
    }
    std::vector<double> v(x.values().begin(), x.values().end());
    return detail::make_result("reshape", std::move(shape), std::move(v), {x}, [](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < g.size(); ++i) {
            g[i] += self.grad[i];
        }
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        fail(ErrorKind::ShapeError, "concat_cols: no inputs");
    }
    const std::size_t r = parts.front().rows();
    std::vector<std::size_t> widths;
    std::size_t total = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) {
            fail(ErrorKind::ShapeError, "concat_cols: row counts differ");
        }
        widths.push_back(p.cols());
        total += p.cols();
    }
    std::vector<double> out(r * total);
    std::size_t col = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto v = parts[p].values();
        for (std::size_t i = 0; i < r; ++i) {
            std::copy_n(v.data() + i * widths[p], widths[p], out.data() + i * total + col);
        }
        col += widths[p];
    }
    return detail::make_result("concat_cols", {r, total}, std::move(out), parts,
                               [r, total, widths = std::move(widths)](TensorNode& self) {
                                   std::size_t col2 = 0;
                                   for (std::size_t p = 0; p < widths.size(); ++p) {
                                       auto& in = *self.inputs[p];
                                       if (in.requires_grad) {
                                           auto& g = in.grad_buffer();
                                           for (std::size_t i = 0; i < r; ++i) {
                                               for (std::size_t j = 0; j < widths[p]; ++j) {
                                                   g[i * widths[p] + j] += self.grad[i * total + col2 + j];
                                               }
                                           }
                                       }
                                       col2 += widths[p];
                                   }
                               });
}

Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t r = x.rows();
    const std::size_t c = x.cols();
    if (begin > end || end > c) {
        fail(ErrorKind::ShapeError, "slice_cols: range out of bounds");
    }
    const std::size_t w = end - begin;
    const auto v = x.values();
    std::vector<double> out(r * w);
    for (std::size_t i = 0; i < r; ++i) {
        std::copy_n(v.data() + i * c + begin, w, out.data() + i * w);
    }
    return detail::make_result("slice_cols", {r, w}, std::move(out), {x}, [r, c, w, begin](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < w; ++j) {
                g[i * c + begin + j] += self.grad[i * w + j];
            }
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
    if (parts.empty()) {
        fail(ErrorKind::ShapeError, "concat_rows: no inputs");
    }
    const std::size_t c = parts.front().cols();
    std::size_t total = 0;
    std::vector<std::size_t> sizes;
    for (const auto& p : parts) {
        if (p.cols() != c) {
            fail(ErrorKind::ShapeError, "concat_rows: column counts differ");
        }
        total += p.rows();
        sizes.push_back(p.numel());
    }
    std::vector<double> out;
    out.reserve(total * c);
    for (const auto& p : parts) {
        out.insert(out.end(), p.values().begin(), p.values().end());
    }
    return detail::make_result("concat_rows", {total, c}, std::move(out), parts,
                               [sizes = std::move(sizes)](TensorNode& self) {
                                   std::size_t off = 0;
                                   for (std::size_t p = 0; p < sizes.size(); ++p) {
                                       auto& in = *self.inputs[p];
                                       if (in.requires_grad) {
                                           auto& g = in.grad_buffer();
                                           for (std::size_t i = 0; i < sizes[p]; ++i) {
                                               g[i] += self.grad[off + i];
                                           }
                                       }
                                       off += sizes[p];
                                   }
                               });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
    const std::size_t c = x.cols();
    if (begin > end || end > x.rows()) {
        fail(ErrorKind::ShapeError, "slice_rows: range out of bounds");
    }
    const auto v = x.values();
    std::vector<double> out(v.begin() + static_cast<std::ptrdiff_t>(begin * c),
                            v.begin() + static_cast<std::ptrdiff_t>(end * c));
    return detail::make_result("slice_rows", with_rows(x, end - begin), std::move(out), {x},
                               [off = begin * c](TensorNode& self) {
                                   auto& g = self.inputs[0]->grad_buffer();
                                   for (std::size_t i = 0; i < self.grad.size(); ++i) {
                                       g[off + i] += self.grad[i];
                                   }
                               });
}

Tensor repeat_cols(const Tensor& x, std::size_t k) {
    const std::size_t r = x.rows();
    const std::size_t c = x.cols();
    const auto v = x.values();
    std::vector<double> out(r * c * k);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            std::fill_n(out.data() + i * c * k + j * k, k, v[i * c + j]);
        }
    }
    return detail::make_result("repeat_cols", {r, c * k}, std::move(out), {x}, [r, c, k](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                double acc = 0.0;
                for (std::size_t q = 0; q < k; ++q) {
                    acc += self.grad[i * c * k + j * k + q];
                }
                g[i * c + j] += acc;
            }
        }
    });
}

Tensor tile_cols(const Tensor& x, std::size_t k) {
    const std::size_t r = x.rows();
    const std::size_t c = x.cols();
    const auto v = x.values();
    std::vector<double> out(r * c * k);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t q = 0; q < k; ++q) {
            std::copy_n(v.data() + i * c, c, out.data() + i * c * k + q * c);
        }
    }
    return detail::make_result("tile_cols", {r, c * k}, std::move(out), {x}, [r, c, k](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t q = 0; q < k; ++q) {
                for (std::size_t j = 0; j < c; ++j) {
                    g[i * c + j] += self.grad[i * c * k + q * c + j];
                }
            }
        }
    });
}

Tensor sum_col_groups(const Tensor& x, std::size_t k) {
    const std::size_t r = x.rows();
    const std::size_t w = x.cols();
    if (k == 0 || w % k != 0) {
        fail(ErrorKind::ShapeError, "sum_col_groups: width not divisible by group size");
    }
    const std::size_t c = w / k;
    const auto v = x.values();
    std::vector<double> out(r * c, 0.0);
    for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) {
            double acc = 0.0;
            for (std::size_t q = 0; q < k; ++q) {
                acc += v[i * w + j * k + q];
            }
            out[i * c + j] = acc;
        }
    }
    return detail::make_result("sum_col_groups", {r, c}, std::move(out), {x}, [r, c, k](TensorNode& self) {
        auto& g = self.inputs[0]->grad_buffer();
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
                for (std::size_t q = 0; q < k; ++q) {
                    g[i * c * k + j * k + q] += self.grad[i * c + j];
                }
            }
        }
    });
}

} // namespace nw::ops
