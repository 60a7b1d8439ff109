#include "sdt/numcore/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "sdt/errors.hpp"

namespace sdt {

double Rng::normal() {
    // 1 - u keeps the log argument in (0, 1].
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

namespace {

void require_matrix(const Tensor& t, const char* op) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_str(t.shape()));
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                             shape_str(b.shape()));
    }
}

// Views an n-d shape as [outer, axis, inner] around `axis`.
struct AxisView {
    std::size_t outer = 1, extent = 1, inner = 1;
};

AxisView axis_view(const Shape& shape, std::size_t axis) {
    AxisView v;
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i < axis) v.outer *= shape[i];
        else if (i == axis) v.extent = shape[i];
        else v.inner *= shape[i];
    }
    return v;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul");
    require_matrix(b, "matmul");
    const std::size_t P = a.dim(0), Q = a.dim(1), R = b.dim(1);
    if (b.dim(0) != Q) {
        throw DimensionError("matmul: inner dimensions differ " + shape_str(a.shape()) + " * " +
                             shape_str(b.shape()));
    }
    std::vector<double> out(P * R, 0.0);
    auto A = a.data();
    auto B = b.data();
    for (std::size_t i = 0; i < P; ++i) {
        double* row = out.data() + i * R;
        for (std::size_t k = 0; k < Q; ++k) {
            const double aik = A[i * Q + k];
            if (aik == 0.0) continue;
            const double* brow = B.data() + k * R;
            for (std::size_t j = 0; j < R; ++j) row[j] += aik * brow[j];
        }
    }
    return Tensor::record({P, R}, std::move(out), {a, b},
                          [a, b, P, Q, R](const detail::BackwardContext& ctx) {
                              auto dC = ctx.out_grad;
                              if (double* dA = ctx.in_grads[0]) {
                                  auto B = b.data();
                                  for (std::size_t i = 0; i < P; ++i) {
                                      const double* gc = dC.data() + i * R;
                                      for (std::size_t k = 0; k < Q; ++k) {
                                          const double* brow = B.data() + k * R;
                                          double acc = 0.0;
                                          for (std::size_t j = 0; j < R; ++j) acc += gc[j] * brow[j];
                                          dA[i * Q + k] += acc;
                                      }
                                  }
                              }
                              if (double* dB = ctx.in_grads[1]) {
                                  auto A = a.data();
                                  for (std::size_t i = 0; i < P; ++i) {
                                      const double* gc = dC.data() + i * R;
                                      for (std::size_t k = 0; k < Q; ++k) {
                                          const double aik = A[i * Q + k];
                                          if (aik == 0.0) continue;
                                          double* gb = dB + k * R;
                                          for (std::size_t j = 0; j < R; ++j) gb[j] += aik * gc[j];
                                      }
                                  }
                              }
                          },
                          "matmul");
}

Tensor transpose(const Tensor& x) {
    require_matrix(x, "transpose");
    const std::size_t R = x.dim(0), C = x.dim(1);
    std::vector<double> out(R * C);
    auto X = x.data();
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) out[j * R + i] = X[i * C + j];
    return Tensor::record({C, R}, std::move(out), {x},
                          [R, C](const detail::BackwardContext& ctx) {
                              if (double* dx = ctx.in_grads[0]) {
                                  for (std::size_t i = 0; i < R; ++i)
                                      for (std::size_t j = 0; j < C; ++j) dx[i * C + j] += ctx.out_grad[j * R + i];
                              }
                          },
                          "transpose");
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    auto A = a.data();
    auto B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] + B[i];
    return Tensor::record(a.shape(), std::move(out), {a, b},
                          [](const detail::BackwardContext& ctx) {
                              for (double* d : ctx.in_grads) {
                                  if (!d) continue;
                                  for (std::size_t i = 0; i < ctx.out_grad.size(); ++i) d[i] += ctx.out_grad[i];
                              }
                          },
                          "add");
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    auto A = a.data();
    auto B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] - B[i];
    return Tensor::record(a.shape(), std::move(out), {a, b},
                          [](const detail::BackwardContext& ctx) {
                              const auto& g = ctx.out_grad;
                              if (double* d = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
                              if (double* d = ctx.in_grads[1])
                                  for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
                          },
                          "sub");
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    auto A = a.data();
    auto B = b.data();
    std::vector<double> out(A.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = A[i] * B[i];
    return Tensor::record(a.shape(), std::move(out), {a, b},
                          [a, b](const detail::BackwardContext& ctx) {
                              const auto& g = ctx.out_grad;
                              if (double* d = ctx.in_grads[0]) {
                                  auto B = b.data();
                                  for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * B[i];
                              }
                              if (double* d = ctx.in_grads[1]) {
                                  auto A = a.data();
                                  for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * A[i];
                              }
                          },
                          "mul");
}

Tensor scale(const Tensor& x, double factor) {
    auto X = x.data();
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] * factor;
    return Tensor::record(x.shape(), std::move(out), {x},
                          [factor](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < ctx.out_grad.size(); ++i) d[i] += ctx.out_grad[i] * factor;
                          },
                          "scale");
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
    require_matrix(x, "add_bias");
    const std::size_t N = x.dim(0), D = x.dim(1);
    if (bias.rank() != 1 || bias.dim(0) != D) {
        throw DimensionError("add_bias: bias " + shape_str(bias.shape()) + " does not fit " + shape_str(x.shape()));
    }
    auto X = x.data();
    auto b = bias.data();
    std::vector<double> out(N * D);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < D; ++j) out[i * D + j] = X[i * D + j] + b[j];
    return Tensor::record(x.shape(), std::move(out), {x, bias},
                          [N, D](const detail::BackwardContext& ctx) {
                              const auto& g = ctx.out_grad;
                              if (double* dx = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
                              if (double* db = ctx.in_grads[1])
                                  for (std::size_t i = 0; i < N; ++i)
                                      for (std::size_t j = 0; j < D; ++j) db[j] += g[i * D + j];
                          },
                          "add_bias");
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
    return add_bias(matmul(x, weight), bias);
}

Tensor sigmoid(const Tensor& x) {
    auto X = x.data();
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = X[i];
        // Split by sign so exp never overflows.
        if (v >= 0) {
            out[i] = 1.0 / (1.0 + std::exp(-v));
        } else {
            const double e = std::exp(v);
            out[i] = e / (1.0 + e);
        }
    }
    return Tensor::record(x.shape(), std::move(out), {x},
                          [](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0]) {
                                  for (std::size_t i = 0; i < ctx.out_grad.size(); ++i) {
                                      const double y = ctx.out_value[i];
                                      d[i] += ctx.out_grad[i] * y * (1.0 - y);
                                  }
                              }
                          },
                          "sigmoid");
}

Tensor relu(const Tensor& x) {
    auto X = x.data();
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = X[i] > 0.0 ? X[i] : 0.0;
    return Tensor::record(x.shape(), std::move(out), {x},
                          [](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < ctx.out_grad.size(); ++i)
                                      if (ctx.out_value[i] > 0.0) d[i] += ctx.out_grad[i];
                          },
                          "relu");
}

namespace {

// Shared backward of softmax-like ops: dx = y * (g - <g, y>) along each slice.
void softmax_backward(const detail::BackwardContext& ctx, const AxisView& v) {
    double* d = ctx.in_grads[0];
    if (!d) return;
    const auto& y = ctx.out_value;
    const auto& g = ctx.out_grad;
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.extent * v.inner + in;
            double dot = 0.0;
            for (std::size_t k = 0; k < v.extent; ++k) {
                const std::size_t idx = base + k * v.inner;
                dot += g[idx] * y[idx];
            }
            for (std::size_t k = 0; k < v.extent; ++k) {
                const std::size_t idx = base + k * v.inner;
                d[idx] += y[idx] * (g[idx] - dot);
            }
        }
    }
}

}  // namespace

Tensor softmax(const Tensor& x, std::size_t axis) {
    if (axis >= x.rank()) throw DimensionError("softmax: axis out of range for " + shape_str(x.shape()));
    const AxisView v = axis_view(x.shape(), axis);
    auto X = x.data();
    std::vector<double> out(X.size());
    for (std::size_t o = 0; o < v.outer; ++o) {
        for (std::size_t in = 0; in < v.inner; ++in) {
            const std::size_t base = o * v.extent * v.inner + in;
            double mx = X[base];
            for (std::size_t k = 1; k < v.extent; ++k) mx = std::max(mx, X[base + k * v.inner]);
            double total = 0.0;
            for (std::size_t k = 0; k < v.extent; ++k) {
                const std::size_t idx = base + k * v.inner;
                out[idx] = std::exp(X[idx] - mx);
                total += out[idx];
            }
            for (std::size_t k = 0; k < v.extent; ++k) out[base + k * v.inner] /= total;
        }
    }
    return Tensor::record(x.shape(), std::move(out), {x},
                          [v](const detail::BackwardContext& ctx) { softmax_backward(ctx, v); }, "softmax");
}

Tensor masked_softmax_rows(const Tensor& x, std::span<const std::uint8_t> key_valid) {
    require_matrix(x, "masked_softmax_rows");
    const std::size_t R = x.dim(0), C = x.dim(1);
    if (key_valid.size() != C) {
        throw DimensionError("masked_softmax_rows: mask length " + std::to_string(key_valid.size()) +
                             " vs " + std::to_string(C) + " keys");
    }
    if (std::none_of(key_valid.begin(), key_valid.end(), [](std::uint8_t m) { return m != 0; })) {
        throw UsageError("attention: every key is masked");
    }
    auto X = x.data();
    std::vector<double> out(R * C, 0.0);
    for (std::size_t i = 0; i < R; ++i) {
        const double* row = X.data() + i * C;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < C; ++j)
            if (key_valid[j]) mx = std::max(mx, row[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < C; ++j) {
            if (!key_valid[j]) continue;
            out[i * C + j] = std::exp(row[j] - mx);
            total += out[i * C + j];
        }
        for (std::size_t j = 0; j < C; ++j) out[i * C + j] /= total;
    }
    const AxisView v{R, C, 1};
    return Tensor::record(x.shape(), std::move(out), {x},
                          [v](const detail::BackwardContext& ctx) { softmax_backward(ctx, v); },
                          "masked_softmax");
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
    if (parts.empty()) throw DimensionError("concat: no inputs");
    const Shape& first = parts.front().shape();
    if (axis >= first.size()) throw DimensionError("concat: axis out of range");
    Shape out_shape = first;
    out_shape[axis] = 0;
    std::vector<std::size_t> extents;
    for (const auto& p : parts) {
        const Shape& s = p.shape();
        if (s.size() != first.size()) throw DimensionError("concat: rank mismatch");
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i != axis && s[i] != first[i]) {
                throw DimensionError("concat: shapes " + shape_str(first) + " and " + shape_str(s) +
                                     " disagree off the concat axis");
            }
        }
        extents.push_back(s[axis]);
        out_shape[axis] += s[axis];
    }
    const AxisView v = axis_view(out_shape, axis);
    std::vector<double> out(numel_of(out_shape));
    std::size_t offset = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
        auto P = parts[p].data();
        const std::size_t chunk = extents[p] * v.inner;
        for (std::size_t o = 0; o < v.outer; ++o) {
            std::copy_n(P.data() + o * chunk, chunk, out.data() + o * v.extent * v.inner + offset * v.inner);
        }
        offset += extents[p];
    }
    return Tensor::record(out_shape, std::move(out), parts,
                          [v, extents](const detail::BackwardContext& ctx) {
                              std::size_t offset = 0;
                              for (std::size_t p = 0; p < extents.size(); ++p) {
                                  const std::size_t chunk = extents[p] * v.inner;
                                  if (double* d = ctx.in_grads[p]) {
                                      for (std::size_t o = 0; o < v.outer; ++o) {
                                          const double* g = ctx.out_grad.data() + o * v.extent * v.inner + offset * v.inner;
                                          double* dst = d + o * chunk;
                                          for (std::size_t i = 0; i < chunk; ++i) dst[i] += g[i];
                                      }
                                  }
                                  offset += extents[p];
                              }
                          },
                          "concat");
}

Tensor slice_cols(const Tensor& x, std::size_t start, std::size_t len) {
    require_matrix(x, "slice_cols");
    const std::size_t R = x.dim(0), C = x.dim(1);
    if (start + len > C) throw DimensionError("slice_cols: range past " + std::to_string(C) + " columns");
    auto X = x.data();
    std::vector<double> out(R * len);
    for (std::size_t i = 0; i < R; ++i) std::copy_n(X.data() + i * C + start, len, out.data() + i * len);
    return Tensor::record({R, len}, std::move(out), {x},
                          [R, C, start, len](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < R; ++i)
                                      for (std::size_t j = 0; j < len; ++j) d[i * C + start + j] += ctx.out_grad[i * len + j];
                          },
                          "slice_cols");
}

Tensor stack(const std::vector<Tensor>& parts) {
    if (parts.empty()) throw DimensionError("stack: no inputs");
    const Shape& first = parts.front().shape();
    for (const auto& p : parts) require_same_shape(parts.front(), p, "stack");
    const std::size_t chunk = numel_of(first);
    std::vector<double> out(chunk * parts.size());
    for (std::size_t p = 0; p < parts.size(); ++p) {
        auto P = parts[p].data();
        std::copy(P.begin(), P.end(), out.begin() + static_cast<std::ptrdiff_t>(p * chunk));
    }
    Shape out_shape{parts.size()};
    out_shape.insert(out_shape.end(), first.begin(), first.end());
    return Tensor::record(out_shape, std::move(out), parts,
                          [chunk](const detail::BackwardContext& ctx) {
                              for (std::size_t p = 0; p < ctx.in_grads.size(); ++p) {
                                  if (double* d = ctx.in_grads[p]) {
                                      const double* g = ctx.out_grad.data() + p * chunk;
                                      for (std::size_t i = 0; i < chunk; ++i) d[i] += g[i];
                                  }
                              }
                          },
                          "stack");
}

Tensor select(const Tensor& x, std::size_t index) {
    const Shape& s = x.shape();
    if (s.empty() || index >= s[0]) throw DimensionError("select: index out of range for " + shape_str(s));
    Shape out_shape(s.begin() + 1, s.end());
    const std::size_t chunk = numel_of(out_shape);
    auto X = x.data();
    std::vector<double> out(X.begin() + static_cast<std::ptrdiff_t>(index * chunk),
                            X.begin() + static_cast<std::ptrdiff_t>((index + 1) * chunk));
    return Tensor::record(out_shape, std::move(out), {x},
                          [index, chunk](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0]) {
                                  double* dst = d + index * chunk;
                                  for (std::size_t i = 0; i < chunk; ++i) dst[i] += ctx.out_grad[i];
                              }
                          },
                          "select");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    require_matrix(x, "layer_norm");
    const std::size_t N = x.dim(0), D = x.dim(1);
    if (D < 1) throw DimensionError("layer_norm: empty feature axis");
    if (gamma.shape() != Shape{D} || beta.shape() != Shape{D}) {
        throw DimensionError("layer_norm: affine parameters must have shape [" + std::to_string(D) + "]");
    }
    auto X = x.data();
    auto G = gamma.data();
    auto B = beta.data();
    std::vector<double> out(N * D);
    std::vector<double> xhat(N * D);
    std::vector<double> inv_std(N);
    for (std::size_t i = 0; i < N; ++i) {
        const double* row = X.data() + i * D;
        double mu = 0.0;
        for (std::size_t j = 0; j < D; ++j) mu += row[j];
        mu /= static_cast<double>(D);
        double var = 0.0;
        for (std::size_t j = 0; j < D; ++j) var += (row[j] - mu) * (row[j] - mu);
        var /= static_cast<double>(D);
        inv_std[i] = 1.0 / std::sqrt(var + eps);
        for (std::size_t j = 0; j < D; ++j) {
            xhat[i * D + j] = (row[j] - mu) * inv_std[i];
            out[i * D + j] = xhat[i * D + j] * G[j] + B[j];
        }
    }
    return Tensor::record(x.shape(), std::move(out), {x, gamma, beta},
                          [gamma, xhat = std::move(xhat), inv_std = std::move(inv_std), N,
                           D](const detail::BackwardContext& ctx) {
                              const auto& g = ctx.out_grad;
                              auto G = gamma.data();
                              if (double* dx = ctx.in_grads[0]) {
                                  for (std::size_t i = 0; i < N; ++i) {
                                      double sum_gh = 0.0, sum_ghx = 0.0;
                                      for (std::size_t j = 0; j < D; ++j) {
                                          const double gh = g[i * D + j] * G[j];
                                          sum_gh += gh;
                                          sum_ghx += gh * xhat[i * D + j];
                                      }
                                      const double inv_d = 1.0 / static_cast<double>(D);
                                      for (std::size_t j = 0; j < D; ++j) {
                                          const double gh = g[i * D + j] * G[j];
                                          dx[i * D + j] +=
                                              inv_std[i] * (gh - inv_d * sum_gh - xhat[i * D + j] * inv_d * sum_ghx);
                                      }
                                  }
                              }
                              if (double* dg = ctx.in_grads[1])
                                  for (std::size_t i = 0; i < N; ++i)
                                      for (std::size_t j = 0; j < D; ++j) dg[j] += g[i * D + j] * xhat[i * D + j];
                              if (double* db = ctx.in_grads[2])
                                  for (std::size_t i = 0; i < N; ++i)
                                      for (std::size_t j = 0; j < D; ++j) db[j] += g[i * D + j];
                          },
                          "layer_norm");
}

Tensor dropout(const Tensor& x, double rate, bool training, Rng& rng) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ConfigError("dropout rate must be in [0, 1), got " + std::to_string(rate));
    if (!training || rate == 0.0) return x;
    auto X = x.data();
    const double keep_scale = 1.0 / (1.0 - rate);
    std::vector<double> mask(X.size());
    std::vector<double> out(X.size());
    for (std::size_t i = 0; i < X.size(); ++i) {
        mask[i] = rng.uniform() < rate ? 0.0 : keep_scale;
        out[i] = X[i] * mask[i];
    }
    return Tensor::record(x.shape(), std::move(out), {x},
                          [mask = std::move(mask)](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < mask.size(); ++i) d[i] += ctx.out_grad[i] * mask[i];
                          },
                          "dropout");
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
    require_matrix(x, "conv1d");
    if (kernel.rank() != 3) throw DimensionError("conv1d: kernel must be [k x d_in x d_out]");
    const std::size_t N = x.dim(0), Din = x.dim(1);
    const std::size_t K = kernel.dim(0), Dout = kernel.dim(2);
    if (K % 2 == 0) throw ConfigError("conv1d: kernel size must be odd, got " + std::to_string(K));
    if (kernel.dim(1) != Din) {
        throw DimensionError("conv1d: input has " + std::to_string(Din) + " channels, kernel expects " +
                             std::to_string(kernel.dim(1)));
    }
    if (bias.shape() != Shape{Dout}) throw DimensionError("conv1d: bias must be [d_out]");
    const auto half = static_cast<std::ptrdiff_t>(K / 2);
    auto X = x.data();
    auto W = kernel.data();
    auto b = bias.data();
    std::vector<double> out(N * Dout);
    for (std::size_t i = 0; i < N; ++i) std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(i * Dout));
    for (std::size_t i = 0; i < N; ++i) {
        double* orow = out.data() + i * Dout;
        for (std::size_t t = 0; t < K; ++t) {
            const auto src = static_cast<std::ptrdiff_t>(i) + static_cast<std::ptrdiff_t>(t) - half;
            if (src < 0 || src >= static_cast<std::ptrdiff_t>(N)) continue;
            const double* xrow = X.data() + static_cast<std::size_t>(src) * Din;
            const double* wt = W.data() + t * Din * Dout;
            for (std::size_t c = 0; c < Din; ++c) {
                const double xv = xrow[c];
                if (xv == 0.0) continue;
                const double* wrow = wt + c * Dout;
                for (std::size_t o = 0; o < Dout; ++o) orow[o] += xv * wrow[o];
            }
        }
    }
    return Tensor::record(
        {N, Dout}, std::move(out), {x, kernel, bias},
        [x, kernel, N, Din, K, Dout, half](const detail::BackwardContext& ctx) {
            const auto& g = ctx.out_grad;
            double* dx = ctx.in_grads[0];
            double* dw = ctx.in_grads[1];
            double* db = ctx.in_grads[2];
            auto X = x.data();
            auto W = kernel.data();
            for (std::size_t i = 0; i < N; ++i) {
                const double* grow = g.data() + i * Dout;
                if (db)
                    for (std::size_t o = 0; o < Dout; ++o) db[o] += grow[o];
                for (std::size_t t = 0; t < K; ++t) {
                    const auto src = static_cast<std::ptrdiff_t>(i) + static_cast<std::ptrdiff_t>(t) - half;
                    if (src < 0 || src >= static_cast<std::ptrdiff_t>(N)) continue;
                    const auto s = static_cast<std::size_t>(src);
                    for (std::size_t c = 0; c < Din; ++c) {
                        const std::size_t wbase = (t * Din + c) * Dout;
                        if (dx) {
                            double acc = 0.0;
                            for (std::size_t o = 0; o < Dout; ++o) acc += grow[o] * W[wbase + o];
                            dx[s * Din + c] += acc;
                        }
                        if (dw) {
                            const double xv = X[s * Din + c];
                            if (xv == 0.0) continue;
                            for (std::size_t o = 0; o < Dout; ++o) dw[wbase + o] += xv * grow[o];
                        }
                    }
                }
            }
        },
        "conv1d");
}

Tensor gather_columns(const Tensor& table, std::span<const std::size_t> ids) {
    require_matrix(table, "gather_columns");
    const std::size_t D = table.dim(0), V = table.dim(1), N = ids.size();
    for (auto id : ids) {
        if (id >= V) throw DimensionError("gather_columns: column " + std::to_string(id) + " out of range");
    }
    auto T = table.data();
    std::vector<double> out(N * D);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < D; ++k) out[i * D + k] = T[k * V + ids[i]];
    std::vector<std::size_t> cols(ids.begin(), ids.end());
    return Tensor::record({N, D}, std::move(out), {table},
                          [cols = std::move(cols), D, V](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < cols.size(); ++i)
                                      for (std::size_t k = 0; k < D; ++k) d[k * V + cols[i]] += ctx.out_grad[i * D + k];
                          },
                          "gather_columns");
}

Tensor sum(const Tensor& x) {
    double total = 0.0;
    for (double v : x.data()) total += v;
    const std::size_t n = x.numel();
    return Tensor::record({}, {total}, {x},
                          [n](const detail::BackwardContext& ctx) {
                              if (double* d = ctx.in_grads[0])
                                  for (std::size_t i = 0; i < n; ++i) d[i] += ctx.out_grad[0];
                          },
                          "sum");
}

Tensor mean(const Tensor& x) {
    if (x.numel() == 0) throw DimensionError("mean of empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

}  // namespace sdt
