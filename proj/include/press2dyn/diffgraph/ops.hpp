// Copyright 2026 The press2dyn Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "press2dyn/diffgraph/graph.hpp"
#include "press2dyn/diffgraph/kernels.hpp"
#include "press2dyn/diffgraph/tensor.hpp"

// Differentiable layers. Every op computes its forward value eagerly and
// registers a closure that maps the output gradient onto its inputs.
namespace press2dyn::diff {

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

inline void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  require(t.rank() == rank, std::string(op) + ": expected rank " + std::to_string(rank) +
                                " input, got " + shape_string(t.shape()));
}

inline void accumulate(Tensor& dst, const Tensor& src) {
  double* d = dst.data();
  const double* s = src.data();
  for (std::size_t i = 0, n = dst.size(); i < n; ++i) d[i] += s[i];
}

// Same-padding window: for kernel offset `off` (already minus pad) the output
// index range [lo, hi) whose input index o + off stays inside [0, n).
inline void valid_range(std::ptrdiff_t off, std::size_t n, std::size_t& lo, std::size_t& hi) {
  const auto sn = static_cast<std::ptrdiff_t>(n);
  lo = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, -off));
  hi = static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(sn - off, 0, sn));
  if (hi < lo) hi = lo;
}

}  // namespace detail

// y = x W + b for x [B,in], W [in,out], b [out].
inline Var linear(Graph& g, Var x, Var w, Var b) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  detail::require_rank(xv, 2, "linear");
  detail::require_rank(wv, 2, "linear");
  const std::size_t B = xv.dim(0), in = xv.dim(1), out = wv.dim(1);
  detail::require(wv.dim(0) == in, "linear: input width " + std::to_string(in) +
                                       " does not match weight " + shape_string(wv.shape()));
  const bool has_bias = b.id != Var::kNone;
  Tensor y({B, out});
  if (has_bias) {
    const Tensor& bv = g.value(b);
    detail::require(bv.size() == out, "linear: bias size mismatch");
    for (std::size_t i = 0; i < B; ++i) std::copy(bv.data(), bv.data() + out, y.data() + i * out);
  }
  kernels::gemm_nn(B, out, in, xv.data(), wv.data(), y.data());
  return g.push(std::move(y), "linear", {x, w, b.id == Var::kNone ? x : b},
                [x, w, b, has_bias, B, in, out](Graph& g, const Tensor& dy) {
                  if (g.requires_grad(x))
                    kernels::gemm_nt(B, out, in, dy.data(), g.value(w).data(), g.grad_mut(x).data());
                  if (g.requires_grad(w))
                    kernels::gemm_tn(B, out, in, g.value(x).data(), dy.data(), g.grad_mut(w).data());
                  if (has_bias && g.requires_grad(b)) {
                    double* db = g.grad_mut(b).data();
                    for (std::size_t i = 0; i < B; ++i)
                      for (std::size_t o = 0; o < out; ++o) db[o] += dy[i * out + o];
                  }
                });
}

inline Var linear(Graph& g, Var x, Var w) { return linear(g, x, w, Var{}); }

inline Var add(Graph& g, Var a, Var b) {
  const Tensor& av = g.value(a);
  const Tensor& bv = g.value(b);
  detail::require(av.shape() == bv.shape(), "add: shape mismatch " + shape_string(av.shape()) +
                                                " vs " + shape_string(bv.shape()));
  Tensor y = av;
  detail::accumulate(y, bv);
  return g.push(std::move(y), "add", {a, b}, [a, b](Graph& g, const Tensor& dy) {
    if (g.requires_grad(a)) detail::accumulate(g.grad_mut(a), dy);
    if (g.requires_grad(b)) detail::accumulate(g.grad_mut(b), dy);
  });
}

inline Var reshape(Graph& g, Var x, Shape shape) {
  Tensor y = g.value(x).reshaped(std::move(shape));
  return g.push(std::move(y), "reshape", {x}, [x](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_mut(x);
    const double* s = dy.data();
    double* d = dx.data();
    for (std::size_t i = 0, n = dx.size(); i < n; ++i) d[i] += s[i];
  });
}

// Flattens all but the leading (batch) dimension.
inline Var flatten(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  return reshape(g, x, {xv.dim(0), xv.size() / xv.dim(0)});
}

// Elementwise product with a constant; `factor` broadcasts over leading
// dimensions when x.size() is a multiple of factor.size().
inline Var mul_const(Graph& g, Var x, const Tensor& factor) {
  const Tensor& xv = g.value(x);
  detail::require(!factor.empty() && xv.size() % factor.size() == 0,
                  "mul_const: factor " + shape_string(factor.shape()) + " does not broadcast to " +
                      shape_string(xv.shape()));
  Tensor y(xv.shape());
  const std::size_t period = factor.size();
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] * factor[i % period];
  return g.push(std::move(y), "mul_const", {x}, [x, factor](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_mut(x);
    const std::size_t period = factor.size();
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * factor[i % period];
  });
}

inline Var relu(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  g.record_kinks(xv);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return g.push(std::move(y), "relu", {x}, [x](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    Tensor& dx = g.grad_mut(x);
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (xv[i] > 0.0) dx[i] += dy[i];
  });
}

inline constexpr double kDefaultLeakySlope = 0.01;

inline Var leaky_relu(Graph& g, Var x, double slope = kDefaultLeakySlope) {
  const Tensor& xv = g.value(x);
  g.record_kinks(xv);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  return g.push(std::move(y), "leaky_relu", {x}, [x, slope](Graph& g, const Tensor& dy) {
    const Tensor& xv = g.value(x);
    Tensor& dx = g.grad_mut(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += xv[i] > 0.0 ? dy[i] : slope * dy[i];
  });
}

inline double sigmoid_scalar(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

inline Var sigmoid(Graph& g, Var x) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = sigmoid_scalar(xv[i]);
  const std::size_t self = g.node_count();
  return g.push(std::move(y), "sigmoid", {x}, [x, self](Graph& g, const Tensor& dy) {
    const Tensor& yv = g.value(Var{self});
    Tensor& dx = g.grad_mut(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * yv[i] * (1.0 - yv[i]);
  });
}

namespace detail {

inline Var apply_dropout_mask(Graph& g, Var x, Tensor mask, const char* op) {
  const Tensor& xv = g.value(x);
  Tensor y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) y[i] = xv[i] * mask[i];
  return g.push(std::move(y), op, {x}, [x, mask = std::move(mask)](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_mut(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * mask[i];
  });
}

}  // namespace detail

// Inverted dropout: kept units are scaled by 1/(1-p); identity in eval mode.
inline Var dropout(Graph& g, Var x, double p) {
  detail::require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (!g.training() || p == 0.0) return x;
  const Tensor& xv = g.value(x);
  Tensor mask(xv.shape());
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = keep(g.rng()) ? scale : 0.0;
  return detail::apply_dropout_mask(g, x, std::move(mask), "dropout");
}

// Drops whole channels of a [B,C,H,W] tensor.
inline Var spatial_dropout(Graph& g, Var x, double p) {
  detail::require(p >= 0.0 && p < 1.0, "spatial_dropout: p must be in [0,1)");
  if (!g.training() || p == 0.0) return x;
  const Tensor& xv = g.value(x);
  detail::require_rank(xv, 4, "spatial_dropout");
  const std::size_t planes = xv.dim(0) * xv.dim(1);
  const std::size_t plane = xv.dim(2) * xv.dim(3);
  Tensor mask(xv.shape());
  std::bernoulli_distribution keep(1.0 - p);
  const double scale = 1.0 / (1.0 - p);
  for (std::size_t c = 0; c < planes; ++c) {
    const double m = keep(g.rng()) ? scale : 0.0;
    std::fill(mask.data() + c * plane, mask.data() + (c + 1) * plane, m);
  }
  return detail::apply_dropout_mask(g, x, std::move(mask), "spatial_dropout");
}

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-feature ([B,F]) or per-channel ([B,C,H,W]) batch normalization.
// Train mode normalizes with biased batch statistics and updates the
// running estimates; eval mode uses the running estimates.
inline Var batch_norm(Graph& g, Var x, Var gamma, Var beta, Parameter& running_mean,
                      Parameter& running_var, BatchNormOptions opt = {}) {
  const Tensor& xv = g.value(x);
  detail::require(xv.rank() == 2 || xv.rank() == 4, "batch_norm: expected rank 2 or 4 input");
  const std::size_t B = xv.dim(0), C = xv.dim(1);
  const std::size_t inner = xv.rank() == 4 ? xv.dim(2) * xv.dim(3) : 1;
  detail::require(g.value(gamma).size() == C && g.value(beta).size() == C &&
                      running_mean.value.size() == C && running_var.value.size() == C,
                  "batch_norm: parameter size mismatch");
  const bool train = g.training();
  if (train && B < 2) throw std::invalid_argument("batch_norm: train mode needs batch >= 2");

  const double count = static_cast<double>(B * inner);
  Tensor mean({C}), inv_std({C});
  if (train) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = xv.data() + (b * C + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      const double mu = s / count;
      double ss = 0.0;
      for (std::size_t b = 0; b < B; ++b) {
        const double* p = xv.data() + (b * C + c) * inner;
        for (std::size_t i = 0; i < inner; ++i) ss += (p[i] - mu) * (p[i] - mu);
      }
      const double var = ss / count;
      mean[c] = mu;
      inv_std[c] = 1.0 / std::sqrt(var + opt.eps);
      running_mean.value[c] = (1.0 - opt.momentum) * running_mean.value[c] + opt.momentum * mu;
      running_var.value[c] = (1.0 - opt.momentum) * running_var.value[c] + opt.momentum * var;
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = running_mean.value[c];
      inv_std[c] = 1.0 / std::sqrt(running_var.value[c] + opt.eps);
    }
  }

  const Tensor& gv = g.value(gamma);
  const Tensor& bv = g.value(beta);
  Tensor xhat(xv.shape()), y(xv.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t base = (b * C + c) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const double h = (xv[base + i] - mean[c]) * inv_std[c];
        xhat[base + i] = h;
        y[base + i] = gv[c] * h + bv[c];
      }
    }

  return g.push(std::move(y), "batch_norm", {x, gamma, beta},
                [x, gamma, beta, train, B, C, inner, count, inv_std,
                 xhat = std::move(xhat)](Graph& g, const Tensor& dy) {
                  const Tensor& gv = g.value(gamma);
                  std::vector<double> sum_dy(C, 0.0), sum_dy_xhat(C, 0.0);
                  for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t c = 0; c < C; ++c) {
                      const std::size_t base = (b * C + c) * inner;
                      for (std::size_t i = 0; i < inner; ++i) {
                        sum_dy[c] += dy[base + i];
                        sum_dy_xhat[c] += dy[base + i] * xhat[base + i];
                      }
                    }
                  if (g.requires_grad(gamma)) {
                    Tensor& dg = g.grad_mut(gamma);
                    for (std::size_t c = 0; c < C; ++c) dg[c] += sum_dy_xhat[c];
                  }
                  if (g.requires_grad(beta)) {
                    Tensor& db = g.grad_mut(beta);
                    for (std::size_t c = 0; c < C; ++c) db[c] += sum_dy[c];
                  }
                  if (!g.requires_grad(x)) return;
                  Tensor& dx = g.grad_mut(x);
                  for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t c = 0; c < C; ++c) {
                      const std::size_t base = (b * C + c) * inner;
                      const double k = gv[c] * inv_std[c];
                      if (train) {
                        const double m_dy = sum_dy[c] / count;
                        const double m_dyx = sum_dy_xhat[c] / count;
                        for (std::size_t i = 0; i < inner; ++i)
                          dx[base + i] += k * (dy[base + i] - m_dy - xhat[base + i] * m_dyx);
                      } else {
                        for (std::size_t i = 0; i < inner; ++i) dx[base + i] += k * dy[base + i];
                      }
                    }
                });
}

// Depthwise k x k convolution with same padding; kernel [C,1,k,k], no bias.
inline Var depthwise_conv2d(Graph& g, Var x, Var kernel) {
  const Tensor& xv = g.value(x);
  const Tensor& kv = g.value(kernel);
  detail::require_rank(xv, 4, "depthwise_conv2d");
  detail::require_rank(kv, 4, "depthwise_conv2d kernel");
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t kh = kv.dim(2), kw = kv.dim(3);
  detail::require(kv.dim(0) == C && kv.dim(1) == 1 && kh % 2 == 1 && kw % 2 == 1,
                  "depthwise_conv2d: kernel " + shape_string(kv.shape()) + " incompatible with " +
                      shape_string(xv.shape()));
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  Tensor y(xv.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t c = 0; c < C; ++c) {
      const double* xp = xv.data() + (b * C + c) * H * W;
      double* yp = y.data() + (b * C + c) * H * W;
      for (std::size_t u = 0; u < kh; ++u) {
        const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(u) - ph;
        std::size_t r0, r1;
        detail::valid_range(dr, H, r0, r1);
        for (std::size_t v = 0; v < kw; ++v) {
          const std::ptrdiff_t dc = static_cast<std::ptrdiff_t>(v) - pw;
          std::size_t c0, c1;
          detail::valid_range(dc, W, c0, c1);
          const double wgt = kv[(c * kh + u) * kw + v];
          for (std::size_t r = r0; r < r1; ++r) {
            const double* src = xp + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + dr) * W + dc;
            double* dst = yp + r * W;
            for (std::size_t q = c0; q < c1; ++q) dst[q] += wgt * src[q];
          }
        }
      }
    }
  return g.push(std::move(y), "depthwise_conv2d", {x, kernel},
                [x, kernel, B, C, H, W, kh, kw, ph, pw](Graph& g, const Tensor& dy) {
                  const Tensor& xv = g.value(x);
                  const Tensor& kv = g.value(kernel);
                  const bool want_x = g.requires_grad(x), want_k = g.requires_grad(kernel);
                  double* dx = want_x ? g.grad_mut(x).data() : nullptr;
                  double* dk = want_k ? g.grad_mut(kernel).data() : nullptr;
                  for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t c = 0; c < C; ++c) {
                      const std::size_t off = (b * C + c) * H * W;
                      for (std::size_t u = 0; u < kh; ++u) {
                        const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(u) - ph;
                        std::size_t r0, r1;
                        detail::valid_range(dr, H, r0, r1);
                        for (std::size_t v = 0; v < kw; ++v) {
                          const std::ptrdiff_t dc = static_cast<std::ptrdiff_t>(v) - pw;
                          std::size_t c0, c1;
                          detail::valid_range(dc, W, c0, c1);
                          const std::size_t ki = (c * kh + u) * kw + v;
                          const double wgt = kv[ki];
                          double acc = 0.0;
                          for (std::size_t r = r0; r < r1; ++r) {
                            const std::size_t srow =
                                off + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + dr) * W;
                            const double* g_out = dy.data() + off + r * W;
                            if (want_x) {
                              double* dst = dx + srow + dc;
                              for (std::size_t q = c0; q < c1; ++q) dst[q] += wgt * g_out[q];
                            }
                            if (want_k) {
                              const double* src = xv.data() + srow + dc;
                              for (std::size_t q = c0; q < c1; ++q) acc += g_out[q] * src[q];
                            }
                          }
                          if (want_k) dk[ki] += acc;
                        }
                      }
                    }
                });
}

// 1x1 convolution: y[b,o,p] = bias[o] + sum_i w[o,i] x[b,i,p]; w [Cout,Cin].
inline Var pointwise_conv2d(Graph& g, Var x, Var w, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(w);
  detail::require_rank(xv, 4, "pointwise_conv2d");
  detail::require_rank(wv, 2, "pointwise_conv2d weight");
  const std::size_t B = xv.dim(0), Cin = xv.dim(1), P = xv.dim(2) * xv.dim(3);
  const std::size_t Cout = wv.dim(0);
  detail::require(wv.dim(1) == Cin, "pointwise_conv2d: weight " + shape_string(wv.shape()) +
                                        " incompatible with " + shape_string(xv.shape()));
  const bool has_bias = bias.id != Var::kNone;
  Tensor y({B, Cout, xv.dim(2), xv.dim(3)});
  if (has_bias) {
    const Tensor& bv = g.value(bias);
    detail::require(bv.size() == Cout, "pointwise_conv2d: bias size mismatch");
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t o = 0; o < Cout; ++o)
        std::fill(y.data() + (b * Cout + o) * P, y.data() + (b * Cout + o + 1) * P, bv[o]);
  }
  for (std::size_t b = 0; b < B; ++b)
    kernels::gemm_nn(Cout, P, Cin, wv.data(), xv.data() + b * Cin * P, y.data() + b * Cout * P);
  return g.push(std::move(y), "pointwise_conv2d", {x, w, has_bias ? bias : x},
                [x, w, bias, has_bias, B, Cin, Cout, P](Graph& g, const Tensor& dy) {
                  const Tensor& xv = g.value(x);
                  const Tensor& wv = g.value(w);
                  for (std::size_t b = 0; b < B; ++b) {
                    const double* dyb = dy.data() + b * Cout * P;
                    if (g.requires_grad(x))
                      kernels::gemm_tn(Cout, P, Cin, wv.data(), dyb, g.grad_mut(x).data() + b * Cin * P);
                    if (g.requires_grad(w))
                      kernels::gemm_nt(Cout, P, Cin, dyb, xv.data() + b * Cin * P, g.grad_mut(w).data());
                  }
                  if (has_bias && g.requires_grad(bias)) {
                    Tensor& db = g.grad_mut(bias);
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t o = 0; o < Cout; ++o) {
                        const double* p = dy.data() + (b * Cout + o) * P;
                        double s = 0.0;
                        for (std::size_t i = 0; i < P; ++i) s += p[i];
                        db[o] += s;
                      }
                  }
                });
}

// Depthwise k x k followed by pointwise 1x1, one bias after the pointwise stage.
inline Var separable_conv2d(Graph& g, Var x, Var depthwise, Var pointwise, Var bias) {
  return pointwise_conv2d(g, depthwise_conv2d(g, x, depthwise), pointwise, bias);
}

// Dense k x k convolution with same padding; kernel [Cout,Cin,k,k].
inline Var conv2d(Graph& g, Var x, Var kernel, Var bias) {
  const Tensor& xv = g.value(x);
  const Tensor& kv = g.value(kernel);
  detail::require_rank(xv, 4, "conv2d");
  detail::require_rank(kv, 4, "conv2d kernel");
  const std::size_t B = xv.dim(0), Cin = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t Cout = kv.dim(0), kh = kv.dim(2), kw = kv.dim(3);
  detail::require(kv.dim(1) == Cin && kh % 2 == 1 && kw % 2 == 1,
                  "conv2d: kernel " + shape_string(kv.shape()) + " incompatible with " +
                      shape_string(xv.shape()));
  const bool has_bias = bias.id != Var::kNone;
  const auto ph = static_cast<std::ptrdiff_t>(kh / 2), pw = static_cast<std::ptrdiff_t>(kw / 2);
  Tensor y({B, Cout, H, W});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t o = 0; o < Cout; ++o) {
      double* yp = y.data() + (b * Cout + o) * H * W;
      if (has_bias) std::fill(yp, yp + H * W, g.value(bias)[o]);
      for (std::size_t i = 0; i < Cin; ++i) {
        const double* xp = xv.data() + (b * Cin + i) * H * W;
        for (std::size_t u = 0; u < kh; ++u) {
          const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(u) - ph;
          std::size_t r0, r1;
          detail::valid_range(dr, H, r0, r1);
          for (std::size_t v = 0; v < kw; ++v) {
            const std::ptrdiff_t dc = static_cast<std::ptrdiff_t>(v) - pw;
            std::size_t c0, c1;
            detail::valid_range(dc, W, c0, c1);
            const double wgt = kv[((o * Cin + i) * kh + u) * kw + v];
            for (std::size_t r = r0; r < r1; ++r) {
              const double* src = xp + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + dr) * W + dc;
              double* dst = yp + r * W;
              for (std::size_t q = c0; q < c1; ++q) dst[q] += wgt * src[q];
            }
          }
        }
      }
    }
  return g.push(std::move(y), "conv2d", {x, kernel, has_bias ? bias : x},
                [x, kernel, bias, has_bias, B, Cin, Cout, H, W, kh, kw, ph, pw](Graph& g,
                                                                               const Tensor& dy) {
                  const Tensor& xv = g.value(x);
                  const Tensor& kv = g.value(kernel);
                  const bool want_x = g.requires_grad(x), want_k = g.requires_grad(kernel);
                  double* dx = want_x ? g.grad_mut(x).data() : nullptr;
                  double* dk = want_k ? g.grad_mut(kernel).data() : nullptr;
                  for (std::size_t b = 0; b < B; ++b)
                    for (std::size_t o = 0; o < Cout; ++o) {
                      const double* gp = dy.data() + (b * Cout + o) * H * W;
                      for (std::size_t i = 0; i < Cin; ++i) {
                        const std::size_t xoff = (b * Cin + i) * H * W;
                        for (std::size_t u = 0; u < kh; ++u) {
                          const std::ptrdiff_t dr = static_cast<std::ptrdiff_t>(u) - ph;
                          std::size_t r0, r1;
                          detail::valid_range(dr, H, r0, r1);
                          for (std::size_t v = 0; v < kw; ++v) {
                            const std::ptrdiff_t dc = static_cast<std::ptrdiff_t>(v) - pw;
                            std::size_t c0, c1;
                            detail::valid_range(dc, W, c0, c1);
                            const std::size_t ki = ((o * Cin + i) * kh + u) * kw + v;
                            const double wgt = kv[ki];
                            double acc = 0.0;
                            for (std::size_t r = r0; r < r1; ++r) {
                              const std::size_t srow =
                                  xoff + static_cast<std::size_t>(static_cast<std::ptrdiff_t>(r) + dr) * W;
                              const double* g_out = gp + r * W;
                              if (want_x) {
                                double* dst = dx + srow + dc;
                                for (std::size_t q = c0; q < c1; ++q) dst[q] += wgt * g_out[q];
                              }
                              if (want_k) {
                                const double* src = xv.data() + srow + dc;
                                for (std::size_t q = c0; q < c1; ++q) acc += g_out[q] * src[q];
                              }
                            }
                            if (want_k) dk[ki] += acc;
                          }
                        }
                      }
                    }
                  if (has_bias && g.requires_grad(bias)) {
                    Tensor& db = g.grad_mut(bias);
                    for (std::size_t b = 0; b < B; ++b)
                      for (std::size_t o = 0; o < Cout; ++o) {
                        const double* p = dy.data() + (b * Cout + o) * H * W;
                        double s = 0.0;
                        for (std::size_t i = 0; i < H * W; ++i) s += p[i];
                        db[o] += s;
                      }
                  }
                });
}

// Nearest-neighbour upsampling of [B,C,H,W] by integer row/col factors.
inline Var nearest_upsample(Graph& g, Var x, std::size_t row_factor, std::size_t col_factor) {
  const Tensor& xv = g.value(x);
  detail::require_rank(xv, 4, "nearest_upsample");
  detail::require(row_factor >= 1 && col_factor >= 1, "nearest_upsample: factors must be >= 1");
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  const std::size_t OH = H * row_factor, OW = W * col_factor;
  Tensor y({B, C, OH, OW});
  for (std::size_t p = 0; p < B * C; ++p) {
    const double* src = xv.data() + p * H * W;
    double* dst = y.data() + p * OH * OW;
    for (std::size_t r = 0; r < OH; ++r)
      for (std::size_t c = 0; c < OW; ++c) dst[r * OW + c] = src[(r / row_factor) * W + c / col_factor];
  }
  return g.push(std::move(y), "nearest_upsample", {x},
                [x, B, C, H, W, OH, OW, row_factor, col_factor](Graph& g, const Tensor& dy) {
                  Tensor& dx = g.grad_mut(x);
                  for (std::size_t p = 0; p < B * C; ++p) {
                    const double* src = dy.data() + p * OH * OW;
                    double* dst = dx.data() + p * H * W;
                    for (std::size_t r = 0; r < OH; ++r)
                      for (std::size_t c = 0; c < OW; ++c)
                        dst[(r / row_factor) * W + c / col_factor] += src[r * OW + c];
                  }
                });
}

// Spatial crop of [B,C,H,W] to [B,C,height,width] starting at (top,left).
inline Var crop2d(Graph& g, Var x, std::size_t top, std::size_t left, std::size_t height,
                  std::size_t width) {
  const Tensor& xv = g.value(x);
  detail::require_rank(xv, 4, "crop2d");
  const std::size_t B = xv.dim(0), C = xv.dim(1), H = xv.dim(2), W = xv.dim(3);
  detail::require(top + height <= H && left + width <= W,
                  "crop2d: window exceeds input " + shape_string(xv.shape()));
  Tensor y({B, C, height, width});
  for (std::size_t p = 0; p < B * C; ++p)
    for (std::size_t r = 0; r < height; ++r)
      std::copy_n(xv.data() + p * H * W + (top + r) * W + left, width,
                  y.data() + (p * height + r) * width);
  return g.push(std::move(y), "crop2d", {x},
                [x, B, C, H, W, top, left, height, width](Graph& g, const Tensor& dy) {
                  Tensor& dx = g.grad_mut(x);
                  for (std::size_t p = 0; p < B * C; ++p)
                    for (std::size_t r = 0; r < height; ++r) {
                      const double* src = dy.data() + (p * height + r) * width;
                      double* dst = dx.data() + p * H * W + (top + r) * W + left;
                      for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
                    }
                });
}

// Mean squared error over mask != 0 entries. The mask broadcasts over
// leading dimensions like mul_const.
inline Var masked_mse(Graph& g, Var pred, const Tensor& target, const Tensor& mask) {
  const Tensor& pv = g.value(pred);
  detail::require(target.size() == pv.size(), "masked_mse: target size mismatch");
  detail::require(!mask.empty() && pv.size() % mask.size() == 0, "masked_mse: mask does not broadcast");
  const std::size_t period = mask.size();
  double count = 0.0, sum = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    if (mask[i % period] == 0.0) continue;
    const double d = pv[i] - target[i];
    sum += d * d;
    count += 1.0;
  }
  if (count == 0.0) throw std::invalid_argument("masked_mse: mask selects no entries");
  Tensor y({1}, sum / count);
  return g.push(std::move(y), "masked_mse", {pred},
                [pred, target, mask, count](Graph& g, const Tensor& dy) {
                  const Tensor& pv = g.value(pred);
                  Tensor& dp = g.grad_mut(pred);
                  const std::size_t period = mask.size();
                  const double k = 2.0 * dy[0] / count;
                  for (std::size_t i = 0; i < pv.size(); ++i)
                    if (mask[i % period] != 0.0) dp[i] += k * (pv[i] - target[i]);
                });
}

// sum_i w_i x_i; a generic scalar probe for gradient checks.
inline Var weighted_sum(Graph& g, Var x, const Tensor& weights) {
  const Tensor& xv = g.value(x);
  detail::require(weights.size() == xv.size(), "weighted_sum: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) s += weights[i] * xv[i];
  return g.push(Tensor({1}, s), "weighted_sum", {x}, [x, weights](Graph& g, const Tensor& dy) {
    Tensor& dx = g.grad_mut(x);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[0] * weights[i];
  });
}

}  // namespace press2dyn::diff
