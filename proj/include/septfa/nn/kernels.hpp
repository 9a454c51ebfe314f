// Copyright 2026 The septfa Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

// Differentiable kernels over Tensor3 [batch, channels, frames]. Every kernel
// preserves the frames axis. Weights use the layouts:
//   conv1d     weight [out, in, taps], bias [1, out, 1]
//   dconv      weight [in*multiplier, 1, taps], bias [1, in*multiplier, 1]
//   per-channel vectors (PReLU alpha, norm gain/bias) [1, C, 1]

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <vector>

#include "septfa/core/error.hpp"
#include "septfa/nn/tape.hpp"

namespace septfa::nn {

namespace detail {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

inline bool any_grad(Var a) { return a.tape->needs_grad(a); }
template <typename... Vs>
bool any_grad(Var a, Vs... rest) {
  return any_grad(a) || any_grad(rest...);
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

// Output column range [lo, hi) whose source column l + offset lies in [0, frames).
inline std::pair<int, int> valid_range(int frames, int offset) {
  const int lo = std::max(0, -offset);
  const int hi = std::min(frames, frames - offset);
  return {lo, std::max(lo, hi)};
}

// Tap p of weight [O, I, P] as a contiguous O x I matrix.
inline MatR tap_matrix(const Tensor3& w, int p) {
  const int o = w.batch(), i = w.channels(), taps = w.frames();
  MatR m(o, i);
  for (int a = 0; a < o; ++a) {
    for (int b = 0; b < i; ++b) m(a, b) = w.data[(static_cast<std::size_t>(a) * i + b) * taps + p];
  }
  return m;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Forward-only kernels on plain tensors.

/// Dense 1-D convolution with "same" zero padding (taps must be odd).
inline Tensor3 conv1d_forward(const Tensor3& x, const Tensor3& w, const Tensor3& bias,
                              int dilation = 1) {
  using namespace detail;
  const int out_c = w.batch(), in_c = w.channels(), taps = w.frames();
  require(x.channels() == in_c, "conv1d: input has " + std::to_string(x.channels()) +
                                    " channels, weight expects " + std::to_string(in_c));
  require(taps % 2 == 1, "conv1d: kernel size must be odd");
  require(bias.size() == static_cast<std::size_t>(out_c), "conv1d: bias size mismatch");
  require(dilation >= 1, "conv1d: dilation must be >= 1");
  const int frames = x.frames();
  const int pad = dilation * (taps - 1) / 2;
  Tensor3 y(Shape{x.batch(), out_c, frames});
  for (int b = 0; b < x.batch(); ++b) {
    MapR ym(y.plane(b), out_c, frames);
    CMapR xm(x.plane(b), in_c, frames);
    for (int o = 0; o < out_c; ++o) ym.row(o).setConstant(bias.data[o]);
    for (int p = 0; p < taps; ++p) {
      const int off = p * dilation - pad;
      auto [lo, hi] = valid_range(frames, off);
      if (hi <= lo) continue;
      if (taps == 1) {
        ym.noalias() += CMapR(w.data.data(), out_c, in_c) * xm;
      } else {
        ym.middleCols(lo, hi - lo).noalias() += tap_matrix(w, p) * xm.middleCols(lo + off, hi - lo);
      }
    }
  }
  return y;
}

/// Depthwise dilated convolution; output channel o reads input channel
/// o / multiplier, multiplier = weight channels / input channels.
inline Tensor3 dconv_forward(const Tensor3& x, const Tensor3& w, const Tensor3& bias,
                             int dilation) {
  using namespace detail;
  const int out_c = w.batch(), taps = w.frames(), in_c = x.channels();
  require(w.channels() == 1, "dconv: weight must be [C*m, 1, P]");
  require(in_c > 0 && out_c % in_c == 0, "dconv: output channels must be a multiple of input channels");
  require(taps % 2 == 1, "dconv: kernel size must be odd");
  require(bias.size() == static_cast<std::size_t>(out_c), "dconv: bias size mismatch");
  require(dilation >= 1, "dconv: dilation must be >= 1");
  const int mult = out_c / in_c;
  const int frames = x.frames();
  const int pad = dilation * (taps - 1) / 2;
  Tensor3 y(Shape{x.batch(), out_c, frames});
  for (int b = 0; b < x.batch(); ++b) {
    for (int o = 0; o < out_c; ++o) {
      const double* src = x.plane(b) + static_cast<std::size_t>(o / mult) * frames;
      double* dst = y.plane(b) + static_cast<std::size_t>(o) * frames;
      std::fill(dst, dst + frames, bias.data[o]);
      for (int p = 0; p < taps; ++p) {
        const double wv = w.data[static_cast<std::size_t>(o) * taps + p];
        const int off = p * dilation - pad;
        auto [lo, hi] = valid_range(frames, off);
        for (int l = lo; l < hi; ++l) dst[l] += wv * src[l + off];
      }
    }
  }
  return y;
}

// ---------------------------------------------------------------------------
// Taped kernels.

inline Var conv1d(Var x, Var w, Var bias, int dilation = 1) {
  using namespace detail;
  Tape& t = *x.tape;
  Tensor3 y = conv1d_forward(x.value(), w.value(), bias.value(), dilation);
  return t.record(std::move(y), any_grad(x, w, bias), [x, w, bias, dilation](Tape& t, const Tensor3& gy) {
    const Tensor3& xv = t.value(x.id);
    const Tensor3& wv = t.value(w.id);
    const int out_c = wv.batch(), in_c = wv.channels(), taps = wv.frames();
    const int frames = xv.frames();
    const int pad = dilation * (taps - 1) / 2;
    const bool gx_on = t.needs_grad(x), gw_on = t.needs_grad(w), gb_on = t.needs_grad(bias);
    Tensor3* gx = gx_on ? &t.grad_slot(x.id) : nullptr;
    Tensor3* gw = gw_on ? &t.grad_slot(w.id) : nullptr;
    Tensor3* gb = gb_on ? &t.grad_slot(bias.id) : nullptr;
    for (int b = 0; b < xv.batch(); ++b) {
      CMapR gym(gy.plane(b), out_c, frames);
      CMapR xm(xv.plane(b), in_c, frames);
      if (gb) {
        for (int o = 0; o < out_c; ++o) gb->data[o] += gym.row(o).sum();
      }
      for (int p = 0; p < taps; ++p) {
        const int off = p * dilation - pad;
        auto [lo, hi] = valid_range(frames, off);
        if (hi <= lo) continue;
        const int n = hi - lo;
        if (taps == 1) {
          if (gx) MapR(gx->plane(b), in_c, frames).noalias() += CMapR(wv.data.data(), out_c, in_c).transpose() * gym;
          if (gw) MapR(gw->data.data(), out_c, in_c).noalias() += gym * xm.transpose();
        } else {
          if (gx) {
            MapR(gx->plane(b), in_c, frames).middleCols(lo + off, n).noalias() +=
                tap_matrix(wv, p).transpose() * gym.middleCols(lo, n);
          }
          if (gw) {
            MatR dw = gym.middleCols(lo, n) * xm.middleCols(lo + off, n).transpose();
            for (int a = 0; a < out_c; ++a) {
              for (int c = 0; c < in_c; ++c) {
                gw->data[(static_cast<std::size_t>(a) * in_c + c) * taps + p] += dw(a, c);
              }
            }
          }
        }
      }
    }
  });
}

/// 1x1 convolution: y[b,o,l] = bias[o] + sum_i w[o,i] x[b,i,l].
inline Var conv1x1(Var x, Var w, Var bias) {
  detail::require(w.value().frames() == 1, "conv1x1: weight must be [out, in, 1]");
  return conv1d(x, w, bias, 1);
}

inline Var dconv_dilated(Var x, Var w, Var bias, int dilation) {
  using namespace detail;
  Tape& t = *x.tape;
  Tensor3 y = dconv_forward(x.value(), w.value(), bias.value(), dilation);
  return t.record(std::move(y), any_grad(x, w, bias), [x, w, bias, dilation](Tape& t, const Tensor3& gy) {
    const Tensor3& xv = t.value(x.id);
    const Tensor3& wv = t.value(w.id);
    const int out_c = wv.batch(), taps = wv.frames(), in_c = xv.channels();
    const int mult = out_c / in_c, frames = xv.frames();
    const int pad = dilation * (taps - 1) / 2;
    Tensor3* gx = t.needs_grad(x) ? &t.grad_slot(x.id) : nullptr;
    Tensor3* gw = t.needs_grad(w) ? &t.grad_slot(w.id) : nullptr;
    Tensor3* gb = t.needs_grad(bias) ? &t.grad_slot(bias.id) : nullptr;
    for (int b = 0; b < xv.batch(); ++b) {
      for (int o = 0; o < out_c; ++o) {
        const double* g = gy.plane(b) + static_cast<std::size_t>(o) * frames;
        const std::size_t src_off = static_cast<std::size_t>(o / mult) * frames;
        const double* src = xv.plane(b) + src_off;
        if (gb) {
          double s = 0.0;
          for (int l = 0; l < frames; ++l) s += g[l];
          gb->data[o] += s;
        }
        for (int p = 0; p < taps; ++p) {
          const int off = p * dilation - pad;
          auto [lo, hi] = valid_range(frames, off);
          const std::size_t widx = static_cast<std::size_t>(o) * taps + p;
          if (gw) {
            double s = 0.0;
            for (int l = lo; l < hi; ++l) s += g[l] * src[l + off];
            gw->data[widx] += s;
          }
          if (gx) {
            double* dst = gx->plane(b) + src_off;
            const double wval = wv.data[widx];
            for (int l = lo; l < hi; ++l) dst[l + off] += wval * g[l];
          }
        }
      }
    }
  });
}

/// y = x for x >= 0, alpha[c] * x otherwise.
inline Var prelu(Var x, Var alpha) {
  using namespace detail;
  const Tensor3& xv = x.value();
  const Tensor3& av = alpha.value();
  const int C = xv.channels(), L = xv.frames();
  require(av.size() == static_cast<std::size_t>(C), "prelu: alpha must have one entry per channel");
  Tensor3 y(xv.shape);
  for (int b = 0; b < xv.batch(); ++b) {
    for (int c = 0; c < C; ++c) {
      const double a = av.data[c];
      const double* s = xv.plane(b) + static_cast<std::size_t>(c) * L;
      double* d = y.plane(b) + static_cast<std::size_t>(c) * L;
      for (int l = 0; l < L; ++l) d[l] = s[l] >= 0.0 ? s[l] : a * s[l];
    }
  }
  return x.tape->record(std::move(y), any_grad(x, alpha), [x, alpha](Tape& t, const Tensor3& gy) {
    const Tensor3& xv = t.value(x.id);
    const Tensor3& av = t.value(alpha.id);
    const int C = xv.channels(), L = xv.frames();
    Tensor3* gx = t.needs_grad(x) ? &t.grad_slot(x.id) : nullptr;
    Tensor3* ga = t.needs_grad(alpha) ? &t.grad_slot(alpha.id) : nullptr;
    for (int b = 0; b < xv.batch(); ++b) {
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
        double sa = 0.0;
        for (int l = 0; l < L; ++l) {
          const double v = xv.data[base + l];
          const double g = gy.data[base + l];
          if (v >= 0.0) {
            if (gx) gx->data[base + l] += g;
          } else {
            if (gx) gx->data[base + l] += av.data[c] * g;
            sa += v * g;
          }
        }
        if (ga) ga->data[c] += sa;
      }
    }
  });
}

inline constexpr double kNormEps = 1e-5;

/// Per (batch, frame) normalization across channels, then per-channel affine.
inline Var layer_norm_channels(Var x, Var gain, Var bias, double eps = kNormEps) {
  using namespace detail;
  const Tensor3& xv = x.value();
  const int B = xv.batch(), C = xv.channels(), L = xv.frames();
  require(C >= 1, "layer_norm: need at least one channel");
  require(gain.value().size() == static_cast<std::size_t>(C) && bias.value().size() == static_cast<std::size_t>(C),
          "layer_norm: gain/bias must have one entry per channel");
  // normalized activations and per-frame reciprocal std are saved for backward
  Tensor3 xhat(xv.shape);
  std::vector<double> rstd(static_cast<std::size_t>(B) * L);
  Tensor3 y(xv.shape);
  std::vector<double> mean(L), var(L);
  for (int b = 0; b < B; ++b) {
    const double* xp = xv.plane(b);
    std::fill(mean.begin(), mean.end(), 0.0);
    std::fill(var.begin(), var.end(), 0.0);
    for (int c = 0; c < C; ++c) {
      const double* row = xp + static_cast<std::size_t>(c) * L;
      for (int l = 0; l < L; ++l) mean[l] += row[l];
    }
    for (int l = 0; l < L; ++l) mean[l] /= C;
    for (int c = 0; c < C; ++c) {
      const double* row = xp + static_cast<std::size_t>(c) * L;
      for (int l = 0; l < L; ++l) {
        const double d = row[l] - mean[l];
        var[l] += d * d;
      }
    }
    double* rs = rstd.data() + static_cast<std::size_t>(b) * L;
    for (int l = 0; l < L; ++l) rs[l] = 1.0 / std::sqrt(var[l] / C + eps);
    for (int c = 0; c < C; ++c) {
      const double* row = xp + static_cast<std::size_t>(c) * L;
      double* xh = xhat.plane(b) + static_cast<std::size_t>(c) * L;
      double* out = y.plane(b) + static_cast<std::size_t>(c) * L;
      const double g = gain.value().data[c], be = bias.value().data[c];
      for (int l = 0; l < L; ++l) {
        xh[l] = (row[l] - mean[l]) * rs[l];
        out[l] = xh[l] * g + be;
      }
    }
  }
  return x.tape->record(std::move(y), any_grad(x, gain, bias),
                        [x, gain, bias, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, const Tensor3& gy) {
    const int B = xhat.batch(), C = xhat.channels(), L = xhat.frames();
    const Tensor3& gv = t.value(gain.id);
    Tensor3* gx = t.needs_grad(x) ? &t.grad_slot(x.id) : nullptr;
    Tensor3* gg = t.needs_grad(gain) ? &t.grad_slot(gain.id) : nullptr;
    Tensor3* gbias = t.needs_grad(bias) ? &t.grad_slot(bias.id) : nullptr;
    std::vector<double> m1(L), m2(L);
    for (int b = 0; b < B; ++b) {
      std::fill(m1.begin(), m1.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
        const double g = gv.data[c];
        double sg = 0.0, sb = 0.0;
        for (int l = 0; l < L; ++l) {
          const double dy = gy.data[base + l];
          const double xh = xhat.data[base + l];
          sg += dy * xh;
          sb += dy;
          const double dxh = dy * g;
          m1[l] += dxh;
          m2[l] += dxh * xh;
        }
        if (gg) gg->data[c] += sg;
        if (gbias) gbias->data[c] += sb;
      }
      if (!gx) continue;
      const double* rs = rstd.data() + static_cast<std::size_t>(b) * L;
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(b) * C + c) * L;
        const double g = gv.data[c];
        for (int l = 0; l < L; ++l) {
          const double dxh = gy.data[base + l] * g;
          gx->data[base + l] += rs[l] * (dxh - m1[l] / C - xhat.data[base + l] * m2[l] / C);
        }
      }
    }
  });
}

/// Mean over frames: [B, C, L] -> [B, C, 1].
inline Var avg_pool_time(Var x) {
  const Tensor3& xv = x.value();
  detail::require(xv.frames() >= 1, "avg_pool_time: empty time axis");
  const int B = xv.batch(), C = xv.channels(), L = xv.frames();
  Tensor3 y(Shape{B, C, 1});
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const double* row = xv.plane(b) + static_cast<std::size_t>(c) * L;
      double s = 0.0;
      for (int l = 0; l < L; ++l) s += row[l];
      y.at(b, c, 0) = s / L;
    }
  }
  return x.tape->record(std::move(y), detail::any_grad(x), [x](Tape& t, const Tensor3& gy) {
    Tensor3& gx = t.grad_slot(x.id);
    const int B = gx.batch(), C = gx.channels(), L = gx.frames();
    for (int b = 0; b < B; ++b) {
      for (int c = 0; c < C; ++c) {
        const double g = gy.at(b, c, 0) / L;
        double* row = gx.plane(b) + static_cast<std::size_t>(c) * L;
        for (int l = 0; l < L; ++l) row[l] += g;
      }
    }
  });
}

/// Mean over channels: [B, C, L] -> [B, 1, L].
inline Var avg_pool_freq(Var x) {
  const Tensor3& xv = x.value();
  detail::require(xv.channels() >= 1, "avg_pool_freq: empty channel axis");
  const int B = xv.batch(), C = xv.channels(), L = xv.frames();
  Tensor3 y(Shape{B, 1, L});
  for (int b = 0; b < B; ++b) {
    double* out = y.plane(b);
    for (int c = 0; c < C; ++c) {
      const double* row = xv.plane(b) + static_cast<std::size_t>(c) * L;
      for (int l = 0; l < L; ++l) out[l] += row[l];
    }
    for (int l = 0; l < L; ++l) out[l] /= C;
  }
  return x.tape->record(std::move(y), detail::any_grad(x), [x](Tape& t, const Tensor3& gy) {
    Tensor3& gx = t.grad_slot(x.id);
    const int B = gx.batch(), C = gx.channels(), L = gx.frames();
    for (int b = 0; b < B; ++b) {
      const double* g = gy.plane(b);
      for (int c = 0; c < C; ++c) {
        double* row = gx.plane(b) + static_cast<std::size_t>(c) * L;
        for (int l = 0; l < L; ++l) row[l] += g[l] / C;
      }
    }
  });
}

inline double sigmoid_scalar(double v) {
  return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
}

inline Var sigmoid(Var x) {
  const Tensor3& xv = x.value();
  Tensor3 y(xv.shape);
  for (std::size_t i = 0; i < xv.size(); ++i) y.data[i] = sigmoid_scalar(xv.data[i]);
  const int self = static_cast<int>(x.tape->size());
  return x.tape->record(std::move(y), detail::any_grad(x), [x, self](Tape& t, const Tensor3& gy) {
    const Tensor3& yv = t.value(self);
    Tensor3& gx = t.grad_slot(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i] * yv.data[i] * (1.0 - yv.data[i]);
  });
}

namespace detail {

inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  auto dim = [&](int x, int y) {
    if (x == y || y == 1) return x;
    if (x == 1) return y;
    throw DimensionError(std::string(op) + ": cannot broadcast " + a.str() + " with " + b.str());
  };
  return Shape{dim(a.batch, b.batch), dim(a.channels, b.channels), dim(a.frames, b.frames)};
}

// Strides of `s` viewed under broadcast (0 along broadcast axes).
struct BStrides {
  std::size_t b, c, l;
};
inline BStrides bstrides(const Shape& s) {
  return {s.batch == 1 ? 0 : static_cast<std::size_t>(s.channels) * s.frames,
          s.channels == 1 ? 0 : static_cast<std::size_t>(s.frames), s.frames == 1 ? 0u : 1u};
}

template <typename F>
void for_each_broadcast(const Shape& out, const Shape& a, const Shape& b, F&& f) {
  const BStrides sa = bstrides(a), sb = bstrides(b);
  std::size_t o = 0;
  for (int i = 0; i < out.batch; ++i) {
    for (int c = 0; c < out.channels; ++c) {
      const std::size_t ia = i * sa.b + c * sa.c, ib = i * sb.b + c * sb.c;
      for (int l = 0; l < out.frames; ++l, ++o) f(o, ia + l * sa.l, ib + l * sb.l);
    }
  }
}

}  // namespace detail

/// Elementwise product with broadcasting over unit axes.
inline Var mul(Var a, Var b) {
  const Tensor3& av = a.value();
  const Tensor3& bv = b.value();
  const Shape out = detail::broadcast_shape(av.shape, bv.shape, "mul");
  Tensor3 y(out);
  detail::for_each_broadcast(out, av.shape, bv.shape, [&](std::size_t o, std::size_t ia, std::size_t ib) {
    y.data[o] = av.data[ia] * bv.data[ib];
  });
  return a.tape->record(std::move(y), detail::any_grad(a, b), [a, b, out](Tape& t, const Tensor3& gy) {
    const Tensor3& av = t.value(a.id);
    const Tensor3& bv = t.value(b.id);
    Tensor3* ga = t.needs_grad(a) ? &t.grad_slot(a.id) : nullptr;
    Tensor3* gb = t.needs_grad(b) ? &t.grad_slot(b.id) : nullptr;
    detail::for_each_broadcast(out, av.shape, bv.shape, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (ga) ga->data[ia] += gy.data[o] * bv.data[ib];
      if (gb) gb->data[ib] += gy.data[o] * av.data[ia];
    });
  });
}

/// Elementwise sum with broadcasting over unit axes.
inline Var add(Var a, Var b) {
  const Tensor3& av = a.value();
  const Tensor3& bv = b.value();
  const Shape out = detail::broadcast_shape(av.shape, bv.shape, "add");
  Tensor3 y(out);
  detail::for_each_broadcast(out, av.shape, bv.shape, [&](std::size_t o, std::size_t ia, std::size_t ib) {
    y.data[o] = av.data[ia] + bv.data[ib];
  });
  return a.tape->record(std::move(y), detail::any_grad(a, b), [a, b, out](Tape& t, const Tensor3& gy) {
    const Shape sa = t.value(a.id).shape, sb = t.value(b.id).shape;
    Tensor3* ga = t.needs_grad(a) ? &t.grad_slot(a.id) : nullptr;
    Tensor3* gb = t.needs_grad(b) ? &t.grad_slot(b.id) : nullptr;
    detail::for_each_broadcast(out, sa, sb, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      if (ga) ga->data[ia] += gy.data[o];
      if (gb) gb->data[ib] += gy.data[o];
    });
  });
}

inline Var scale(Var x, double s) {
  Tensor3 y = x.value();
  for (double& v : y.data) v *= s;
  return x.tape->record(std::move(y), detail::any_grad(x), [x, s](Tape& t, const Tensor3& gy) {
    Tensor3& gx = t.grad_slot(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx.data[i] += s * gy.data[i];
  });
}

/// Sum of all entries -> [1, 1, 1].
inline Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data) s += v;
  return x.tape->record(Tensor3(Shape{1, 1, 1}, s), detail::any_grad(x), [x](Tape& t, const Tensor3& gy) {
    Tensor3& gx = t.grad_slot(x.id);
    for (double& v : gx.data) v += gy.data[0];
  });
}

/// Same data, new shape of equal size.
inline Var reshape(Var x, Shape s) {
  detail::require(s.size() == x.value().size(), "reshape: size mismatch " + x.value().shape.str() + " -> " + s.str());
  Tensor3 y(s, x.value().data);
  return x.tape->record(std::move(y), detail::any_grad(x), [x](Tape& t, const Tensor3& gy) {
    Tensor3& gx = t.grad_slot(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx.data[i] += gy.data[i];
  });
}

/// Batch item `index` as a [1, C, L] tensor.
inline Var slice_batch(Var x, int index) {
  const Tensor3& xv = x.value();
  detail::require(index >= 0 && index < xv.batch(), "slice_batch: index out of range");
  const std::size_t n = static_cast<std::size_t>(xv.channels()) * xv.frames();
  Tensor3 y(Shape{1, xv.channels(), xv.frames()});
  std::copy(xv.plane(index), xv.plane(index) + n, y.data.begin());
  return x.tape->record(std::move(y), detail::any_grad(x), [x, index, n](Tape& t, const Tensor3& gy) {
    Tensor3& gx = t.grad_slot(x.id);
    double* dst = gx.plane(index);
    for (std::size_t i = 0; i < n; ++i) dst[i] += gy.data[i];
  });
}

}  // namespace septfa::nn
