#pragma once

// Differentiable primitives over Tensor<T>. Each op computes its forward
// result, and, when a tape is supplied and any input requires grad,
// records a closure implementing the backward rule. All reductions use a
// fixed loop order and 64-bit accumulators, so seeded runs reproduce
// bit-for-bit.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mulab/errors.hpp"
#include "mulab/tensor.hpp"

namespace mulab {

template <typename T>
using MatMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using ConstMatMap =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

namespace detail {

template <typename T>
bool want_grad(Tape<T>* tape, const Tensor<T>& t) {
  return tape != nullptr && t.requires_grad();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// matmul: [M x K] * [K x N] -> [M x N]
// Backward: dA = dC * B^T, dB = A^T * dC.
template <typename T>
Tensor<T> matmul(Tape<T>* tape, Tensor<T> a, Tensor<T> b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n});
  ConstMatMap<T> A(a.data(), m, k), B(b.data(), k, n);
  MatMap<T> C(out.data(), m, n);
  C.noalias() = A * B;

  bool ga = detail::want_grad(tape, a), gb = detail::want_grad(tape, b);
  if (ga || gb) {
    out.set_requires_grad(true);
    tape->record([a, b, out, m, k, n, ga, gb]() mutable {
      ConstMatMap<T> dC(out.grad().data(), m, n);
      if (ga) {
        ConstMatMap<T> B(b.data(), k, n);
        MatMap<T> dA(a.grad().data(), m, k);
        dA.noalias() += dC * B.transpose();
      }
      if (gb) {
        ConstMatMap<T> A(a.data(), m, k);
        MatMap<T> dB(b.grad().data(), k, n);
        dB.noalias() += A.transpose() * dC;
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise add (used for residual shortcuts).
template <typename T>
Tensor<T> add(Tape<T>* tape, Tensor<T> a, Tensor<T> b) {
  if (a.shape() != b.shape())
    throw ShapeError("add shape mismatch: " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
  Tensor<T> out(a.shape());
  const std::int64_t n = a.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];

  bool ga = detail::want_grad(tape, a), gb = detail::want_grad(tape, b);
  if (ga || gb) {
    out.set_requires_grad(true);
    tape->record([a, b, out, n, ga, gb]() mutable {
      const auto& g = out.grad();
      if (ga) {
        auto& da = a.grad();
        for (std::int64_t i = 0; i < n; ++i) da[i] += g[i];
      }
      if (gb) {
        auto& db = b.grad();
        for (std::int64_t i = 0; i < n; ++i) db[i] += g[i];
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// relu: elementwise max(0, x); subgradient at 0 is 0.
template <typename T>
Tensor<T> relu(Tape<T>* tape, Tensor<T> x) {
  Tensor<T> out(x.shape());
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);

  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, n]() mutable {
      const auto& g = out.grad();
      auto& dx = x.grad();
      for (std::int64_t i = 0; i < n; ++i)
        if (x[i] > T(0)) dx[i] += g[i];
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// sum over all elements -> scalar.
template <typename T>
Tensor<T> sum(Tape<T>* tape, Tensor<T> x) {
  double acc = 0.0;
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(x[i]);
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc));

  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, n]() mutable {
      T g = out.grad()[0];
      auto& dx = x.grad();
      for (std::int64_t i = 0; i < n; ++i) dx[i] += g;
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// reshape (copying); backward copies gradients back.
template <typename T>
Tensor<T> reshape(Tape<T>* tape, Tensor<T> x, std::vector<int> new_shape) {
  Tensor<T> out(std::move(new_shape), x.vec());
  if (out.size() != x.size())
    throw ShapeError("reshape size mismatch: " + shape_str(x.shape()) + " -> " +
                     shape_str(out.shape()));
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out]() mutable {
      const auto& g = out.grad();
      auto& dx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) dx[i] += g[i];
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// linear: y = x * W^T + b, with x [B x in], W [out x in], b [out].
template <typename T>
Tensor<T> linear(Tape<T>* tape, Tensor<T> x, Tensor<T> w, Tensor<T> b) {
  if (x.rank() != 2 || w.rank() != 2 || x.dim(1) != w.dim(1))
    throw ShapeError("linear shape mismatch: " + shape_str(x.shape()) + " vs " +
                     shape_str(w.shape()));
  const int bsz = x.dim(0), in = x.dim(1), outn = w.dim(0);
  if (b.size() != outn) throw ShapeError("linear bias shape " + shape_str(b.shape()));
  Tensor<T> out({bsz, outn});
  ConstMatMap<T> X(x.data(), bsz, in), W(w.data(), outn, in);
  MatMap<T> Y(out.data(), bsz, outn);
  Y.noalias() = X * W.transpose();
  for (int i = 0; i < bsz; ++i)
    for (int j = 0; j < outn; ++j) out[static_cast<std::int64_t>(i) * outn + j] += b[j];

  bool gx = detail::want_grad(tape, x), gw = detail::want_grad(tape, w),
       gb = detail::want_grad(tape, b);
  if (gx || gw || gb) {
    out.set_requires_grad(true);
    tape->record([x, w, b, out, bsz, in, outn, gx, gw, gb]() mutable {
      ConstMatMap<T> dY(out.grad().data(), bsz, outn);
      if (gx) {
        ConstMatMap<T> W(w.data(), outn, in);
        MatMap<T> dX(x.grad().data(), bsz, in);
        dX.noalias() += dY * W;
      }
      if (gw) {
        ConstMatMap<T> X(x.data(), bsz, in);
        MatMap<T> dW(w.grad().data(), outn, in);
        dW.noalias() += dY.transpose() * X;
      }
      if (gb) {
        auto& db = b.grad();
        const auto& g = out.grad();
        for (int j = 0; j < outn; ++j) {
          double acc = 0.0;
          for (int i = 0; i < bsz; ++i)
            acc += static_cast<double>(g[static_cast<std::size_t>(i) * outn + j]);
          db[j] += static_cast<T>(acc);
        }
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation, input [B x C x H x W], kernel [F x C x k x k].
// H' = (H + 2*pad - k) / stride + 1 (floor). Implemented as per-sample
// im2col followed by one GEMM per sample; the column buffer is kept for
// the backward pass.

namespace detail {

// col layout per sample: (C*k*k) rows x (Ho*Wo) cols, row-major.
template <typename T>
void im2col(const T* x, int C, int H, int W, int k, int stride, int pad, int Ho,
            int Wo, T* col) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::int64_t>(c) * k * k + ky * k + kx) *
                           (static_cast<std::int64_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          int iy = oy * stride - pad + ky;
          for (int ox = 0; ox < Wo; ++ox) {
            int ix = ox * stride - pad + kx;
            T v = T(0);
            if (iy >= 0 && iy < H && ix >= 0 && ix < W)
              v = x[(static_cast<std::int64_t>(c) * H + iy) * W + ix];
            row[static_cast<std::int64_t>(oy) * Wo + ox] = v;
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* col, int C, int H, int W, int k, int stride, int pad,
                int Ho, int Wo, T* dx) {
  for (int c = 0; c < C; ++c) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<std::int64_t>(c) * k * k + ky * k + kx) *
                                 (static_cast<std::int64_t>(Ho) * Wo);
        for (int oy = 0; oy < Ho; ++oy) {
          int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          for (int ox = 0; ox < Wo; ++ox) {
            int ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= W) continue;
            dx[(static_cast<std::int64_t>(c) * H + iy) * W + ix] +=
                row[static_cast<std::int64_t>(oy) * Wo + ox];
          }
        }
      }
    }
  }
}

}  // namespace detail

template <typename T>
Tensor<T> conv2d(Tape<T>* tape, Tensor<T> x, Tensor<T> w, int stride, int pad) {
  if (x.rank() != 4 || w.rank() != 4)
    throw ShapeError("conv2d expects rank-4 input and kernel, got " +
                     shape_str(x.shape()) + " and " + shape_str(w.shape()));
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int F = w.dim(0), k = w.dim(2);
  if (w.dim(1) != C || w.dim(2) != w.dim(3))
    throw ShapeError("conv2d kernel shape mismatch: input " + shape_str(x.shape()) +
                     " kernel " + shape_str(w.shape()));
  if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
  const int Ho = (H + 2 * pad - k) / stride + 1;
  const int Wo = (W + 2 * pad - k) / stride + 1;
  if (k > H + 2 * pad || k > W + 2 * pad || Ho <= 0 || Wo <= 0)
    throw ShapeError("conv2d non-positive output size for input " +
                     shape_str(x.shape()) + " kernel " + shape_str(w.shape()));

  const std::int64_t ckk = static_cast<std::int64_t>(C) * k * k;
  const std::int64_t hw = static_cast<std::int64_t>(Ho) * Wo;
  auto col = std::make_shared<std::vector<T>>(static_cast<std::size_t>(B) * ckk * hw);

  Tensor<T> out({B, F, Ho, Wo});
  ConstMatMap<T> Wm(w.data(), F, static_cast<int>(ckk));
  for (int b = 0; b < B; ++b) {
    T* colb = col->data() + static_cast<std::int64_t>(b) * ckk * hw;
    detail::im2col(x.data() + static_cast<std::int64_t>(b) * C * H * W, C, H, W, k,
                   stride, pad, Ho, Wo, colb);
    ConstMatMap<T> Col(colb, static_cast<int>(ckk), static_cast<int>(hw));
    MatMap<T> Out(out.data() + static_cast<std::int64_t>(b) * F * hw, F,
                  static_cast<int>(hw));
    Out.noalias() = Wm * Col;
  }

  bool gx = detail::want_grad(tape, x), gw = detail::want_grad(tape, w);
  if (gx || gw) {
    out.set_requires_grad(true);
    tape->record([x, w, out, col, B, C, H, W, F, k, stride, pad, Ho, Wo, ckk, hw,
                  gx, gw]() mutable {
      std::vector<T> dcol;
      if (gx) dcol.resize(static_cast<std::size_t>(ckk * hw));
      for (int b = 0; b < B; ++b) {
        ConstMatMap<T> dOut(out.grad().data() + static_cast<std::int64_t>(b) * F * hw,
                            F, static_cast<int>(hw));
        const T* colb = col->data() + static_cast<std::int64_t>(b) * ckk * hw;
        if (gw) {
          ConstMatMap<T> Col(colb, static_cast<int>(ckk), static_cast<int>(hw));
          MatMap<T> dW(w.grad().data(), F, static_cast<int>(ckk));
          dW.noalias() += dOut * Col.transpose();
        }
        if (gx) {
          ConstMatMap<T> Wm(w.data(), F, static_cast<int>(ckk));
          MatMap<T> dCol(dcol.data(), static_cast<int>(ckk), static_cast<int>(hw));
          dCol.noalias() = Wm.transpose() * dOut;
          detail::col2im_add(dcol.data(), C, H, W, k, stride, pad, Ho, Wo,
                             x.grad().data() + static_cast<std::int64_t>(b) * C * H * W);
        }
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// batchnorm2d. Train mode normalizes by batch moments per channel
// (epsilon 1e-5) and updates running moments with momentum 0.1 (unbiased
// variance for the running estimate); eval mode uses the running moments.

template <typename T>
struct BnState {
  std::vector<T> running_mean;
  std::vector<T> running_var;
  T momentum = T(0.1);
  T eps = T(1e-5);

  explicit BnState(int channels = 0)
      : running_mean(static_cast<std::size_t>(channels), T(0)),
        running_var(static_cast<std::size_t>(channels), T(1)) {}
};

template <typename T>
Tensor<T> batchnorm2d(Tape<T>* tape, Tensor<T> x, Tensor<T> gamma, Tensor<T> beta,
                      BnState<T>& state, bool training) {
  if (x.rank() != 4) throw ShapeError("batchnorm2d expects rank-4 input");
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (gamma.size() != C || beta.size() != C ||
      static_cast<int>(state.running_mean.size()) != C)
    throw ShapeError("batchnorm2d channel mismatch");
  const std::int64_t spatial = static_cast<std::int64_t>(H) * W;
  const std::int64_t n = static_cast<std::int64_t>(B) * spatial;
  if (training && n < 2)
    throw ContractError("batchnorm2d degenerate batch: B*H*W = " + std::to_string(n));

  Tensor<T> out(x.shape());
  auto mean = std::make_shared<std::vector<T>>(C);
  auto inv_std = std::make_shared<std::vector<T>>(C);

  if (training) {
    for (int c = 0; c < C; ++c) {
      double m = 0.0;
      for (int b = 0; b < B; ++b) {
        const T* p = x.data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
        for (std::int64_t i = 0; i < spatial; ++i) m += static_cast<double>(p[i]);
      }
      m /= static_cast<double>(n);
      double v = 0.0;
      for (int b = 0; b < B; ++b) {
        const T* p = x.data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
        for (std::int64_t i = 0; i < spatial; ++i) {
          double d = static_cast<double>(p[i]) - m;
          v += d * d;
        }
      }
      v /= static_cast<double>(n);
      (*mean)[c] = static_cast<T>(m);
      (*inv_std)[c] = static_cast<T>(1.0 / std::sqrt(v + static_cast<double>(state.eps)));
      double unbiased = n > 1 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : v;
      state.running_mean[c] = static_cast<T>((1.0 - static_cast<double>(state.momentum)) *
                                                 static_cast<double>(state.running_mean[c]) +
                                             static_cast<double>(state.momentum) * m);
      state.running_var[c] = static_cast<T>((1.0 - static_cast<double>(state.momentum)) *
                                                static_cast<double>(state.running_var[c]) +
                                            static_cast<double>(state.momentum) * unbiased);
    }
  } else {
    for (int c = 0; c < C; ++c) {
      (*mean)[c] = state.running_mean[c];
      (*inv_std)[c] = static_cast<T>(
          1.0 / std::sqrt(static_cast<double>(state.running_var[c]) +
                          static_cast<double>(state.eps)));
    }
  }

  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const T* p = x.data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
      T* q = out.data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
      T mu = (*mean)[c], is = (*inv_std)[c], g = gamma[c], be = beta[c];
      for (std::int64_t i = 0; i < spatial; ++i) q[i] = (p[i] - mu) * is * g + be;
    }
  }

  bool gx = detail::want_grad(tape, x), gg = detail::want_grad(tape, gamma),
       gb = detail::want_grad(tape, beta);
  if (gx || gg || gb) {
    out.set_requires_grad(true);
    tape->record([x, gamma, beta, out, mean, inv_std, B, C, spatial, n, training,
                  gx, gg, gb]() mutable {
      for (int c = 0; c < C; ++c) {
        T mu = (*mean)[c], is = (*inv_std)[c], g = gamma[c];
        // Channel-wise reductions over dY and dY*xhat.
        double sum_dy = 0.0, sum_dy_xhat = 0.0;
        for (int b = 0; b < B; ++b) {
          const T* xp = x.data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
          const T* gp = out.grad().data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
          for (std::int64_t i = 0; i < spatial; ++i) {
            double dy = static_cast<double>(gp[i]);
            double xhat = (static_cast<double>(xp[i]) - static_cast<double>(mu)) *
                          static_cast<double>(is);
            sum_dy += dy;
            sum_dy_xhat += dy * xhat;
          }
        }
        if (gg) gamma.grad()[c] += static_cast<T>(sum_dy_xhat);
        if (gb) beta.grad()[c] += static_cast<T>(sum_dy);
        if (!gx) continue;
        if (training) {
          double inv_n = 1.0 / static_cast<double>(n);
          for (int b = 0; b < B; ++b) {
            const T* xp = x.data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
            const T* gp =
                out.grad().data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
            T* dxp = x.grad().data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
            for (std::int64_t i = 0; i < spatial; ++i) {
              double dy = static_cast<double>(gp[i]);
              double xhat = (static_cast<double>(xp[i]) - static_cast<double>(mu)) *
                            static_cast<double>(is);
              double dx = static_cast<double>(g) * static_cast<double>(is) *
                          (dy - inv_n * sum_dy - xhat * inv_n * sum_dy_xhat);
              dxp[i] += static_cast<T>(dx);
            }
          }
        } else {
          T scale = g * is;
          for (int b = 0; b < B; ++b) {
            const T* gp =
                out.grad().data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
            T* dxp = x.grad().data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
            for (std::int64_t i = 0; i < spatial; ++i) dxp[i] += gp[i] * scale;
          }
        }
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// global average pool: [B x C x H x W] -> [B x C].
template <typename T>
Tensor<T> global_avg_pool(Tape<T>* tape, Tensor<T> x) {
  if (x.rank() != 4) throw ShapeError("global_avg_pool expects rank-4 input");
  const int B = x.dim(0), C = x.dim(1);
  const std::int64_t spatial = static_cast<std::int64_t>(x.dim(2)) * x.dim(3);
  Tensor<T> out({B, C});
  for (int b = 0; b < B; ++b) {
    for (int c = 0; c < C; ++c) {
      const T* p = x.data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
      double acc = 0.0;
      for (std::int64_t i = 0; i < spatial; ++i) acc += static_cast<double>(p[i]);
      out[static_cast<std::int64_t>(b) * C + c] =
          static_cast<T>(acc / static_cast<double>(spatial));
    }
  }
  if (detail::want_grad(tape, x)) {
    out.set_requires_grad(true);
    tape->record([x, out, B, C, spatial]() mutable {
      T inv = static_cast<T>(1.0 / static_cast<double>(spatial));
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
          T g = out.grad()[static_cast<std::int64_t>(b) * C + c] * inv;
          T* dxp = x.grad().data() + (static_cast<std::int64_t>(b) * C + c) * spatial;
          for (std::int64_t i = 0; i < spatial; ++i) dxp[i] += g;
        }
      }
    }, out);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Row-wise softmax of logits [B x C]; not tape-recorded (inference only).
template <typename T>
std::vector<double> softmax_rows(const Tensor<T>& logits) {
  const int B = logits.dim(0), C = logits.dim(1);
  std::vector<double> probs(static_cast<std::size_t>(B) * C);
  for (int b = 0; b < B; ++b) {
    const T* row = logits.data() + static_cast<std::int64_t>(b) * C;
    double mx = static_cast<double>(row[0]);
    for (int c = 1; c < C; ++c) mx = std::max(mx, static_cast<double>(row[c]));
    double z = 0.0;
    for (int c = 0; c < C; ++c) {
      double e = std::exp(static_cast<double>(row[c]) - mx);
      probs[static_cast<std::size_t>(b) * C + c] = e;
      z += e;
    }
    for (int c = 0; c < C; ++c) probs[static_cast<std::size_t>(b) * C + c] /= z;
  }
  return probs;
}

// ---------------------------------------------------------------------------
// softmax_cross_entropy: mean over the batch of -log softmax(logits)[label],
// with max-subtraction for stability; loss accumulated in 64-bit.
// Backward: dlogits = (softmax - onehot) / B.
template <typename T>
Tensor<T> softmax_cross_entropy(Tape<T>* tape, Tensor<T> logits,
                                const std::vector<int>& labels) {
  if (logits.rank() != 2)
    throw ShapeError("softmax_cross_entropy expects [B x C] logits");
  const int B = logits.dim(0), C = logits.dim(1);
  if (static_cast<int>(labels.size()) != B)
    throw ShapeError("softmax_cross_entropy label count mismatch");
  for (int b = 0; b < B; ++b)
    if (labels[b] < 0 || labels[b] >= C)
      throw ContractError("label " + std::to_string(labels[b]) + " out of range [0," +
                          std::to_string(C) + ") at row " + std::to_string(b));

  auto probs = std::make_shared<std::vector<double>>(softmax_rows(logits));
  double acc = 0.0;
  for (int b = 0; b < B; ++b) {
    double p = (*probs)[static_cast<std::size_t>(b) * C + labels[b]];
    acc += -std::log(std::max(p, 1e-300));
  }
  Tensor<T> out = Tensor<T>::scalar(static_cast<T>(acc / B));

  if (detail::want_grad(tape, logits)) {
    out.set_requires_grad(true);
    auto lab = std::make_shared<std::vector<int>>(labels);
    tape->record([logits, out, probs, lab, B, C]() mutable {
      T g = out.grad()[0];
      auto& dl = logits.grad();
      for (int b = 0; b < B; ++b) {
        for (int c = 0; c < C; ++c) {
          double p = (*probs)[static_cast<std::size_t>(b) * C + c];
          double onehot = (c == (*lab)[b]) ? 1.0 : 0.0;
          dl[static_cast<std::size_t>(b) * C + c] +=
              static_cast<T>(static_cast<double>(g) * (p - onehot) / B);
        }
      }
    }, out);
  }
  return out;
}

}  // namespace mulab
