// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

// Direct convolutions. Every output element accumulates its terms in
// (input channel, kernel row, kernel column) order, so results are
// bit-identical wherever the same binary evaluates them.

#include <algorithm>
#include <string>

#include "cevc/ops.hpp"
#include "tensor_internal.hpp"

namespace cevc::ops {

using detail::emit;
using detail::ImplPtr;
using detail::wants_grad;

namespace {

struct Geometry {
  std::int64_t B, Cin, H, W, Cout, kh, kw;
};

Geometry check_conv_args(const char* op, const Tensor& input, const Tensor& kernel,
                         const Tensor& bias, bool transposed) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    fail(ErrorKind::kDimension, std::string(op) + ": input and kernel must be rank 4");
  }
  Geometry g{input.dim(0), input.dim(1), input.dim(2), input.dim(3), 0,
             kernel.dim(2), kernel.dim(3)};
  const auto kin = transposed ? kernel.dim(0) : kernel.dim(1);
  g.Cout = transposed ? kernel.dim(1) : kernel.dim(0);
  if (kin != g.Cin) {
    fail(ErrorKind::kDimension, std::string(op) + ": input has " + std::to_string(g.Cin) +
                                    " channels, kernel expects " + std::to_string(kin));
  }
  if (bias.numel() != g.Cout) {
    fail(ErrorKind::kDimension, std::string(op) + ": bias has " +
                                    std::to_string(bias.numel()) + " entries for " +
                                    std::to_string(g.Cout) + " output channels");
  }
  return g;
}

// Patch matrix of one [C,H,W] image: row (c*kh+ky)*kw+kx, column oy*Wo+ox
// holds in[c][oy*s+ky-p][ox*s+kx-p], zero outside the image.
std::vector<double> im2col(const double* in, std::int64_t C, std::int64_t H, std::int64_t W,
                           std::int64_t kh, std::int64_t kw, std::int64_t s, std::int64_t p,
                           std::int64_t Ho, std::int64_t Wo) {
  std::vector<double> col(static_cast<std::size_t>(C * kh * kw * Ho * Wo), 0.0);
  double* row = col.data();
  for (std::int64_t c = 0; c < C; ++c) {
    const double* plane = in + c * H * W;
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx, row += Ho * Wo) {
        for (std::int64_t oy = 0; oy < Ho; ++oy) {
          const auto iy = oy * s + ky - p;
          if (iy < 0 || iy >= H) continue;
          const double* src = plane + iy * W;
          double* dst = row + oy * Wo;
          for (std::int64_t ox = 0; ox < Wo; ++ox) {
            const auto ix = ox * s + kx - p;
            if (ix >= 0 && ix < W) dst[ox] = src[ix];
          }
        }
      }
    }
  }
  return col;
}

// Adjoint of im2col: scatters patch rows back into out [C,H,W] (+=).
void col2im_add(const double* col, double* out, std::int64_t C, std::int64_t H, std::int64_t W,
                std::int64_t kh, std::int64_t kw, std::int64_t s, std::int64_t p,
                std::int64_t Ho, std::int64_t Wo) {
  const double* row = col;
  for (std::int64_t c = 0; c < C; ++c) {
    double* plane = out + c * H * W;
    for (std::int64_t ky = 0; ky < kh; ++ky) {
      for (std::int64_t kx = 0; kx < kw; ++kx, row += Ho * Wo) {
        for (std::int64_t oy = 0; oy < Ho; ++oy) {
          const auto iy = oy * s + ky - p;
          if (iy < 0 || iy >= H) continue;
          double* dst = plane + iy * W;
          const double* src = row + oy * Wo;
          for (std::int64_t ox = 0; ox < Wo; ++ox) {
            const auto ix = ox * s + kx - p;
            if (ix >= 0 && ix < W) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

// The three products below keep a fixed summation order per output
// element (ascending over the reduced index), independent of blocking.

// C[M,N] += A[M,K] * B[K,N]
void gemm_nn(const double* A, const double* B, double* C, std::int64_t M, std::int64_t K,
             std::int64_t N) {
  std::int64_t m = 0;
  for (; m + 4 <= M; m += 4) {
    double* c0 = C + m * N;
    double* c1 = c0 + N;
    double* c2 = c1 + N;
    double* c3 = c2 + N;
    for (std::int64_t k = 0; k < K; ++k) {
      const double w0 = A[m * K + k], w1 = A[(m + 1) * K + k], w2 = A[(m + 2) * K + k],
                   w3 = A[(m + 3) * K + k];
      const double* b = B + k * N;
      for (std::int64_t n = 0; n < N; ++n) {
        const double v = b[n];
        c0[n] += w0 * v;
        c1[n] += w1 * v;
        c2[n] += w2 * v;
        c3[n] += w3 * v;
      }
    }
  }
  for (; m < M; ++m) {
    double* c = C + m * N;
    for (std::int64_t k = 0; k < K; ++k) {
      const double w = A[m * K + k];
      const double* b = B + k * N;
      for (std::int64_t n = 0; n < N; ++n) c[n] += w * b[n];
    }
  }
}

// C[K,N] += A[M,K]^T * B[M,N]
void gemm_tn(const double* A, const double* B, double* C, std::int64_t M, std::int64_t K,
             std::int64_t N) {
  std::int64_t k = 0;
  for (; k + 4 <= K; k += 4) {
    double* c0 = C + k * N;
    double* c1 = c0 + N;
    double* c2 = c1 + N;
    double* c3 = c2 + N;
    for (std::int64_t m = 0; m < M; ++m) {
      const double* a = A + m * K + k;
      const double w0 = a[0], w1 = a[1], w2 = a[2], w3 = a[3];
      const double* b = B + m * N;
      for (std::int64_t n = 0; n < N; ++n) {
        const double v = b[n];
        c0[n] += w0 * v;
        c1[n] += w1 * v;
        c2[n] += w2 * v;
        c3[n] += w3 * v;
      }
    }
  }
  for (; k < K; ++k) {
    double* c = C + k * N;
    for (std::int64_t m = 0; m < M; ++m) {
      const double w = A[m * K + k];
      const double* b = B + m * N;
      for (std::int64_t n = 0; n < N; ++n) c[n] += w * b[n];
    }
  }
}

// Four-lane dot product; lanes are combined in a fixed order.
inline double dot(const double* a, const double* b, std::int64_t n) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  std::int64_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) l0 += a[i] * b[i];
  return (l0 + l1) + (l2 + l3);
}

// C[M,K] += A[M,N] * B[K,N]^T
void gemm_nt(const double* A, const double* B, double* C, std::int64_t M, std::int64_t K,
             std::int64_t N) {
  for (std::int64_t m = 0; m < M; ++m) {
    for (std::int64_t k = 0; k < K; ++k) C[m * K + k] += dot(A + m * N, B + k * N, N);
  }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, int stride,
              int pad) {
  const auto g = check_conv_args("conv2d", input, kernel, bias, false);
  if (stride < 1 || pad < 0) fail(ErrorKind::kDimension, "conv2d: bad stride/pad");
  const std::int64_t s = stride, p = pad;
  const auto Hp = g.H + 2 * p, Wp = g.W + 2 * p;
  if (Hp < g.kh || Wp < g.kw) {
    fail(ErrorKind::kDimension, "conv2d: kernel larger than padded input " +
                                    shape_str(input.shape()));
  }
  const auto Ho = (Hp - g.kh) / s + 1, Wo = (Wp - g.kw) / s + 1;
  const auto Kd = g.Cin * g.kh * g.kw, N = Ho * Wo;
  const double* X = input.data().data();
  const double* K = kernel.data().data();
  const double* bv = bias.data().data();

  // Patch matrices are kept for the kernel gradient.
  auto cols = std::make_shared<std::vector<std::vector<double>>>();
  std::vector<double> out(static_cast<std::size_t>(g.B * g.Cout * N));
  for (std::int64_t b = 0; b < g.B; ++b) {
    cols->push_back(im2col(X + b * g.Cin * g.H * g.W, g.Cin, g.H, g.W, g.kh, g.kw, s, p, Ho, Wo));
    double* o = out.data() + b * g.Cout * N;
    for (std::int64_t co = 0; co < g.Cout; ++co) std::fill_n(o + co * N, N, bv[co]);
    gemm_nn(K, cols->back().data(), o, g.Cout, Kd, N);
  }

  return emit("conv2d", {g.B, g.Cout, Ho, Wo}, std::move(out), {&input, &kernel, &bias}, [&] {
    ImplPtr pi = input.impl(), pk = kernel.impl(), pb = bias.impl();
    return [pi, pk, pb, cols, g, s, p, Ho, Wo, Kd, N](std::span<const double> gout) {
      if (wants_grad(pb)) {
        auto& gb = pb->grad_buffer();
        for (std::int64_t b = 0; b < g.B; ++b) {
          for (std::int64_t co = 0; co < g.Cout; ++co) {
            const double* go = gout.data() + (b * g.Cout + co) * N;
            double acc = 0.0;
            for (std::int64_t i = 0; i < N; ++i) acc += go[i];
            gb[co] += acc;
          }
        }
      }
      if (wants_grad(pk)) {
        auto& gk = pk->grad_buffer();
        for (std::int64_t b = 0; b < g.B; ++b) {
          gemm_nt(gout.data() + b * g.Cout * N, (*cols)[b].data(), gk.data(), g.Cout, Kd, N);
        }
      }
      if (wants_grad(pi)) {
        auto& gi = pi->grad_buffer();
        const double* K = pk->data.data();
        std::vector<double> gcol(static_cast<std::size_t>(Kd * N));
        for (std::int64_t b = 0; b < g.B; ++b) {
          std::fill(gcol.begin(), gcol.end(), 0.0);
          gemm_tn(K, gout.data() + b * g.Cout * N, gcol.data(), g.Cout, Kd, N);
          col2im_add(gcol.data(), gi.data() + b * g.Cin * g.H * g.W, g.Cin, g.H, g.W, g.kh, g.kw,
                     s, p, Ho, Wo);
        }
      }
    };
  });
}

// Transposed convolution is the adjoint of conv2d with the same kernel
// geometry: out = col2im(K^T x), mapped onto a [Cout, H*s, W*s] plane.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                        int stride, int pad) {
  const auto g = check_conv_args("conv_transpose2d", input, kernel, bias, true);
  if (stride < 1 || pad < 0) fail(ErrorKind::kDimension, "conv_transpose2d: bad stride/pad");
  const std::int64_t s = stride, p = pad;
  const auto opad_h = s + 2 * p - g.kh, opad_w = s + 2 * p - g.kw;
  if (opad_h < 0 || opad_h >= s || opad_w < 0 || opad_w >= s) {
    fail(ErrorKind::kDimension, "conv_transpose2d: kernel " + std::to_string(g.kh) + "x" +
                                    std::to_string(g.kw) + " with stride " +
                                    std::to_string(s) + " pad " + std::to_string(p) +
                                    " cannot scale the input exactly");
  }
  const auto Ho = g.H * s, Wo = g.W * s;
  const auto J = g.Cout * g.kh * g.kw, N = g.H * g.W;
  const double* X = input.data().data();
  const double* K = kernel.data().data();
  const double* bv = bias.data().data();

  std::vector<double> out(static_cast<std::size_t>(g.B * g.Cout * Ho * Wo), 0.0);
  std::vector<double> col(static_cast<std::size_t>(J * N));
  for (std::int64_t b = 0; b < g.B; ++b) {
    std::fill(col.begin(), col.end(), 0.0);
    gemm_tn(K, X + b * g.Cin * N, col.data(), g.Cin, J, N);
    double* o = out.data() + b * g.Cout * Ho * Wo;
    col2im_add(col.data(), o, g.Cout, Ho, Wo, g.kh, g.kw, s, p, g.H, g.W);
    for (std::int64_t co = 0; co < g.Cout; ++co) {
      for (std::int64_t i = 0; i < Ho * Wo; ++i) o[co * Ho * Wo + i] += bv[co];
    }
  }

  return emit("conv_transpose2d", {g.B, g.Cout, Ho, Wo}, std::move(out),
              {&input, &kernel, &bias}, [&] {
                ImplPtr pi = input.impl(), pk = kernel.impl(), pb = bias.impl();
                return [pi, pk, pb, g, s, p, Ho, Wo, J, N](std::span<const double> gout) {
                  if (wants_grad(pb)) {
                    auto& gb = pb->grad_buffer();
                    for (std::int64_t b = 0; b < g.B; ++b) {
                      for (std::int64_t co = 0; co < g.Cout; ++co) {
                        const double* go = gout.data() + (b * g.Cout + co) * Ho * Wo;
                        double acc = 0.0;
                        for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += go[i];
                        gb[co] += acc;
                      }
                    }
                  }
                  if (!wants_grad(pk) && !wants_grad(pi)) return;
                  const double* X = pi->data.data();
                  const double* K = pk->data.data();
                  for (std::int64_t b = 0; b < g.B; ++b) {
                    const auto gcol = im2col(gout.data() + b * g.Cout * Ho * Wo, g.Cout, Ho, Wo,
                                             g.kh, g.kw, s, p, g.H, g.W);
                    if (wants_grad(pk)) {
                      gemm_nt(X + b * g.Cin * N, gcol.data(), pk->grad_buffer().data(), g.Cin,
                              J, N);
                    }
                    if (wants_grad(pi)) {
                      gemm_nn(K, gcol.data(), pi->grad_buffer().data() + b * g.Cin * N, g.Cin,
                              J, N);
                    }
                  }
                };
              });
}

}  // namespace cevc::ops
