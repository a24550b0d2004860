// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>

#include "cevc/tensor.hpp"

// Differentiable tensor operations. Binary ops accept operands of identical
// shape, or one operand with a single element (scalar broadcast). Nothing
// else broadcasts; reshape explicitly.
namespace cevc::ops {

inline constexpr double kLeakySlope = 0.2;

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
// kDomain if any divisor element is exactly zero.
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);

Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);   // kDomain for x <= 0
Tensor sqrt(const Tensor& x);  // kDomain for x < 0
Tensor square(const Tensor& x);
Tensor abs(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softplus(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = kLeakySlope);

// Clamp to [lo, hi]. Gradient passes where lo <= x <= hi (ties included)
// and is stopped elsewhere.
Tensor clamp(const Tensor& x, double lo,
             double hi = std::numeric_limits<double>::infinity());

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor mse(const Tensor& a, const Tensor& b);

Tensor reshape(const Tensor& x, Shape shape);
// Concatenate / slice along axis 1 of 4-D [B,C,H,W] tensors.
Tensor concat_channels(const Tensor& a, const Tensor& b);
Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t end);
// Top-left height x width window of a [B,C,H,W] tensor.
Tensor crop_spatial(const Tensor& x, std::int64_t height, std::int64_t width);

// x: [B, blocks*C, H, W]. Softmax across the `blocks` groups for each
// (b, c, h, w): out[b, k*C + c] = exp(x[b,k*C+c]) / sum_k' exp(x[b,k'*C+c]).
Tensor softmax_blocks(const Tensor& x, std::int64_t blocks);

// input [B,Cin,H,W], kernel [Cout,Cin,kh,kw], bias [Cout].
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride, int pad);

// input [B,Cin,H,W], kernel [Cin,Cout,kh,kw], bias [Cout]. Output padding
// is stride + 2*pad - kh, which must lie in [0, stride); the output is then
// exactly stride*H x stride*W.
Tensor conv_transpose2d(const Tensor& input, const Tensor& kernel,
                        const Tensor& bias, int stride, int pad);

// Phi((x - mu) / sigma). All three operands share a shape. kDomain when
// any sigma <= 0.
Tensor gaussian_cdf(const Tensor& x, const Tensor& mu, const Tensor& sigma);

// Phi((c + 0.5 - mu)/sigma) - Phi((c - 0.5 - mu)/sigma), evaluated on the
// tail nearest zero so small masses keep their relative precision.
Tensor gaussian_interval_mass(const Tensor& center, const Tensor& mu,
                              const Tensor& sigma);

// Per-channel dense layer. x [C, in, n], weight [C, out, in], bias [C, out]
// -> [C, out, n].
Tensor channel_affine(const Tensor& x, const Tensor& weight,
                      const Tensor& bias);

// x + tanh(a) * tanh(x) with a [C, k] gating x [C, k, n].
Tensor tanh_gate(const Tensor& x, const Tensor& a);

}  // namespace cevc::ops
