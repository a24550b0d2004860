// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "cevc/tensor.hpp"

namespace cevc::metrics {

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;
inline constexpr int kMaxScales = 5;

// Images are [1,C,H,W] (or [C,H,W]) with values in [0,1].
double mse(const Tensor& a, const Tensor& b);
// -10 log10(MSE); +infinity for identical inputs.
double psnr(const Tensor& a, const Tensor& b);
double psnr_from_mse(double mse);

// Number of scales that fit: largest s <= 5 with min(H,W) / 2^(s-1) >= 11.
// kGeometry when not even one scale fits.
int msssim_scales(std::int64_t height, std::int64_t width);
// Scale weights of the standard 5-scale set, truncated and renormalized.
std::vector<double> msssim_weights(int scales);

// Multi-scale SSIM averaged over channels, in [0,1].
double msssim(const Tensor& a, const Tensor& b);
// -10 log10(1 - v); +infinity at v = 1.
double log_scale(double msssim_value);

// Differentiable 1 - MS-SSIM for use as a distortion.
Tensor msssim_distortion(const Tensor& a, const Tensor& b);

}  // namespace cevc::metrics
