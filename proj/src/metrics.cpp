// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cevc/ops.hpp"

namespace cevc::metrics {

namespace {

constexpr double kWeights[kMaxScales] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

Tensor as_planes(const Tensor& x) {
  if (x.rank() == 4 && x.dim(0) == 1) return ops::reshape(x, {x.dim(1), 1, x.dim(2), x.dim(3)});
  if (x.rank() == 3) return ops::reshape(x, {x.dim(0), 1, x.dim(1), x.dim(2)});
  fail(ErrorKind::kDimension, "metrics expect [1,C,H,W] or [C,H,W], got " + shape_str(x.shape()));
}

void require_same(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    fail(ErrorKind::kDimension,
         "metrics: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

Tensor gaussian_window() {
  std::vector<double> g(kSsimWindow);
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - (kSsimWindow - 1) / 2.0;
    g[i] = std::exp(-d * d / (2 * kSsimSigma * kSsimSigma));
    total += g[i];
  }
  std::vector<double> w(kSsimWindow * kSsimWindow);
  for (int i = 0; i < kSsimWindow; ++i) {
    for (int j = 0; j < kSsimWindow; ++j) w[i * kSsimWindow + j] = g[i] * g[j] / (total * total);
  }
  return Tensor::from_data({1, 1, kSsimWindow, kSsimWindow}, std::move(w));
}

// Per-scale, per-channel means of the contrast-structure term and, for the
// coarsest scale, the full SSIM. planes: [C,1,H,W].
struct ScaleTerms {
  std::vector<std::vector<Tensor>> cs;  // [scale][channel], scalars
  std::vector<Tensor> ssim;             // [channel], coarsest scale
};

ScaleTerms scale_terms(Tensor x, Tensor y, int scales) {
  const Tensor window = gaussian_window();
  const Tensor no_bias = Tensor::zeros({1});
  const Tensor pool = Tensor::full({1, 1, 2, 2}, 0.25);
  const double c1 = kSsimK1 * kSsimK1, c2 = kSsimK2 * kSsimK2;
  const auto channels = x.dim(0);
  ScaleTerms out;
  for (int s = 0; s < scales; ++s) {
    auto blur = [&](const Tensor& t) { return ops::conv2d(t, window, no_bias, 1, 0); };
    const Tensor mx = blur(x), my = blur(y);
    const Tensor mxx = ops::square(mx), myy = ops::square(my), mxy = ops::mul(mx, my);
    const Tensor vx = ops::sub(blur(ops::square(x)), mxx);
    const Tensor vy = ops::sub(blur(ops::square(y)), myy);
    const Tensor cov = ops::sub(blur(ops::mul(x, y)), mxy);
    const Tensor cs = ops::div(ops::add_scalar(ops::mul_scalar(cov, 2.0), c2),
                               ops::add_scalar(ops::add(vx, vy), c2));
    const Shape per_channel{1, channels, cs.dim(2), cs.dim(3)};
    const Tensor cs_c = ops::reshape(cs, per_channel);
    std::vector<Tensor> cs_means;
    for (std::int64_t c = 0; c < channels; ++c) {
      cs_means.push_back(ops::mean(ops::slice_channels(cs_c, c, c + 1)));
    }
    out.cs.push_back(std::move(cs_means));
    if (s + 1 == scales) {
      const Tensor lum = ops::div(ops::add_scalar(ops::mul_scalar(mxy, 2.0), c1),
                                  ops::add_scalar(ops::add(mxx, myy), c1));
      const Tensor ssim_c = ops::reshape(ops::mul(lum, cs), per_channel);
      for (std::int64_t c = 0; c < channels; ++c) {
        out.ssim.push_back(ops::mean(ops::slice_channels(ssim_c, c, c + 1)));
      }
    } else {
      x = ops::conv2d(x, pool, no_bias, 2, 0);
      y = ops::conv2d(y, pool, no_bias, 2, 0);
    }
  }
  return out;
}

}  // namespace

double mse(const Tensor& a, const Tensor& b) {
  require_same(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.numel());
}

double psnr_from_mse(double m) {
  if (m <= 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

double psnr(const Tensor& a, const Tensor& b) { return psnr_from_mse(mse(a, b)); }

int msssim_scales(std::int64_t height, std::int64_t width) {
  const std::int64_t m = std::min(height, width);
  int s = 0;
  while (s < kMaxScales && (m >> s) >= kSsimWindow) ++s;
  if (s == 0) {
    fail(ErrorKind::kGeometry, "MS-SSIM needs at least " + std::to_string(kSsimWindow) +
                                   " pixels per side, got " + std::to_string(m));
  }
  return s;
}

std::vector<double> msssim_weights(int scales) {
  std::vector<double> w(kWeights, kWeights + scales);
  double total = 0.0;
  for (double v : w) total += v;
  for (double& v : w) v /= total;
  return w;
}

double msssim(const Tensor& a, const Tensor& b) {
  require_same(a, b);
  NoGradGuard no_grad;
  const Tensor x = as_planes(a), y = as_planes(b);
  const int scales = msssim_scales(x.dim(2), x.dim(3));
  const auto w = msssim_weights(scales);
  const ScaleTerms t = scale_terms(x, y, scales);
  const auto channels = x.dim(0);
  double total = 0.0;
  for (std::int64_t c = 0; c < channels; ++c) {
    double v = 1.0;
    for (int s = 0; s < scales; ++s) {
      const double term = (s + 1 == scales) ? t.ssim[c].item() : t.cs[s][c].item();
      v *= std::pow(std::max(term, 0.0), w[s]);
    }
    total += v;
  }
  return total / static_cast<double>(channels);
}

double log_scale(double v) {
  if (v >= 1.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(1.0 - v);
}

Tensor msssim_distortion(const Tensor& a, const Tensor& b) {
  require_same(a, b);
  const Tensor x = as_planes(a), y = as_planes(b);
  const int scales = msssim_scales(x.dim(2), x.dim(3));
  const auto w = msssim_weights(scales);
  const ScaleTerms t = scale_terms(x, y, scales);
  const auto channels = x.dim(0);
  Tensor total;
  for (std::int64_t c = 0; c < channels; ++c) {
    Tensor log_v = Tensor::scalar(0.0);
    for (int s = 0; s < scales; ++s) {
      const Tensor term = (s + 1 == scales) ? t.ssim[c] : t.cs[s][c];
      // Clamp keeps the power defined; only degenerate images reach it.
      log_v = ops::add(log_v, ops::mul_scalar(ops::log(ops::clamp(term, 1e-6)), w[s]));
    }
    const Tensor v = ops::exp(log_v);
    total = total.defined() ? ops::add(total, v) : v;
  }
  return ops::add_scalar(ops::mul_scalar(total, -1.0 / static_cast<double>(channels)), 1.0);
}

}  // namespace cevc::metrics
