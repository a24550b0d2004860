// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/ops.hpp"

#include <algorithm>
#include <cmath>

#include "cevc/gaussian.hpp"
#include "tensor_internal.hpp"

namespace cevc::ops {

using detail::emit;
using detail::ImplPtr;
using detail::wants_grad;

namespace {

std::size_t binary_size(const char* op, const Tensor& a, const Tensor& b, Shape* shape) {
  if (a.shape() == b.shape()) {
    *shape = a.shape();
    return static_cast<std::size_t>(a.numel());
  }
  if (b.numel() == 1) {
    *shape = a.shape();
    return static_cast<std::size_t>(a.numel());
  }
  if (a.numel() == 1) {
    *shape = b.shape();
    return static_cast<std::size_t>(b.numel());
  }
  fail(ErrorKind::kDimension, std::string(op) + ": shapes " + shape_str(a.shape()) +
                                  " and " + shape_str(b.shape()) + " do not match");
}

// Gradient accumulation into a possibly broadcast (single element) operand.
inline void acc_bcast(std::vector<double>& g, std::size_t i, double v) {
  g[g.size() == 1 ? 0 : i] += v;
}

template <class Fwd, class DA, class DB>
Tensor binary(const char* op, const Tensor& a, const Tensor& b, Fwd fwd, DA da, DB db) {
  Shape shape;
  const std::size_t n = binary_size(op, a, b, &shape);
  const auto av = a.data();
  const auto bv = b.data();
  const bool sa = av.size() == 1 && n != 1;
  const bool sb = bv.size() == 1 && n != 1;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[sa ? 0 : i], bv[sb ? 0 : i]);
  return emit(op, std::move(shape), std::move(out), {&a, &b}, [&] {
    ImplPtr pa = a.impl();
    ImplPtr pb = b.impl();
    return [pa, pb, sa, sb, n, da, db](std::span<const double> g) {
      const auto& x = pa->data;
      const auto& y = pb->data;
      if (wants_grad(pa)) {
        auto& ga = pa->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          acc_bcast(ga, i, g[i] * da(x[sa ? 0 : i], y[sb ? 0 : i]));
        }
      }
      if (wants_grad(pb)) {
        auto& gb = pb->grad_buffer();
        for (std::size_t i = 0; i < n; ++i) {
          acc_bcast(gb, i, g[i] * db(x[sa ? 0 : i], y[sb ? 0 : i]));
        }
      }
    };
  });
}

// Unary op whose derivative is expressed through input x and output y.
template <class Fwd, class Deriv>
Tensor unary(const char* op, const Tensor& x, Fwd fwd, Deriv deriv) {
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  return emit(op, x.shape(), std::move(out), {&x}, [&] {
    ImplPtr px = x.impl();
    return [px, deriv](std::span<const double> g) {
      auto& gx = px->grad_buffer();
      const auto& xs = px->data;
      for (std::size_t i = 0; i < xs.size(); ++i) gx[i] += g[i] * deriv(xs[i]);
    };
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Tensor div(const Tensor& a, const Tensor& b) {
  for (double v : b.data()) {
    if (v == 0.0) fail(ErrorKind::kDomain, "div: division by exact zero");
  }
  return binary(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

Tensor add_scalar(const Tensor& a, double s) {
  return unary(
      "add_scalar", a, [s](double x) { return x + s; }, [](double) { return 1.0; });
}

Tensor mul_scalar(const Tensor& a, double s) {
  return unary(
      "mul_scalar", a, [s](double x) { return x * s; }, [s](double) { return s; });
}

Tensor exp(const Tensor& x) {
  return unary(
      "exp", x, [](double v) { return std::exp(v); }, [](double v) { return std::exp(v); });
}

Tensor log(const Tensor& x) {
  for (double v : x.data()) {
    if (!(v > 0.0)) fail(ErrorKind::kDomain, "log of non-positive value");
  }
  return unary(
      "log", x, [](double v) { return std::log(v); }, [](double v) { return 1.0 / v; });
}

Tensor sqrt(const Tensor& x) {
  for (double v : x.data()) {
    if (v < 0.0) fail(ErrorKind::kDomain, "sqrt of negative value");
  }
  return unary(
      "sqrt", x, [](double v) { return std::sqrt(v); },
      [](double v) { return 0.5 / std::sqrt(v); });
}

Tensor square(const Tensor& x) {
  return unary(
      "square", x, [](double v) { return v * v; }, [](double v) { return 2.0 * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      "abs", x, [](double v) { return std::abs(v); },
      [](double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Tensor tanh(const Tensor& x) {
  return unary(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double v) {
        const double t = std::tanh(v);
        return 1.0 - t * t;
      });
}

namespace {
double stable_sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}
double stable_softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }
}  // namespace

Tensor sigmoid(const Tensor& x) {
  return unary("sigmoid", x, stable_sigmoid, [](double v) {
    const double s = stable_sigmoid(v);
    return s * (1.0 - s);
  });
}

Tensor softplus(const Tensor& x) { return unary("softplus", x, stable_softplus, stable_sigmoid); }

Tensor leaky_relu(const Tensor& x, double slope) {
  return unary(
      "leaky_relu", x, [slope](double v) { return v >= 0.0 ? v : slope * v; },
      [slope](double v) { return v >= 0.0 ? 1.0 : slope; });
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  return unary(
      "clamp", x, [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  return emit("sum", {1}, {s}, {&x}, [&] {
    ImplPtr px = x.impl();
    return [px](std::span<const double> g) {
      auto& gx = px->grad_buffer();
      for (auto& v : gx) v += g[0];
    };
  });
}

Tensor mean(const Tensor& x) {
  const double n = static_cast<double>(x.numel());
  double s = 0.0;
  for (double v : x.data()) s += v;
  return emit("mean", {1}, {s / n}, {&x}, [&] {
    ImplPtr px = x.impl();
    return [px, n](std::span<const double> g) {
      auto& gx = px->grad_buffer();
      for (auto& v : gx) v += g[0] / n;
    };
  });
}

Tensor mse(const Tensor& a, const Tensor& b) { return mean(square(sub(a, b))); }

Tensor reshape(const Tensor& x, Shape shape) {
  if (numel_of(shape) != x.numel()) {
    fail(ErrorKind::kDimension,
         "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  std::vector<double> data(x.data().begin(), x.data().end());
  return emit("reshape", std::move(shape), std::move(data), {&x}, [&] {
    ImplPtr px = x.impl();
    return [px](std::span<const double> g) {
      auto& gx = px->grad_buffer();
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
    };
  });
}

namespace {
void require_rank4(const char* op, const Tensor& t) {
  if (t.rank() != 4) {
    fail(ErrorKind::kDimension, std::string(op) + ": expected rank-4 tensor, got " +
                                    shape_str(t.shape()));
  }
}
}  // namespace

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  require_rank4("concat_channels", a);
  require_rank4("concat_channels", b);
  const auto B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
  if (b.dim(0) != B || b.dim(2) != H || b.dim(3) != W) {
    fail(ErrorKind::kDimension, "concat_channels: " + shape_str(a.shape()) + " vs " +
                                    shape_str(b.shape()));
  }
  const auto plane = H * W;
  std::vector<double> out(static_cast<std::size_t>(B * (Ca + Cb) * plane));
  for (std::int64_t n = 0; n < B; ++n) {
    std::copy_n(a.data().begin() + n * Ca * plane, Ca * plane,
                out.begin() + n * (Ca + Cb) * plane);
    std::copy_n(b.data().begin() + n * Cb * plane, Cb * plane,
                out.begin() + (n * (Ca + Cb) + Ca) * plane);
  }
  return emit("concat_channels", {B, Ca + Cb, H, W}, std::move(out), {&a, &b}, [&] {
    ImplPtr pa = a.impl();
    ImplPtr pb = b.impl();
    return [pa, pb, B, Ca, Cb, plane](std::span<const double> g) {
      for (std::int64_t n = 0; n < B; ++n) {
        const double* src = g.data() + n * (Ca + Cb) * plane;
        if (wants_grad(pa)) {
          auto& ga = pa->grad_buffer();
          for (std::int64_t i = 0; i < Ca * plane; ++i) ga[n * Ca * plane + i] += src[i];
        }
        if (wants_grad(pb)) {
          auto& gb = pb->grad_buffer();
          for (std::int64_t i = 0; i < Cb * plane; ++i) {
            gb[n * Cb * plane + i] += src[Ca * plane + i];
          }
        }
      }
    };
  });
}

Tensor slice_channels(const Tensor& x, std::int64_t begin, std::int64_t end) {
  require_rank4("slice_channels", x);
  const auto B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  if (begin < 0 || end > C || begin >= end) {
    fail(ErrorKind::kDimension, "slice_channels: bad range [" + std::to_string(begin) + "," +
                                    std::to_string(end) + ") of " + std::to_string(C));
  }
  const auto plane = H * W;
  const auto Cs = end - begin;
  std::vector<double> out(static_cast<std::size_t>(B * Cs * plane));
  for (std::int64_t n = 0; n < B; ++n) {
    std::copy_n(x.data().begin() + (n * C + begin) * plane, Cs * plane,
                out.begin() + n * Cs * plane);
  }
  return emit("slice_channels", {B, Cs, H, W}, std::move(out), {&x}, [&] {
    ImplPtr px = x.impl();
    return [px, B, C, Cs, begin, plane](std::span<const double> g) {
      auto& gx = px->grad_buffer();
      for (std::int64_t n = 0; n < B; ++n) {
        for (std::int64_t i = 0; i < Cs * plane; ++i) {
          gx[(n * C + begin) * plane + i] += g[n * Cs * plane + i];
        }
      }
    };
  });
}

Tensor crop_spatial(const Tensor& x, std::int64_t height, std::int64_t width) {
  require_rank4("crop_spatial", x);
  const auto BC = x.dim(0) * x.dim(1), H = x.dim(2), W = x.dim(3);
  if (height < 1 || width < 1 || height > H || width > W) {
    fail(ErrorKind::kDimension, "crop_spatial: " + std::to_string(height) + "x" +
                                    std::to_string(width) + " from " + shape_str(x.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(BC * height * width));
  for (std::int64_t p = 0; p < BC; ++p) {
    for (std::int64_t r = 0; r < height; ++r) {
      std::copy_n(x.data().begin() + (p * H + r) * W, width,
                  out.begin() + (p * height + r) * width);
    }
  }
  return emit("crop_spatial", {x.dim(0), x.dim(1), height, width}, std::move(out), {&x}, [&] {
    ImplPtr px = x.impl();
    return [px, BC, H, W, height, width](std::span<const double> g) {
      auto& gx = px->grad_buffer();
      for (std::int64_t p = 0; p < BC; ++p) {
        for (std::int64_t r = 0; r < height; ++r) {
          for (std::int64_t c = 0; c < width; ++c) {
            gx[(p * H + r) * W + c] += g[(p * height + r) * width + c];
          }
        }
      }
    };
  });
}

Tensor softmax_blocks(const Tensor& x, std::int64_t blocks) {
  require_rank4("softmax_blocks", x);
  const auto B = x.dim(0), CK = x.dim(1), plane = x.dim(2) * x.dim(3);
  if (blocks < 1 || CK % blocks != 0) {
    fail(ErrorKind::kDimension, "softmax_blocks: " + std::to_string(CK) +
                                    " channels not divisible into " +
                                    std::to_string(blocks) + " blocks");
  }
  const auto C = CK / blocks;
  const auto stride = C * plane;  // distance between blocks
  const auto per_batch = CK * plane;
  const auto xv = x.data();
  std::vector<double> out(xv.size());
  for (std::int64_t n = 0; n < B; ++n) {
    for (std::int64_t i = 0; i < stride; ++i) {
      const auto base = n * per_batch + i;
      double m = xv[base];
      for (std::int64_t k = 1; k < blocks; ++k) m = std::max(m, xv[base + k * stride]);
      double z = 0.0;
      for (std::int64_t k = 0; k < blocks; ++k) {
        out[base + k * stride] = std::exp(xv[base + k * stride] - m);
        z += out[base + k * stride];
      }
      for (std::int64_t k = 0; k < blocks; ++k) out[base + k * stride] /= z;
    }
  }
  auto probs = std::make_shared<std::vector<double>>(out);
  return emit("softmax_blocks", x.shape(), std::move(out), {&x}, [&] {
    ImplPtr px = x.impl();
    return [px, probs, B, blocks, stride, per_batch](std::span<const double> g) {
      auto& gx = px->grad_buffer();
      const auto& s = *probs;
      for (std::int64_t n = 0; n < B; ++n) {
        for (std::int64_t i = 0; i < stride; ++i) {
          const auto base = n * per_batch + i;
          double dot = 0.0;
          for (std::int64_t k = 0; k < blocks; ++k) {
            dot += s[base + k * stride] * g[base + k * stride];
          }
          for (std::int64_t k = 0; k < blocks; ++k) {
            const auto j = base + k * stride;
            gx[j] += s[j] * (g[j] - dot);
          }
        }
      }
    };
  });
}

namespace {
void require_same(const char* op, const Tensor& a, const Tensor& b, const Tensor& c) {
  if (a.shape() != b.shape() || a.shape() != c.shape()) {
    fail(ErrorKind::kDimension, std::string(op) + ": operand shapes differ");
  }
}
void require_positive_scale(const char* op, const Tensor& sigma) {
  for (double s : sigma.data()) {
    if (!(s > 0.0)) fail(ErrorKind::kDomain, std::string(op) + ": sigma must be > 0");
  }
}
}  // namespace

Tensor gaussian_cdf(const Tensor& x, const Tensor& mu, const Tensor& sigma) {
  require_same("gaussian_cdf", x, mu, sigma);
  require_positive_scale("gaussian_cdf", sigma);
  const auto n = static_cast<std::size_t>(x.numel());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = gaussian::cdf((x.data()[i] - mu.data()[i]) / sigma.data()[i]);
  }
  return emit("gaussian_cdf", x.shape(), std::move(out), {&x, &mu, &sigma}, [&] {
    ImplPtr px = x.impl(), pm = mu.impl(), ps = sigma.impl();
    return [px, pm, ps, n](std::span<const double> g) {
      std::vector<double>* gx = wants_grad(px) ? &px->grad_buffer() : nullptr;
      std::vector<double>* gm = wants_grad(pm) ? &pm->grad_buffer() : nullptr;
      std::vector<double>* gs = wants_grad(ps) ? &ps->grad_buffer() : nullptr;
      for (std::size_t i = 0; i < n; ++i) {
        const double s = ps->data[i];
        const double u = (px->data[i] - pm->data[i]) / s;
        const double d = gaussian::pdf(u) / s * g[i];
        if (gx) (*gx)[i] += d;
        if (gm) (*gm)[i] -= d;
        if (gs) (*gs)[i] -= d * u;
      }
    };
  });
}

Tensor gaussian_interval_mass(const Tensor& center, const Tensor& mu, const Tensor& sigma) {
  require_same("gaussian_interval_mass", center, mu, sigma);
  require_positive_scale("gaussian_interval_mass", sigma);
  const auto n = static_cast<std::size_t>(center.numel());
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = gaussian::interval_mass(center.data()[i], mu.data()[i], sigma.data()[i]);
  }
  return emit("gaussian_interval_mass", center.shape(), std::move(out), {&center, &mu, &sigma},
              [&] {
                ImplPtr pc = center.impl(), pm = mu.impl(), ps = sigma.impl();
                return [pc, pm, ps, n](std::span<const double> g) {
                  std::vector<double>* gc = wants_grad(pc) ? &pc->grad_buffer() : nullptr;
                  std::vector<double>* gm = wants_grad(pm) ? &pm->grad_buffer() : nullptr;
                  std::vector<double>* gs = wants_grad(ps) ? &ps->grad_buffer() : nullptr;
                  for (std::size_t i = 0; i < n; ++i) {
                    const double s = ps->data[i];
                    const double d = pc->data[i] - pm->data[i];
                    const double hi = (d + 0.5) / s;
                    const double lo = (d - 0.5) / s;
                    const double phi_hi = gaussian::pdf(hi);
                    const double phi_lo = gaussian::pdf(lo);
                    const double dc = (phi_hi - phi_lo) / s * g[i];
                    if (gc) (*gc)[i] += dc;
                    if (gm) (*gm)[i] -= dc;
                    if (gs) (*gs)[i] -= (phi_hi * hi - phi_lo * lo) / s * g[i];
                  }
                };
              });
}

Tensor channel_affine(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.rank() != 3 || weight.rank() != 3 || bias.rank() != 2) {
    fail(ErrorKind::kDimension, "channel_affine: expected x[C,in,n] w[C,out,in] b[C,out]");
  }
  const auto C = x.dim(0), in = x.dim(1), n = x.dim(2), out_dim = weight.dim(1);
  if (weight.dim(0) != C || weight.dim(2) != in || bias.dim(0) != C || bias.dim(1) != out_dim) {
    fail(ErrorKind::kDimension, "channel_affine: " + shape_str(x.shape()) + " " +
                                    shape_str(weight.shape()) + " " + shape_str(bias.shape()));
  }
  const auto xv = x.data(), wv = weight.data(), bv = bias.data();
  std::vector<double> out(static_cast<std::size_t>(C * out_dim * n));
  for (std::int64_t c = 0; c < C; ++c) {
    for (std::int64_t o = 0; o < out_dim; ++o) {
      double* dst = out.data() + (c * out_dim + o) * n;
      const double b = bv[c * out_dim + o];
      for (std::int64_t j = 0; j < n; ++j) dst[j] = b;
      for (std::int64_t i = 0; i < in; ++i) {
        const double w = wv[(c * out_dim + o) * in + i];
        const double* src = xv.data() + (c * in + i) * n;
        for (std::int64_t j = 0; j < n; ++j) dst[j] += w * src[j];
      }
    }
  }
  return emit("channel_affine", {C, out_dim, n}, std::move(out), {&x, &weight, &bias}, [&] {
    ImplPtr px = x.impl(), pw = weight.impl(), pb = bias.impl();
    return [px, pw, pb, C, in, n, out_dim](std::span<const double> g) {
      for (std::int64_t c = 0; c < C; ++c) {
        for (std::int64_t o = 0; o < out_dim; ++o) {
          const double* go = g.data() + (c * out_dim + o) * n;
          if (wants_grad(pb)) {
            double s = 0.0;
            for (std::int64_t j = 0; j < n; ++j) s += go[j];
            pb->grad_buffer()[c * out_dim + o] += s;
          }
          for (std::int64_t i = 0; i < in; ++i) {
            const auto widx = (c * out_dim + o) * in + i;
            const double* xs = px->data.data() + (c * in + i) * n;
            if (wants_grad(pw)) {
              double s = 0.0;
              for (std::int64_t j = 0; j < n; ++j) s += go[j] * xs[j];
              pw->grad_buffer()[widx] += s;
            }
            if (wants_grad(px)) {
              const double w = pw->data[widx];
              double* gx = px->grad_buffer().data() + (c * in + i) * n;
              for (std::int64_t j = 0; j < n; ++j) gx[j] += w * go[j];
            }
          }
        }
      }
    };
  });
}

Tensor tanh_gate(const Tensor& x, const Tensor& a) {
  if (x.rank() != 3 || a.rank() != 2 || a.dim(0) != x.dim(0) || a.dim(1) != x.dim(1)) {
    fail(ErrorKind::kDimension,
         "tanh_gate: " + shape_str(x.shape()) + " with gate " + shape_str(a.shape()));
  }
  const auto rows = x.dim(0) * x.dim(1), n = x.dim(2);
  const auto xv = x.data(), av = a.data();
  std::vector<double> out(xv.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double ta = std::tanh(av[r]);
    for (std::int64_t j = 0; j < n; ++j) {
      const double v = xv[r * n + j];
      out[r * n + j] = v + ta * std::tanh(v);
    }
  }
  return emit("tanh_gate", x.shape(), std::move(out), {&x, &a}, [&] {
    ImplPtr px = x.impl(), pa = a.impl();
    return [px, pa, rows, n](std::span<const double> g) {
      for (std::int64_t r = 0; r < rows; ++r) {
        const double ta = std::tanh(pa->data[r]);
        double ga = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
          const double tx = std::tanh(px->data[r * n + j]);
          const double gj = g[r * n + j];
          if (wants_grad(px)) px->grad_buffer()[r * n + j] += gj * (1.0 + ta * (1.0 - tx * tx));
          ga += gj * tx;
        }
        if (wants_grad(pa)) pa->grad_buffer()[r] += ga * (1.0 - ta * ta);
      }
    };
  });
}

}  // namespace cevc::ops
