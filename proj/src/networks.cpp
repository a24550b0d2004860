// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/networks.hpp"

#include <cmath>

#include "cevc/ops.hpp"

namespace cevc {

void NetworkConfig::validate() const {
  if (N < 1 || M < 1 || K < 1 || Nz < 1) {
    fail(ErrorKind::kContract, "network widths N, M, K, Nz must be >= 1");
  }
  if (num_down < 1 || num_down > 8) fail(ErrorKind::kContract, "num_down must be in [1, 8]");
  if (!(sigma_min > 0.0)) fail(ErrorKind::kContract, "sigma_min must be > 0");
  if (L < 1 || 2 * L + 1 > 65536) fail(ErrorKind::kContract, "alphabet bound L out of range");
}

Tensor ParamStore::add(const std::string& name, Tensor init) {
  if (contains(name)) fail(ErrorKind::kContract, "duplicate parameter " + name);
  init.set_requires_grad(true);
  entries_.emplace_back(name, init);
  return init;
}

const Tensor& ParamStore::get(const std::string& name) const {
  for (const auto& [n, t] : entries_) {
    if (n == name) return t;
  }
  fail(ErrorKind::kContract, "unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_) {
    if (e.first == name) return true;
  }
  return false;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) {
    Tensor t = e.second;
    t.zero_grad();
  }
}

void ParamStore::set_trainable(bool on) {
  for (auto& e : entries_) {
    Tensor t = e.second;
    t.set_requires_grad(on);
  }
}

std::size_t ParamStore::count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += static_cast<std::size_t>(e.second.numel());
  return n;
}

Tensor Conv::operator()(const Tensor& x) const { return ops::conv2d(x, kernel, bias, stride, pad); }

Tensor Deconv::operator()(const Tensor& x) const {
  return ops::conv_transpose2d(x, kernel, bias, stride, pad);
}

Tensor GdnParams::beta() const { return ops::add_scalar(ops::softplus(beta_raw), kBetaFloor); }

Tensor GdnParams::gamma() const { return ops::softplus(gamma_raw); }

namespace {
Tensor normalizer(const Tensor& x, const Tensor& beta, const Tensor& gamma) {
  const auto C = x.dim(1);
  if (beta.numel() != C || gamma.numel() != C * C) {
    fail(ErrorKind::kDimension, "gdn: parameters do not match " + std::to_string(C) + " channels");
  }
  const auto kernel = ops::reshape(gamma, {C, C, 1, 1});
  return ops::sqrt(ops::conv2d(ops::square(x), kernel, beta, 1, 0));
}
}  // namespace

Tensor gdn(const Tensor& x, const Tensor& beta, const Tensor& gamma) {
  return ops::div(x, normalizer(x, beta, gamma));
}

Tensor igdn(const Tensor& x, const Tensor& beta, const Tensor& gamma) {
  return ops::mul(x, normalizer(x, beta, gamma));
}

Tensor ResidualBlock::operator()(const Tensor& x) const {
  return ops::add(x, second(ops::leaky_relu(first(x))));
}

Tensor Initializer::uniform(const std::string& name, Shape shape, double bound) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(static_cast<std::size_t>(numel_of(shape)));
  for (auto& x : v) x = dist(rng_);
  return store_.add(name, Tensor::from_data(std::move(shape), std::move(v)));
}

Tensor Initializer::constant(const std::string& name, Shape shape, double value) {
  return store_.add(name, Tensor::full(std::move(shape), value));
}

namespace {
// Kaiming-uniform bound for fan-in `fan_in` under the leaky ReLU gain.
double kaiming_bound(double fan_in) {
  const double gain = std::sqrt(2.0 / (1.0 + 0.2 * 0.2));
  return gain * std::sqrt(3.0 / fan_in);
}
}  // namespace

Conv Initializer::conv(const std::string& name, int cin, int cout, int k, int stride) {
  Conv c;
  c.kernel = uniform(name + ".weight", {cout, cin, k, k}, kaiming_bound(double(cin) * k * k));
  c.bias = constant(name + ".bias", {cout}, 0.0);
  c.stride = stride;
  c.pad = (k - 1) / 2;
  return c;
}

Deconv Initializer::deconv(const std::string& name, int cin, int cout, int k, int stride) {
  Deconv d;
  const double fan_in = double(cin) * k * k / (double(stride) * stride);
  d.kernel = uniform(name + ".weight", {cin, cout, k, k}, kaiming_bound(fan_in));
  d.bias = constant(name + ".bias", {cout}, 0.0);
  d.stride = stride;
  d.pad = (k - 1) / 2;
  return d;
}

ResidualBlock Initializer::residual(const std::string& name, int channels) {
  ResidualBlock block{conv(name + ".conv0", channels, channels, 3, 1),
                      conv(name + ".conv1", channels, channels, 3, 1)};
  // Start each block close to the identity so stacked blocks do not blow up
  // the activation scale.
  for (double& w : block.second.kernel.mutable_data()) w *= 0.1;
  return block;
}

GdnParams Initializer::gdn(const std::string& name, int channels) {
  // softplus^-1: beta -> 1, gamma -> 0.1 on the diagonal and ~1e-4 elsewhere.
  auto inv_softplus = [](double v) { return std::log(std::expm1(v)); };
  GdnParams p;
  p.beta_raw = constant(name + ".beta", {channels}, inv_softplus(1.0 - kBetaFloor));
  std::vector<double> g(static_cast<std::size_t>(channels) * channels, inv_softplus(1e-4));
  for (int c = 0; c < channels; ++c) g[static_cast<std::size_t>(c) * channels + c] = inv_softplus(0.1);
  p.gamma_raw = store_.add(name + ".gamma", Tensor::from_data({channels, channels}, std::move(g)));
  return p;
}

ImageEncoder::ImageEncoder(const NetworkConfig& cfg, Initializer& init) : scale_(cfg.downscale()) {
  for (int s = 0; s < cfg.num_down; ++s) {
    down_.push_back(init.conv("image_enc.down" + std::to_string(s), s == 0 ? 3 : cfg.N, cfg.N, 5, 2));
    if (s + 1 < cfg.num_down) {
      blocks_.push_back(init.residual("image_enc.res" + std::to_string(s), cfg.N));
    }
  }
}

Tensor ImageEncoder::operator()(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != 3) {
    fail(ErrorKind::kDimension, "image_encode expects [B,3,H,W], got " + shape_str(x.shape()));
  }
  if (x.dim(2) % scale_ != 0 || x.dim(3) % scale_ != 0) {
    fail(ErrorKind::kGeometry, "frame " + std::to_string(x.dim(2)) + "x" +
                                   std::to_string(x.dim(3)) + " is not a multiple of " +
                                   std::to_string(scale_));
  }
  Tensor h = x;
  for (std::size_t s = 0; s < down_.size(); ++s) {
    h = down_[s](h);
    if (s < blocks_.size()) h = blocks_[s](h);
  }
  return h;
}

ImageDecoder::ImageDecoder(const NetworkConfig& cfg, Initializer& init) {
  for (int s = 0; s < cfg.num_down; ++s) {
    const bool last = s + 1 == cfg.num_down;
    up_.push_back(init.deconv("image_dec.up" + std::to_string(s), cfg.N, last ? 3 : cfg.N, 5, 2));
    if (!last) blocks_.push_back(init.residual("image_dec.res" + std::to_string(s), cfg.N));
  }
  // An untrained decoder emits a faint texture around mid-grey rather than
  // values far outside [0,1].
  for (double& w : up_.back().kernel.mutable_data()) w *= 0.1;
  for (double& b : up_.back().bias.mutable_data()) b = 0.5;
}

Tensor ImageDecoder::operator()(const Tensor& y) const {
  Tensor h = y;
  for (std::size_t s = 0; s < up_.size(); ++s) {
    h = up_[s](h);
    if (s < blocks_.size()) h = blocks_[s](h);
  }
  return h;
}

HyperEncoder::HyperEncoder(const NetworkConfig& cfg, Initializer& init)
    : first_(init.conv("hyper_enc.down0", 2 * cfg.N, cfg.N, 5, 2)),
      second_(init.conv("hyper_enc.down1", cfg.N, cfg.Nz, 5, 2)),
      block_(init.residual("hyper_enc.res0", cfg.N)) {}

Tensor HyperEncoder::operator()(const Tensor& y, const Tensor& y_prev) const {
  if (y.shape() != y_prev.shape()) {
    fail(ErrorKind::kDimension, "hyper_encode: y " + shape_str(y.shape()) + " vs y_prev " +
                                    shape_str(y_prev.shape()));
  }
  return second_(block_(ops::leaky_relu(first_(ops::concat_channels(y, y_prev)))));
}

Tensor HyperDecoder::Up::operator()(const Tensor& x) const {
  return conv(ops::leaky_relu(deconv(x)));
}

Tensor HyperDecoder::Down::operator()(const Tensor& x) const {
  return conv(ops::leaky_relu(strided(x)));
}

namespace {
constexpr int kTopChannels = 5;
}

HyperDecoder::HyperDecoder(const NetworkConfig& cfg, Initializer& init) : cfg_(cfg) {
  const int N = cfg.N, M = cfg.M, T = kTopChannels;
  auto up = [&](const std::string& name, int cin, int cout) {
    return Up{init.deconv(name + ".deconv", cin, cout, 3, 2), init.conv(name + ".conv", cout, cout, 3, 1)};
  };
  auto down = [&](const std::string& name, int cin, int cout) {
    return Down{init.conv(name + ".strided", cin, cout, 3, 2), init.conv(name + ".conv", cout, cout, 3, 1)};
  };
  z_up0_ = up("hyper_dec.z_up0", cfg.Nz, N);
  z_block0_ = init.residual("hyper_dec.z_res0", N);
  z_up1_ = up("hyper_dec.z_up1", N, N);
  z_block1_ = init.residual("hyper_dec.z_res1", N);
  fuse0_ = init.conv("hyper_dec.fuse0", 2 * N, N, 3, 1);

  y_up1_ = up("hyper_dec.y_up1", N, M);
  y_igdn1_ = init.gdn("hyper_dec.y_igdn1", M);
  z_up2_ = up("hyper_dec.z_up2", N, M);
  z_igdn2_ = init.gdn("hyper_dec.z_igdn2", M);
  fuse1_ = init.conv("hyper_dec.fuse1", 2 * M, M, 3, 1);

  y_up2_ = up("hyper_dec.y_up2", M, T);
  y_igdn2_ = init.gdn("hyper_dec.y_igdn2", T);
  z_up3_ = up("hyper_dec.z_up3", M, T);
  z_igdn3_ = init.gdn("hyper_dec.z_igdn3", T);
  fuse2_ = init.conv("hyper_dec.fuse2", 2 * T, T, 3, 1);

  down1_ = down("hyper_dec.down1", T, M);
  gdn1_ = init.gdn("hyper_dec.gdn1", M);
  down2_ = down("hyper_dec.down2", M, N);
  gdn2_ = init.gdn("hyper_dec.gdn2", N);
  head_ = init.conv("hyper_dec.head", 2 * N, 3 * cfg.K * N, 3, 1);
}

GmmParams HyperDecoder::operator()(const Tensor& z, const Tensor& y_prev) const {
  if (y_prev.rank() != 4 || y_prev.dim(1) != cfg_.N || z.rank() != 4 || z.dim(1) != cfg_.Nz ||
      z.dim(2) != (y_prev.dim(2) + 3) / 4 || z.dim(3) != (y_prev.dim(3) + 3) / 4) {
    fail(ErrorKind::kDimension, "hyper_decode: z " + shape_str(z.shape()) + " incompatible with y_prev " +
                                    shape_str(y_prev.shape()));
  }
  auto igdn_of = [](const GdnParams& p, const Tensor& x) { return igdn(x, p.beta(), p.gamma()); };
  auto gdn_of = [](const GdnParams& p, const Tensor& x) { return gdn(x, p.beta(), p.gamma()); };

  // z brought to latent resolution (cropped when the latent is not a
  // multiple of 4).
  Tensor z0 = z_block1_(z_up1_(z_block0_(z_up0_(z))));
  if (z0.dim(2) != y_prev.dim(2) || z0.dim(3) != y_prev.dim(3)) {
    z0 = ops::crop_spatial(z0, y_prev.dim(2), y_prev.dim(3));
  }
  const Tensor a0 = ops::leaky_relu(fuse0_(ops::concat_channels(y_prev, z0)));

  // Two upsampling levels, z features fused at each.
  const Tensor z1 = igdn_of(z_igdn2_, z_up2_(z0));
  const Tensor a1 = fuse1_(ops::concat_channels(igdn_of(y_igdn1_, y_up1_(a0)), z1));
  const Tensor z2 = igdn_of(z_igdn3_, z_up3_(z1));
  const Tensor a2 = fuse2_(ops::concat_channels(igdn_of(y_igdn2_, y_up2_(a1)), z2));

  // Back down to latent resolution.
  const Tensor d = gdn_of(gdn2_, down2_(gdn_of(gdn1_, down1_(a2))));
  const Tensor raw = head_(ops::concat_channels(d, y_prev));

  const std::int64_t KN = std::int64_t{cfg_.K} * cfg_.N;
  GmmParams out;
  out.K = cfg_.K;
  out.weights = ops::softmax_blocks(ops::slice_channels(raw, 0, KN), cfg_.K);
  out.means = ops::slice_channels(raw, KN, 2 * KN);
  out.scales = ops::add_scalar(ops::softplus(ops::slice_channels(raw, 2 * KN, 3 * KN)), cfg_.sigma_min);
  return out;
}

}  // namespace cevc
