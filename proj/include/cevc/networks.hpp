// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cevc/tensor.hpp"

namespace cevc {

struct NetworkConfig {
  int N = 32;         // latent / image-codec channel width
  int M = 24;         // hyperprior-decoder width above latent resolution
  int K = 3;          // mixture components per latent element
  int Nz = 16;        // hyperprior channels
  int num_down = 4;   // stride-2 stages of the image codec
  double sigma_min = 0.01;
  int L = 255;        // symbols live in [-L, L]
  // Also train a per-channel factorized prior over y (the unconditional
  // ablation used for comparisons). It never influences the main path.
  bool factorized_y_ablation = true;

  void validate() const;
  std::int64_t downscale() const { return std::int64_t{1} << num_down; }
  bool operator==(const NetworkConfig&) const = default;
};

inline constexpr double kBetaFloor = 1e-6;

/// Named, ordered parameter registry. Registration order is the checkpoint
/// order.
class ParamStore {
 public:
  Tensor add(const std::string& name, Tensor init);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const;
  const std::vector<std::pair<std::string, Tensor>>& entries() const { return entries_; }

  void zero_grad();
  void set_trainable(bool on);
  std::size_t count() const;  // total scalar parameters

 private:
  std::vector<std::pair<std::string, Tensor>> entries_;
};

struct Conv {
  Tensor kernel, bias;
  int stride = 1, pad = 0;
  Tensor operator()(const Tensor& x) const;
};

struct Deconv {
  Tensor kernel, bias;
  int stride = 2, pad = 0;
  Tensor operator()(const Tensor& x) const;
};

/// Raw (unconstrained) GDN parameters. Effective values are
/// beta = kBetaFloor + softplus(beta_raw), gamma = softplus(gamma_raw).
struct GdnParams {
  Tensor beta_raw;   // [C]
  Tensor gamma_raw;  // [C, C]
  Tensor beta() const;
  Tensor gamma() const;
};

// out_c = x_c / sqrt(beta_c + sum_c' gamma[c,c'] x_c'^2), gamma as [C, C].
Tensor gdn(const Tensor& x, const Tensor& beta, const Tensor& gamma);
// out_c = x_c * sqrt(beta_c + sum_c' gamma[c,c'] x_c'^2).
Tensor igdn(const Tensor& x, const Tensor& beta, const Tensor& gamma);

struct ResidualBlock {
  Conv first, second;  // 3x3, stride 1, pad 1, channel preserving
  Tensor operator()(const Tensor& x) const;
};

// Per-element mixture parameters. Each tensor is [1, K*N, h, w]; mixture
// component k occupies channels [k*N, (k+1)*N).
struct GmmParams {
  Tensor weights;  // softmax over k
  Tensor means;
  Tensor scales;   // >= sigma_min
  int K = 1;
};

/// Builders share one initializer so every network draws from a single
/// seeded stream in registration order.
class Initializer {
 public:
  Initializer(ParamStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Conv conv(const std::string& name, int cin, int cout, int k, int stride);
  Deconv deconv(const std::string& name, int cin, int cout, int k, int stride);
  ResidualBlock residual(const std::string& name, int channels);
  GdnParams gdn(const std::string& name, int channels);
  Tensor uniform(const std::string& name, Shape shape, double bound);
  Tensor constant(const std::string& name, Shape shape, double value);

 private:
  ParamStore& store_;
  std::mt19937_64 rng_;
};

class ImageEncoder {
 public:
  ImageEncoder() = default;
  ImageEncoder(const NetworkConfig& cfg, Initializer& init);
  // x [1,3,H,W] with H, W divisible by 2^num_down -> [1,N,H/2^d,W/2^d].
  Tensor operator()(const Tensor& x) const;

 private:
  std::vector<Conv> down_;
  std::vector<ResidualBlock> blocks_;
  std::int64_t scale_ = 1;
};

class ImageDecoder {
 public:
  ImageDecoder() = default;
  ImageDecoder(const NetworkConfig& cfg, Initializer& init);
  // Unclamped reconstruction; callers clamp to [0,1] where required.
  Tensor operator()(const Tensor& y) const;

 private:
  std::vector<Deconv> up_;
  std::vector<ResidualBlock> blocks_;
};

class HyperEncoder {
 public:
  HyperEncoder() = default;
  HyperEncoder(const NetworkConfig& cfg, Initializer& init);
  // (y_i, y_prev) [1,N,h,w] each -> [1,Nz,ceil(h/4),ceil(w/4)].
  Tensor operator()(const Tensor& y, const Tensor& y_prev) const;

 private:
  Conv first_, second_;
  ResidualBlock block_;
};

class HyperDecoder {
 public:
  HyperDecoder() = default;
  HyperDecoder(const NetworkConfig& cfg, Initializer& init);
  GmmParams operator()(const Tensor& z, const Tensor& y_prev) const;

 private:
  // Stride-2 resampling realized as two 3x3 layers.
  struct Up {
    Deconv deconv;
    Conv conv;
    Tensor operator()(const Tensor& x) const;
  };
  struct Down {
    Conv strided;
    Conv conv;
    Tensor operator()(const Tensor& x) const;
  };

  NetworkConfig cfg_;
  Up z_up0_, z_up1_;
  ResidualBlock z_block0_, z_block1_;
  Conv fuse0_, fuse1_, fuse2_;
  Up y_up1_, y_up2_, z_up2_, z_up3_;
  GdnParams y_igdn1_, y_igdn2_, z_igdn2_, z_igdn3_;
  Down down1_, down2_;
  GdnParams gdn1_, gdn2_;
  Conv head_;
};

}  // namespace cevc
