// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include "cevc/networks.hpp"
#include "cevc/tensor.hpp"

namespace cevc {

// Masses below this are raised to it in the rate and when building tables.
inline constexpr double kMinMass = 1.0 / 16777216.0;  // 2^-24

/// Probability of every symbol in [-L, L] plus the mass that falls outside
/// the alphabet on either side.
struct DiscretePmf {
  int L = 0;
  std::vector<double> mass;  // 2L+1 entries, index i <-> symbol i - L
  double tail_low = 0.0;     // below -L - 0.5
  double tail_high = 0.0;    // above  L + 0.5

  double total() const;
  // Tails folded into the edge symbols; this is what gets coded.
  std::vector<double> folded() const;
  double prob(int symbol) const;  // folded probability of one symbol
};

/// Per-channel learned monotone CDF: a stack of 1->3->3->3->1 dense layers
/// with non-negative (softplus) weights and tanh gating, then a sigmoid.
class FactorizedPrior {
 public:
  static constexpr int kDepth = 4;
  static constexpr int kWidth = 3;

  FactorizedPrior() = default;
  FactorizedPrior(int channels, Initializer& init, const std::string& prefix,
                  double init_scale = 10.0);

  int channels() const { return channels_; }

  // x [C, 1, n] -> logits [C, 1, n]; differentiable in x and parameters.
  Tensor logits(const Tensor& x) const;
  // sigmoid(logits(x)).
  Tensor cdf(const Tensor& x) const;
  // values [1,C,h,w] -> c(v + 0.5) - c(v - 0.5), same shape.
  Tensor interval_mass(const Tensor& values) const;

  // Tape-free evaluation used when building coding tables.
  double cdf_value(int channel, double x) const;
  DiscretePmf pmf(int channel, int L) const;

 private:
  struct Effective {
    std::vector<std::vector<double>> matrix, bias, gate;  // per layer, [C * rows * cols]
  };
  Effective effective() const;
  static double logit_of(const Effective& e, int channel, double x);

  int channels_ = 0;
  std::vector<Tensor> matrices_;  // raw, [C, out, in]
  std::vector<Tensor> biases_;    // [C, out]
  std::vector<Tensor> gates_;     // [C, out], all but the last layer
};

// Folded pmf of a single latent element under a K-component mixture.
DiscretePmf gmm_pmf(std::span<const double> weights, std::span<const double> means,
                    std::span<const double> scales, int L);

// Element e of a frame (channel-major over [1,N,h,w]).
DiscretePmf gmm_pmf(const GmmParams& params, std::int64_t element, int L);

// Differentiable mixture interval mass at values [1,N,h,w].
Tensor gmm_interval_mass(const Tensor& values, const GmmParams& params);

// -sum log2(max(p, 2^-24)) in bits. kDomain for negative or non-finite input.
Tensor rate_nll(const Tensor& masses);

// max(rate, floor); gradient 1 when rate >= floor (ties pass through), 0
// below.
Tensor rate_clamp(const Tensor& rate_bits, double floor);

}  // namespace cevc
