// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/entropy_model.hpp"

#include <array>
#include <cmath>

#include "cevc/gaussian.hpp"
#include "cevc/ops.hpp"

namespace cevc {

double DiscretePmf::total() const {
  double s = tail_low + tail_high;
  for (double m : mass) s += m;
  return s;
}

std::vector<double> DiscretePmf::folded() const {
  std::vector<double> out = mass;
  out.front() += tail_low;
  out.back() += tail_high;
  return out;
}

double DiscretePmf::prob(int symbol) const {
  const auto i = static_cast<std::size_t>(symbol + L);
  double p = mass.at(i);
  if (symbol == -L) p += tail_low;
  if (symbol == L) p += tail_high;
  return p;
}

namespace {
constexpr std::array<int, FactorizedPrior::kDepth + 1> kFilters = {1, FactorizedPrior::kWidth,
                                                                   FactorizedPrior::kWidth,
                                                                   FactorizedPrior::kWidth, 1};

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }
}  // namespace

FactorizedPrior::FactorizedPrior(int channels, Initializer& init, const std::string& prefix,
                                 double init_scale)
    : channels_(channels) {
  const double scale = std::pow(init_scale, 1.0 / kDepth);
  for (int k = 0; k < kDepth; ++k) {
    const int in = kFilters[k], out = kFilters[k + 1];
    const double m0 = std::log(std::expm1(1.0 / scale / out));
    const std::string tag = prefix + ".layer" + std::to_string(k);
    matrices_.push_back(init.constant(tag + ".matrix", {channels, out, in}, m0));
    biases_.push_back(init.uniform(tag + ".bias", {channels, out}, 0.5));
    if (k + 1 < kDepth) gates_.push_back(init.constant(tag + ".gate", {channels, out}, 0.0));
  }
}

Tensor FactorizedPrior::logits(const Tensor& x) const {
  Tensor h = x;
  for (int k = 0; k < kDepth; ++k) {
    h = ops::channel_affine(h, ops::softplus(matrices_[k]), biases_[k]);
    if (k + 1 < kDepth) h = ops::tanh_gate(h, gates_[k]);
  }
  return h;
}

Tensor FactorizedPrior::cdf(const Tensor& x) const { return ops::sigmoid(logits(x)); }

Tensor FactorizedPrior::interval_mass(const Tensor& values) const {
  if (values.rank() != 4 || values.dim(1) != channels_) {
    fail(ErrorKind::kDimension, "factorized prior over " + std::to_string(channels_) +
                                    " channels got " + shape_str(values.shape()));
  }
  const auto n = values.dim(0) * values.dim(2) * values.dim(3);
  if (values.dim(0) != 1) fail(ErrorKind::kDimension, "factorized prior expects batch 1");
  const Tensor v = ops::reshape(values, {channels_, 1, n});
  const Tensor lower = logits(ops::add_scalar(v, -0.5));
  const Tensor upper = logits(ops::add_scalar(v, 0.5));
  // Evaluate on the side of the sigmoid where the difference does not cancel.
  std::vector<double> sign(static_cast<std::size_t>(lower.numel()));
  for (std::size_t i = 0; i < sign.size(); ++i) {
    sign[i] = (lower.data()[i] + upper.data()[i]) > 0.0 ? -1.0 : 1.0;
  }
  const Tensor s = Tensor::from_data(lower.shape(), std::move(sign));
  const Tensor mass = ops::abs(ops::sub(ops::sigmoid(ops::mul(s, upper)), ops::sigmoid(ops::mul(s, lower))));
  return ops::reshape(mass, values.shape());
}

FactorizedPrior::Effective FactorizedPrior::effective() const {
  Effective e;
  for (int k = 0; k < kDepth; ++k) {
    std::vector<double> m(matrices_[k].data().begin(), matrices_[k].data().end());
    for (auto& v : m) v = softplus(v);
    e.matrix.push_back(std::move(m));
    e.bias.emplace_back(biases_[k].data().begin(), biases_[k].data().end());
    if (k + 1 < kDepth) {
      std::vector<double> g(gates_[k].data().begin(), gates_[k].data().end());
      for (auto& v : g) v = std::tanh(v);
      e.gate.push_back(std::move(g));
    }
  }
  return e;
}

double FactorizedPrior::logit_of(const Effective& e, int channel, double x) {
  std::array<double, kWidth> cur{}, next{};
  cur[0] = x;
  for (int k = 0; k < kDepth; ++k) {
    const int in = kFilters[k], out = kFilters[k + 1];
    const double* m = e.matrix[k].data() + static_cast<std::size_t>(channel) * out * in;
    const double* b = e.bias[k].data() + static_cast<std::size_t>(channel) * out;
    for (int o = 0; o < out; ++o) {
      double acc = b[o];
      for (int i = 0; i < in; ++i) acc += m[o * in + i] * cur[i];
      next[o] = acc;
    }
    if (k + 1 < kDepth) {
      const double* g = e.gate[k].data() + static_cast<std::size_t>(channel) * out;
      for (int o = 0; o < out; ++o) next[o] += g[o] * std::tanh(next[o]);
    }
    cur = next;
  }
  return cur[0];
}

double FactorizedPrior::cdf_value(int channel, double x) const {
  return sigmoid(logit_of(effective(), channel, x));
}

DiscretePmf FactorizedPrior::pmf(int channel, int L) const {
  if (channel < 0 || channel >= channels_) {
    fail(ErrorKind::kDimension, "factorized prior channel " + std::to_string(channel));
  }
  const Effective e = effective();
  const int edges = 2 * L + 2;  // half-integer boundaries -L-0.5 .. L+0.5
  std::vector<double> logit(static_cast<std::size_t>(edges));
  for (int i = 0; i < edges; ++i) logit[i] = logit_of(e, channel, i - L - 0.5);
  DiscretePmf pmf;
  pmf.L = L;
  pmf.mass.resize(static_cast<std::size_t>(2 * L + 1));
  for (int i = 0; i + 1 < edges; ++i) {
    const double lo = logit[i], hi = logit[i + 1];
    pmf.mass[i] = (lo + hi > 0.0) ? sigmoid(-lo) - sigmoid(-hi) : sigmoid(hi) - sigmoid(lo);
  }
  pmf.tail_low = sigmoid(logit.front());
  pmf.tail_high = sigmoid(-logit.back());
  return pmf;
}

DiscretePmf gmm_pmf(std::span<const double> weights, std::span<const double> means,
                    std::span<const double> scales, int L) {
  const std::size_t K = weights.size();
  if (means.size() != K || scales.size() != K) {
    fail(ErrorKind::kDimension, "gmm_pmf: parameter lengths differ");
  }
  const int edges = 2 * L + 2;
  DiscretePmf pmf;
  pmf.L = L;
  pmf.mass.assign(static_cast<std::size_t>(2 * L + 1), 0.0);
  // Lower CDF (left of the mean) and upper tail (right of the mean) at each
  // edge; a symbol's mass is differenced on whichever side avoids
  // cancellation.
  std::vector<double> u(static_cast<std::size_t>(edges)), lowcdf(u.size()), uptail(u.size());
  for (std::size_t k = 0; k < K; ++k) {
    if (!(scales[k] > 0.0)) fail(ErrorKind::kDomain, "gmm_pmf: scale must be > 0");
    const double w = weights[k];
    for (int i = 0; i < edges; ++i) {
      u[i] = (i - L - 0.5 - means[k]) / scales[k];
      if (u[i] < 0.0) {
        lowcdf[i] = gaussian::cdf(u[i]);
        uptail[i] = 1.0 - lowcdf[i];
      } else {
        uptail[i] = gaussian::cdf(-u[i]);
        lowcdf[i] = 1.0 - uptail[i];
      }
    }
    for (int i = 0; i + 1 < edges; ++i) {
      double m;
      if (u[i] >= 0.0) {
        m = uptail[i] - uptail[i + 1];
      } else if (u[i + 1] <= 0.0) {
        m = lowcdf[i + 1] - lowcdf[i];
      } else {
        m = 1.0 - lowcdf[i] - uptail[i + 1];
      }
      pmf.mass[i] += w * m;
    }
    pmf.tail_low += w * lowcdf.front();
    pmf.tail_high += w * uptail.back();
  }
  return pmf;
}

DiscretePmf gmm_pmf(const GmmParams& params, std::int64_t element, int L) {
  const auto KN = params.weights.dim(1);
  const auto plane = params.weights.dim(2) * params.weights.dim(3);
  const auto N = KN / params.K;
  const auto c = element / plane, pos = element % plane;
  std::vector<double> w(params.K), mu(params.K), s(params.K);
  for (int k = 0; k < params.K; ++k) {
    const auto idx = static_cast<std::size_t>((k * N + c) * plane + pos);
    w[k] = params.weights.data()[idx];
    mu[k] = params.means.data()[idx];
    s[k] = params.scales.data()[idx];
  }
  return gmm_pmf(w, mu, s, L);
}

Tensor gmm_interval_mass(const Tensor& values, const GmmParams& params) {
  const auto N = values.dim(1);
  if (params.weights.dim(1) != N * params.K) {
    fail(ErrorKind::kDimension, "gmm_interval_mass: values " + shape_str(values.shape()) +
                                    " vs params " + shape_str(params.weights.shape()));
  }
  Tensor repeated = values;
  for (int k = 1; k < params.K; ++k) repeated = ops::concat_channels(repeated, values);
  const Tensor weighted =
      ops::mul(params.weights, ops::gaussian_interval_mass(repeated, params.means, params.scales));
  Tensor total = ops::slice_channels(weighted, 0, N);
  for (int k = 1; k < params.K; ++k) {
    total = ops::add(total, ops::slice_channels(weighted, k * N, (k + 1) * N));
  }
  return total;
}

Tensor rate_nll(const Tensor& masses) {
  for (double p : masses.data()) {
    if (!(p >= 0.0) || !std::isfinite(p)) fail(ErrorKind::kDomain, "rate_nll: invalid mass");
  }
  const Tensor floored = ops::clamp(masses, kMinMass);
  return ops::mul_scalar(ops::sum(ops::log(floored)), -1.0 / std::log(2.0));
}

Tensor rate_clamp(const Tensor& rate_bits, double floor) {
  if (floor < 0.0) fail(ErrorKind::kContract, "rate_clamp: target rate must be >= 0");
  return ops::clamp(rate_bits, floor);
}

}  // namespace cevc
