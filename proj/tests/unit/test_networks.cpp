// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <random>

#include "cevc/networks.hpp"
#include "cevc/ops.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cevc;
using cevc::testing::param_grad_check;
using cevc::testing::random_tensor;
using cevc::testing::weighted_sum;

namespace {

NetworkConfig small_config() {
  NetworkConfig cfg;
  cfg.N = 6;
  cfg.M = 5;
  cfg.K = 2;
  cfg.Nz = 4;
  cfg.num_down = 2;
  return cfg;
}

void zero_all(ParamStore& store) {
  for (auto& [name, t] : store.entries()) {
    Tensor h = t;
    for (auto& v : h.mutable_data()) v = 0.0;
  }
}

}  // namespace

TEST_CASE("gdn and igdn closed-form values") {
  const Tensor x = Tensor::from_data({1, 1, 1, 1}, {1.0});
  const Tensor beta = Tensor::full({1}, 1.0);
  const Tensor gamma = Tensor::full({1, 1}, 3.0);
  CHECK(gdn(x, beta, gamma).item() == doctest::Approx(0.5).epsilon(1e-15));

  const Tensor half = Tensor::from_data({1, 1, 1, 1}, {0.5});
  CHECK(igdn(half, beta, gamma).item() == doctest::Approx(0.5 * std::sqrt(1.75)).epsilon(1e-15));

  std::mt19937_64 rng(3);
  const Tensor v = random_tensor(rng, {2, 3, 4, 5});
  const Tensor b1 = Tensor::full({3}, 1.0);
  const Tensor g0 = Tensor::zeros({3, 3});
  for (const auto& out : {gdn(v, b1, g0), igdn(v, b1, g0)}) {
    for (std::size_t i = 0; i < out.data().size(); ++i) CHECK(out.data()[i] == v.data()[i]);
  }
}

TEST_CASE("gdn parameter reparameterization respects floors") {
  ParamStore store;
  Initializer init(store, 5);
  GdnParams p = init.gdn("g", 4);
  const Tensor beta = p.beta();
  for (double b : beta.data()) CHECK(b == doctest::Approx(1.0).epsilon(1e-9));
  const auto gamma = p.gamma();
  for (int i = 0; i < 4; ++i) {
    CHECK(gamma.data()[i * 4 + i] == doctest::Approx(0.1).epsilon(1e-9));
  }
  Tensor raw = p.beta_raw;
  for (auto& v : raw.mutable_data()) v = -500.0;
  const Tensor floored = p.beta();
  for (double b : floored.data()) CHECK(b >= kBetaFloor);
  const Tensor gamma_after = p.gamma();
  for (double g : gamma_after.data()) CHECK(g >= 0.0);
}

TEST_CASE("gdn/igdn gradients at random points") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor x = random_tensor(rng, {1, 3, 3, 2}, -2, 2);
    const Tensor beta = random_tensor(rng, {3}, 0.5, 2);
    const Tensor gamma = random_tensor(rng, {3, 3}, 0.01, 1);
    const Tensor r = random_tensor(rng, {1, 3, 3, 2});
    for (auto op : {&gdn, &igdn}) {
      CHECK(grad_check([&](const Tensor& v) { return weighted_sum(op(v, beta, gamma), r); }, x) < 1e-4);
      CHECK(grad_check([&](const Tensor& b) { return weighted_sum(op(x, b, gamma), r); }, beta) < 1e-4);
      CHECK(grad_check([&](const Tensor& g) { return weighted_sum(op(x, beta, g), r); }, gamma) < 1e-4);
    }
  }
}

TEST_CASE("residual block identity, shape and gradient") {
  ParamStore store;
  Initializer init(store, 9);
  ResidualBlock block = init.residual("res", 3);
  std::mt19937_64 rng(2);
  for (Shape s : {Shape{1, 3, 1, 1}, Shape{2, 3, 5, 7}, Shape{1, 3, 8, 3}}) {
    CHECK(block(random_tensor(rng, s)).shape() == s);
  }
  const Tensor x = random_tensor(rng, {1, 3, 4, 4});
  const Tensor r = random_tensor(rng, {1, 3, 4, 4});
  CHECK(grad_check([&](const Tensor& v) { return weighted_sum(block(v), r); }, x) < 1e-4);
  CHECK(param_grad_check([&] { return weighted_sum(block(x), r); }, block.first.kernel) < 1e-4);

  zero_all(store);
  const Tensor y = block(x);
  for (std::size_t i = 0; i < y.data().size(); ++i) CHECK(y.data()[i] == x.data()[i]);
}

TEST_CASE("image encoder/decoder shapes and determinism") {
  NetworkConfig cfg;  // defaults: N=32, num_down=4
  ParamStore store;
  Initializer init(store, 1);
  ImageEncoder enc(cfg, init);
  ImageDecoder dec(cfg, init);
  std::mt19937_64 rng(4);
  const Tensor frame = random_tensor(rng, {1, 3, 64, 64}, 0, 1);
  const Tensor y = enc(frame);
  CHECK(y.shape() == Shape{1, 32, 4, 4});
  const Tensor again = enc(frame);
  CHECK(std::equal(y.data().begin(), y.data().end(), again.data().begin()));
  const Tensor xr = dec(y);
  CHECK(xr.shape() == Shape{1, 3, 64, 64});
  const Tensor xr2 = dec(y);
  CHECK(std::equal(xr.data().begin(), xr.data().end(), xr2.data().begin()));

  CHECK_THROWS_AS(enc(random_tensor(rng, {1, 3, 60, 64})), Error);

  zero_all(store);
  const Tensor zero_latent = enc(frame);
  for (double v : zero_latent.data()) CHECK(v == 0.0);
}

TEST_CASE("hyper encoder/decoder contracts") {
  const NetworkConfig cfg = small_config();
  ParamStore store;
  Initializer init(store, 21);
  HyperEncoder henc(cfg, init);
  HyperDecoder hdec(cfg, init);
  std::mt19937_64 rng(8);
  const Tensor y = random_tensor(rng, {1, cfg.N, 4, 4}, -3, 3);
  const Tensor y_prev = random_tensor(rng, {1, cfg.N, 4, 4}, -3, 3);
  const Tensor z = henc(y, y_prev);
  CHECK(z.shape() == Shape{1, cfg.Nz, 1, 1});
  const Tensor z_swapped = henc(y_prev, y);
  CHECK_FALSE(std::equal(z.data().begin(), z.data().end(), z_swapped.data().begin()));
  CHECK_THROWS_AS(henc(y, random_tensor(rng, {1, cfg.N, 4, 2})), Error);

  const GmmParams p = hdec(z, y_prev);
  const Shape expect{1, cfg.K * cfg.N, 4, 4};
  CHECK(p.weights.shape() == expect);
  CHECK(p.means.shape() == expect);
  CHECK(p.scales.shape() == expect);
  const auto plane = 16;
  for (int e = 0; e < cfg.N * plane; ++e) {
    const int c = e / plane, pos = e % plane;
    double total = 0.0;
    for (int k = 0; k < cfg.K; ++k) {
      const double w = p.weights.data()[(k * cfg.N + c) * plane + pos];
      CHECK(w >= 0.0);
      total += w;
    }
    CHECK(std::abs(total - 1.0) < 1e-9);
  }
  for (double s : p.scales.data()) CHECK(s >= cfg.sigma_min);

  const GmmParams q = hdec(z, y_prev);
  CHECK(std::equal(p.means.data().begin(), p.means.data().end(), q.means.data().begin()));
}

TEST_CASE("hyper decoder gradient reaches inputs and parameters") {
  const NetworkConfig cfg = small_config();
  ParamStore store;
  Initializer init(store, 33);
  HyperDecoder hdec(cfg, init);
  std::mt19937_64 rng(12);
  const Tensor z = random_tensor(rng, {1, cfg.Nz, 1, 1}, -2, 2);
  const Tensor y_prev = random_tensor(rng, {1, cfg.N, 4, 4}, -2, 2);
  const Tensor r = random_tensor(rng, {1, cfg.K * cfg.N, 4, 4});
  auto probe = [&](const GmmParams& p) {
    return ops::add(weighted_sum(p.weights, r),
                    ops::add(weighted_sum(p.means, r), weighted_sum(p.scales, r)));
  };
  CHECK(grad_check([&](const Tensor& v) { return probe(hdec(v, y_prev)); }, z) < 1e-4);
  CHECK(grad_check([&](const Tensor& v) { return probe(hdec(z, v)); }, y_prev, 1e-5) < 1e-4);
  for (const auto& [name, t] : store.entries()) {
    if (name.find("gdn") == std::string::npos && name.find("head") == std::string::npos) continue;
    INFO(name);
    CHECK(param_grad_check([&] { return probe(hdec(z, y_prev)); }, t, 1e-4, 12) < 1e-4);
  }
}
