// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <functional>
#include <random>

#include "cevc/ops.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace cevc;
using cevc::testing::phi_series;
using cevc::testing::random_tensor;
using cevc::testing::weighted_sum;

namespace {

Tensor ones(Shape s) { return Tensor::full(std::move(s), 1.0); }

}  // namespace

TEST_CASE("conv2d forward shapes and values") {
  auto out = ops::conv2d(ones({1, 1, 3, 3}), ones({1, 1, 3, 3}), Tensor::zeros({1}), 1, 0);
  CHECK(out.shape() == Shape{1, 1, 1, 1});
  CHECK(out.item() == 9.0);

  auto strided = ops::conv2d(ones({1, 1, 4, 4}), ones({1, 1, 3, 3}), Tensor::zeros({1}), 2, 1);
  CHECK(strided.shape() == Shape{1, 1, 2, 2});

  CHECK_THROWS_AS(ops::conv2d(ones({1, 2, 4, 4}), ones({1, 3, 3, 3}), Tensor::zeros({1}), 1, 1),
                  Error);
}

TEST_CASE("conv2d gradients match central differences") {
  std::mt19937_64 rng(11);
  const auto x = random_tensor(rng, {1, 2, 6, 6});
  const auto k = random_tensor(rng, {3, 2, 3, 3});
  const auto b = random_tensor(rng, {3});
  for (int stride : {1, 2}) {
    const auto r = random_tensor(rng, {1, 3, stride == 1 ? 6 : 3, stride == 1 ? 6 : 3});
    CHECK(grad_check([&](const Tensor& v) { return weighted_sum(ops::conv2d(v, k, b, stride, 1), r); },
                     x) < 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return weighted_sum(ops::conv2d(x, v, b, stride, 1), r); },
                     k) < 1e-5);
    CHECK(grad_check([&](const Tensor& v) { return weighted_sum(ops::conv2d(x, k, v, stride, 1), r); },
                     b) < 1e-5);
  }
}

TEST_CASE("conv_transpose2d geometry and gradients") {
  std::mt19937_64 rng(12);
  const auto x = random_tensor(rng, {1, 1, 2, 2});
  auto copy = ops::conv_transpose2d(x, ones({1, 1, 1, 1}), Tensor::zeros({1}), 1, 0);
  CHECK(copy.shape() == Shape{1, 1, 2, 2});
  for (int i = 0; i < 4; ++i) CHECK(copy.data()[i] == x.data()[i]);

  auto up = ops::conv_transpose2d(x, ones({1, 1, 5, 5}), Tensor::zeros({1}), 2, 2);
  CHECK(up.shape() == Shape{1, 1, 4, 4});
  auto up3 = ops::conv_transpose2d(x, ones({1, 1, 3, 3}), Tensor::zeros({1}), 2, 1);
  CHECK(up3.shape() == Shape{1, 1, 4, 4});
  CHECK_THROWS_AS(ops::conv_transpose2d(x, ones({1, 1, 4, 4}), Tensor::zeros({1}), 1, 0), Error);

  const auto xin = random_tensor(rng, {1, 2, 3, 3});
  const auto k = random_tensor(rng, {2, 3, 5, 5});
  const auto b = random_tensor(rng, {3});
  const auto r = random_tensor(rng, {1, 3, 6, 6});
  auto f = [&](const Tensor& a, const Tensor& kk, const Tensor& bb) {
    return weighted_sum(ops::conv_transpose2d(a, kk, bb, 2, 2), r);
  };
  CHECK(grad_check([&](const Tensor& v) { return f(v, k, b); }, xin) < 1e-5);
  CHECK(grad_check([&](const Tensor& v) { return f(xin, v, b); }, k) < 1e-5);
  CHECK(grad_check([&](const Tensor& v) { return f(xin, k, v); }, b) < 1e-5);
}

TEST_CASE("conv_transpose2d is the adjoint of conv2d") {
  std::mt19937_64 rng(13);
  const auto x = random_tensor(rng, {1, 2, 4, 4});
  const auto y = random_tensor(rng, {1, 3, 8, 8});
  const auto k = random_tensor(rng, {2, 3, 5, 5});  // conv: 3 in -> 2 out
  // <conv(y), x> == <y, convT(x)> with the same kernel, zero bias.
  const auto cy = ops::conv2d(y, k, Tensor::zeros({2}), 2, 2);
  const auto tx = ops::conv_transpose2d(x, k, Tensor::zeros({3}), 2, 2);
  double lhs = 0.0, rhs = 0.0;
  for (std::int64_t i = 0; i < x.numel(); ++i) lhs += cy.data()[i] * x.data()[i];
  for (std::int64_t i = 0; i < y.numel(); ++i) rhs += y.data()[i] * tx.data()[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("elementwise examples") {
  CHECK(ops::leaky_relu(Tensor::scalar(-2.0)).item() == doctest::Approx(-0.4));
  auto sm = ops::softmax_blocks(Tensor::full({1, 3, 1, 1}, 0.7), 3);
  for (double v : sm.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));

  Tape tape;
  auto x = Tensor::from_data({3}, {1.0, 2.0, 3.0});
  x.set_requires_grad(true);
  tape.backward(ops::sum(ops::square(x)));
  CHECK(x.grad()[0] == 2.0);
  CHECK(x.grad()[1] == 4.0);
  CHECK(x.grad()[2] == 6.0);
}

TEST_CASE("domain and dimension errors") {
  auto check_kind = [](auto&& fn, ErrorKind kind) {
    try {
      fn();
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.kind() == kind);
    }
  };
  check_kind([] { ops::log(Tensor::scalar(-1.0)); }, ErrorKind::kDomain);
  check_kind([] { ops::sqrt(Tensor::scalar(-1e-3)); }, ErrorKind::kDomain);
  check_kind([] { ops::div(Tensor::scalar(1.0), Tensor::scalar(0.0)); }, ErrorKind::kDomain);
  check_kind([] { ops::add(Tensor::zeros({2}), Tensor::zeros({3})); }, ErrorKind::kDimension);
  check_kind(
      [] {
        ops::gaussian_cdf(Tensor::scalar(0.0), Tensor::scalar(0.0), Tensor::scalar(0.0));
      },
      ErrorKind::kDomain);
}

TEST_CASE("gaussian_cdf values") {
  auto cdf = [](double x, double mu, double s) {
    return ops::gaussian_cdf(Tensor::scalar(x), Tensor::scalar(mu), Tensor::scalar(s)).item();
  };
  CHECK(cdf(0.0, 0.0, 1.0) == 0.5);
  CHECK(cdf(1.7, 1.7, 0.3) == 0.5);
  CHECK(cdf(-4.0, -4.0, 12.0) == 0.5);
  const double oracle = phi_series(1.0);
  CHECK(oracle == doctest::Approx(0.8413447460685429).epsilon(1e-15));
  CHECK(std::abs(cdf(1.0, 0.0, 1.0) - oracle) < 1e-13);
  for (double x : {-3.0, -0.25, 0.6, 2.2}) CHECK(std::abs(cdf(x, 0.0, 1.0) - phi_series(x)) < 1e-13);
  // Monotone in x.
  double prev = 0.0;
  for (double x = -6.0; x <= 6.0; x += 0.01) {
    const double c = cdf(x, 0.3, 0.8);
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives ones") {
    Tape tape;
    auto x = Tensor::zeros({2, 2});
    x.set_requires_grad(true);
    tape.backward(ops::sum(x));
    for (double g : x.grad()) CHECK(g == 1.0);
  }
  SUBCASE("disconnected parameter stays zero") {
    Tape tape;
    auto x = Tensor::full({3}, 2.0).set_requires_grad(true);
    auto unused = Tensor::full({3}, 5.0).set_requires_grad(true);
    tape.backward(ops::sum(ops::exp(x)));
    CHECK_FALSE(unused.has_grad());
    CHECK(x.has_grad());
  }
  SUBCASE("second backward without reset is a contract error") {
    Tape tape;
    auto x = Tensor::full({2}, 1.0).set_requires_grad(true);
    auto loss = ops::sum(x);
    tape.backward(loss);
    CHECK_THROWS_AS(tape.backward(loss), Error);
    tape.reset();
    tape.backward(ops::sum(x));
    CHECK(x.grad()[0] == 2.0);  // accumulated across the two passes
  }
  SUBCASE("non-scalar loss is rejected") {
    Tape tape;
    auto x = Tensor::full({2}, 1.0).set_requires_grad(true);
    CHECK_THROWS_AS(tape.backward(ops::exp(x)), Error);
  }
  SUBCASE("replay order is the reverse of recording") {
    Tape tape;
    auto x = Tensor::full({2}, 1.0).set_requires_grad(true);
    auto y = ops::sum(ops::square(ops::exp(x)));
    CHECK(tape.replay_order() == std::vector<std::string>{"sum", "square", "exp"});
    tape.backward(y);
  }
  SUBCASE("no recording without a tape") {
    auto x = Tensor::full({2}, 1.0).set_requires_grad(true);
    auto y = ops::exp(x);
    CHECK_FALSE(y.requires_grad());
  }
}

TEST_CASE("composite conv -> leaky_relu -> sum against finite differences") {
  std::mt19937_64 rng(14);
  const auto x = random_tensor(rng, {1, 2, 5, 5});
  const auto k = random_tensor(rng, {4, 2, 3, 3});
  const auto b = random_tensor(rng, {4});
  auto f = [&](const Tensor& kk) {
    return ops::sum(ops::leaky_relu(ops::conv2d(x, kk, b, 1, 1)));
  };
  CHECK(grad_check(f, k) < 1e-4);
}

TEST_CASE("grad_check of a quadratic is exact to roundoff") {
  std::mt19937_64 rng(15);
  for (int i = 0; i < 5; ++i) {
    const auto p = random_tensor(rng, {7}, -3.0, 3.0);
    CHECK(grad_check([](const Tensor& v) { return ops::sum(ops::square(v)); }, p) < 1e-9);
  }
}

TEST_CASE("gradient accumulates across uses") {
  auto grad_of = [](bool twice) {
    Tape tape;
    auto x = Tensor::from_data({2}, {0.3, -1.1}).set_requires_grad(true);
    auto y = ops::sum(ops::tanh(x));
    if (twice) y = ops::add(y, ops::sum(ops::tanh(x)));
    tape.backward(y);
    return std::vector<double>(x.grad().begin(), x.grad().end());
  };
  const auto once = grad_of(false), twice = grad_of(true);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == 2.0 * once[i]);
}

TEST_CASE("forward determinism") {
  std::mt19937_64 rng(16);
  const auto x = random_tensor(rng, {1, 3, 16, 16});
  const auto k = random_tensor(rng, {5, 3, 5, 5});
  const auto b = random_tensor(rng, {5});
  const auto a = ops::conv2d(x, k, b, 2, 2);
  const auto c = ops::conv2d(x, k, b, 2, 2);
  CHECK(std::equal(a.data().begin(), a.data().end(), c.data().begin()));
}

// Every differentiable op, 10 random points each.
TEST_CASE("property: grad_check below 1e-4 for all ops") {
  std::mt19937_64 rng(17);
  using Fn = std::function<Tensor(const Tensor&)>;
  struct Case {
    const char* name;
    Shape shape;
    double lo, hi;
    std::function<Fn(std::mt19937_64&)> make;
  };
  auto unary = [](Tensor (*op)(const Tensor&)) {
    return [op](std::mt19937_64& g) -> Fn {
      auto r = random_tensor(g, {2, 3});
      return [op, r](const Tensor& v) { return weighted_sum(op(v), r); };
    };
  };
  std::vector<Case> cases = {
      {"exp", {2, 3}, -2, 2, unary(ops::exp)},
      {"log", {2, 3}, 0.2, 3, unary(ops::log)},
      {"sqrt", {2, 3}, 0.2, 3, unary(ops::sqrt)},
      {"square", {2, 3}, -2, 2, unary(ops::square)},
      {"tanh", {2, 3}, -2, 2, unary(ops::tanh)},
      {"sigmoid", {2, 3}, -4, 4, unary(ops::sigmoid)},
      {"softplus", {2, 3}, -4, 4, unary(ops::softplus)},
      {"leaky_relu", {2, 3}, -2, 2,
       [](std::mt19937_64& g) -> Fn {
         auto r = random_tensor(g, {2, 3});
         return [r](const Tensor& v) { return weighted_sum(ops::leaky_relu(v), r); };
       }},
      {"mul/div", {2, 3}, 0.5, 2,
       [](std::mt19937_64& g) -> Fn {
         auto o = random_tensor(g, {2, 3}, 0.5, 2.0);
         return [o](const Tensor& v) { return ops::sum(ops::div(ops::mul(v, o), ops::add(v, o))); };
       }},
      {"softmax_blocks", {1, 6, 2, 1}, -2, 2,
       [](std::mt19937_64& g) -> Fn {
         auto r = random_tensor(g, {1, 6, 2, 1});
         return [r](const Tensor& v) { return weighted_sum(ops::softmax_blocks(v, 3), r); };
       }},
      {"concat/slice", {1, 3, 2, 2}, -1, 1,
       [](std::mt19937_64& g) -> Fn {
         auto o = random_tensor(g, {1, 2, 2, 2});
         auto r = random_tensor(g, {1, 4, 2, 2});
         return [o, r](const Tensor& v) {
           return weighted_sum(ops::slice_channels(ops::concat_channels(v, o), 1, 5), r);
         };
       }},
      {"gaussian_cdf", {4}, -2, 2,
       [](std::mt19937_64& g) -> Fn {
         auto mu = random_tensor(g, {4});
         auto sig = random_tensor(g, {4}, 0.3, 2.0);
         return [mu, sig](const Tensor& v) {
           return ops::sum(ops::add(ops::gaussian_cdf(v, mu, sig),
                                    ops::gaussian_cdf(mu, v, ops::add_scalar(ops::square(v), 0.5))));
         };
       }},
      {"gaussian_interval_mass", {4}, -3, 3,
       [](std::mt19937_64& g) -> Fn {
         auto mu = random_tensor(g, {4});
         auto sig = random_tensor(g, {4}, 0.3, 2.0);
         return [mu, sig](const Tensor& v) {
           return ops::sum(ops::log(ops::add(ops::gaussian_interval_mass(v, mu, sig),
                                             ops::gaussian_interval_mass(mu, v, ops::add_scalar(ops::square(v), 0.5)))));
         };
       }},
      {"channel_affine/tanh_gate", {2, 2, 3}, -1, 1,
       [](std::mt19937_64& g) -> Fn {
         auto w = random_tensor(g, {2, 3, 2});
         auto b = random_tensor(g, {2, 3});
         auto a = random_tensor(g, {2, 3});
         auto r = random_tensor(g, {2, 3, 3});
         return [w, b, a, r](const Tensor& v) {
           return weighted_sum(ops::tanh_gate(ops::channel_affine(v, w, b), a), r);
         };
       }},
      {"channel_affine weight", {2, 3, 2}, -1, 1,
       [](std::mt19937_64& g) -> Fn {
         auto x = random_tensor(g, {2, 2, 3});
         auto b = random_tensor(g, {2, 3});
         auto a = random_tensor(g, {2, 3});
         auto r = random_tensor(g, {2, 3, 3});
         return [x, b, a, r](const Tensor& v) {
           return weighted_sum(ops::tanh_gate(ops::channel_affine(x, v, b), a), r);
         };
       }},
      {"tanh_gate gate", {2, 3}, -1, 1,
       [](std::mt19937_64& g) -> Fn {
         auto x = random_tensor(g, {2, 3, 4});
         auto r = random_tensor(g, {2, 3, 4});
         return [x, r](const Tensor& v) { return weighted_sum(ops::tanh_gate(x, v), r); };
       }},
      {"mean/mse", {5}, -1, 1,
       [](std::mt19937_64& g) -> Fn {
         auto o = random_tensor(g, {5});
         return [o](const Tensor& v) { return ops::add(ops::mse(v, o), ops::mean(ops::abs(v))); };
       }},
  };
  for (auto& c : cases) {
    CAPTURE(c.name);
    for (int trial = 0; trial < 10; ++trial) {
      auto fn = c.make(rng);
      auto point = random_tensor(rng, c.shape, c.lo, c.hi);
      CHECK(grad_check(fn, point) < 1e-4);
    }
  }
}
