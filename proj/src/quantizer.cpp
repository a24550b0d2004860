// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/quantizer.hpp"

#include <algorithm>
#include <cmath>

#include "cevc/ops.hpp"

namespace cevc {

std::int32_t quantize_value(double v, int L) {
  const double r = std::round(v);  // halves go away from zero
  if (r > L) return L;
  if (r < -L) return -L;
  return static_cast<std::int32_t>(r);
}

SymbolGrid quantize(const Tensor& continuous, int L, std::int64_t origin) {
  SymbolGrid code;
  code.shape = continuous.shape();
  code.origin = origin;
  code.symbols.reserve(static_cast<std::size_t>(continuous.numel()));
  for (double v : continuous.data()) {
    if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "quantize: non-finite latent");
    const auto q = quantize_value(v, L);
    if (std::abs(std::round(v)) > L) ++code.clamped;
    code.symbols.push_back(q);
  }
  return code;
}

Tensor dequantize(const SymbolGrid& code) {
  std::vector<double> v(code.symbols.begin(), code.symbols.end());
  return Tensor::from_data(code.shape, std::move(v));
}

SymbolGrid zero_code(const Shape& shape) {
  SymbolGrid code;
  code.shape = shape;
  code.symbols.assign(static_cast<std::size_t>(numel_of(shape)), 0);
  return code;
}

namespace {
std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}
}  // namespace

NoiseRng::NoiseRng(std::uint64_t seed, std::uint64_t stream)
    : engine_(splitmix64(seed ^ splitmix64(stream + 0x51ED27ull))) {}

double NoiseRng::centered_uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53 - 0.5;
}

Tensor noise_quantize(const Tensor& continuous, NoiseRng& rng) {
  std::vector<double> u(static_cast<std::size_t>(continuous.numel()));
  for (auto& v : u) v = rng.centered_uniform();
  return ops::add(continuous, Tensor::from_data(continuous.shape(), std::move(u)));
}

}  // namespace cevc
