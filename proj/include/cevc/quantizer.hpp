// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cevc/tensor.hpp"

namespace cevc {

/// Integer symbol grid of one frame, laid out like the [1,C,h,w] tensor it
/// came from. Used for both the latent code y and the hyper code z.
struct SymbolGrid {
  Shape shape;                        // [1, C, h, w]
  std::vector<std::int32_t> symbols;  // each within [-L, L]
  std::int64_t origin = -1;           // frame index, -1 when unknown
  std::int64_t clamped = 0;           // elements clamped by quantize()

  std::int64_t channels() const { return shape.at(1); }
  std::int64_t plane() const { return shape.at(2) * shape.at(3); }
  bool operator==(const SymbolGrid& o) const { return shape == o.shape && symbols == o.symbols; }
};

using LatentCode = SymbolGrid;
using HyperCode = SymbolGrid;

// Round half away from zero, then clamp into [-L, L].
std::int32_t quantize_value(double v, int L);
SymbolGrid quantize(const Tensor& continuous, int L, std::int64_t origin = -1);

// Exact integer -> double conversion, shape [1,C,h,w].
Tensor dequantize(const SymbolGrid& code);

SymbolGrid zero_code(const Shape& shape);

/// Deterministic noise source for the training relaxation.
class NoiseRng {
 public:
  explicit NoiseRng(std::uint64_t seed) : engine_(seed) {}
  NoiseRng(std::uint64_t seed, std::uint64_t stream);
  // Uniform on [-0.5, 0.5).
  double centered_uniform();
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// y + u with u ~ U[-0.5, 0.5) i.i.d.; u is a constant on the tape.
Tensor noise_quantize(const Tensor& continuous, NoiseRng& rng);

}  // namespace cevc
