// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>

namespace cevc::gaussian {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double cdf(double u) { return 0.5 * std::erfc(-u * kInvSqrt2); }

inline double pdf(double u) { return kInvSqrt2Pi * std::exp(-0.5 * u * u); }

// Mass of N(mu, sigma^2) on [c - 0.5, c + 0.5]. Uses the upper tail when
// the interval sits right of the mean so neither branch cancels.
inline double interval_mass(double c, double mu, double sigma) {
  const double d = c - mu;
  const double hi = (d + 0.5) / sigma;
  const double lo = (d - 0.5) / sigma;
  if (d > 0.0) return cdf(-lo) - cdf(-hi);
  return cdf(hi) - cdf(lo);
}

}  // namespace cevc::gaussian
