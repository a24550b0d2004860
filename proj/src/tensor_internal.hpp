// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <initializer_list>
#include <string>
#include <utility>

#include "cevc/tensor.hpp"

namespace cevc::detail {

using ImplPtr = std::shared_ptr<TensorImpl>;

inline bool wants_grad(const ImplPtr& p) { return p->requires_grad; }

inline void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      fail(ErrorKind::kNumeric, std::string(op) + " produced a non-finite value");
    }
  }
}

// Builds the op result and, when a tape is recording and any input wants a
// gradient, records the backward closure produced by make_fn().
template <class MakeFn>
Tensor emit(const char* op, Shape shape, std::vector<double> data,
            std::initializer_list<const Tensor*> inputs, MakeFn&& make_fn) {
  check_finite(op, data);
  Tensor out = make_tensor(std::move(shape), std::move(data));
  Tape* tape = Tape::current();
  if (tape == nullptr) return out;
  bool any = false;
  for (const Tensor* t : inputs) any = any || t->requires_grad();
  if (!any) return out;
  out.set_requires_grad(true);
  tape->record(op, out.impl(), make_fn());
  return out;
}

}  // namespace cevc::detail
