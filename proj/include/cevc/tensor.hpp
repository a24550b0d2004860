// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "cevc/error.hpp"

namespace cevc {

using Shape = std::vector<std::int64_t>;

std::int64_t numel_of(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

}  // namespace detail

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// A Tensor is a shared handle: copies alias the same storage. Values are
/// treated as immutable once an op has consumed them; only leaf tensors
/// (parameters, optimization variables) are written through mutable_data().
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(Shape shape, std::vector<double> data);

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const {
    return static_cast<std::int64_t>(impl_->data.size());
  }

  std::span<const double> data() const { return impl_->data; }
  std::span<double> mutable_data() { return impl_->data; }
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  // Fresh leaf with a copy of the values and no gradient history.
  Tensor detach() const;

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl)
      : impl_(std::move(impl)) {}
  friend Tensor make_tensor(Shape, std::vector<double>);

  std::shared_ptr<detail::TensorImpl> impl_;
};

Tensor make_tensor(Shape shape, std::vector<double> data);

/// Reverse-mode differentiation tape.
///
/// Constructing a Tape installs it as the recording tape of the calling
/// thread (the previous one is restored on destruction). Ops record a node
/// only when a tape is installed and at least one operand requires grad.
class Tape {
 public:
  // Receives the gradient of the node output; accumulates into the inputs
  // it captured.
  using BackwardFn = std::function<void(std::span<const double> out_grad)>;

  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* current();

  void record(const char* op, std::shared_ptr<detail::TensorImpl> output,
              BackwardFn fn);

  // Seeds d(loss)/d(loss) = 1 and replays recorded nodes newest first.
  // Throws kContract for a non-scalar loss or when called twice without
  // reset().
  void backward(const Tensor& loss);

  // Drops all recorded nodes; gradients already accumulated on leaves stay.
  void reset();

  std::size_t size() const { return nodes_.size(); }
  // Op names in the order backward() visits them (debug/test hook).
  std::vector<std::string> replay_order() const;

 private:
  struct Node {
    const char* op;
    std::shared_ptr<detail::TensorImpl> output;
    BackwardFn fn;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
  Tape* previous_ = nullptr;
};

// Temporarily disables recording on this thread.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape* saved_;
};

// Runs backward on the tape installed on this thread.
void backward(const Tensor& loss);

/// Max over coordinates of |analytic - central difference| /
/// max(1e-8, |central difference|). NaN anywhere yields +inf.
double grad_check(const std::function<Tensor(const Tensor&)>& f,
                  const Tensor& point, double eps = 1e-4);

}  // namespace cevc
