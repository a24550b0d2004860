// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#include "cevc/tensor.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace cevc {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension";
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kContract: return "contract";
    case ErrorKind::kGeometry: return "geometry";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kCorruption: return "corruption";
    case ErrorKind::kDesync: return "desync";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kNumeric: return "numeric";
    case ErrorKind::kIo: return "io";
  }
  return "unknown";
}

std::int64_t numel_of(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) fail(ErrorKind::kDimension, "negative extent in " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor make_tensor(Shape shape, std::vector<double> data) {
  if (numel_of(shape) != static_cast<std::int64_t>(data.size())) {
    fail(ErrorKind::kDimension, "shape " + shape_str(shape) + " does not match " +
                                    std::to_string(data.size()) + " values");
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return Tensor(std::move(impl));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double value) {
  const auto n = numel_of(shape);
  return make_tensor(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value));
}

Tensor Tensor::scalar(double value) { return make_tensor({1}, {value}); }

Tensor Tensor::from_data(Shape shape, std::vector<double> data) {
  return make_tensor(std::move(shape), std::move(data));
}

std::int64_t Tensor::dim(std::size_t axis) const {
  if (axis >= impl_->shape.size()) {
    fail(ErrorKind::kDimension, "axis " + std::to_string(axis) + " out of range for " +
                                    shape_str(impl_->shape));
  }
  return impl_->shape[axis];
}

double Tensor::item() const {
  if (impl_->data.size() != 1) {
    fail(ErrorKind::kContract, "item() on tensor of shape " + shape_str(impl_->shape));
  }
  return impl_->data[0];
}

Tensor& Tensor::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  return *this;
}

Tensor Tensor::detach() const { return make_tensor(impl_->shape, impl_->data); }

namespace {
thread_local Tape* g_current_tape = nullptr;
}  // namespace

Tape::Tape() : previous_(g_current_tape) { g_current_tape = this; }

Tape::~Tape() { g_current_tape = previous_; }

Tape* Tape::current() { return g_current_tape; }

void Tape::record(const char* op, std::shared_ptr<detail::TensorImpl> output,
                  BackwardFn fn) {
  nodes_.push_back(Node{op, std::move(output), std::move(fn)});
}

void Tape::backward(const Tensor& loss) {
  if (consumed_) fail(ErrorKind::kContract, "backward called twice without reset");
  if (!loss.defined() || loss.numel() != 1) {
    fail(ErrorKind::kContract, "backward needs a scalar loss");
  }
  consumed_ = true;
  auto& seed = loss.impl()->grad_buffer();
  seed[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->output->grad.empty()) continue;  // not on a path to the loss
    it->fn(it->output->grad);
  }
}

void Tape::reset() {
  nodes_.clear();
  consumed_ = false;
}

std::vector<std::string> Tape::replay_order() const {
  std::vector<std::string> names;
  names.reserve(nodes_.size());
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) names.emplace_back(it->op);
  return names;
}

NoGradGuard::NoGradGuard() : saved_(g_current_tape) { g_current_tape = nullptr; }

NoGradGuard::~NoGradGuard() { g_current_tape = saved_; }

void backward(const Tensor& loss) {
  Tape* tape = Tape::current();
  if (tape == nullptr) fail(ErrorKind::kContract, "backward without an active tape");
  tape->backward(loss);
}

double grad_check(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double eps) {
  const auto n = static_cast<std::size_t>(point.numel());
  std::vector<double> analytic(n, 0.0);
  {
    Tape tape;
    Tensor x = point.detach();
    x.set_requires_grad(true);
    Tensor y = f(x);
    if (y.numel() != 1) fail(ErrorKind::kContract, "grad_check needs a scalar function");
    tape.backward(y);
    if (x.has_grad()) analytic.assign(x.grad().begin(), x.grad().end());
  }

  NoGradGuard no_grad;
  Tensor probe = point.detach();
  auto values = probe.mutable_data();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double saved = values[i];
    values[i] = saved + eps;
    const double up = f(probe).item();
    values[i] = saved - eps;
    const double down = f(probe).item();
    values[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1e-8, std::abs(numeric));
    if (!std::isfinite(err)) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace cevc
