// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cevc {

enum class ErrorKind {
  kDimension,   // shape mismatch between operands
  kDomain,      // log/sqrt of negative, division by zero, non-positive scale
  kContract,    // API misuse (non-scalar loss, repeated backward, ...)
  kGeometry,    // frame/latent geometry not representable
  kCapacity,    // alphabet too large for the coder precision
  kCorruption,  // CRC or digest mismatch
  kDesync,      // range decoder left the valid interval
  kFormat,      // malformed container, wrong magic/version/model
  kNumeric,     // NaN/Inf produced during optimization
  kIo,          // filesystem failure
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::int64_t index = -1)
      : std::runtime_error(what), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Frame or symbol index the error refers to, -1 when not applicable.
  std::int64_t index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::int64_t index_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what,
                              std::int64_t index = -1) {
  throw Error(kind, what, index);
}

}  // namespace cevc
