// Copyright 2026 The CEVC Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace cevc {

// Worker count: CEVC_THREADS when set to a positive integer, otherwise the
// hardware concurrency (at least 1).
int default_threads();

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = default).
// Each index runs at most once; the exception of the lowest failing index is
// rethrown after all workers stop. Results must be written to per-index slots.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace cevc
