// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The photocore-sim Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <exception>

namespace pcsim::detail {

// Runs fn(i) for i in [0, count) across OpenMP threads. An exception cannot
// leave a parallel region, so the one from the lowest failing index is kept
// and rethrown afterwards; which error surfaces does not depend on scheduling.
template <class Fn> void parallel_for(std::size_t count, Fn &&fn) {
  std::exception_ptr error;
  auto error_at = static_cast<std::int64_t>(count);
  const auto n = static_cast<std::int64_t>(count);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(pcsim_parallel_error)
      if (i < error_at) {
        error_at = i;
        error = std::current_exception();
      }
    }
  }
  if (error) {
    std::rethrow_exception(error);
  }
}

} // namespace pcsim::detail
