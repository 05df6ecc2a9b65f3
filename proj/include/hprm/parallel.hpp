#pragma once

#include <cstddef>
#include <exception>
#include <vector>

namespace hprm {

/// Runs fn(i) for every i in [0, n) on OpenMP threads when `parallel` is
/// set, serially otherwise. Exceptions are captured per index and the one
/// with the lowest index is rethrown after the loop.
template <typename Fn>
void parallel_for(std::size_t n, bool parallel, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  const auto count = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    try {
      fn(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace hprm
