#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace cbonn {

/// Number of worker threads used for per-particle maps. 1 means inline.
struct ExecPolicy {
  std::size_t workers = 1;

  static ExecPolicy sequential() { return {1}; }
  static ExecPolicy hardware() {
    return {std::max<std::size_t>(1, std::thread::hardware_concurrency())};
  }
};

/// Runs fn(i) for i in [0, n). Results must be written to per-index slots;
/// the chunking never changes what each index computes.
template <class Fn>
void parallel_for(std::size_t n, const ExecPolicy& policy, Fn&& fn) {
  const std::size_t workers = std::min(policy.workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> threads;
    threads.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      threads.emplace_back([&, w, lo, hi] {
        try {
          for (std::size_t i = lo; i < hi; ++i) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace cbonn
