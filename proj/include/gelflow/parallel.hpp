#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gelflow {

// Runs f(i) for i in [0, n) on up to `jobs` threads, contiguous chunks.
// Each index writes only its own output slot, so scheduling never affects
// results. The first exception thrown by a worker is rethrown on the caller.
template <typename F>
void parallel_for(std::size_t n, int jobs, F&& f) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(std::max(jobs, 1), n);
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    pool.emplace_back([&, lo, hi, w] {
      try {
        for (std::size_t i = lo; i < hi; ++i) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace gelflow
