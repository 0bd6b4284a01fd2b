#pragma once

// Minimal ordered fan-out over independent work items (Monte Carlo paths).
// Workers process strided item subsets and write into caller-owned slots
// indexed by item, so any reduction done afterwards in item order is
// bit-reproducible regardless of the worker count.

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace fsde {

/// Resolves a requested worker count: 0 means "use available parallelism".
inline unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? hw : 1;
}

/// Runs fn(i) for i in [0, count) on `workers` threads. If several items
/// throw, the exception of the lowest item index is rethrown, so failure
/// reporting does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = resolve_workers(workers);
  if (count == 0) return;
  if (workers == 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  if (workers > count) workers = static_cast<unsigned>(count);

  std::mutex failure_mutex;
  std::exception_ptr first_error = nullptr;
  std::size_t first_error_index = count;

  auto body = [&](unsigned worker_id) {
    for (std::size_t i = worker_id; i < count; i += workers) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
        return;
      }
    }
  };

  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body, w);
  for (auto& t : pool) t.join();

  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace fsde
