#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace hitlab {

/// Worker count from HITLAB_WORKERS, else hardware concurrency.
unsigned default_workers();

/// Process-wide override used by the CLI `--workers` flag (0 = default).
void set_default_workers(unsigned workers);

/// Calls body(i) for i in [0, count). Every index is visited exactly once and
/// callers write results to slot i, so output never depends on `workers`.
/// The first exception thrown by a body is rethrown after all workers join.
template <class Body>
void parallel_for(std::size_t count, unsigned workers, Body&& body) {
  if (workers == 0) workers = default_workers();
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  pool.clear();
  if (failure) std::rethrow_exception(failure);
}

/// Fixed chunking for associative tallies: chunk boundaries depend only on
/// `count`, never on the worker count.
inline constexpr std::size_t kTallyChunk = 4096;

inline std::size_t chunk_count(std::size_t count) {
  return (count + kTallyChunk - 1) / kTallyChunk;
}

}  // namespace hitlab
