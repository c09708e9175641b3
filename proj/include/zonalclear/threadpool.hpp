#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace zonalclear {

// Worker count resolution: explicit > ZONAL_CLEAR_THREADS > hardware.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("ZONAL_CLEAR_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

// Runs fn(i) for i in [0, jobs) on up to `threads` workers and joins.
// Results must be written to pre-sized, per-index slots by the caller.
template <typename Fn>
void parallel_for(int jobs, int threads, Fn&& fn) {
  threads = std::min(std::max(threads, 1), std::max(jobs, 1));
  if (jobs <= 0) return;
  if (threads == 1 || jobs == 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= jobs) return;
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace zonalclear
