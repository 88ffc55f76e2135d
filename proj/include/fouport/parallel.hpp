#pragma once
// Minimal work-stealing-free parallel loop. Work items write to disjoint
// slots, so scheduling cannot affect results; reductions happen afterwards
// in fixed order.
#include <atomic>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace fouport {

inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

// Runs fn(begin, end) over chunks of [0, n). Chunk boundaries depend only on
// n and chunk_size, never on the thread count.
inline void parallel_for(std::size_t n, int n_threads,
                         const std::function<void(std::size_t, std::size_t)>& fn,
                         std::size_t chunk_size = 256) {
  if (n == 0) return;
  n_threads = resolve_threads(n_threads);
  if (n_threads <= 1 || n <= chunk_size) {
    fn(0, n);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t begin = next.fetch_add(chunk_size);
      if (begin >= n) break;
      fn(begin, std::min(n, begin + chunk_size));
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(std::size_t(n_threads - 1));
  for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace fouport
