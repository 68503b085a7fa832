#pragma once

#include <thread>
#include <vector>

namespace nalda {

inline int effective_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Fork-join loop over [0, n) split into contiguous chunks. Safe (and bitwise
// thread-count-independent) as long as fn(i) writes only to slot i.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  threads = std::min(effective_threads(threads), n);
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> workers;
  workers.reserve(static_cast<std::size_t>(threads) - 1);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 1; t < threads; ++t) {
    const int lo = t * chunk;
    const int hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    workers.emplace_back([&fn, lo, hi] {
      for (int i = lo; i < hi; ++i) fn(i);
    });
  }
  for (int i = 0; i < std::min(chunk, n); ++i) fn(i);
  for (auto& w : workers) w.join();
}

}  // namespace nalda
