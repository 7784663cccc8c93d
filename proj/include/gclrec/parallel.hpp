#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace gclrec {

/// Number of worker threads to use. 0 = hardware concurrency.
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Chunk count used for every parallel reduction. Fixed (independent of the
/// thread count) so that partial sums are always combined in the same order
/// and results are bitwise identical no matter how many workers run.
inline constexpr int kReduceChunks = 64;

/// Runs fn(begin, end) over disjoint index ranges. Each output element must
/// be written by exactly one range, which keeps the result deterministic.
template <typename Fn>
void parallel_for(std::int64_t n, int threads, Fn&& fn) {
  threads = resolve_threads(threads);
  if (n <= 0) return;
  if (threads <= 1 || n < 2 * threads) {
    fn(std::int64_t{0}, n);
    return;
  }
  const std::int64_t chunk = (n + threads - 1) / threads;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (std::int64_t lo = 0; lo < n; lo += chunk) {
    const std::int64_t hi = std::min(n, lo + chunk);
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

/// Parallel reduction over [0, n). fn(begin, end, acc) accumulates into a
/// chunk-local accumulator; combine(total, acc) folds chunk results in chunk
/// order. The chunk grid is fixed, so the bits do not depend on the thread
/// count.
template <typename Acc, typename Fn, typename Combine>
Acc parallel_reduce(std::int64_t n, int threads, Acc init, Fn&& fn,
                    Combine&& combine) {
  threads = resolve_threads(threads);
  if (n <= 0) return init;
  const int chunks = std::min<std::int64_t>(kReduceChunks, n);
  const std::int64_t chunk = (n + chunks - 1) / chunks;
  std::vector<Acc> partial(static_cast<std::size_t>(chunks), init);
  parallel_for(chunks, threads, [&](std::int64_t c0, std::int64_t c1) {
    for (std::int64_t c = c0; c < c1; ++c) {
      const std::int64_t lo = c * chunk;
      const std::int64_t hi = std::min(n, lo + chunk);
      if (lo < hi) fn(lo, hi, partial[static_cast<std::size_t>(c)]);
    }
  });
  Acc total = init;
  for (const Acc& p : partial) combine(total, p);
  return total;
}

}  // namespace gclrec
