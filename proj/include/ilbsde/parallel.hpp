#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ilbsde {

/// Execution context shared by every grid sweep and sampling check.
///
/// Work is split into chunks of a fixed size that does not depend on the
/// worker count, and per-chunk results are reduced in chunk order. Results are
/// therefore bit-identical for any `threads` value.
struct Exec {
  unsigned threads = 1;
  std::size_t chunk = 1024;
};

/// Runs `fn(chunk_index, begin, end)` over [0, n) in fixed-size chunks.
template <class Fn>
void for_chunks(const Exec& exec, std::size_t n, Fn&& fn) {
  if (n == 0) return;
  const std::size_t chunk = std::max<std::size_t>(exec.chunk, 1);
  const std::size_t nchunks = (n + chunk - 1) / chunk;
  const unsigned workers =
      static_cast<unsigned>(std::min<std::size_t>(std::max(exec.threads, 1u), nchunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < nchunks; ++c) fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t c = next.fetch_add(1);
        if (c >= nchunks) return;
        try {
          fn(c, c * chunk, std::min(n, (c + 1) * chunk));
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(nchunks);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Maps each chunk to a partial result and folds the partials in chunk order.
template <class T, class MapFn, class FoldFn>
T map_reduce_chunks(const Exec& exec, std::size_t n, T init, MapFn&& map, FoldFn&& fold) {
  const std::size_t chunk = std::max<std::size_t>(exec.chunk, 1);
  const std::size_t nchunks = n == 0 ? 0 : (n + chunk - 1) / chunk;
  std::vector<T> partial(nchunks, init);
  for_chunks(exec, n, [&](std::size_t c, std::size_t b, std::size_t e) { partial[c] = map(b, e); });
  T acc = init;
  for (auto& p : partial) acc = fold(std::move(acc), std::move(p));
  return acc;
}

}  // namespace ilbsde
