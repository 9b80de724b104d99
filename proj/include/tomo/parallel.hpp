#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace tomo {

/// Resolves a requested thread count; 0 means "all hardware threads".
inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, n) into `threads` contiguous chunks and runs fn(chunk, begin, end)
/// for each. Chunk boundaries depend only on n and the thread count, so any
/// per-chunk partial results can be merged in chunk order deterministically.
template <class Fn>
void parallel_chunks(std::size_t n, unsigned threads, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(
      std::max<std::size_t>(1, std::min<std::size_t>(resolve_threads(threads), n)));
  auto bound = [&](unsigned c) { return n * c / workers; };
  if (workers == 1) {
    fn(0u, std::size_t{0}, n);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (unsigned c = 1; c < workers; ++c) {
    pool.emplace_back([&, c] {
      try {
        fn(c, bound(c), bound(c + 1));
      } catch (...) {
        errors[c] = std::current_exception();
      }
    });
  }
  try {
    fn(0u, bound(0), bound(1));
  } catch (...) {
    errors[0] = std::current_exception();
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Element-wise parallel loop; fn(i) must only write state owned by index i.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  parallel_chunks(n, threads, [&](unsigned, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
  });
}

/// Number of chunks parallel_chunks will use for n items.
inline unsigned chunk_count(std::size_t n, unsigned threads) {
  return static_cast<unsigned>(
      std::max<std::size_t>(1, std::min<std::size_t>(resolve_threads(threads), n)));
}

}  // namespace tomo
