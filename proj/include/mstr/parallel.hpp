#pragma once

#include <algorithm>
#include <exception>
#include <thread>
#include <vector>

namespace mstr {

/// Runs fn(i) for i in [begin, end) over up to `threads` workers in contiguous
/// chunks.  fn must only write state owned by index i.  The first exception
/// thrown by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(long begin, long end, int threads, Fn&& fn) {
  const long n = end - begin;
  if (n <= 0) return;
  const long workers = std::clamp<long>(threads, 1, n);
  if (workers == 1) {
    for (long i = begin; i < end; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (long w = 0; w < workers; ++w) {
    const long lo = begin + n * w / workers;
    const long hi = begin + n * (w + 1) / workers;
    pool.emplace_back([&, lo, hi, w] {
      try {
        for (long i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline int default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace mstr
