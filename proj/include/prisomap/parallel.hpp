#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace prisomap {

// Process-wide worker cap. 0 means "use hardware concurrency".
void set_max_threads(unsigned threads) noexcept;
unsigned max_threads() noexcept;

// Runs body(i) for every i in [0, count). Work is split into contiguous
// blocks, so any body that writes only to slot i produces results that do not
// depend on the thread count.
template <typename Body>
void parallel_for(std::size_t count, Body&& body, unsigned threads = 0) {
  unsigned workers = threads == 0 ? max_threads() : threads;
  if (workers > count) workers = static_cast<unsigned>(count);
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t block = (count + workers - 1) / workers;
  for (unsigned w = 0; w < workers; ++w) {
    const std::size_t begin = w * block;
    const std::size_t end = begin + block < count ? begin + block : count;
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace prisomap
