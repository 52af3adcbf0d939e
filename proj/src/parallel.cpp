#include "prisomap/parallel.hpp"

#include <atomic>

namespace prisomap {

namespace {
std::atomic<unsigned> g_max_threads{0};
}

void set_max_threads(unsigned threads) noexcept { g_max_threads.store(threads); }

unsigned max_threads() noexcept {
  unsigned cap = g_max_threads.load();
  if (cap != 0) return cap;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

}  // namespace prisomap
