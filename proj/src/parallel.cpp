#include "ngi/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace ngi::parallel {

namespace {
int g_threads = 0;
}

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }

int threads() {
  if (g_threads > 0) return g_threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

void for_each_index(std::size_t n, const std::function<void(std::size_t)>& f) {
  int nthreads = threads();
  if (nthreads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      f(i);
    }
  };
  std::vector<std::thread> pool;
  int spawned = static_cast<int>(std::min<std::size_t>(n, nthreads));
  pool.reserve(spawned - 1);
  for (int t = 1; t < spawned; ++t) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
}

}  // namespace ngi::parallel
