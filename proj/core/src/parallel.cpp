#include "covsde/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace covsde {

int worker_count() {
  if (const char* env = std::getenv("COVSDE_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n >= 1) return n;
    } catch (...) {
      // fall through to the hardware default
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw >= 1 ? static_cast<int>(hw) : 1;
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  if (count == 0) return;
  const int workers = worker_count();
  if (workers == 1 || count == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  // Chunked dynamic scheduling: each thread grabs a small contiguous range.
  const std::size_t chunk = 8;
  std::atomic<std::size_t> cursor{0};
  auto run = [&]() {
    for (;;) {
      const std::size_t begin = cursor.fetch_add(chunk);
      if (begin >= count) return;
      const std::size_t end = begin + chunk < count ? begin + chunk : count;
      for (std::size_t i = begin; i < end; ++i) body(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), count));
  pool.reserve(static_cast<std::size_t>(spawn));
  for (int t = 1; t < spawn; ++t) pool.emplace_back(run);
  run();
  for (auto& th : pool) th.join();
}

}  // namespace covsde
