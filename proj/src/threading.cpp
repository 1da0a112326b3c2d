#include "fewdp/threading.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace fewdp {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int n) { g_threads.store(n < 1 ? 1 : n, std::memory_order_relaxed); }

int thread_count() { return g_threads.load(std::memory_order_relaxed); }

void parallel_for(std::size_t n, std::size_t chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  if (chunk == 0) chunk = 1;
  const std::size_t n_chunks = (n + chunk - 1) / chunk;
  const int workers = thread_count();
  if (workers <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c) {
      const std::size_t b = c * chunk;
      fn(b, b + chunk < n ? b + chunk : n);
    }
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t c = next.fetch_add(1, std::memory_order_relaxed);
      if (c >= n_chunks) return;
      const std::size_t b = c * chunk;
      fn(b, b + chunk < n ? b + chunk : n);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(n_chunks < static_cast<std::size_t>(workers)
                                         ? n_chunks
                                         : static_cast<std::size_t>(workers));
  pool.reserve(spawn - 1);
  for (int i = 1; i < spawn; ++i) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

}  // namespace fewdp
