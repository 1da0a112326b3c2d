#pragma once

#include <cstddef>
#include <functional>

namespace fewdp {

// Global worker count used by parallel_for. Defaults to 1.
void set_thread_count(int n);
int thread_count();

// Runs fn(begin, end) over fixed-size chunks of [0, n). Chunk boundaries
// depend only on (n, chunk), never on the worker count, so any writes keyed
// by chunk or by index are reproducible across thread counts.
void parallel_for(std::size_t n, std::size_t chunk,
                  const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace fewdp
