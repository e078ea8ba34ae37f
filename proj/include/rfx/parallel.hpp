#pragma once

#include <algorithm>
#include <functional>
#include <thread>
#include <vector>

namespace rfx {

// Splits [0, total) into contiguous blocks, one per worker, and runs
// fn(first, last, worker_index) on each. Blocks are assigned statically so
// the partition (and anything derived from worker_index, e.g. RNG streams)
// does not depend on scheduling. Callers merge results in index order.
inline void parallel_blocks(long total, int workers,
                            const std::function<void(long, long, int)>& fn) {
  if (total <= 0) return;
  int w = std::max(1, workers);
  if (static_cast<long>(w) > total) w = static_cast<int>(total);
  if (w == 1) {
    fn(0, total, 0);
    return;
  }
  long chunk = (total + w - 1) / w;
  std::vector<std::thread> pool;
  pool.reserve(w);
  for (int i = 0; i < w; ++i) {
    long first = static_cast<long>(i) * chunk;
    long last = std::min(total, first + chunk);
    if (first >= last) break;
    pool.emplace_back(fn, first, last, i);
  }
  for (auto& t : pool) t.join();
}

}  // namespace rfx
