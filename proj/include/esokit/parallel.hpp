#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace esokit {

// Splits [0, count) into `threads` contiguous chunks and runs body(chunk, begin, end)
// on each. Chunk boundaries depend only on (count, threads), so callers that
// merge per-chunk results in chunk order get deterministic output.
template <class Body>
void parallel_chunks(std::size_t count, int threads, Body&& body) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), count));
  const std::size_t step = (count + workers - 1) / std::max<std::size_t>(workers, 1);
  if (workers == 1) {
    body(std::size_t{0}, std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(count, w * step);
    const std::size_t end = std::min(count, begin + step);
    pool.emplace_back([&body, w, begin, end] { body(w, begin, end); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace esokit
