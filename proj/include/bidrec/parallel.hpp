#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace bidrec {

/// 0 means one thread per hardware core.
inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Splits [0, n) into `parts` contiguous ranges and calls fn(part, begin, end)
/// for each, on up to `threads` worker threads. Part boundaries depend only on
/// n and parts, never on thread count.
template <typename Fn>
void for_each_part(std::size_t n, std::size_t parts, unsigned threads, Fn&& fn) {
  parts = std::max<std::size_t>(1, parts);
  auto run_part = [&](std::size_t p) {
    const std::size_t begin = n * p / parts;
    const std::size_t end = n * (p + 1) / parts;
    fn(p, begin, end);
  };
  threads = std::max(1u, threads);
  if (threads == 1 || parts == 1) {
    for (std::size_t p = 0; p < parts; ++p) run_part(p);
    return;
  }
  std::vector<std::thread> workers;
  const std::size_t nworkers = std::min<std::size_t>(threads, parts);
  for (std::size_t w = 0; w < nworkers; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t p = w; p < parts; p += nworkers) run_part(p);
    });
  }
  for (auto& t : workers) t.join();
}

}  // namespace bidrec
