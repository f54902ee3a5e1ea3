// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/parallel.hpp"

#include <atomic>
#include <thread>
#include <vector>

namespace dpgwave {

namespace {
int g_threads = 1;
}

void set_thread_count(int n) {
  if (n < 1) n = int(std::thread::hardware_concurrency());
  g_threads = n < 1 ? 1 : n;
}

int thread_count() { return g_threads; }

void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  const int nt = g_threads;
  if (nt <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      fn(i);
    }
  };
  std::vector<std::thread> pool;
  const int spawn = int(std::min<std::size_t>(std::size_t(nt), n)) - 1;
  pool.reserve(std::size_t(spawn));
  for (int t = 0; t < spawn; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();
}

}  // namespace dpgwave
