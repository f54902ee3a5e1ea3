// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>

namespace dpgwave {

/// Process-wide worker count for element loops (1 = serial).
void set_thread_count(int n);
int thread_count();

/// Run fn(i) for i in [0, n) on the configured number of threads. Results
/// must be written to disjoint slots; merging stays with the caller so that
/// output order is deterministic.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn);

}  // namespace dpgwave
