// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include <atomic>
#include <cstring>

#include "dpgwave/kernels.hpp"

namespace dpgwave::kernels {

const Kernels* avx2_kernels();
const Kernels* neon_kernels();

namespace {

const Kernels* detect() {
  if (const Kernels* k = neon_kernels()) return k;
#if defined(__x86_64__) || defined(_M_X64)
  if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) {
    if (const Kernels* k = avx2_kernels()) return k;
  }
#endif
  return &scalar_ref();
}

std::atomic<const Kernels*> g_active{nullptr};

}  // namespace

const Kernels& active() {
  const Kernels* k = g_active.load(std::memory_order_acquire);
  if (!k) {
    k = detect();
    g_active.store(k, std::memory_order_release);
  }
  return *k;
}

bool force_isa(const char* name) {
  if (!name) {
    g_active.store(detect(), std::memory_order_release);
    return true;
  }
  const Kernels* k = nullptr;
  if (!std::strcmp(name, "scalar")) k = &scalar_ref();
  if (!std::strcmp(name, "avx2")) k = avx2_kernels();
  if (!std::strcmp(name, "neon")) k = neon_kernels();
  if (!k) return false;
  g_active.store(k, std::memory_order_release);
  return true;
}

}  // namespace dpgwave::kernels
