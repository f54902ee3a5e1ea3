// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

namespace dpgwave::kernels {

// Quadrature contraction kernels used by the element assembly loops.
// Complex data is passed in split layout (separate real/imaginary arrays);
// matrices are row-major. Every kernel exists as a scalar reference
// implementation and, where the host CPU supports it, a SIMD variant
// selected once at startup. All variants compute the same sums; they may
// differ by floating-point rounding only (fused multiply-add, reassociation
// within a vector lane).

// M (m x n) += w * conj(x) * y^T, complex split.
using OuterAccCplxFn = void (*)(double* m_re, double* m_im, const double* x_re,
                                const double* x_im, const double* y_re,
                                const double* y_im, double w, std::size_t m,
                                std::size_t n);

// M (m x n) += w * x * y^T, real.
using OuterAccRealFn = void (*)(double* mat, const double* x, const double* y,
                                double w, std::size_t m, std::size_t n);

// out += (c_re + i c_im) * phi, n entries (phi real).
using AxpyCplxFn = void (*)(double* out_re, double* out_im, double c_re,
                            double c_im, const double* phi, std::size_t n);

// returns sum_q w[q] * (re[q]^2 + im[q]^2).
using WeightedNorm2Fn = double (*)(const double* w, const double* re,
                                   const double* im, std::size_t n);

struct Kernels {
  OuterAccCplxFn outer_acc_cplx;
  OuterAccRealFn outer_acc_real;
  AxpyCplxFn axpy_cplx;
  WeightedNorm2Fn weighted_norm2;
  const char* isa;
};

/// Kernels selected for the host CPU (scalar, avx2, or neon).
const Kernels& active();

/// Scalar reference kernels, always available.
const Kernels& scalar_ref();

/// Test hook: force a specific ISA ("scalar", "avx2", "neon") or nullptr to
/// restore automatic selection. Returns false if the ISA is unavailable.
bool force_isa(const char* name);

}  // namespace dpgwave::kernels
