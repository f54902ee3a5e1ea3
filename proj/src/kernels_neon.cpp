// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// NEON variants (aarch64). Two doubles per vector; same sums as the scalar
// reference up to fused-multiply-add rounding.

#include "dpgwave/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace dpgwave::kernels {
namespace detail {

void outer_acc_cplx_neon(double* m_re, double* m_im, const double* x_re,
                         const double* x_im, const double* y_re,
                         const double* y_im, double w, std::size_t m,
                         std::size_t n) {
  const std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double ar = w * x_re[i];
    const double ai = w * x_im[i];
    const float64x2_t var = vdupq_n_f64(ar);
    const float64x2_t vai = vdupq_n_f64(ai);
    double* row_re = m_re + i * n;
    double* row_im = m_im + i * n;
    std::size_t j = 0;
    for (; j < n2; j += 2) {
      const float64x2_t yr = vld1q_f64(y_re + j);
      const float64x2_t yi = vld1q_f64(y_im + j);
      float64x2_t rr = vld1q_f64(row_re + j);
      float64x2_t ri = vld1q_f64(row_im + j);
      rr = vfmaq_f64(rr, var, yr);
      rr = vfmaq_f64(rr, vai, yi);
      ri = vfmaq_f64(ri, var, yi);
      ri = vfmsq_f64(ri, vai, yr);
      vst1q_f64(row_re + j, rr);
      vst1q_f64(row_im + j, ri);
    }
    for (; j < n; ++j) {
      row_re[j] += ar * y_re[j] + ai * y_im[j];
      row_im[j] += ar * y_im[j] - ai * y_re[j];
    }
  }
}

void outer_acc_real_neon(double* mat, const double* x, const double* y,
                         double w, std::size_t m, std::size_t n) {
  const std::size_t n2 = n & ~std::size_t(1);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = w * x[i];
    const float64x2_t va = vdupq_n_f64(a);
    double* row = mat + i * n;
    std::size_t j = 0;
    for (; j < n2; j += 2) {
      vst1q_f64(row + j, vfmaq_f64(vld1q_f64(row + j), va, vld1q_f64(y + j)));
    }
    for (; j < n; ++j) row[j] += a * y[j];
  }
}

void axpy_cplx_neon(double* out_re, double* out_im, double c_re, double c_im,
                    const double* phi, std::size_t n) {
  const float64x2_t vr = vdupq_n_f64(c_re);
  const float64x2_t vi = vdupq_n_f64(c_im);
  const std::size_t n2 = n & ~std::size_t(1);
  std::size_t q = 0;
  for (; q < n2; q += 2) {
    const float64x2_t p = vld1q_f64(phi + q);
    vst1q_f64(out_re + q, vfmaq_f64(vld1q_f64(out_re + q), vr, p));
    vst1q_f64(out_im + q, vfmaq_f64(vld1q_f64(out_im + q), vi, p));
  }
  for (; q < n; ++q) {
    out_re[q] += c_re * phi[q];
    out_im[q] += c_im * phi[q];
  }
}

double weighted_norm2_neon(const double* w, const double* re, const double* im,
                           std::size_t n) {
  float64x2_t acc = vdupq_n_f64(0.0);
  const std::size_t n2 = n & ~std::size_t(1);
  std::size_t q = 0;
  for (; q < n2; q += 2) {
    const float64x2_t r = vld1q_f64(re + q);
    const float64x2_t i = vld1q_f64(im + q);
    const float64x2_t mag = vfmaq_f64(vmulq_f64(r, r), i, i);
    acc = vfmaq_f64(acc, vld1q_f64(w + q), mag);
  }
  double s = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
  for (; q < n; ++q) s += w[q] * (re[q] * re[q] + im[q] * im[q]);
  return s;
}

}  // namespace detail

const Kernels* neon_kernels() {
  static const Kernels k{detail::outer_acc_cplx_neon,
                         detail::outer_acc_real_neon, detail::axpy_cplx_neon,
                         detail::weighted_norm2_neon, "neon"};
  return &k;
}

}  // namespace dpgwave::kernels

#else

namespace dpgwave::kernels {
const Kernels* neon_kernels() { return nullptr; }
}  // namespace dpgwave::kernels

#endif
