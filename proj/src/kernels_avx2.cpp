// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

// AVX2/FMA variants of the quadrature contraction kernels. This translation
// unit is compiled with -mavx2 -mfma on x86-64; the dispatcher only hands out
// these pointers after a cpuid check.

#include "dpgwave/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)

#include <immintrin.h>

namespace dpgwave::kernels {
namespace detail {

void outer_acc_cplx_avx2(double* m_re, double* m_im, const double* x_re,
                         const double* x_im, const double* y_re,
                         const double* y_im, double w, std::size_t m,
                         std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < m; ++i) {
    const double ar = w * x_re[i];
    const double ai = w * x_im[i];
    const __m256d var = _mm256_set1_pd(ar);
    const __m256d vai = _mm256_set1_pd(ai);
    double* row_re = m_re + i * n;
    double* row_im = m_im + i * n;
    std::size_t j = 0;
    for (; j < n4; j += 4) {
      const __m256d yr = _mm256_loadu_pd(y_re + j);
      const __m256d yi = _mm256_loadu_pd(y_im + j);
      __m256d rr = _mm256_loadu_pd(row_re + j);
      __m256d ri = _mm256_loadu_pd(row_im + j);
      rr = _mm256_fmadd_pd(var, yr, rr);
      rr = _mm256_fmadd_pd(vai, yi, rr);
      ri = _mm256_fmadd_pd(var, yi, ri);
      ri = _mm256_fnmadd_pd(vai, yr, ri);
      _mm256_storeu_pd(row_re + j, rr);
      _mm256_storeu_pd(row_im + j, ri);
    }
    for (; j < n; ++j) {
      row_re[j] += ar * y_re[j] + ai * y_im[j];
      row_im[j] += ar * y_im[j] - ai * y_re[j];
    }
  }
}

void outer_acc_real_avx2(double* mat, const double* x, const double* y,
                         double w, std::size_t m, std::size_t n) {
  const std::size_t n4 = n & ~std::size_t(3);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = w * x[i];
    const __m256d va = _mm256_set1_pd(a);
    double* row = mat + i * n;
    std::size_t j = 0;
    for (; j < n4; j += 4) {
      __m256d r = _mm256_loadu_pd(row + j);
      r = _mm256_fmadd_pd(va, _mm256_loadu_pd(y + j), r);
      _mm256_storeu_pd(row + j, r);
    }
    for (; j < n; ++j) row[j] += a * y[j];
  }
}

void axpy_cplx_avx2(double* out_re, double* out_im, double c_re, double c_im,
                    const double* phi, std::size_t n) {
  const __m256d vr = _mm256_set1_pd(c_re);
  const __m256d vi = _mm256_set1_pd(c_im);
  const std::size_t n4 = n & ~std::size_t(3);
  std::size_t q = 0;
  for (; q < n4; q += 4) {
    const __m256d p = _mm256_loadu_pd(phi + q);
    _mm256_storeu_pd(out_re + q,
                     _mm256_fmadd_pd(vr, p, _mm256_loadu_pd(out_re + q)));
    _mm256_storeu_pd(out_im + q,
                     _mm256_fmadd_pd(vi, p, _mm256_loadu_pd(out_im + q)));
  }
  for (; q < n; ++q) {
    out_re[q] += c_re * phi[q];
    out_im[q] += c_im * phi[q];
  }
}

double weighted_norm2_avx2(const double* w, const double* re, const double* im,
                           std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n4 = n & ~std::size_t(3);
  std::size_t q = 0;
  for (; q < n4; q += 4) {
    const __m256d r = _mm256_loadu_pd(re + q);
    const __m256d i = _mm256_loadu_pd(im + q);
    const __m256d mag = _mm256_fmadd_pd(i, i, _mm256_mul_pd(r, r));
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(w + q), mag, acc);
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double s = lanes[0] + lanes[1] + lanes[2] + lanes[3];
  for (; q < n; ++q) s += w[q] * (re[q] * re[q] + im[q] * im[q]);
  return s;
}

}  // namespace detail

const Kernels* avx2_kernels() {
  static const Kernels k{detail::outer_acc_cplx_avx2,
                         detail::outer_acc_real_avx2, detail::axpy_cplx_avx2,
                         detail::weighted_norm2_avx2, "avx2"};
  return &k;
}

}  // namespace dpgwave::kernels

#else

namespace dpgwave::kernels {
const Kernels* avx2_kernels() { return nullptr; }
}  // namespace dpgwave::kernels

#endif
