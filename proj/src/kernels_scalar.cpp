// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/kernels.hpp"

namespace dpgwave::kernels {
namespace detail {

void outer_acc_cplx_scalar(double* m_re, double* m_im, const double* x_re,
                           const double* x_im, const double* y_re,
                           const double* y_im, double w, std::size_t m,
                           std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double ar = w * x_re[i];
    const double ai = w * x_im[i];
    double* row_re = m_re + i * n;
    double* row_im = m_im + i * n;
    for (std::size_t j = 0; j < n; ++j) {
      // conj(x_i) * y_j = (ar - i ai)(yr + i yi)
      row_re[j] += ar * y_re[j] + ai * y_im[j];
      row_im[j] += ar * y_im[j] - ai * y_re[j];
    }
  }
}

void outer_acc_real_scalar(double* mat, const double* x, const double* y,
                           double w, std::size_t m, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double a = w * x[i];
    double* row = mat + i * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += a * y[j];
  }
}

void axpy_cplx_scalar(double* out_re, double* out_im, double c_re, double c_im,
                      const double* phi, std::size_t n) {
  for (std::size_t q = 0; q < n; ++q) {
    out_re[q] += c_re * phi[q];
    out_im[q] += c_im * phi[q];
  }
}

double weighted_norm2_scalar(const double* w, const double* re,
                             const double* im, std::size_t n) {
  double s = 0.0;
  for (std::size_t q = 0; q < n; ++q) s += w[q] * (re[q] * re[q] + im[q] * im[q]);
  return s;
}

}  // namespace detail

const Kernels& scalar_ref() {
  static const Kernels k{detail::outer_acc_cplx_scalar,
                         detail::outer_acc_real_scalar,
                         detail::axpy_cplx_scalar,
                         detail::weighted_norm2_scalar, "scalar"};
  return k;
}

}  // namespace dpgwave::kernels
