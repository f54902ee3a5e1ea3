// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace dpgwave {

/// Gauss-Legendre rule on [0,1] with n points (exact for degree 2n-1).
struct QuadRule1D {
  std::vector<double> points;
  std::vector<double> weights;
};

QuadRule1D gauss_rule(int n);

/// Tensor rule on [0,1]^2; points ordered x-fastest.
struct QuadRule2D {
  std::vector<double> px, pz, weights;  // flattened, size nx*nz
  int nx = 0, nz = 0;
};

QuadRule2D tensor_rule(int nx, int nz);

namespace poly {

// Legendre polynomials P_0..P_k mapped to [0,1], L2-orthogonal. vals/ders are
// (k+1) x npts row-major; ders are derivatives with respect to t in [0,1].
void legendre_table(int k, const std::vector<double>& t, std::vector<double>& vals,
                    std::vector<double>& ders);

// Hierarchical H1 shapes on [0,1]: N_0 = 1-t, N_1 = t, then integrated
// Legendre kernels N_j (j >= 2) vanishing at both endpoints; order k gives
// k+1 functions.
void lobatto_table(int k, const std::vector<double>& t, std::vector<double>& vals,
                   std::vector<double>& ders);

double legendre_value(int n, double t);
double lobatto_value(int n, double t);

}  // namespace poly

}  // namespace dpgwave
