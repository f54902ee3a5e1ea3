// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/poly1d.hpp"

#include <cmath>
#include <stdexcept>

namespace dpgwave {

QuadRule1D gauss_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_rule: n must be >= 1");
  QuadRule1D r;
  r.points.resize(n);
  r.weights.resize(n);
  // Newton iteration on P_n over [-1,1], then map to [0,1].
  for (int i = 0; i < n; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      if (n == 1) p1 = x;
      for (int j = 2; j <= n; ++j) {
        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      const double pn = (n == 1) ? x : p1;
      const double pnm1 = (n == 1) ? 1.0 : p0;
      pp = n * (x * pn - pnm1) / (x * x - 1.0);
      const double dx = pn / pp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.points[i] = 0.5 * (1.0 - x);  // descending cos -> ascending t
    r.weights[i] = 1.0 / ((1.0 - x * x) * pp * pp);
  }
  return r;
}

QuadRule2D tensor_rule(int nx, int nz) {
  QuadRule1D rx = gauss_rule(nx), rz = gauss_rule(nz);
  QuadRule2D r;
  r.nx = nx;
  r.nz = nz;
  r.px.resize(std::size_t(nx) * nz);
  r.pz.resize(std::size_t(nx) * nz);
  r.weights.resize(std::size_t(nx) * nz);
  std::size_t q = 0;
  for (int iz = 0; iz < nz; ++iz)
    for (int ix = 0; ix < nx; ++ix, ++q) {
      r.px[q] = rx.points[ix];
      r.pz[q] = rz.points[iz];
      r.weights[q] = rx.weights[ix] * rz.weights[iz];
    }
  return r;
}

namespace poly {

void legendre_table(int k, const std::vector<double>& t, std::vector<double>& vals,
                    std::vector<double>& ders) {
  const std::size_t np = t.size();
  vals.assign(std::size_t(k + 1) * np, 0.0);
  ders.assign(std::size_t(k + 1) * np, 0.0);
  for (std::size_t q = 0; q < np; ++q) {
    const double s = 2.0 * t[q] - 1.0;
    double p0 = 1.0, p1 = s, d0 = 0.0, d1 = 1.0;
    vals[q] = 1.0;
    if (k >= 1) {
      vals[np + q] = s;
      ders[np + q] = 2.0;  // d/dt = 2 d/ds
    }
    for (int j = 2; j <= k; ++j) {
      const double p2 = ((2 * j - 1) * s * p1 - (j - 1) * p0) / j;
      const double d2 = ((2 * j - 1) * (p1 + s * d1) - (j - 1) * d0) / j;
      vals[std::size_t(j) * np + q] = p2;
      ders[std::size_t(j) * np + q] = 2.0 * d2;
      p0 = p1;
      p1 = p2;
      d0 = d1;
      d1 = d2;
    }
  }
}

void lobatto_table(int k, const std::vector<double>& t, std::vector<double>& vals,
                   std::vector<double>& ders) {
  const std::size_t np = t.size();
  vals.assign(std::size_t(k + 1) * np, 0.0);
  ders.assign(std::size_t(k + 1) * np, 0.0);
  std::vector<double> lv, ld;
  legendre_table(k, t, lv, ld);
  for (std::size_t q = 0; q < np; ++q) {
    vals[q] = 1.0 - t[q];
    ders[q] = -1.0;
    if (k >= 1) {
      vals[np + q] = t[q];
      ders[np + q] = 1.0;
    }
    // N_j = (P_j - P_{j-2}) / sqrt(2(2j-1)); N_j' = sqrt((2j-1)/2) P_{j-1}
    // with an extra factor 2 from the [0,1] map, already in ld.
    for (int j = 2; j <= k; ++j) {
      const double c = 1.0 / std::sqrt(2.0 * (2 * j - 1));
      vals[std::size_t(j) * np + q] =
          c * (lv[std::size_t(j) * np + q] - lv[std::size_t(j - 2) * np + q]);
      ders[std::size_t(j) * np + q] =
          c * (ld[std::size_t(j) * np + q] - ld[std::size_t(j - 2) * np + q]);
    }
  }
}

double legendre_value(int n, double t) {
  std::vector<double> v, d;
  legendre_table(n, {t}, v, d);
  return v[std::size_t(n)];
}

double lobatto_value(int n, double t) {
  std::vector<double> v, d;
  lobatto_table(n, {t}, v, d);
  return v[std::size_t(n)];
}

}  // namespace poly

}  // namespace dpgwave
