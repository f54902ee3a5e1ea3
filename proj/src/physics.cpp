// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/physics.hpp"

#include <cmath>
#include <stdexcept>

#include "dpgwave/poly1d.hpp"

namespace dpgwave {

void adjoint_apply(int dim, double omega, double n2, const cplx v[2], cplx q,
                   const cplx grad_q[2], cplx div_v, cplx out_vec[2],
                   cplx& out_scal) {
  const cplx iw(0.0, omega);
  out_vec[0] = -(grad_q[0] + iw * v[0]);
  if (dim == 2) out_vec[1] = -(grad_q[1] + iw * v[1]);
  out_scal = -(div_v + iw * n2 * q);
}

namespace {

// sqrt(w^2 n^2 - kt^2) on the limiting-absorption branch: real positive when
// propagating, negative imaginary when evanescent (so exp(-i k_z z) decays).
cplx kz_branch(double omega, double n, double kt) {
  const double arg = omega * omega * n * n - kt * kt;
  if (arg >= 0.0) return cplx(std::sqrt(arg), 0.0);
  return cplx(0.0, -std::sqrt(-arg));
}

// Composite Gauss over [a,b] split at the given interior breakpoints (slab
// profiles are only C1 at the core interfaces, so panels must not straddle
// them).
template <typename F>
double integrate_piecewise(const F& f, double a, double b,
                           const std::vector<double>& breaks,
                           int panels_per_piece = 48, int pts = 12) {
  std::vector<double> edges{a};
  for (double c : breaks)
    if (c > a && c < b) edges.push_back(c);
  edges.push_back(b);
  std::sort(edges.begin(), edges.end());
  const QuadRule1D rule = gauss_rule(pts);
  double s = 0.0;
  for (std::size_t e = 0; e + 1 < edges.size(); ++e) {
    for (int pnl = 0; pnl < panels_per_piece; ++pnl) {
      const double pa = edges[e] + (edges[e + 1] - edges[e]) * pnl / panels_per_piece;
      const double pb = edges[e] +
                        (edges[e + 1] - edges[e]) * (pnl + 1) / panels_per_piece;
      for (std::size_t q = 0; q < rule.points.size(); ++q)
        s += (pb - pa) * rule.weights[q] * f(pa + (pb - pa) * rule.points[q]);
    }
  }
  return s;
}

}  // namespace

ModeSpec rectangular_mode(int m, double omega, double a, double n) {
  if (m < 1) throw std::invalid_argument("rectangular_mode: m >= 1");
  if (omega <= 0.0 || a <= 0.0) throw std::invalid_argument("rectangular_mode: omega, a > 0");
  ModeSpec mode;
  mode.index = m;
  const double kt = m * M_PI / a;
  const double scale = std::sqrt(2.0 / a);
  mode.profile = [=](double x) { return scale * std::sin(kt * x); };
  mode.profile_deriv = [=](double x) { return scale * kt * std::cos(kt * x); };
  mode.k_z = kz_branch(omega, n, kt);
  mode.propagating = mode.k_z.real() > 0.0;
  mode.impedance = (mode.k_z != 0.0) ? omega / mode.k_z : cplx(0.0);
  return mode;
}

ModeSpec line_mode(double omega, double n) {
  ModeSpec mode;
  mode.index = 1;
  mode.profile = [](double) { return 1.0; };
  mode.profile_deriv = [](double) { return 0.0; };
  mode.k_z = omega * n;
  mode.impedance = omega / mode.k_z;
  mode.propagating = true;
  return mode;
}

std::vector<SlabRoot> slab_dispersion_roots(double v_number) {
  if (v_number <= 0.0) throw std::invalid_argument("slab_dispersion_roots: V > 0");
  std::vector<SlabRoot> roots;
  // Branch m lives on X in (m pi/2, min((m+1) pi/2, V)); g is increasing from
  // negative to positive there, with g(X) = X tan(X - m pi/2) - sqrt(V^2-X^2).
  for (int m = 0;; ++m) {
    const double lo = m * M_PI / 2.0;
    if (lo >= v_number) break;
    const double hi = std::min(lo + M_PI / 2.0, v_number);
    auto g = [&](double x) {
      return x * std::tan(x - lo) - std::sqrt(std::max(0.0, v_number * v_number - x * x));
    };
    double a = lo + 1e-12 * (1.0 + lo), b = hi - 1e-13 * hi;
    if (g(a) >= 0.0 || g(b) <= 0.0) continue;  // V exactly at a cutoff
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (a + b);
      (g(mid) < 0.0 ? a : b) = mid;
      if (b - a < 1e-13) break;
    }
    SlabRoot r;
    r.X = 0.5 * (a + b);
    r.Y = std::sqrt(std::max(0.0, v_number * v_number - r.X * r.X));
    r.parity = m % 2;
    roots.push_back(r);
  }
  return roots;
}

double SlabGeometry::numerical_aperture() const {
  return std::sqrt(n_core * n_core - n_clad * n_clad);
}

std::vector<ModeSpec> slab_modes(const SlabGeometry& geom, double omega) {
  const double d = geom.half_width;
  const double v = omega * d * geom.numerical_aperture();
  std::vector<SlabRoot> roots = slab_dispersion_roots(v);
  std::vector<ModeSpec> modes;
  int index = 1;
  for (const SlabRoot& r : roots) {
    const double kappa = r.X / d;
    const double gamma = r.Y / d;
    const double xc = geom.center;
    const bool odd = r.parity == 1;
    auto raw = [=](double x) {
      const double t = x - xc;
      if (std::abs(t) <= d)
        return odd ? std::sin(kappa * t) : std::cos(kappa * t);
      const double edge = odd ? std::sin(kappa * d) : std::cos(kappa * d);
      const double sgn = (!odd || t > 0.0) ? 1.0 : -1.0;
      return sgn * edge * std::exp(-gamma * (std::abs(t) - d));
    };
    auto raw_deriv = [=](double x) {
      const double t = x - xc;
      if (std::abs(t) <= d)
        return odd ? kappa * std::cos(kappa * t) : -kappa * std::sin(kappa * t);
      const double edge = odd ? std::sin(kappa * d) : std::cos(kappa * d);
      const double sgn = (!odd || t > 0.0) ? 1.0 : -1.0;
      // outward decay: d/dx exp(-gamma |t|) = -gamma sign(t) exp(..)
      return -gamma * sgn * (t > 0.0 ? 1.0 : -1.0) * edge *
             std::exp(-gamma * (std::abs(t) - d));
    };
    const double nrm2 = integrate_piecewise(
        [&](double x) { return raw(x) * raw(x); }, 0.0, 1.0,
        {xc - d, xc + d});
    const double scale = 1.0 / std::sqrt(nrm2);
    ModeSpec mode;
    mode.index = index++;
    mode.profile = [=](double x) { return scale * raw(x); };
    mode.profile_deriv = [=](double x) { return scale * raw_deriv(x); };
    mode.k_z = std::sqrt(omega * omega * geom.n_core * geom.n_core - kappa * kappa);
    mode.impedance = omega / mode.k_z;
    mode.propagating = true;
    modes.push_back(std::move(mode));
  }
  return modes;
}

double v_number(double lambda, double r_core, double na) {
  if (lambda <= 0.0 || r_core <= 0.0 || na < 0.0)
    throw std::invalid_argument("v_number: arguments must be positive");
  return 2.0 * M_PI * r_core * na / lambda;
}

double confinement(const ModeSpec& mode, double core_lo, double core_hi) {
  auto f2 = [&](double x) { return mode.profile(x) * mode.profile(x); };
  const std::vector<double> breaks{core_lo, core_hi};
  return integrate_piecewise(f2, core_lo, core_hi, breaks) /
         integrate_piecewise(f2, 0.0, 1.0, breaks);
}

WaveProblem rectangular_problem(int dim, int excited_mode, int p, int dp,
                                double alpha, double n, int n_modes) {
  WaveProblem prob;
  prob.dim = dim;
  prob.p = p;
  prob.dp = dp;
  prob.norm.alpha = alpha;
  prob.n_by_label.fill(n);
  prob.excited_mode = excited_mode;
  if (dim == 1) {
    prob.omega = 2.0 * M_PI / n;  // k_z = w n = 2 pi, unit wavelength
    prob.modes = {line_mode(prob.omega, n)};
    prob.excited_mode = 1;
  } else {
    // choose w so the excited mode has k_z = 2 pi
    const double kt = excited_mode * M_PI;
    prob.omega = std::sqrt(4.0 * M_PI * M_PI + kt * kt) / n;
    for (int m = 1; m <= n_modes; ++m)
      prob.modes.push_back(rectangular_mode(m, prob.omega, 1.0, n));
  }
  return prob;
}

WaveProblem slab_problem(const SlabGeometry& geom, double v_number,
                         int excited_mode, int p, int dp, double alpha) {
  WaveProblem prob;
  prob.dim = 2;
  prob.p = p;
  prob.dp = dp;
  prob.norm.alpha = alpha;
  prob.omega = v_number / (geom.half_width * geom.numerical_aperture());
  prob.n_by_label[std::size_t(DomainLabel::bulk)] = geom.n_clad;
  prob.n_by_label[std::size_t(DomainLabel::core_inner)] = geom.n_core;
  prob.n_by_label[std::size_t(DomainLabel::core_outer)] = geom.n_core;
  prob.n_by_label[std::size_t(DomainLabel::cladding_inner)] = geom.n_clad;
  prob.n_by_label[std::size_t(DomainLabel::cladding_outer)] = geom.n_clad;
  prob.modes = slab_modes(geom, prob.omega);
  if (excited_mode < 1 || excited_mode > int(prob.modes.size()))
    throw std::invalid_argument("slab_problem: excited mode not guided");
  prob.excited_mode = excited_mode;
  prob.output_bc = OutputBc::impedance_modal;
  return prob;
}

cplx ExactModeField::pressure(double x, double z) const {
  return amp * mode->profile(x) * std::exp(cplx(0.0, -1.0) * mode->k_z * z);
}

cplx ExactModeField::u_x(double x, double z) const {
  return amp * cplx(0.0, 1.0 / omega) * mode->profile_deriv(x) *
         std::exp(cplx(0.0, -1.0) * mode->k_z * z);
}

cplx ExactModeField::u_z(double x, double z) const {
  return (mode->k_z / omega) * pressure(x, z);
}

}  // namespace dpgwave
