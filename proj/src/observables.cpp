// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/observables.hpp"

#include <cmath>
#include <stdexcept>

#include "dpgwave/poly1d.hpp"

namespace dpgwave {

namespace {

// Active elements whose z-extent contains the cut (right-closed only at the
// far end of the domain).
std::vector<int> elements_at(const Mesh& mesh, double z) {
  const double zmax = mesh.z_breaks.back();
  if (z < 0.0 || z > zmax)
    throw std::invalid_argument("cross-section position outside the domain");
  std::vector<int> out;
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const double lo = mesh.zlo(e), hi = mesh.zhi(e);
    if ((z >= lo && z < hi) || (z == zmax && hi == zmax && z > lo))
      out.push_back(e.id);
  }
  return out;
}

// integrate fn(p, u_z, x) over the cut at z with the given 1D rule per element
template <typename F>
void integrate_cut(const Mesh& mesh, const WaveProblem& problem,
                   const Solution& sol, double z, int n1d, const F& fn) {
  const QuadRule1D rule = gauss_rule(n1d);
  std::vector<cplx> vals;
  for (int id : elements_at(mesh, z)) {
    const Element& e = mesh.elements[std::size_t(id)];
    const double hz = mesh.zhi(e) - mesh.zlo(e);
    const double zeta = (z - mesh.zlo(e)) / hz;
    if (mesh.dim == 1) {
      eval_fields(mesh, e, problem, sol.field_coeffs[std::size_t(id)], {0.0},
                  {zeta}, vals);
      fn(vals[1], vals[0], 0.0, 1.0);
      continue;
    }
    const double x0 = mesh.xlo(e), hx = mesh.xhi(e) - x0;
    std::vector<double> xi = rule.points;
    std::vector<double> zv(xi.size(), zeta);
    eval_fields(mesh, e, problem, sol.field_coeffs[std::size_t(id)], xi, zv, vals);
    const std::size_t nq = xi.size();
    for (std::size_t q = 0; q < nq; ++q) {
      // components: u_x, u_z, p
      fn(vals[2 * nq + q], vals[nq + q], x0 + hx * xi[q],
         hx * rule.weights[q]);
    }
  }
}

}  // namespace

double power_flux(const Mesh& mesh, const WaveProblem& problem,
                  const Solution& sol, double z) {
  double flux = 0.0;
  integrate_cut(mesh, problem, sol, z, problem.test_order() + 4,
                [&](cplx p, cplx uz, double, double w) {
                  flux += 0.5 * w * (p * std::conj(uz)).real();
                });
  return flux;
}

double power_flux_exact(const ExactModeField& field, double z) {
  const QuadRule1D rule = gauss_rule(32);
  double flux = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) {
    const double x = rule.points[q];
    flux += 0.5 * rule.weights[q] *
            (field.pressure(x, z) * std::conj(field.u_z(x, z))).real();
  }
  return flux;
}

double power_loss(const Mesh& mesh, const WaveProblem& problem,
                  const Solution& sol) {
  const double in = power_flux(mesh, problem, sol, 0.0);
  if (in == 0.0) throw std::runtime_error("power_loss: zero input flux");
  const double out = power_flux(mesh, problem, sol, mesh.z_breaks.back());
  return 100.0 * (1.0 - out / in);
}

double relative_l2_error(const Mesh& mesh, const WaveProblem& problem,
                         const Solution& sol, const ExactModeField& exact,
                         int quad_boost) {
  const int n1d = problem.test_order() + 2 + quad_boost;
  double num = 0.0, den = 0.0;
  std::vector<cplx> vals;
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const double z0 = mesh.zlo(e), hz = mesh.zhi(e) - z0;
    const double x0 = mesh.dim == 2 ? mesh.xlo(e) : 0.0;
    const double hx = mesh.dim == 2 ? mesh.xhi(e) - x0 : 1.0;
    std::vector<double> xi, zeta, w;
    double jac;
    if (mesh.dim == 2) {
      QuadRule2D rule = tensor_rule(n1d, n1d);
      xi = rule.px;
      zeta = rule.pz;
      w = rule.weights;
      jac = hx * hz;
    } else {
      QuadRule1D rule = gauss_rule(n1d);
      zeta = rule.points;
      xi.assign(zeta.size(), 0.0);
      w = rule.weights;
      jac = hz;
    }
    eval_fields(mesh, e, problem, sol.field_coeffs[std::size_t(e.id)], xi, zeta,
                vals);
    const std::size_t nq = zeta.size();
    for (std::size_t q = 0; q < nq; ++q) {
      const double x = x0 + hx * xi[q];
      const double z = z0 + hz * zeta[q];
      cplx eu[3], du[3];
      if (mesh.dim == 1) {
        eu[0] = exact.u_z(x, z);
        eu[1] = exact.pressure(x, z);
        du[0] = vals[q];
        du[1] = vals[nq + q];
      } else {
        eu[0] = exact.u_x(x, z);
        eu[1] = exact.u_z(x, z);
        eu[2] = exact.pressure(x, z);
        du[0] = vals[q];
        du[1] = vals[nq + q];
        du[2] = vals[2 * nq + q];
      }
      for (int c = 0; c <= mesh.dim; ++c) {
        num += w[q] * jac * std::norm(du[c] - eu[c]);
        den += w[q] * jac * std::norm(eu[c]);
      }
    }
  }
  return 100.0 * std::sqrt(num / den);
}

cplx mode_overlap(const Mesh& mesh, const WaveProblem& problem,
                  const Solution& sol, const ModeSpec& mode, double z) {
  cplx acc = 0.0;
  integrate_cut(mesh, problem, sol, z, problem.test_order() + 6,
                [&](cplx p, cplx, double x, double w) {
                  acc += w * p * mode.profile(x);
                });
  return acc;
}

cplx backward_amplitude(const Mesh& mesh, const WaveProblem& problem,
                        const Solution& sol, const ModeSpec& mode, double z) {
  cplx pp = 0.0, uu = 0.0;
  integrate_cut(mesh, problem, sol, z, problem.test_order() + 6,
                [&](cplx p, cplx uz, double x, double w) {
                  const double phi = mode.profile(x);
                  pp += w * p * phi;
                  uu += w * uz * phi;
                });
  return 0.5 * (pp - mode.impedance * uu);
}

}  // namespace dpgwave
