// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <complex>
#include <functional>
#include <vector>

#include "dpgwave/mesh.hpp"

namespace dpgwave {

using cplx = std::complex<double>;

// Scaling of the L2 term in the quasi-optimal test norm
// ||A* v||^2 + alpha ||v||^2.
struct TestNormConfig {
  double alpha = 1.0;
};

// First-order time-harmonic system (time convention exp(+i w t), forward
// waves exp(-i k_z z)):
//   i w u + grad p = f_u
//   i w n^2 p + div u = f_p
// which eliminates to the Helmholtz equation  lap p + w^2 n^2 p = 0. The
// formal adjoint, defined by (A U, V) = (U, A* V) + boundary terms, is
//   A*(v, q) = -(grad q + i w v,  div v + i w n^2 q).
void adjoint_apply(int dim, double omega, double n2, const cplx v[2], cplx q,
                   const cplx grad_q[2], cplx div_v, cplx out_vec[2],
                   cplx& out_scal);

// One guided transverse mode: p(x, z) = amp * profile(x) * exp(-i k_z z).
struct ModeSpec {
  int index = 1;
  std::function<double(double)> profile;
  std::function<double(double)> profile_deriv;
  cplx k_z = 0.0;
  cplx impedance = 0.0;  // omega / k_z
  bool propagating = true;
};

/// Hard-wall mode of a homogeneous guide of width a: profile sqrt(2/a)
/// sin(m pi x / a), k_z the limiting-absorption branch of
/// sqrt(w^2 n^2 - (m pi / a)^2) so evanescent modes decay in +z.
ModeSpec rectangular_mode(int m, double omega, double a = 1.0, double n = 1.0);

/// The trivial 1D "mode": unit profile, k_z = w n.
ModeSpec line_mode(double omega, double n = 1.0);

// Roots of the symmetric-slab dispersion relation in normalized variables
// X = kappa d, Y = gamma d with X^2 + Y^2 = V^2:
//   even modes:  X tan X = Y,   odd modes: -X cot X = Y.
struct SlabRoot {
  double X = 0.0, Y = 0.0;
  int parity = 0;  // 0 even, 1 odd (mode index = parity order)
};

/// All guided roots for normalized frequency V, bisected to 1e-12, ordered by
/// decreasing effective index (increasing X).
std::vector<SlabRoot> slab_dispersion_roots(double v_number);

struct SlabGeometry {
  double center = 0.5;
  double half_width = 0.05;
  double n_core = 1.4512;
  double n_clad = 1.45;
  double numerical_aperture() const;
};

/// Guided modes of the symmetric step-index slab at angular frequency omega,
/// profiles normalized to unit L2 norm over (0,1), ordered by decreasing
/// effective index.
std::vector<ModeSpec> slab_modes(const SlabGeometry& geom, double omega);

/// V = 2 pi r_core NA / lambda.
double v_number(double lambda, double r_core, double na);

/// Fraction of |profile|^2 inside [core_lo, core_hi] relative to (0,1).
double confinement(const ModeSpec& mode, double core_lo, double core_hi);

enum class OutputBc : int {
  impedance_pointwise = 0,  // u-hat = p-hat / Z_m on every output facet
  impedance_modal,          // per-mode impedance via modal trace projection
  dirichlet                 // manufactured: p-hat prescribed
};

struct WaveProblem {
  int dim = 1;
  double omega = 2.0 * 3.14159265358979323846;
  std::array<double, 5> n_by_label{1.0, 1.0, 1.0, 1.0, 1.0};  // by DomainLabel
  int p = 2;
  int dp = 1;
  int px = -1, pz = -1;  // anisotropic trial orders; -1 means p
  TestNormConfig norm;

  int excited_mode = 1;  // 1-based index into modes
  cplx amplitude = 1.0;
  std::vector<ModeSpec> modes;
  OutputBc output_bc = OutputBc::impedance_pointwise;

  // Manufactured setups: prescribed boundary p and a volume load for the
  // first-order system (components u..., p). When dirichlet_data is set it is
  // applied on input and output; walls keep p = 0 unless wall_data is set.
  std::function<cplx(double, double)> dirichlet_data;
  bool wall_data = false;
  std::function<void(double, double, cplx*)> volume_load;

  int trial_px() const { return px >= 0 ? px : p; }
  int trial_pz() const { return pz >= 0 ? pz : p; }
  int trace_order() const { return std::max(trial_px(), trial_pz()); }
  int test_order() const { return trace_order() + dp; }
  double n_of(DomainLabel label) const { return n_by_label[std::size_t(label)]; }
  const ModeSpec& excited() const { return modes[std::size_t(excited_mode - 1)]; }
};

/// Problem for a homogeneous hard-wall guide of width 1 where the excited
/// mode has unit wavelength along z (so a mesh with z_extent = N holds N
/// wavelengths). Registers the first n_modes transverse modes.
WaveProblem rectangular_problem(int dim, int excited_mode, int p, int dp = 1,
                                double alpha = 1.0, double n = 1.0,
                                int n_modes = 8);

/// Step-index slab problem at the frequency implied by V; all guided modes
/// registered, modal output impedance. The excited mode's wavelength is
/// 2 pi / Re(k_z).
WaveProblem slab_problem(const SlabGeometry& geom, double v_number,
                         int excited_mode, int p, int dp = 1, double alpha = 1.0);

// Exact mode fields of the first-order system.
struct ExactModeField {
  const ModeSpec* mode = nullptr;
  cplx amp = 1.0;
  double omega = 1.0;
  cplx pressure(double x, double z) const;
  cplx u_x(double x, double z) const;
  cplx u_z(double x, double z) const;
};

}  // namespace dpgwave
