// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dpgwave/dpg.hpp"

namespace dpgwave {

/// Re(1/2 int p conj(u_z) dx) across the cross-section at height z, from the
/// discrete fields by per-element quadrature along the cut.
double power_flux(const Mesh& mesh, const WaveProblem& problem,
                  const Solution& sol, double z);

/// Same quantity for analytic mode fields (oracle path).
double power_flux_exact(const ExactModeField& field, double z);

/// 100 * (1 - flux(L) / flux(0)).
double power_loss(const Mesh& mesh, const WaveProblem& problem,
                  const Solution& sol);

/// 100 * ||u_h - u|| / ||u|| over all trial components, quadrature at
/// p + dp + 2 (+ boost) points per axis.
double relative_l2_error(const Mesh& mesh, const WaveProblem& problem,
                         const Solution& sol, const ExactModeField& exact,
                         int quad_boost = 2);

/// Modal decomposition coefficient int p(x, z) profile_m(x) dx.
cplx mode_overlap(const Mesh& mesh, const WaveProblem& problem,
                  const Solution& sol, const ModeSpec& mode, double z);

/// Amplitude of the backward-traveling component of mode m at height z,
/// extracted from p and u_z: (P - Z U) / 2.
cplx backward_amplitude(const Mesh& mesh, const WaveProblem& problem,
                        const Solution& sol, const ModeSpec& mode, double z);

}  // namespace dpgwave
