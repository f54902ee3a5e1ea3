// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "dpgwave/mesh.hpp"

namespace dpgwave {

enum class SpaceTag : int {
  trial_field = 0,  // L2 scalar factor, Legendre tensor
  test_scalar,      // broken H1, hierarchical tensor
  test_flux,        // broken H(div), tensor Raviart-Thomas style
  trace_scalar,     // skeleton p-hat, hierarchical edge shapes
  trace_flux        // skeleton u-hat, Legendre edge shapes
};

// Values and first derivatives of one basis at a set of reference points.
// Scalar spaces fill val/dx/dz; the flux space fills vx/vz/div. Layout is
// [function][point], row-major; derivatives are physical (already scaled by
// the element size passed to tabulate_basis).
struct BasisTable {
  SpaceTag space = SpaceTag::trial_field;
  int order = 1;
  int n = 0;
  std::size_t nq = 0;
  std::vector<double> val, dx, dz;
  std::vector<double> vx, vz, div;
};

struct DofCounts {
  int n_trial_field = 0;
  int n_test = 0;
  int n_trace_per_facet = 0;
};

/// Per-element counts for trial fields, the enriched test space, and the
/// nominal trace block on one facet.
DofCounts element_dof_counts(int p, int dp, int dim);

/// Tabulate a basis on the reference element [0,1]^dim at the given points.
/// hx/hz scale the derivatives to physical coordinates. order_z < 0 means
/// isotropic order. For 1D pass dim = 1 and leave xi empty.
BasisTable tabulate_basis(int dim, SpaceTag space, int order, double hx, double hz,
                          const std::vector<double>& xi,
                          const std::vector<double>& zeta, int order_z = -1);

// One facet of one element, with the resolution of its local trace shape
// functions into global trace DOFs. Rows 0..pt hold the p-hat shapes (vertex,
// vertex, interior modes), rows pt+1..2pt+1 the u-hat shapes. In 1D there is
// one row per block. Hanging facets resolve through the coarse side's
// polynomial; the combination coefficients are stored explicitly.
struct LocalFacetTrace {
  int facet = -1;
  int side = -1;      // element side: 0 x-lo, 1 x-hi, 2 z-lo, 3 z-hi
  double sign = 1.0;  // outward normal relative to the +axis facet normal
  double t0 = 0.0, t1 = 1.0;  // tangential sub-interval in element coordinates
  std::vector<std::vector<std::pair<std::int64_t, double>>> rows;
};

enum class TraceDofClass : char { free_dof = 0, input, wall };

// A skeleton edge (2D) or point (1D) carrying master trace DOFs.
struct TraceEntity {
  int id = -1;
  int axis = 1;
  BoundaryTag tag = BoundaryTag::none;
  double pos = 0.0;              // physical normal-axis coordinate
  double t_lo = 0.0, t_hi = 1.0; // physical tangential interval (2D)
  std::vector<int> facet_ids;
  // p-hat representation: endpoint resolutions then interior-mode dof ids
  std::vector<std::pair<std::int64_t, double>> vertex_lo, vertex_hi;
  std::vector<std::int64_t> phat_mode_dofs;  // p-1 entries (2D), empty in 1D
  std::int64_t phat_point_dof = -1;          // 1D only
  std::vector<std::int64_t> uhat_dofs;       // p+1 entries (1 in 1D)
};

struct DofMap {
  int dim = 1;
  int p_trace = 1;
  std::int64_t n_field = 0;
  std::int64_t n_trace = 0;
  std::vector<std::int64_t> field_offset;  // per element id, -1 if inactive
  std::vector<int> field_count;            // per element id
  std::vector<std::vector<LocalFacetTrace>> elem_traces;  // per element id
  std::vector<TraceDofClass> trace_class;  // per trace dof
  std::vector<TraceEntity> entities;
  std::vector<int> facet_entity;  // facet id -> entity id

  std::int64_t n_total() const { return n_field + n_trace; }
};

/// Build the global numbering for a closed mesh: discontinuous per-element
/// field blocks plus skeleton trace DOFs with hanging-node constraints and
/// boundary classification. px/pz give the trial tensor orders (pz < 0 means
/// isotropic px); the trace order is max(px, pz).
DofMap build_dof_map(const Mesh& mesh, int px, int pz = -1);

}  // namespace dpgwave
