// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <memory>
#include <vector>

#include "dpgwave/mesh.hpp"
#include "dpgwave/physics.hpp"
#include "dpgwave/spaces.hpp"

namespace dpgwave {

// Raw per-element operators: Gram matrix of the enriched test space in the
// quasi-optimal graph norm, the extended stiffness [B_field | B_trace], and
// the test load. Trace columns follow the element's facet order from the
// DofMap (p-hat block then u-hat block per facet).
struct ElementCore {
  Eigen::MatrixXcd gram;
  Eigen::MatrixXcd b;
  Eigen::VectorXcd load;
  int n_field = 0;
  int n_trace_loc = 0;
};

Eigen::MatrixXcd element_gram(const Mesh& mesh, const Element& elem,
                              const WaveProblem& problem);

ElementCore element_core(const Mesh& mesh, const Element& elem,
                         const DofMap& dofmap, const WaveProblem& problem);

/// DPG condensation s = b^H gram^{-1} b, f = b^H gram^{-1} load via Cholesky.
void condense(const Eigen::MatrixXcd& gram, const Eigen::MatrixXcd& b,
              const Eigen::VectorXcd& load, Eigen::MatrixXcd& s,
              Eigen::VectorXcd& f);

// Resolution of one global trace DOF into the reduced unknown vector:
// value = sum terms + fixed. Free DOFs carry themselves; Dirichlet DOFs a
// fixed value; impedance-eliminated u-hat DOFs a combination of p-hat DOFs.
struct TraceResolution {
  std::vector<std::pair<std::int64_t, cplx>> terms;
  cplx fixed{0.0, 0.0};
};

struct BcPlan {
  std::int64_t n_unknowns = 0;
  std::vector<TraceResolution> trace;
  std::vector<std::int64_t> trace_unknown;  // -1 if fixed or eliminated
};

BcPlan build_bc_plan(const Mesh& mesh, const DofMap& dofmap,
                     const WaveProblem& problem);

struct Solution {
  Eigen::VectorXcd x;  // reduced unknowns: fields then free trace DOFs
  std::vector<Eigen::VectorXcd> field_coeffs;  // per element id
  std::vector<double> eta;                     // per element id, ||psi|_K||_V
  double total_residual = 0.0;                 // ||psi||_V
  std::int64_t n_dofs = 0, n_field = 0, n_trace_free = 0;
  double solver_rel_residual = 0.0;
};

class Assembly {
 public:
  const Mesh* mesh = nullptr;
  const DofMap* dofmap = nullptr;
  const WaveProblem* problem = nullptr;
  BcPlan plan;

  struct ElemData {
    int id = -1;
    int n_field = 0, n_trace_loc = 0;
    std::vector<std::int64_t> unknowns;  // fields then involved trace unknowns
    Eigen::MatrixXcd c;                  // local trace shapes x trace unknowns
    Eigen::VectorXcd d;                  // fixed trace part
    std::shared_ptr<const Eigen::MatrixXcd> s_full;  // condensed, unconstrained
    Eigen::VectorXcd f_full;     // b^H G^{-1} load (empty means zero)
    double load_norm2 = 0.0;     // load^H G^{-1} load
    // kept only for volume-load problems, where the quadratic-form residual
    // would cancel catastrophically near zero
    std::shared_ptr<const ElementCore> core_raw;
    Eigen::MatrixXcd s_eff;
    Eigen::VectorXcd f_eff;
  };
  std::vector<ElemData> elems;
  Eigen::SparseMatrix<cplx> s;
  Eigen::VectorXcd f;

  // Trial coefficients of one element (fields then local traces) for a given
  // reduced vector.
  Eigen::VectorXcd local_trial(const ElemData& e, const Eigen::VectorXcd& x) const;
};

Assembly assemble(const Mesh& mesh, const DofMap& dofmap,
                  const WaveProblem& problem);

Solution solve(const Assembly& assembly);

/// Residual norm ||psi||_V of an arbitrary reduced coefficient vector;
/// optionally reports per-element contributions by element id.
double residual_total(const Assembly& assembly, const Eigen::VectorXcd& x,
                      std::vector<double>* per_element = nullptr);

/// Recompute eta / total_residual of a solution in place.
void compute_residual(const Assembly& assembly, Solution& solution);

/// Convenience: dofmap + assemble + solve (dofmap built by the caller).
Solution assemble_solve(const Mesh& mesh, const DofMap& dofmap,
                        const WaveProblem& problem);

struct StabilityReport {
  double gamma_h = 0.0;  // smallest generalized singular value
  double m_const = 0.0;  // largest
  std::int64_t n_dofs = 0;
};

/// Dense generalized eigenvalue probe of the condensed system against the
/// trial mass; refuses problems above 2000 unknowns.
StabilityReport estimate_infsup(const Mesh& mesh, const WaveProblem& problem);

/// Evaluate discrete trial fields (u..., p) of one element at reference
/// points; out has (dim+1) rows stored consecutively per point list.
void eval_fields(const Mesh& mesh, const Element& elem, const WaveProblem& problem,
                 const Eigen::VectorXcd& coeffs, const std::vector<double>& xi,
                 const std::vector<double>& zeta, std::vector<cplx>& out);

}  // namespace dpgwave
