// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/dpg.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "dpgwave/kernels.hpp"
#include "dpgwave/parallel.hpp"
#include "dpgwave/poly1d.hpp"

namespace dpgwave {

namespace {

constexpr cplx kI{0.0, 1.0};

// Test-space tabulation at a point set, with the adjoint components laid out
// point-major for the contraction kernels. Component c of A* for test
// function i at point q sits at comp[c].re/im[q * n_test + i].
struct TestEval {
  int n_test = 0;
  std::size_t nq = 0;
  struct Split {
    std::vector<double> re, im;
  };
  Split a1x, a1z, a2;                 // adjoint components (a1z unused in 1D)
  std::vector<double> vx, vz, qv;     // raw test values, point-major
  std::vector<double> q_at, vnx, vnz; // scalar and normal flux values (facets)
};

void tabulate_test(int dim, double omega, double n2, int order, double hx,
                   double hz, const std::vector<double>& xi,
                   const std::vector<double>& zeta, bool adjoint, TestEval& ev) {
  const BasisTable qs = tabulate_basis(dim, SpaceTag::test_scalar, order, hx, hz,
                                       xi, zeta);
  const BasisTable vf = tabulate_basis(dim, SpaceTag::test_flux, order, hx, hz,
                                       xi, zeta);
  const std::size_t nq = zeta.size();
  const int n = qs.n + vf.n;
  ev.n_test = n;
  ev.nq = nq;
  auto fill = [&](TestEval::Split& s) {
    s.re.assign(nq * std::size_t(n), 0.0);
    s.im.assign(nq * std::size_t(n), 0.0);
  };
  ev.qv.assign(nq * std::size_t(n), 0.0);
  ev.vx.assign(nq * std::size_t(n), 0.0);
  ev.vz.assign(nq * std::size_t(n), 0.0);
  if (adjoint) {
    fill(ev.a1x);
    fill(ev.a2);
    if (dim == 2) fill(ev.a1z);
  }

  // scalar block: v = 0, A1 = -grad q, A2 = -i w n^2 q
  for (int i = 0; i < qs.n; ++i) {
    const double* val = qs.val.data() + std::size_t(i) * nq;
    const double* gx = dim == 2 ? qs.dx.data() + std::size_t(i) * nq : nullptr;
    const double* gz = qs.dz.data() + std::size_t(i) * nq;
    for (std::size_t q = 0; q < nq; ++q) {
      const std::size_t at = q * std::size_t(n) + std::size_t(i);
      ev.qv[at] = val[q];
      if (!adjoint) continue;
      if (dim == 2) {
        ev.a1x.re[at] = -gx[q];
        ev.a1z.re[at] = -gz[q];
      } else {
        ev.a1x.re[at] = -gz[q];
      }
      ev.a2.im[at] = -omega * n2 * val[q];
    }
  }
  // flux block: q = 0, A1 = -i w v, A2 = -div v
  for (int i = 0; i < vf.n; ++i) {
    const std::size_t col = std::size_t(qs.n + i);
    for (std::size_t q = 0; q < nq; ++q) {
      const std::size_t at = q * std::size_t(n) + col;
      if (dim == 2) {
        const double vxq = vf.vx[std::size_t(i) * nq + q];
        const double vzq = vf.vz[std::size_t(i) * nq + q];
        ev.vx[at] = vxq;
        ev.vz[at] = vzq;
        if (adjoint) {
          ev.a1x.im[at] = -omega * vxq;
          ev.a1z.im[at] = -omega * vzq;
          ev.a2.re[at] = -vf.div[std::size_t(i) * nq + q];
        }
      } else {
        const double vq = vf.val[std::size_t(i) * nq + q];
        ev.vx[at] = vq;
        if (adjoint) {
          ev.a1x.im[at] = -omega * vq;
          ev.a2.re[at] = -vf.dz[std::size_t(i) * nq + q];
        }
      }
    }
  }
}

struct SideGeom {
  std::vector<double> xi, zeta;  // reference points on the side
  double len = 0.0;              // physical facet length (1 in 1D)
  int tangent_axis = 1;
};

SideGeom side_points(const Mesh& mesh, const Element& elem, int side, double t0,
                     double t1, const QuadRule1D& rule) {
  SideGeom g;
  const std::size_t nq = rule.points.size();
  g.xi.resize(nq);
  g.zeta.resize(nq);
  for (std::size_t q = 0; q < nq; ++q) {
    const double t = t0 + (t1 - t0) * rule.points[q];
    switch (side) {
      case 0: g.xi[q] = 0.0; g.zeta[q] = t; break;
      case 1: g.xi[q] = 1.0; g.zeta[q] = t; break;
      case 2: g.xi[q] = t; g.zeta[q] = 0.0; break;
      case 3: g.xi[q] = t; g.zeta[q] = 1.0; break;
    }
  }
  if (side < 2) {
    g.tangent_axis = 1;
    g.len = (t1 - t0) * (mesh.zhi(elem) - mesh.zlo(elem));
  } else {
    g.tangent_axis = 0;
    g.len = (t1 - t0) * (mesh.xhi(elem) - mesh.xlo(elem));
  }
  return g;
}

}  // namespace

Eigen::MatrixXcd element_gram(const Mesh& mesh, const Element& elem,
                              const WaveProblem& problem) {
  const int dim = mesh.dim;
  const double hx = dim == 2 ? mesh.xhi(elem) - mesh.xlo(elem) : 1.0;
  const double hz = mesh.zhi(elem) - mesh.zlo(elem);
  const double n = problem.n_of(elem.label);
  const double n2 = n * n;
  const int kt = problem.test_order();
  const int n1d = kt + 2;

  std::vector<double> xi, zeta, w;
  double jac;
  if (dim == 2) {
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

  TestEval ev;
  tabulate_test(dim, problem.omega, n2, kt, hx, hz, xi, zeta, true, ev);
  const int nt = ev.n_test;
  const std::size_t nq = ev.nq;

  std::vector<double> g_re(std::size_t(nt) * std::size_t(nt), 0.0);
  std::vector<double> g_im(std::size_t(nt) * std::size_t(nt), 0.0);
  const auto& K = kernels::active();
  const double alpha = problem.norm.alpha;
  for (std::size_t q = 0; q < nq; ++q) {
    const double wq = w[q] * jac;
    const std::size_t at = q * std::size_t(nt);
    K.outer_acc_cplx(g_re.data(), g_im.data(), ev.a1x.re.data() + at,
                     ev.a1x.im.data() + at, ev.a1x.re.data() + at,
                     ev.a1x.im.data() + at, wq, std::size_t(nt), std::size_t(nt));
    if (dim == 2)
      K.outer_acc_cplx(g_re.data(), g_im.data(), ev.a1z.re.data() + at,
                       ev.a1z.im.data() + at, ev.a1z.re.data() + at,
                       ev.a1z.im.data() + at, wq, std::size_t(nt), std::size_t(nt));
    K.outer_acc_cplx(g_re.data(), g_im.data(), ev.a2.re.data() + at,
                     ev.a2.im.data() + at, ev.a2.re.data() + at,
                     ev.a2.im.data() + at, wq, std::size_t(nt), std::size_t(nt));
    K.outer_acc_real(g_re.data(), ev.qv.data() + at, ev.qv.data() + at, wq * alpha,
                     std::size_t(nt), std::size_t(nt));
    K.outer_acc_real(g_re.data(), ev.vx.data() + at, ev.vx.data() + at, wq * alpha,
                     std::size_t(nt), std::size_t(nt));
    if (dim == 2)
      K.outer_acc_real(g_re.data(), ev.vz.data() + at, ev.vz.data() + at,
                       wq * alpha, std::size_t(nt), std::size_t(nt));
  }
  Eigen::MatrixXcd gram(nt, nt);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nt; ++j)
      gram(i, j) = cplx(g_re[std::size_t(i) * std::size_t(nt) + std::size_t(j)],
                        g_im[std::size_t(i) * std::size_t(nt) + std::size_t(j)]);
  // exact Hermitian symmetrization (kernel rounding only)
  gram = 0.5 * (gram + gram.adjoint()).eval();
  return gram;
}

ElementCore element_core(const Mesh& mesh, const Element& elem,
                         const DofMap& dofmap, const WaveProblem& problem) {
  const int dim = mesh.dim;
  const double hx = dim == 2 ? mesh.xhi(elem) - mesh.xlo(elem) : 1.0;
  const double hz = mesh.zhi(elem) - mesh.zlo(elem);
  const double n2 = problem.n_of(elem.label) * problem.n_of(elem.label);
  const int kt = problem.test_order();
  const int px = problem.trial_px(), pz = problem.trial_pz();
  const int pt = dofmap.p_trace;
  const int n1d = kt + 2;

  ElementCore core;
  core.gram = element_gram(mesh, elem, problem);
  const int nt = int(core.gram.rows());

  std::vector<double> xi, zeta, w;
  double jac;
  if (dim == 2) {
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
  const std::size_t nq = zeta.size();

  TestEval ev;
  tabulate_test(dim, problem.omega, n2, kt, hx, hz, xi, zeta, true, ev);

  const BasisTable trial = tabulate_basis(dim, SpaceTag::trial_field, px, hx, hz,
                                          xi, zeta, pz);
  const int nc = trial.n;
  core.n_field = (dim + 1) * nc;

  const auto& traces = dofmap.elem_traces[std::size_t(elem.id)];
  const int per_facet = (dim == 1) ? 2 : 2 * (pt + 1);
  core.n_trace_loc = per_facet * int(traces.size());

  Eigen::MatrixXcd b = Eigen::MatrixXcd::Zero(nt, core.n_field + core.n_trace_loc);

  // volume block: component c of the trial pairs with conj(A*_c)
  {
    // trial values point-major
    std::vector<double> trial_t(nq * std::size_t(nc));
    for (int a = 0; a < nc; ++a)
      for (std::size_t q = 0; q < nq; ++q)
        trial_t[q * std::size_t(nc) + std::size_t(a)] =
            trial.val[std::size_t(a) * nq + q];
    std::vector<double> zero(std::size_t(nc), 0.0);
    std::vector<double> bre(std::size_t(nt) * std::size_t(nc));
    std::vector<double> bim(std::size_t(nt) * std::size_t(nc));
    const auto& K = kernels::active();
    auto block = [&](const TestEval::Split& comp, int comp_idx) {
      std::fill(bre.begin(), bre.end(), 0.0);
      std::fill(bim.begin(), bim.end(), 0.0);
      for (std::size_t q = 0; q < nq; ++q) {
        K.outer_acc_cplx(bre.data(), bim.data(),
                         comp.re.data() + q * std::size_t(ev.n_test),
                         comp.im.data() + q * std::size_t(ev.n_test),
                         trial_t.data() + q * std::size_t(nc), zero.data(),
                         w[q] * jac, std::size_t(nt), std::size_t(nc));
      }
      for (int i = 0; i < nt; ++i)
        for (int a = 0; a < nc; ++a)
          b(i, comp_idx * nc + a) +=
              cplx(bre[std::size_t(i) * std::size_t(nc) + std::size_t(a)],
                   bim[std::size_t(i) * std::size_t(nc) + std::size_t(a)]);
    };
    // b[i][a] = int trial_a * conj(A*_i); the kernel's conj(x) y with
    // x = A* and real y = trial delivers exactly that.
    if (dim == 2) {
      block(ev.a1x, 0);
      block(ev.a1z, 1);
      block(ev.a2, 2);
    } else {
      block(ev.a1x, 0);
      block(ev.a2, 1);
    }
  }

  // facet blocks
  {
    QuadRule1D frule = gauss_rule(kt + 2);
    std::vector<double> pv, pd, uv, ud;
    int col = core.n_field;
    for (const LocalFacetTrace& lf : traces) {
      if (dim == 1) {
        // point facet: evaluate test at the endpoint
        const double zt = (lf.side == 3) ? 1.0 : 0.0;
        TestEval pe;
        tabulate_test(dim, problem.omega, n2, kt, hx, hz, {0.0}, {zt}, false, pe);
        for (int i = 0; i < nt; ++i) {
          b(i, col) += lf.sign * pe.vx[std::size_t(i)];      // p-hat vs v n
          b(i, col + 1) += lf.sign * pe.qv[std::size_t(i)];  // u-hat vs q
        }
        col += 2;
        continue;
      }
      const SideGeom geom = side_points(mesh, elem, lf.side, lf.t0, lf.t1, frule);
      TestEval se;
      tabulate_test(dim, problem.omega, n2, kt, hx, hz, geom.xi, geom.zeta, false,
                    se);
      poly::lobatto_table(pt, frule.points, pv, pd);
      poly::legendre_table(pt, frule.points, uv, ud);
      const std::size_t nfq = frule.points.size();
      for (int i = 0; i < nt; ++i) {
        for (int j = 0; j <= pt; ++j) {
          double acc_p = 0.0, acc_u = 0.0;
          for (std::size_t q = 0; q < nfq; ++q) {
            const std::size_t at = q * std::size_t(nt) + std::size_t(i);
            const double vn = (lf.side < 2) ? se.vx[at] : se.vz[at];
            acc_p += frule.weights[q] * pv[std::size_t(j) * nfq + q] * vn;
            acc_u += frule.weights[q] * uv[std::size_t(j) * nfq + q] * se.qv[at];
          }
          b(i, col + j) += lf.sign * geom.len * acc_p;
          b(i, col + pt + 1 + j) += lf.sign * geom.len * acc_u;
        }
      }
      col += per_facet;
    }
  }

  core.b = std::move(b);
  core.load = Eigen::VectorXcd::Zero(nt);
  if (problem.volume_load) {
    const double x0 = mesh.xlo(elem), z0 = mesh.zlo(elem);
    std::vector<cplx> fval(std::size_t(dim) + 1);
    for (std::size_t q = 0; q < nq; ++q) {
      const double x = dim == 2 ? x0 + hx * xi[q] : 0.0;
      const double z = z0 + hz * zeta[q];
      problem.volume_load(x, z, fval.data());
      const double wq = w[q] * jac;
      for (int i = 0; i < nt; ++i) {
        const std::size_t at = q * std::size_t(nt) + std::size_t(i);
        cplx v = fval[0] * ev.vx[at];
        if (dim == 2) v += fval[1] * ev.vz[at];
        core.load[i] += wq * (v + fval[std::size_t(dim)] * ev.qv[at]);
      }
    }
  }
  return core;
}

void condense(const Eigen::MatrixXcd& gram, const Eigen::MatrixXcd& b,
              const Eigen::VectorXcd& load, Eigen::MatrixXcd& s,
              Eigen::VectorXcd& f) {
  Eigen::LLT<Eigen::MatrixXcd> llt(gram);
  if (llt.info() != Eigen::Success) {
    // pivot floor retry
    const double floor = 1e-14 * gram.real().trace() / double(gram.rows());
    Eigen::MatrixXcd g2 = gram;
    g2.diagonal().array() += floor;
    llt.compute(g2);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("condense: singular test Gram matrix");
  }
  const Eigen::MatrixXcd x = llt.solve(b);
  s = b.adjoint() * x;
  s = 0.5 * (s + s.adjoint()).eval();
  f = b.adjoint() * llt.solve(load);
}

// ---------------------------------------------------------------------------
// Boundary-condition plan

namespace {

// Composite Gauss integration over [a,b] (panels resolve mode oscillation
// and cladding decay scales).
template <typename F>
double integrate_panels(const F& f, double a, double b, int panels = 8,
                        int pts = 10) {
  static thread_local std::map<int, QuadRule1D> rules;
  auto it = rules.find(pts);
  if (it == rules.end()) it = rules.emplace(pts, gauss_rule(pts)).first;
  const QuadRule1D& rule = it->second;
  double s = 0.0;
  for (int pnl = 0; pnl < panels; ++pnl) {
    const double pa = a + (b - a) * pnl / panels;
    const double pb = a + (b - a) * (pnl + 1) / panels;
    for (std::size_t q = 0; q < rule.points.size(); ++q)
      s += (pb - pa) * rule.weights[q] * f(pa + (pb - pa) * rule.points[q]);
  }
  return s;
}

Eigen::MatrixXd lobatto_mass_ref(int p) {
  const QuadRule1D rule = gauss_rule(p + 2);
  std::vector<double> v, d;
  poly::lobatto_table(p, rule.points, v, d);
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(p + 1, p + 1);
  const std::size_t nq = rule.points.size();
  for (int i = 0; i <= p; ++i)
    for (int j = 0; j <= p; ++j)
      for (std::size_t q = 0; q < nq; ++q)
        m(i, j) += rule.weights[q] * v[std::size_t(i) * nq + q] *
                   v[std::size_t(j) * nq + q];
  return m;
}

// u-hat coefficients of the L2 projection of each p-hat shape on [0,1]:
// W = M_leg^{-1} * (legendre_i, lobatto_j); lengths cancel.
Eigen::MatrixXd pointwise_projection(int p) {
  const QuadRule1D rule = gauss_rule(p + 2);
  std::vector<double> lv, ld, uv, ud;
  poly::lobatto_table(p, rule.points, lv, ld);
  poly::legendre_table(p, rule.points, uv, ud);
  const std::size_t nq = rule.points.size();
  Eigen::MatrixXd mix = Eigen::MatrixXd::Zero(p + 1, p + 1);
  for (int i = 0; i <= p; ++i)
    for (int j = 0; j <= p; ++j)
      for (std::size_t q = 0; q < nq; ++q)
        mix(i, j) += rule.weights[q] * uv[std::size_t(i) * nq + q] *
                     lv[std::size_t(j) * nq + q];
  Eigen::VectorXd leg_mass(p + 1);
  for (int i = 0; i <= p; ++i) leg_mass[i] = 1.0 / (2.0 * i + 1.0);
  return leg_mass.cwiseInverse().asDiagonal() * mix;
}

}  // namespace

BcPlan build_bc_plan(const Mesh& mesh, const DofMap& dofmap,
                     const WaveProblem& problem) {
  BcPlan plan;
  const std::int64_t ntr = dofmap.n_trace;
  const int pt = dofmap.p_trace;
  std::vector<char> fixed(std::size_t(ntr), 0);
  std::vector<cplx> value(std::size_t(ntr), cplx(0.0));

  const double z_out = mesh.z_breaks.back();
  const ModeSpec* exc =
      problem.modes.empty() ? nullptr : &problem.excited();

  auto boundary_data = [&](const TraceEntity& ent, double t) -> cplx {
    // t is the tangential coordinate on the entity
    if (ent.tag == BoundaryTag::input) {
      if (problem.dirichlet_data) return problem.dirichlet_data(mesh.dim == 2 ? t : 0.0, 0.0);
      return problem.amplitude * (mesh.dim == 2 ? exc->profile(t) : 1.0);
    }
    if (ent.tag == BoundaryTag::output && problem.output_bc == OutputBc::dirichlet)
      return problem.dirichlet_data(mesh.dim == 2 ? t : 0.0, z_out);
    if (ent.tag == BoundaryTag::wall && problem.wall_data)
      return problem.dirichlet_data(ent.pos, t);
    return cplx(0.0);
  };

  auto entity_dirichlet = [&](const TraceEntity& ent) {
    return ent.tag == BoundaryTag::input ||
           (ent.tag == BoundaryTag::output &&
            problem.output_bc == OutputBc::dirichlet) ||
           ent.tag == BoundaryTag::wall;
  };

  if (mesh.dim == 1) {
    for (const TraceEntity& ent : dofmap.entities) {
      if (ent.tag == BoundaryTag::input ||
          (ent.tag == BoundaryTag::output &&
           problem.output_bc == OutputBc::dirichlet)) {
        fixed[std::size_t(ent.phat_point_dof)] = 1;
        value[std::size_t(ent.phat_point_dof)] =
            (ent.tag == BoundaryTag::input)
                ? (problem.dirichlet_data ? problem.dirichlet_data(0.0, 0.0)
                                          : problem.amplitude)
                : problem.dirichlet_data(0.0, z_out);
      }
    }
  } else {
    // vertex values first (wall zero wins at corners via trace_class)
    for (const TraceEntity& ent : dofmap.entities) {
      if (!entity_dirichlet(ent)) continue;
      const auto set_vertex = [&](const std::vector<std::pair<std::int64_t, double>>& res,
                                  double t) {
        if (res.size() != 1 || res[0].second != 1.0) return;  // hanging: skip
        const std::int64_t dof = res[0].first;
        if (fixed[std::size_t(dof)]) return;
        if (dofmap.trace_class[std::size_t(dof)] == TraceDofClass::wall &&
            ent.tag != BoundaryTag::wall && !problem.wall_data) {
          fixed[std::size_t(dof)] = 1;  // corner pinned by the wall
          value[std::size_t(dof)] = 0.0;
          return;
        }
        fixed[std::size_t(dof)] = 1;
        value[std::size_t(dof)] = boundary_data(ent, t);
      };
      set_vertex(ent.vertex_lo, ent.t_lo);
      set_vertex(ent.vertex_hi, ent.t_hi);
    }
    // interior modes: project data minus the endpoint lift
    std::vector<double> lv, ld;
    const Eigen::MatrixXd mass = lobatto_mass_ref(pt);
    for (const TraceEntity& ent : dofmap.entities) {
      if (!entity_dirichlet(ent)) continue;
      for (std::int64_t d : ent.phat_mode_dofs) fixed[std::size_t(d)] = 1;
      if (pt < 2) continue;
      const double len = ent.t_hi - ent.t_lo;
      const cplx vlo = ent.vertex_lo.size() == 1
                           ? value[std::size_t(ent.vertex_lo[0].first)]
                           : cplx(0.0);
      const cplx vhi = ent.vertex_hi.size() == 1
                           ? value[std::size_t(ent.vertex_hi[0].first)]
                           : cplx(0.0);
      Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(pt - 1);
      for (int j = 2; j <= pt; ++j) {
        auto fre = [&](double tau) {
          const double t = ent.t_lo + len * tau;
          poly::lobatto_table(pt, {tau}, lv, ld);
          const cplx g = boundary_data(ent, t) - vlo * lv[0] - vhi * lv[1];
          return g.real() * lv[std::size_t(j)];
        };
        auto fim = [&](double tau) {
          const double t = ent.t_lo + len * tau;
          poly::lobatto_table(pt, {tau}, lv, ld);
          const cplx g = boundary_data(ent, t) - vlo * lv[0] - vhi * lv[1];
          return g.imag() * lv[std::size_t(j)];
        };
        rhs[j - 2] = cplx(integrate_panels(fre, 0.0, 1.0),
                          integrate_panels(fim, 0.0, 1.0));
      }
      const Eigen::VectorXcd coef =
          mass.bottomRightCorner(pt - 1, pt - 1).ldlt().solve(rhs);
      for (int j = 0; j < pt - 1; ++j)
        value[std::size_t(ent.phat_mode_dofs[std::size_t(j)])] = coef[j];
    }
  }

  // impedance-eliminated output u-hat DOFs
  std::vector<char> eliminated(std::size_t(ntr), 0);
  const bool impedance = problem.output_bc == OutputBc::impedance_pointwise ||
                         problem.output_bc == OutputBc::impedance_modal;
  if (impedance)
    for (const TraceEntity& ent : dofmap.entities)
      if (ent.tag == BoundaryTag::output)
        for (std::int64_t d : ent.uhat_dofs) eliminated[std::size_t(d)] = 1;

  // unknown numbering: fields first, then surviving trace DOFs
  plan.trace_unknown.assign(std::size_t(ntr), -1);
  std::int64_t next = dofmap.n_field;
  for (std::int64_t d = 0; d < ntr; ++d)
    if (!fixed[std::size_t(d)] && !eliminated[std::size_t(d)])
      plan.trace_unknown[std::size_t(d)] = next++;
  plan.n_unknowns = next;

  plan.trace.assign(std::size_t(ntr), {});
  for (std::int64_t d = 0; d < ntr; ++d) {
    if (fixed[std::size_t(d)])
      plan.trace[std::size_t(d)].fixed = value[std::size_t(d)];
    else if (!eliminated[std::size_t(d)])
      plan.trace[std::size_t(d)].terms = {{plan.trace_unknown[std::size_t(d)], 1.0}};
  }

  if (impedance) {
    auto compose = [&](const std::vector<std::pair<std::int64_t, double>>& row) {
      TraceResolution out;
      std::map<std::int64_t, cplx> acc;
      for (const auto& [dof, wgt] : row) {
        const TraceResolution& r = plan.trace[std::size_t(dof)];
        out.fixed += wgt * r.fixed;
        for (const auto& [u, c] : r.terms) acc[u] += wgt * c;
      }
      for (const auto& [u, c] : acc) out.terms.emplace_back(u, c);
      return out;
    };

    if (mesh.dim == 1) {
      const cplx zinv = 1.0 / exc->impedance;
      for (const TraceEntity& ent : dofmap.entities)
        if (ent.tag == BoundaryTag::output)
          plan.trace[std::size_t(ent.uhat_dofs[0])] =
              compose({{ent.phat_point_dof, 1.0}});
      for (const TraceEntity& ent : dofmap.entities)
        if (ent.tag == BoundaryTag::output) {
          TraceResolution& r = plan.trace[std::size_t(ent.uhat_dofs[0])];
          for (auto& t : r.terms) t.second *= zinv;
          r.fixed *= zinv;
        }
    } else if (problem.output_bc == OutputBc::impedance_pointwise) {
      const cplx zinv = 1.0 / exc->impedance;
      const Eigen::MatrixXd w = pointwise_projection(pt);
      for (const TraceEntity& ent : dofmap.entities) {
        if (ent.tag != BoundaryTag::output) continue;
        std::vector<TraceResolution> rep(std::size_t(pt) + 1);
        rep[0] = compose(ent.vertex_lo);
        rep[1] = compose(ent.vertex_hi);
        for (int j = 2; j <= pt; ++j)
          rep[std::size_t(j)] = compose({{ent.phat_mode_dofs[std::size_t(j - 2)], 1.0}});
        for (int i = 0; i <= pt; ++i) {
          TraceResolution out;
          std::map<std::int64_t, cplx> acc;
          for (int j = 0; j <= pt; ++j) {
            if (w(i, j) == 0.0) continue;
            out.fixed += zinv * w(i, j) * rep[std::size_t(j)].fixed;
            for (const auto& [u, c] : rep[std::size_t(j)].terms)
              acc[u] += zinv * w(i, j) * c;
          }
          for (const auto& [u, c] : acc) out.terms.emplace_back(u, c);
          plan.trace[std::size_t(ent.uhat_dofs[std::size_t(i)])] = std::move(out);
        }
      }
    } else {
      // modal: a_m = int p-hat phi_m over the whole output line, then
      // u-hat = sum_m a_m phi_m / Z_m projected per entity.
      std::vector<const TraceEntity*> outs;
      for (const TraceEntity& ent : dofmap.entities)
        if (ent.tag == BoundaryTag::output) outs.push_back(&ent);
      std::vector<double> lv, ld, uv, ud;
      // modal amplitude functionals
      std::vector<TraceResolution> amp(problem.modes.size());
      for (std::size_t mi = 0; mi < problem.modes.size(); ++mi) {
        const ModeSpec& mode = problem.modes[mi];
        std::map<std::int64_t, cplx> acc;
        cplx fixed_part = 0.0;
        for (const TraceEntity* ent : outs) {
          const double len = ent->t_hi - ent->t_lo;
          std::vector<TraceResolution> rep(std::size_t(pt) + 1);
          rep[0] = compose(ent->vertex_lo);
          rep[1] = compose(ent->vertex_hi);
          for (int j = 2; j <= pt; ++j)
            rep[std::size_t(j)] =
                compose({{ent->phat_mode_dofs[std::size_t(j - 2)], 1.0}});
          for (int j = 0; j <= pt; ++j) {
            auto fn = [&](double tau) {
              poly::lobatto_table(pt, {tau}, lv, ld);
              return mode.profile(ent->t_lo + len * tau) * lv[std::size_t(j)];
            };
            const double s = len * integrate_panels(fn, 0.0, 1.0);
            fixed_part += s * rep[std::size_t(j)].fixed;
            for (const auto& [u, c] : rep[std::size_t(j)].terms) acc[u] += s * c;
          }
        }
        amp[mi].fixed = fixed_part;
        for (const auto& [u, c] : acc) amp[mi].terms.emplace_back(u, c);
      }
      // per-entity projection of sum_m phi_m a_m / Z_m onto the u-hat basis
      for (const TraceEntity* ent : outs) {
        const double len = ent->t_hi - ent->t_lo;
        for (int i = 0; i <= pt; ++i) {
          std::map<std::int64_t, cplx> acc;
          cplx fixed_part = 0.0;
          for (std::size_t mi = 0; mi < problem.modes.size(); ++mi) {
            const ModeSpec& mode = problem.modes[mi];
            auto fn = [&](double tau) {
              poly::legendre_table(pt, {tau}, uv, ud);
              return mode.profile(ent->t_lo + len * tau) * uv[std::size_t(i)];
            };
            // legendre mass on the entity: len / (2i+1)
            const double proj =
                integrate_panels(fn, 0.0, 1.0) * (2.0 * i + 1.0);
            const cplx scale = proj / mode.impedance;
            fixed_part += scale * amp[mi].fixed;
            for (const auto& [u, c] : amp[mi].terms) acc[u] += scale * c;
          }
          TraceResolution out;
          out.fixed = fixed_part;
          for (const auto& [u, c] : acc) out.terms.emplace_back(u, c);
          plan.trace[std::size_t(ent->uhat_dofs[std::size_t(i)])] = std::move(out);
        }
      }
    }
  }
  return plan;
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

struct SysKey {
  int dim, px, pz, dp;
  double hx, hz, n2, omega, alpha;
  std::vector<double> sides;
  bool operator<(const SysKey& o) const {
    auto tie = [](const SysKey& k) {
      return std::tie(k.dim, k.px, k.pz, k.dp, k.hx, k.hz, k.n2, k.omega, k.alpha);
    };
    if (tie(*this) != tie(o)) return tie(*this) < tie(o);
    return sides < o.sides;
  }
};

SysKey make_key(const Mesh& mesh, const Element& elem, const DofMap& dofmap,
                const WaveProblem& problem) {
  SysKey k;
  k.dim = mesh.dim;
  k.px = problem.trial_px();
  k.pz = problem.trial_pz();
  k.dp = problem.dp;
  k.hx = mesh.dim == 2 ? mesh.xhi(elem) - mesh.xlo(elem) : 1.0;
  k.hz = mesh.zhi(elem) - mesh.zlo(elem);
  const double n = problem.n_of(elem.label);
  k.n2 = n * n;
  k.omega = problem.omega;
  k.alpha = problem.norm.alpha;
  for (const LocalFacetTrace& lf : dofmap.elem_traces[std::size_t(elem.id)]) {
    k.sides.push_back(double(lf.side));
    k.sides.push_back(lf.t0);
    k.sides.push_back(lf.t1);
  }
  return k;
}

}  // namespace

Eigen::VectorXcd Assembly::local_trial(const ElemData& e,
                                       const Eigen::VectorXcd& x) const {
  Eigen::VectorXcd w(e.n_field + e.n_trace_loc);
  for (int i = 0; i < e.n_field; ++i) w[i] = x[e.unknowns[std::size_t(i)]];
  const std::int64_t n_tr_unk = std::int64_t(e.unknowns.size()) - e.n_field;
  Eigen::VectorXcd y(n_tr_unk);
  for (std::int64_t i = 0; i < n_tr_unk; ++i)
    y[i] = x[e.unknowns[std::size_t(e.n_field + i)]];
  w.tail(e.n_trace_loc) = e.c * y + e.d;
  return w;
}

Assembly assemble(const Mesh& mesh, const DofMap& dofmap,
                  const WaveProblem& problem) {
  Assembly asmb;
  asmb.mesh = &mesh;
  asmb.dofmap = &dofmap;
  asmb.problem = &problem;
  asmb.plan = build_bc_plan(mesh, dofmap, problem);

  const std::vector<int> ids = mesh.active_ids();
  const int pt = dofmap.p_trace;
  const int per_facet = (mesh.dim == 1) ? 2 : 2 * (pt + 1);

  // distinct element signatures, then parallel condensation
  std::map<SysKey, std::shared_ptr<Eigen::MatrixXcd>> cache;
  std::vector<const SysKey*> key_of(ids.size());
  std::vector<SysKey> keys(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    keys[i] = make_key(mesh, mesh.elements[std::size_t(ids[i])], dofmap, problem);
    auto [it, inserted] = cache.try_emplace(keys[i], nullptr);
    key_of[i] = &it->first;
  }
  {
    std::vector<std::pair<const SysKey*, std::shared_ptr<Eigen::MatrixXcd>*>> work;
    std::vector<int> rep_elem;
    for (auto& [key, slot] : cache) {
      work.emplace_back(&key, &slot);
    }
    // representative element per key
    std::map<const SysKey*, int> rep;
    for (std::size_t i = 0; i < ids.size(); ++i)
      rep.try_emplace(key_of[i], ids[i]);
    parallel_for(work.size(), [&](std::size_t wi) {
      const int eid = rep.at(work[wi].first);
      ElementCore core = element_core(mesh, mesh.elements[std::size_t(eid)],
                                      dofmap, problem);
      Eigen::MatrixXcd s;
      Eigen::VectorXcd f;
      condense(core.gram, core.b, core.load, s, f);
      *work[wi].second = std::make_shared<Eigen::MatrixXcd>(std::move(s));
    });
  }

  asmb.elems.resize(ids.size());
  const bool has_load = bool(problem.volume_load);
  parallel_for(ids.size(), [&](std::size_t i) {
    const int id = ids[i];
    const Element& elem = mesh.elements[std::size_t(id)];
    Assembly::ElemData& ed = asmb.elems[i];
    ed.id = id;
    ed.n_field = dofmap.field_count[std::size_t(id)];
    const auto& traces = dofmap.elem_traces[std::size_t(id)];
    ed.n_trace_loc = per_facet * int(traces.size());
    ed.s_full = cache.at(keys[i]);

    if (has_load) {
      auto core = std::make_shared<ElementCore>(
          element_core(mesh, elem, dofmap, problem));
      Eigen::LLT<Eigen::MatrixXcd> llt(core->gram);
      const Eigen::VectorXcd gl = llt.solve(core->load);
      ed.f_full = core->b.adjoint() * gl;
      ed.load_norm2 = std::max(0.0, (core->load.adjoint() * gl)[0].real());
      ed.core_raw = std::move(core);
    }

    // local trace resolution: C and fixed part d
    const std::int64_t base = dofmap.field_offset[std::size_t(id)];
    ed.unknowns.reserve(std::size_t(ed.n_field) + 8);
    for (int k = 0; k < ed.n_field; ++k) ed.unknowns.push_back(base + k);
    std::map<std::int64_t, int> tr_col;
    std::vector<std::map<std::int64_t, cplx>> rows(std::size_t(ed.n_trace_loc));
    ed.d = Eigen::VectorXcd::Zero(ed.n_trace_loc);
    int r = 0;
    for (const LocalFacetTrace& lf : traces) {
      for (const auto& row : lf.rows) {
        for (const auto& [dof, wgt] : row) {
          const TraceResolution& res = asmb.plan.trace[std::size_t(dof)];
          ed.d[r] += wgt * res.fixed;
          for (const auto& [u, c] : res.terms) rows[std::size_t(r)][u] += wgt * c;
        }
        ++r;
      }
    }
    for (const auto& row : rows)
      for (const auto& [u, c] : row) tr_col.try_emplace(u, 0);
    int nc = 0;
    for (auto& [u, col] : tr_col) {
      col = nc++;
      ed.unknowns.push_back(u);
    }
    ed.c = Eigen::MatrixXcd::Zero(ed.n_trace_loc, nc);
    for (int rr = 0; rr < ed.n_trace_loc; ++rr)
      for (const auto& [u, c] : rows[std::size_t(rr)]) ed.c(rr, tr_col.at(u)) = c;

    // fold: s_eff = T^H S T, f_eff = T^H (f_full - S e)
    const Eigen::MatrixXcd& s = *ed.s_full;
    const auto sff = s.topLeftCorner(ed.n_field, ed.n_field);
    const auto sft = s.topRightCorner(ed.n_field, ed.n_trace_loc);
    const auto stt = s.bottomRightCorner(ed.n_trace_loc, ed.n_trace_loc);
    const std::int64_t nu = std::int64_t(ed.unknowns.size());
    ed.s_eff.resize(nu, nu);
    ed.s_eff.topLeftCorner(ed.n_field, ed.n_field) = sff;
    const Eigen::MatrixXcd sft_c = sft * ed.c;
    ed.s_eff.topRightCorner(ed.n_field, nc) = sft_c;
    ed.s_eff.bottomLeftCorner(nc, ed.n_field) = sft_c.adjoint();
    ed.s_eff.bottomRightCorner(nc, nc) = ed.c.adjoint() * (stt * ed.c);

    Eigen::VectorXcd f_free(ed.n_field + ed.n_trace_loc);
    f_free.setZero();
    if (has_load) f_free = ed.f_full;
    f_free.head(ed.n_field) -= sft * ed.d;
    f_free.tail(ed.n_trace_loc) -= stt * ed.d;
    ed.f_eff.resize(nu);
    ed.f_eff.head(ed.n_field) = f_free.head(ed.n_field);
    ed.f_eff.tail(nc) = ed.c.adjoint() * f_free.tail(ed.n_trace_loc);
  });

  // deterministic serial scatter
  std::vector<Eigen::Triplet<cplx>> trips;
  std::size_t nnz = 0;
  for (const auto& ed : asmb.elems) nnz += ed.unknowns.size() * ed.unknowns.size();
  trips.reserve(nnz);
  asmb.f = Eigen::VectorXcd::Zero(asmb.plan.n_unknowns);
  for (const auto& ed : asmb.elems) {
    const std::int64_t nu = std::int64_t(ed.unknowns.size());
    for (std::int64_t a = 0; a < nu; ++a) {
      asmb.f[ed.unknowns[std::size_t(a)]] += ed.f_eff[a];
      for (std::int64_t b = 0; b < nu; ++b)
        trips.emplace_back(int(ed.unknowns[std::size_t(a)]),
                           int(ed.unknowns[std::size_t(b)]), ed.s_eff(a, b));
    }
  }
  asmb.s.resize(asmb.plan.n_unknowns, asmb.plan.n_unknowns);
  asmb.s.setFromTriplets(trips.begin(), trips.end());
  asmb.s.makeCompressed();
  return asmb;
}

double residual_total(const Assembly& assembly, const Eigen::VectorXcd& x,
                      std::vector<double>* per_element) {
  std::vector<double> eta2(assembly.elems.size(), 0.0);
  parallel_for(assembly.elems.size(), [&](std::size_t i) {
    const auto& ed = assembly.elems[i];
    const Eigen::VectorXcd w = assembly.local_trial(ed, x);
    if (ed.core_raw) {
      // exact route r = l - B w: no cancellation near zero residual
      const Eigen::VectorXcd r = ed.core_raw->load - ed.core_raw->b * w;
      Eigen::LLT<Eigen::MatrixXcd> llt(ed.core_raw->gram);
      eta2[i] = std::max(0.0, (r.adjoint() * llt.solve(r))[0].real());
      return;
    }
    double r2 = (w.adjoint() * (*ed.s_full) * w)[0].real() + ed.load_norm2;
    if (ed.f_full.size() > 0) r2 -= 2.0 * (ed.f_full.adjoint() * w)[0].real();
    eta2[i] = std::max(0.0, r2);
  });
  if (per_element) {
    per_element->assign(assembly.mesh->elements.size(), 0.0);
    for (std::size_t i = 0; i < assembly.elems.size(); ++i)
      (*per_element)[std::size_t(assembly.elems[i].id)] = std::sqrt(eta2[i]);
  }
  double total2 = 0.0;
  for (double e2 : eta2) total2 += e2;
  return std::sqrt(total2);
}

Solution solve(const Assembly& assembly) {
  Solution sol;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<cplx>> solver;
  solver.compute(assembly.s);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("solve: global system factorization failed (check BCs)");
  sol.x = solver.solve(assembly.f);
  const double fn = assembly.f.norm();
  if (fn > 0.0) {
    for (int it = 0; it < 3; ++it) {
      const Eigen::VectorXcd r = assembly.f - assembly.s * sol.x;
      sol.solver_rel_residual = r.norm() / fn;
      if (sol.solver_rel_residual < 1e-13) break;
      sol.x += solver.solve(r);
    }
    const Eigen::VectorXcd r = assembly.f - assembly.s * sol.x;
    sol.solver_rel_residual = r.norm() / fn;
  }
  sol.n_field = assembly.dofmap->n_field;
  sol.n_dofs = assembly.plan.n_unknowns;
  sol.n_trace_free = assembly.plan.n_unknowns - assembly.dofmap->n_field;
  sol.field_coeffs.assign(assembly.mesh->elements.size(), {});
  for (const auto& ed : assembly.elems) {
    Eigen::VectorXcd c(ed.n_field);
    for (int k = 0; k < ed.n_field; ++k) c[k] = sol.x[ed.unknowns[std::size_t(k)]];
    sol.field_coeffs[std::size_t(ed.id)] = std::move(c);
  }
  compute_residual(assembly, sol);
  return sol;
}

void compute_residual(const Assembly& assembly, Solution& solution) {
  solution.total_residual = residual_total(assembly, solution.x, &solution.eta);
}

Solution assemble_solve(const Mesh& mesh, const DofMap& dofmap,
                        const WaveProblem& problem) {
  const Assembly asmb = assemble(mesh, dofmap, problem);
  return solve(asmb);
}

StabilityReport estimate_infsup(const Mesh& mesh, const WaveProblem& problem) {
  const DofMap dofmap = build_dof_map(mesh, problem.trial_px(), problem.trial_pz());
  const Assembly asmb = assemble(mesh, dofmap, problem);
  const std::int64_t n = asmb.plan.n_unknowns;
  if (n > 2000)
    throw std::invalid_argument("estimate_infsup: more than 2000 unknowns");

  const Eigen::MatrixXcd s = Eigen::MatrixXcd(asmb.s);
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(n, n);
  // field block: diagonal Legendre masses
  const int px = problem.trial_px(), pz = problem.trial_pz();
  for (const auto& ed : asmb.elems) {
    const Element& e = mesh.elements[std::size_t(ed.id)];
    const double hx = mesh.dim == 2 ? mesh.xhi(e) - mesh.xlo(e) : 1.0;
    const double hz = mesh.zhi(e) - mesh.zlo(e);
    std::int64_t at = asmb.dofmap->field_offset[std::size_t(ed.id)];
    for (int comp = 0; comp <= mesh.dim; ++comp) {
      if (mesh.dim == 1) {
        for (int j = 0; j <= pz; ++j, ++at) m(at, at) = hz / (2.0 * j + 1.0);
      } else {
        for (int jz = 0; jz <= pz; ++jz)
          for (int jx = 0; jx <= px; ++jx, ++at)
            m(at, at) = hx * hz / ((2.0 * jx + 1.0) * (2.0 * jz + 1.0));
      }
    }
  }
  // trace block: skeleton L2 mass through the resolution map
  const int pt = dofmap.p_trace;
  const Eigen::MatrixXd lob_mass = mesh.dim == 2 ? lobatto_mass_ref(pt)
                                                 : Eigen::MatrixXd::Identity(1, 1);
  auto scatter = [&](const std::vector<TraceResolution>& rep,
                     const Eigen::MatrixXcd& local_mass) {
    const int k = int(rep.size());
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        if (local_mass(a, b) == cplx(0.0)) continue;
        for (const auto& [ua, ca] : rep[std::size_t(a)].terms)
          for (const auto& [ub, cb] : rep[std::size_t(b)].terms)
            m(ua, ub) += std::conj(ca) * local_mass(a, b) * cb;
      }
  };
  for (const TraceEntity& ent : asmb.dofmap->entities) {
    auto resolve_row = [&](const std::vector<std::pair<std::int64_t, double>>& row) {
      TraceResolution out;
      for (const auto& [dof, wgt] : row) {
        const TraceResolution& r = asmb.plan.trace[std::size_t(dof)];
        for (const auto& [u, c] : r.terms) out.terms.emplace_back(u, wgt * c);
      }
      return out;
    };
    if (mesh.dim == 1) {
      // point traces: weight by the adjacent element sizes so the trace mass
      // scales with h like the field mass does
      const Facet& f = mesh.facets[std::size_t(ent.facet_ids[0])];
      double h_sum = 0.0;
      int n_adj = 0;
      for (int el : {f.elem_lo, f.elem_hi}) {
        if (el < 0) continue;
        h_sum += mesh.zhi(mesh.elements[std::size_t(el)]) -
                 mesh.zlo(mesh.elements[std::size_t(el)]);
        ++n_adj;
      }
      const double h_avg = h_sum / n_adj;
      std::vector<TraceResolution> rep;
      rep.push_back(resolve_row({{ent.phat_point_dof, 1.0}}));
      rep.push_back(resolve_row({{ent.uhat_dofs[0], 1.0}}));
      scatter(rep, (h_avg * Eigen::MatrixXcd::Identity(2, 2)).eval());
      continue;
    }
    const double len = ent.t_hi - ent.t_lo;
    std::vector<TraceResolution> rep;
    rep.push_back(resolve_row(ent.vertex_lo));
    rep.push_back(resolve_row(ent.vertex_hi));
    for (std::int64_t d : ent.phat_mode_dofs) rep.push_back(resolve_row({{d, 1.0}}));
    scatter(rep, (len * lob_mass).cast<cplx>());
    std::vector<TraceResolution> urep;
    for (std::int64_t d : ent.uhat_dofs) urep.push_back(resolve_row({{d, 1.0}}));
    Eigen::MatrixXcd umass = Eigen::MatrixXcd::Zero(pt + 1, pt + 1);
    for (int j = 0; j <= pt; ++j) umass(j, j) = len / (2.0 * j + 1.0);
    scatter(urep, umass);
  }
  m = 0.5 * (m + m.adjoint()).eval();

  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> ges(s, m);
  if (ges.info() != Eigen::Success)
    throw std::runtime_error("estimate_infsup: eigensolver failed");
  StabilityReport rep;
  rep.n_dofs = n;
  rep.gamma_h = std::sqrt(std::max(0.0, ges.eigenvalues()[0]));
  rep.m_const = std::sqrt(std::max(0.0, ges.eigenvalues()[n - 1]));
  return rep;
}

void eval_fields(const Mesh& mesh, const Element& elem, const WaveProblem& problem,
                 const Eigen::VectorXcd& coeffs, const std::vector<double>& xi,
                 const std::vector<double>& zeta, std::vector<cplx>& out) {
  const int dim = mesh.dim;
  const double hx = dim == 2 ? mesh.xhi(elem) - mesh.xlo(elem) : 1.0;
  const double hz = mesh.zhi(elem) - mesh.zlo(elem);
  const BasisTable trial = tabulate_basis(dim, SpaceTag::trial_field,
                                          problem.trial_px(), hx, hz, xi, zeta,
                                          problem.trial_pz());
  const std::size_t nq = zeta.size();
  const int nc = trial.n;
  out.assign(std::size_t(dim + 1) * nq, cplx(0.0));
  std::vector<double> acc_re(nq), acc_im(nq);
  const auto& K = kernels::active();
  for (int comp = 0; comp <= dim; ++comp) {
    std::fill(acc_re.begin(), acc_re.end(), 0.0);
    std::fill(acc_im.begin(), acc_im.end(), 0.0);
    for (int a = 0; a < nc; ++a) {
      const cplx c = coeffs[comp * nc + a];
      K.axpy_cplx(acc_re.data(), acc_im.data(), c.real(), c.imag(),
                  trial.val.data() + std::size_t(a) * nq, nq);
    }
    for (std::size_t q = 0; q < nq; ++q)
      out[std::size_t(comp) * nq + q] = cplx(acc_re[q], acc_im[q]);
  }
}

}  // namespace dpgwave
