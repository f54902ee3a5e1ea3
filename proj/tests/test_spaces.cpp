// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <set>

#include "doctest.h"
#include "dpgwave/mesh.hpp"
#include "dpgwave/poly1d.hpp"
#include "dpgwave/spaces.hpp"

using namespace dpgwave;

TEST_CASE("per-element dof counts") {
  const DofCounts c1 = element_dof_counts(1, 1, 1);
  CHECK(c1.n_trial_field == 4);
  CHECK(c1.n_test == 6);
  CHECK(c1.n_trace_per_facet == 2);

  const DofCounts c2 = element_dof_counts(2, 1, 2);
  CHECK(c2.n_trial_field == 27);

  for (int p = 1; p <= 6; ++p)
    for (int dim = 1; dim <= 2; ++dim)
      CHECK(element_dof_counts(p, 1, dim).n_test >
            element_dof_counts(p, 1, dim).n_trial_field);

  CHECK_THROWS_AS(element_dof_counts(0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(element_dof_counts(1, 0, 2), std::invalid_argument);
}

TEST_CASE("H1 scalar at p=1 in 1D: two hats forming a partition of unity") {
  const std::vector<double> pts{0.0, 0.2, 0.5, 0.9, 1.0};
  const BasisTable t = tabulate_basis(1, SpaceTag::test_scalar, 1, 1.0, 1.0, {}, pts);
  REQUIRE(t.n == 2);
  for (std::size_t q = 0; q < pts.size(); ++q) {
    CHECK(t.val[q] + t.val[pts.size() + q] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t.val[q] == doctest::Approx(1.0 - pts[q]));
  }
}

TEST_CASE("L2 field at order 0 is the constant function") {
  const std::vector<double> pts{0.1, 0.7};
  const BasisTable t = tabulate_basis(1, SpaceTag::trial_field, 0, 1.0, 1.0, {}, pts);
  REQUIRE(t.n == 1);
  CHECK(t.val[0] == doctest::Approx(1.0));
  CHECK(t.val[1] == doctest::Approx(1.0));
}

TEST_CASE("derivative tables match central finite differences") {
  const double delta = 1e-6;
  const std::vector<double> pts{0.21, 0.43, 0.77};
  std::vector<double> plus = pts, minus = pts;
  for (double& x : plus) x += delta;
  for (double& x : minus) x -= delta;

  for (SpaceTag tag : {SpaceTag::trial_field, SpaceTag::test_scalar}) {
    for (int order : {2, 4}) {
      const double hx = 0.5, hz = 0.25;
      const BasisTable at = tabulate_basis(2, tag, order, hx, hz, pts, pts);
      const BasisTable xp = tabulate_basis(2, tag, order, hx, hz, plus, pts);
      const BasisTable xm = tabulate_basis(2, tag, order, hx, hz, minus, pts);
      const BasisTable zp = tabulate_basis(2, tag, order, hx, hz, pts, plus);
      const BasisTable zm = tabulate_basis(2, tag, order, hx, hz, pts, minus);
      for (int i = 0; i < at.n; ++i)
        for (std::size_t q = 0; q < pts.size(); ++q) {
          const std::size_t k = std::size_t(i) * pts.size() + q;
          const double fdx = (xp.val[k] - xm.val[k]) / (2 * delta * hx);
          const double fdz = (zp.val[k] - zm.val[k]) / (2 * delta * hz);
          CHECK(at.dx[k] == doctest::Approx(fdx).epsilon(1e-6));
          CHECK(at.dz[k] == doctest::Approx(fdz).epsilon(1e-6));
        }
    }
  }
  const BasisTable at = tabulate_basis(2, SpaceTag::test_flux, 3, 1.0, 1.0, pts, pts);
  const BasisTable xp = tabulate_basis(2, SpaceTag::test_flux, 3, 1.0, 1.0, plus, pts);
  const BasisTable xm = tabulate_basis(2, SpaceTag::test_flux, 3, 1.0, 1.0, minus, pts);
  const BasisTable zp = tabulate_basis(2, SpaceTag::test_flux, 3, 1.0, 1.0, pts, plus);
  const BasisTable zm = tabulate_basis(2, SpaceTag::test_flux, 3, 1.0, 1.0, pts, minus);
  for (int i = 0; i < at.n; ++i)
    for (std::size_t q = 0; q < pts.size(); ++q) {
      const std::size_t k = std::size_t(i) * pts.size() + q;
      const double div_fd = (xp.vx[k] - xm.vx[k]) / (2 * delta) +
                            (zp.vz[k] - zm.vz[k]) / (2 * delta);
      CHECK(at.div[k] == doctest::Approx(div_fd).epsilon(1e-5));
    }
}

TEST_CASE("quadrature exactness for monomials") {
  for (int p = 1; p <= 5; ++p) {
    const int dp = 1;
    const QuadRule1D rule = gauss_rule(p + dp + 2);
    for (int k = 0; k <= 2 * (p + dp) + 1; ++k) {
      double s = 0.0;
      for (std::size_t q = 0; q < rule.points.size(); ++q)
        s += rule.weights[q] * std::pow(rule.points[q], k);
      CHECK(std::abs(s - 1.0 / (k + 1)) < 1e-13);
    }
  }
}

TEST_CASE("test scalar space reproduces the trial field space (nesting)") {
  const int p = 3, dp = 1;
  const QuadRule1D rule = gauss_rule(p + dp + 3);
  const std::vector<double>& pts = rule.points;
  const BasisTable trial = tabulate_basis(2, SpaceTag::trial_field, p, 1, 1, pts, pts);
  const BasisTable test = tabulate_basis(2, SpaceTag::test_scalar, p + dp, 1, 1, pts, pts);
  Eigen::MatrixXd a(int(pts.size()), test.n), b(int(pts.size()), trial.n);
  for (int i = 0; i < test.n; ++i)
    for (std::size_t q = 0; q < pts.size(); ++q)
      a(int(q), i) = test.val[std::size_t(i) * pts.size() + q];
  for (int i = 0; i < trial.n; ++i)
    for (std::size_t q = 0; q < pts.size(); ++q)
      b(int(q), i) = trial.val[std::size_t(i) * pts.size() + q];
  const Eigen::MatrixXd coef = a.colPivHouseholderQr().solve(b);
  CHECK((a * coef - b).norm() / b.norm() < 1e-10);
}

TEST_CASE("unsupported space tag throws") {
  CHECK_THROWS_AS(tabulate_basis(2, SpaceTag::trace_scalar, -1, 1, 1, {}, {0.5}),
                  std::invalid_argument);
}

TEST_CASE("1D dof maps: point traces") {
  Mesh m1 = build_waveguide_mesh(1, 1, 0, 2);
  const DofMap d1 = build_dof_map(m1, 2);
  CHECK(d1.n_field == 2 * 3);
  CHECK(d1.n_trace == 4);  // (p-hat, u-hat) x {input, output}

  Mesh m2 = build_waveguide_mesh(1, 2, 0, 2);
  const DofMap d2 = build_dof_map(m2, 2);
  CHECK(d2.n_trace == 6);
  CHECK(d2.n_field == 2 * 2 * 3);
  // the interior facet is shared by both elements with opposite signs
  std::map<std::int64_t, std::vector<double>> uses;
  for (int id : m2.active_ids())
    for (const LocalFacetTrace& lf : d2.elem_traces[std::size_t(id)])
      for (const auto& [dof, w] : lf.rows[1])  // u-hat row
        uses[dof].push_back(lf.sign * w);
  int shared = 0;
  for (const auto& [dof, signs] : uses)
    if (signs.size() == 2) {
      ++shared;
      CHECK(signs[0] * signs[1] < 0.0);
    }
  CHECK(shared == 1);
}

TEST_CASE("2D conforming dof map: hand-counted sizes") {
  Mesh mesh = build_waveguide_mesh(1, 2, 1, 1);  // 2 columns, 1 row, p = 1
  const DofMap dm = build_dof_map(mesh, 1);
  // 6 vertices; 7 entities (4 wall + input + interior + output), each with
  // 2 u-hat dofs and no interior p-hat modes at p = 1
  CHECK(dm.n_trace == 6 + 7 * 2);
  CHECK(dm.n_field == 2 * 3 * 4);
  int walls = 0;
  for (std::int64_t d = 0; d < dm.n_trace; ++d)
    if (dm.trace_class[std::size_t(d)] == TraceDofClass::wall) ++walls;
  // all 6 vertices sit on the walls (width-1 row): wall class wins everywhere
  CHECK(walls == 6);
}

namespace {

// Independent dimension count of the conforming skeleton spaces: rank of a
// constraint system over per-facet polynomial coefficients (monomials in the
// facet-local parameter). p-hat: hanging continuation + vertex continuity;
// u-hat: hanging continuation only.
struct SkeletonRank {
  int phat_dim = 0;
  int uhat_dim = 0;
};

SkeletonRank conforming_rank(const Mesh& mesh, int p) {
  struct FacetGeom {
    double t0, t1;
    int line_axis;
    double pos;
    int id;
  };
  std::vector<FacetGeom> fg;
  for (const Facet& f : mesh.facets) {
    FacetGeom g;
    g.id = f.id;
    g.line_axis = f.axis;
    const auto& tbreaks = (f.axis == 0) ? mesh.z_breaks : mesh.x_breaks;
    g.t0 = mesh.axis_lo(tbreaks, f.span);
    g.t1 = mesh.axis_hi(tbreaks, f.span);
    g.pos = mesh.coord((f.axis == 0) ? mesh.x_breaks : mesh.z_breaks, f.pos);
    fg.push_back(g);
  }
  const int nvar = int(fg.size()) * (p + 1);
  auto eval_into = [&](Eigen::RowVectorXd& row, int fi, double t, double s) {
    const double tau = (t - fg[std::size_t(fi)].t0) /
                       (fg[std::size_t(fi)].t1 - fg[std::size_t(fi)].t0);
    double m = 1.0;
    for (int k = 0; k <= p; ++k, m *= tau) row(fi * (p + 1) + k) += s * m;
  };

  std::map<std::pair<int, int>, std::vector<int>> by_coarse;
  for (const Facet& f : mesh.facets) {
    if (f.elem_lo < 0 || f.elem_hi < 0) continue;
    const Element& a = mesh.elements[std::size_t(f.elem_lo)];
    const Element& b = mesh.elements[std::size_t(f.elem_hi)];
    const AxisSpan& ta = (f.axis == 0) ? a.sz : a.sx;
    const AxisSpan& tb = (f.axis == 0) ? b.sz : b.sx;
    if (ta.level == tb.level) continue;
    const int coarse = (ta.level < tb.level) ? a.id : b.id;
    by_coarse[{coarse, f.axis}].push_back(f.id);
  }

  std::vector<Eigen::RowVectorXd> hang_rows, vert_rows;
  for (const auto& [key, pair] : by_coarse) {
    REQUIRE(pair.size() == 2);
    for (int s = 0; s <= p; ++s) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nvar);
      const int f1 = pair[0], f2 = pair[1];
      const double t = fg[std::size_t(f2)].t0 +
                       (fg[std::size_t(f2)].t1 - fg[std::size_t(f2)].t0) *
                           (s + 0.31) / (p + 1);
      eval_into(row, f1, t, 1.0);  // polynomial continuation of f1 onto f2
      eval_into(row, f2, t, -1.0);
      hang_rows.push_back(row);
    }
  }

  std::map<std::pair<long long, long long>, std::vector<std::pair<int, double>>> ends;
  for (const FacetGeom& g : fg) {
    const auto keyof = [&](double t) {
      const double x = (g.line_axis == 0) ? g.pos : t;
      const double z = (g.line_axis == 0) ? t : g.pos;
      return std::make_pair((long long)std::llround(x * 1e9),
                            (long long)std::llround(z * 1e9));
    };
    ends[keyof(g.t0)].emplace_back(g.id, g.t0);
    ends[keyof(g.t1)].emplace_back(g.id, g.t1);
  }
  for (const auto& [key, incident] : ends) {
    for (std::size_t i = 1; i < incident.size(); ++i) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nvar);
      eval_into(row, incident[0].first, incident[0].second, 1.0);
      eval_into(row, incident[i].first, incident[i].second, -1.0);
      vert_rows.push_back(row);
    }
  }
  // hanging vertices: a facet endpoint strictly inside another facet's span
  for (const FacetGeom& g : fg) {
    for (double t : {g.t0, g.t1}) {
      for (const FacetGeom& h : fg) {
        if (h.id == g.id || h.line_axis != g.line_axis) continue;
        if (std::abs(h.pos - g.pos) > 1e-12) continue;
        if (t > h.t0 + 1e-12 && t < h.t1 - 1e-12) {
          Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nvar);
          eval_into(row, g.id, t, 1.0);
          eval_into(row, h.id, t, -1.0);
          vert_rows.push_back(row);
        }
      }
    }
  }

  auto rank_of = [&](const std::vector<Eigen::RowVectorXd>& rows) {
    if (rows.empty()) return 0;
    Eigen::MatrixXd c(int(rows.size()), nvar);
    for (std::size_t i = 0; i < rows.size(); ++i) c.row(int(i)) = rows[i];
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c);
    svd.setThreshold(1e-9);
    return int(svd.rank());
  };

  SkeletonRank out;
  std::vector<Eigen::RowVectorXd> all = hang_rows;
  all.insert(all.end(), vert_rows.begin(), vert_rows.end());
  out.phat_dim = nvar - rank_of(all);
  out.uhat_dim = nvar - rank_of(hang_rows);
  return out;
}

}  // namespace

TEST_CASE("hanging dof map matches the conforming-space rank oracle") {
  for (int p : {1, 2, 3}) {
    Mesh mesh = build_waveguide_mesh(1, 2, 2, p);
    MarkSet marks;
    marks.marks.emplace_back(0, RefineMode::iso);
    refine(mesh, marks);
    REQUIRE(is_one_irregular(mesh));
    const DofMap dm = build_dof_map(mesh, p);
    const SkeletonRank oracle = conforming_rank(mesh, p);
    CHECK(dm.n_trace == oracle.phat_dim + oracle.uhat_dim);
  }
}

TEST_CASE("hanging facet traces agree from both sides") {
  Mesh mesh = build_waveguide_mesh(1, 2, 2, 2);
  MarkSet marks;
  marks.marks.emplace_back(0, RefineMode::iso);
  refine(mesh, marks);
  const int p = 3;
  const DofMap dm = build_dof_map(mesh, p);

  std::vector<double> master(std::size_t(dm.n_trace));
  unsigned state = 99;
  for (double& v : master) {
    state = state * 1664525u + 1013904223u;
    v = double(state % 1000) / 500.0 - 1.0;
  }
  std::vector<double> lob, lobd, leg, legd;
  for (const Facet& f : mesh.facets) {
    if (f.elem_lo < 0 || f.elem_hi < 0) continue;
    auto local_poly = [&](int elem, double tau, int block) {
      for (const LocalFacetTrace& lf : dm.elem_traces[std::size_t(elem)]) {
        if (lf.facet != f.id) continue;
        poly::lobatto_table(p, {tau}, lob, lobd);
        poly::legendre_table(p, {tau}, leg, legd);
        double s = 0.0;
        for (int j = 0; j <= p; ++j) {
          double coef = 0.0;
          for (const auto& [dof, w] : lf.rows[std::size_t(block * (p + 1) + j)])
            coef += w * master[std::size_t(dof)];
          s += coef * (block == 0 ? lob[std::size_t(j)] : leg[std::size_t(j)]);
        }
        return s;
      }
      REQUIRE(false);
      return 0.0;
    };
    for (double tau : {0.0, 0.25, 0.55, 1.0})
      for (int block : {0, 1}) {
        const double a = local_poly(f.elem_lo, tau, block);
        const double b = local_poly(f.elem_hi, tau, block);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
      }
  }
}
