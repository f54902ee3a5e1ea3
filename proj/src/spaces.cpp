// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/spaces.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <map>
#include <stdexcept>

#include "dpgwave/poly1d.hpp"

namespace dpgwave {

DofCounts element_dof_counts(int p, int dp, int dim) {
  if (p < 1 || dp < 1) throw std::invalid_argument("element_dof_counts: p >= 1, dp >= 1");
  DofCounts c;
  const int k = p + dp;
  if (dim == 1) {
    c.n_trial_field = 2 * (p + 1);
    c.n_test = 2 * (k + 1);
    c.n_trace_per_facet = 2;
  } else {
    c.n_trial_field = 3 * (p + 1) * (p + 1);
    c.n_test = (k + 1) * (k + 1) + 2 * (k + 1) * (k + 2);
    c.n_trace_per_facet = 2 * (p + 1);
  }
  return c;
}

namespace {

// 1D factor tables evaluated at a point list.
struct Factor {
  std::vector<double> val, der;
  int n = 0;
  std::size_t np = 0;
  const double* v(int i) const { return val.data() + std::size_t(i) * np; }
  const double* d(int i) const { return der.data() + std::size_t(i) * np; }
};

Factor factor(bool hierarchical, int order, const std::vector<double>& pts) {
  Factor f;
  f.n = order + 1;
  f.np = pts.size();
  if (hierarchical)
    poly::lobatto_table(order, pts, f.val, f.der);
  else
    poly::legendre_table(order, pts, f.val, f.der);
  return f;
}

}  // namespace

BasisTable tabulate_basis(int dim, SpaceTag space, int order, double hx, double hz,
                          const std::vector<double>& xi,
                          const std::vector<double>& zeta, int order_z) {
  if (order < 0) throw std::invalid_argument("tabulate_basis: order must be >= 0");
  const int ox = order;
  const int oz = (order_z >= 0) ? order_z : order;
  BasisTable t;
  t.space = space;
  t.order = order;
  t.nq = zeta.size();

  if (dim == 1 || space == SpaceTag::trace_scalar || space == SpaceTag::trace_flux) {
    // 1D volume spaces and skeleton edge spaces are a single 1D factor; the
    // flux test in 1D is an H1 scalar of the same order (its derivative plays
    // the divergence role). Points come in via zeta.
    const bool h1like = space == SpaceTag::test_scalar ||
                        space == SpaceTag::trace_scalar ||
                        (dim == 1 && space == SpaceTag::test_flux);
    Factor f = factor(h1like, space == SpaceTag::trial_field ? oz : ox, zeta);
    t.n = f.n;
    t.val = std::move(f.val);
    t.dz = std::move(f.der);
    for (double& d : t.dz) d /= hz;
    return t;
  }

  if (dim != 2) throw std::invalid_argument("tabulate_basis: dim must be 1 or 2");
  const std::size_t nq = t.nq;
  if (xi.size() != nq) throw std::invalid_argument("tabulate_basis: point list mismatch");

  auto tensor = [&](const Factor& fx, const Factor& fz, BasisTable& out) {
    out.n = fx.n * fz.n;
    out.val.assign(std::size_t(out.n) * nq, 0.0);
    out.dx.assign(std::size_t(out.n) * nq, 0.0);
    out.dz.assign(std::size_t(out.n) * nq, 0.0);
    int fn = 0;
    for (int jz = 0; jz < fz.n; ++jz)
      for (int jx = 0; jx < fx.n; ++jx, ++fn) {
        double* v = out.val.data() + std::size_t(fn) * nq;
        double* gx = out.dx.data() + std::size_t(fn) * nq;
        double* gz = out.dz.data() + std::size_t(fn) * nq;
        for (std::size_t q = 0; q < nq; ++q) {
          v[q] = fx.v(jx)[q] * fz.v(jz)[q];
          gx[q] = fx.d(jx)[q] * fz.v(jz)[q] / hx;
          gz[q] = fx.v(jx)[q] * fz.d(jz)[q] / hz;
        }
      }
  };

  switch (space) {
    case SpaceTag::trial_field: {
      tensor(factor(false, ox, xi), factor(false, oz, zeta), t);
      return t;
    }
    case SpaceTag::test_scalar: {
      tensor(factor(true, ox, xi), factor(true, oz, zeta), t);
      return t;
    }
    case SpaceTag::test_flux: {
      // v_x in Q(order+1, order), v_z in Q(order, order+1)
      BasisTable cx, cz;
      tensor(factor(true, ox + 1, xi), factor(false, ox, zeta), cx);
      tensor(factor(false, ox, xi), factor(true, ox + 1, zeta), cz);
      t.n = cx.n + cz.n;
      t.vx.assign(std::size_t(t.n) * nq, 0.0);
      t.vz.assign(std::size_t(t.n) * nq, 0.0);
      t.div.assign(std::size_t(t.n) * nq, 0.0);
      std::copy(cx.val.begin(), cx.val.end(), t.vx.begin());
      std::copy(cx.dx.begin(), cx.dx.end(), t.div.begin());
      std::copy(cz.val.begin(), cz.val.end(),
                t.vz.begin() + std::ptrdiff_t(std::size_t(cx.n) * nq));
      std::copy(cz.dz.begin(), cz.dz.end(),
                t.div.begin() + std::ptrdiff_t(std::size_t(cx.n) * nq));
      return t;
    }
    default:
      throw std::invalid_argument("tabulate_basis: unsupported space tag");
  }
}

namespace {

using Row = std::vector<std::pair<std::int64_t, double>>;

struct VertexKey {
  AxisKey x, z;
  friend bool operator==(const VertexKey&, const VertexKey&) = default;
  friend auto operator<=>(const VertexKey& a, const VertexKey& b) {
    if (auto c = a.x <=> b.x; c != 0) return c;
    return a.z <=> b.z;
  }
};

struct VertexInfo {
  VertexKey key;
  std::int64_t dof = -1;
  int hangs_on = -1;    // entity index
  double hang_t = 0.5;  // parameter within the master span
  bool resolved = false;
  Row resolution;
};

struct EntityBuild {
  int axis = 1;
  AxisKey pos;
  AxisSpan span;
  BoundaryTag tag = BoundaryTag::none;
  std::vector<int> facet_ids;
  int v_lo = -1, v_hi = -1;  // vertex indices
};

double span_fraction(const AxisSpan& outer, const AxisKey& point) {
  // parameter of `point` within `outer`, exact for dyadic data
  const AxisKey lo = span_lo(outer);
  const int lvl = std::max({lo.level, point.level, outer.level});
  const auto up = [&](const AxisKey& k) {
    return (k.cell == outer.cell) ? (k.k << (lvl - k.level))
                                  : (std::int64_t(1) << lvl);  // right cell edge
  };
  const std::int64_t a = up(lo);
  const std::int64_t len = std::int64_t(1) << (lvl - outer.level);
  return double(up(point) - a) / double(len);
}

Row combine(const std::vector<std::pair<double, const Row*>>& parts) {
  std::map<std::int64_t, double> acc;
  for (const auto& [c, row] : parts)
    for (const auto& [dof, w] : *row) acc[dof] += c * w;
  Row out;
  for (const auto& [dof, w] : acc)
    if (w != 0.0) out.emplace_back(dof, w);
  return out;
}

// Expansion of the master-edge shapes restricted to a sub-interval
// [off, off+len] in the sub-interval's own shape basis. Exact for matching
// polynomial degrees.
Eigen::MatrixXd restriction_matrix(int p, double off, double len, bool hierarchical) {
  const int n = p + 1;
  QuadRule1D rule = gauss_rule(n);
  std::vector<double> sub_pts = rule.points;
  std::vector<double> master_pts(sub_pts.size());
  for (std::size_t i = 0; i < sub_pts.size(); ++i)
    master_pts[i] = off + len * sub_pts[i];
  std::vector<double> vs, ds, vm, dm;
  if (hierarchical) {
    poly::lobatto_table(p, sub_pts, vs, ds);
    poly::lobatto_table(p, master_pts, vm, dm);
  } else {
    poly::legendre_table(p, sub_pts, vs, ds);
    poly::legendre_table(p, master_pts, vm, dm);
  }
  Eigen::MatrixXd Vs(n, n), Vm(n, n);
  for (int i = 0; i < n; ++i)
    for (int q = 0; q < n; ++q) {
      Vs(q, i) = vs[std::size_t(i) * std::size_t(n) + std::size_t(q)];
      Vm(q, i) = vm[std::size_t(i) * std::size_t(n) + std::size_t(q)];
    }
  // columns of A express each master shape in sub-interval shapes
  return Vs.fullPivLu().solve(Vm);
}

}  // namespace

DofMap build_dof_map(const Mesh& mesh, int px, int pz) {
  if (pz < 0) pz = px;
  // px < 0: take each element's own (isotropic) order; the trace order is the
  // mesh maximum
  int pt = std::max(px, pz);
  if (px < 0) {
    pt = 1;
    for (const Element& e : mesh.elements)
      if (e.active) pt = std::max(pt, e.p);
  }
  DofMap dm;
  dm.dim = mesh.dim;
  dm.p_trace = pt;
  dm.field_offset.assign(mesh.elements.size(), -1);
  dm.field_count.assign(mesh.elements.size(), 0);
  dm.elem_traces.assign(mesh.elements.size(), {});
  dm.facet_entity.assign(mesh.facets.size(), -1);

  const int n_comp = mesh.dim + 1;
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const int ex = px < 0 ? e.p : px;
    const int ez = px < 0 ? e.p : pz;
    const int per_comp = (mesh.dim == 1) ? (ez + 1) : (ex + 1) * (ez + 1);
    dm.field_offset[std::size_t(e.id)] = dm.n_field;
    dm.field_count[std::size_t(e.id)] = n_comp * per_comp;
    dm.n_field += n_comp * per_comp;
  }

  if (mesh.dim == 1) {
    // facets are points; one p-hat and one u-hat DOF each
    std::int64_t next = 0;
    for (const Facet& f : mesh.facets) {
      TraceEntity ent;
      ent.id = int(dm.entities.size());
      ent.axis = 1;
      ent.tag = f.tag;
      ent.pos = mesh.coord(mesh.z_breaks, f.pos);
      ent.facet_ids = {f.id};
      ent.phat_point_dof = next++;
      ent.uhat_dofs = {next++};
      dm.facet_entity[std::size_t(f.id)] = ent.id;
      dm.entities.push_back(std::move(ent));
    }
    dm.n_trace = next;
    dm.trace_class.assign(std::size_t(dm.n_trace), TraceDofClass::free_dof);
    for (const TraceEntity& ent : dm.entities) {
      if (ent.tag == BoundaryTag::input)
        dm.trace_class[std::size_t(ent.phat_point_dof)] = TraceDofClass::input;
    }
    for (const Facet& f : mesh.facets) {
      const TraceEntity& ent = dm.entities[std::size_t(dm.facet_entity[std::size_t(f.id)])];
      for (int side = 0; side < 2; ++side) {
        const int elem = (side == 0) ? f.elem_lo : f.elem_hi;
        if (elem < 0) continue;
        LocalFacetTrace lt;
        lt.facet = f.id;
        lt.side = (side == 0) ? 3 : 2;  // z-hi of lo elem, z-lo of hi elem
        lt.sign = (side == 0) ? 1.0 : -1.0;
        lt.rows.push_back({{ent.phat_point_dof, 1.0}});
        lt.rows.push_back({{ent.uhat_dofs[0], 1.0}});
        dm.elem_traces[std::size_t(elem)].push_back(std::move(lt));
      }
    }
    return dm;
  }

  // --- 2D skeleton ---
  // 1. Entities: conforming facets stand alone; the two halves of a broken
  //    coarse side share one master entity spanning the full side.
  std::vector<EntityBuild> ents;
  std::map<std::pair<int, int>, std::vector<int>> hanging_groups;  // (coarse elem, side)
  for (const Facet& f : mesh.facets) {
    bool hanging = false;
    if (f.elem_lo >= 0 && f.elem_hi >= 0) {
      const Element& a = mesh.elements[std::size_t(f.elem_lo)];
      const Element& b = mesh.elements[std::size_t(f.elem_hi)];
      const AxisSpan& ta = (f.axis == 0) ? a.sz : a.sx;
      const AxisSpan& tb = (f.axis == 0) ? b.sz : b.sx;
      if (ta.level != tb.level) {
        hanging = true;
        const bool a_coarse = ta.level < tb.level;
        const int coarse = a_coarse ? a.id : b.id;
        int side;
        if (f.axis == 0)
          side = a_coarse ? 1 : 0;
        else
          side = a_coarse ? 3 : 2;
        hanging_groups[{coarse, side}].push_back(f.id);
      }
    }
    if (!hanging) {
      EntityBuild e;
      e.axis = f.axis;
      e.pos = f.pos;
      e.span = f.span;
      e.tag = f.tag;
      e.facet_ids = {f.id};
      ents.push_back(std::move(e));
    }
  }
  for (auto& [key, group] : hanging_groups) {
    if (group.size() != 2)
      throw std::runtime_error("build_dof_map: mesh is not closed (1-irregularity)");
    const Element& coarse = mesh.elements[std::size_t(key.first)];
    const Facet& f0 = mesh.facets[std::size_t(group[0])];
    EntityBuild e;
    e.axis = f0.axis;
    e.pos = f0.pos;
    e.span = (f0.axis == 0) ? coarse.sz : coarse.sx;
    e.tag = BoundaryTag::none;
    e.facet_ids = group;
    ents.push_back(std::move(e));
  }
  std::sort(ents.begin(), ents.end(), [](const EntityBuild& a, const EntityBuild& b) {
    if (a.axis != b.axis) return a.axis < b.axis;
    if (a.pos != b.pos) return a.pos < b.pos;
    return span_lo(a.span) < span_lo(b.span);
  });

  // 2. Vertices at entity endpoints; hanging vertices sit strictly inside a
  //    master span on the same grid line.
  std::map<VertexKey, int> vert_index;
  std::vector<VertexInfo> verts;
  auto vertex_at = [&](const VertexKey& k) {
    auto it = vert_index.find(k);
    if (it != vert_index.end()) return it->second;
    const int idx = int(verts.size());
    vert_index.emplace(k, idx);
    VertexInfo v;
    v.key = k;
    verts.push_back(v);
    return idx;
  };
  for (auto& e : ents) {
    VertexKey klo, khi;
    if (e.axis == 0) {
      klo = {e.pos, span_lo(e.span)};
      khi = {e.pos, span_hi(e.span)};
    } else {
      klo = {span_lo(e.span), e.pos};
      khi = {span_hi(e.span), e.pos};
    }
    e.v_lo = vertex_at(klo);
    e.v_hi = vertex_at(khi);
  }
  // line maps for hang detection
  std::map<AxisKey, std::vector<int>> lines[2];
  for (std::size_t ei = 0; ei < ents.size(); ++ei)
    lines[ents[ei].axis][ents[ei].pos].push_back(int(ei));
  for (std::size_t vi = 0; vi < verts.size(); ++vi) {
    VertexInfo& v = verts[vi];
    for (int axis = 0; axis < 2 && v.hangs_on < 0; ++axis) {
      const AxisKey& on_line = (axis == 0) ? v.key.x : v.key.z;
      const AxisKey& along = (axis == 0) ? v.key.z : v.key.x;
      auto it = lines[axis].find(on_line);
      if (it == lines[axis].end()) continue;
      for (int ei : it->second) {
        const EntityBuild& e = ents[std::size_t(ei)];
        if (span_lo(e.span) < along && along < span_hi(e.span)) {
          v.hangs_on = ei;
          v.hang_t = span_fraction(e.span, along);
          break;
        }
      }
    }
  }

  // 3. Global numbering: non-hanging vertices first, then per-entity interior
  //    p-hat modes and u-hat coefficients.
  std::int64_t next = 0;
  std::vector<int> vert_order(verts.size());
  for (std::size_t i = 0; i < verts.size(); ++i) vert_order[i] = int(i);
  std::sort(vert_order.begin(), vert_order.end(),
            [&](int a, int b) { return verts[std::size_t(a)].key < verts[std::size_t(b)].key; });
  for (int vi : vert_order)
    if (verts[std::size_t(vi)].hangs_on < 0) verts[std::size_t(vi)].dof = next++;

  std::vector<std::vector<std::int64_t>> ent_modes(ents.size()), ent_uhat(ents.size());
  for (std::size_t ei = 0; ei < ents.size(); ++ei) {
    for (int j = 0; j < pt - 1; ++j) ent_modes[ei].push_back(next++);
    for (int j = 0; j < pt + 1; ++j) ent_uhat[ei].push_back(next++);
  }
  dm.n_trace = next;

  // 4. Vertex resolutions (hanging vertices resolve through their master edge).
  std::vector<double> lob_cache;
  auto resolve = [&](auto&& self, int vi) -> const Row& {
    VertexInfo& v = verts[std::size_t(vi)];
    if (v.resolved) return v.resolution;
    v.resolved = true;  // set first; hang chains are strictly coarsening, no cycles
    if (v.hangs_on < 0) {
      v.resolution = {{v.dof, 1.0}};
      return v.resolution;
    }
    const EntityBuild& e = ents[std::size_t(v.hangs_on)];
    std::vector<double> val, der;
    poly::lobatto_table(pt, {v.hang_t}, val, der);
    std::vector<std::pair<double, const Row*>> parts;
    const Row& rlo = self(self, e.v_lo);
    const Row& rhi = self(self, e.v_hi);
    parts.emplace_back(val[0], &rlo);
    parts.emplace_back(val[1], &rhi);
    std::vector<Row> mode_rows(std::size_t(std::max(0, pt - 1)));
    for (int j = 2; j <= pt; ++j) {
      mode_rows[std::size_t(j - 2)] = {
          {ent_modes[std::size_t(v.hangs_on)][std::size_t(j - 2)], 1.0}};
      parts.emplace_back(val[std::size_t(j)], &mode_rows[std::size_t(j - 2)]);
    }
    v.resolution = combine(parts);
    return v.resolution;
  };
  for (std::size_t vi = 0; vi < verts.size(); ++vi) resolve(resolve, int(vi));

  // 5. Boundary classification (wall overrides input at corners).
  dm.trace_class.assign(std::size_t(dm.n_trace), TraceDofClass::free_dof);
  auto classify = [&](BoundaryTag tag, TraceDofClass cls) {
    for (std::size_t ei = 0; ei < ents.size(); ++ei) {
      if (ents[std::size_t(ei)].tag != tag) continue;
      for (std::int64_t d : ent_modes[ei]) dm.trace_class[std::size_t(d)] = cls;
      for (int vi : {ents[ei].v_lo, ents[ei].v_hi}) {
        const VertexInfo& v = verts[std::size_t(vi)];
        if (v.dof >= 0) dm.trace_class[std::size_t(v.dof)] = cls;
      }
    }
  };
  classify(BoundaryTag::input, TraceDofClass::input);
  classify(BoundaryTag::wall, TraceDofClass::wall);

  // 6. Publish entities.
  dm.entities.resize(ents.size());
  for (std::size_t ei = 0; ei < ents.size(); ++ei) {
    const EntityBuild& b = ents[ei];
    TraceEntity& e = dm.entities[ei];
    e.id = int(ei);
    e.axis = b.axis;
    e.tag = b.tag;
    const auto& nbreaks = (b.axis == 0) ? mesh.x_breaks : mesh.z_breaks;
    const auto& tbreaks = (b.axis == 0) ? mesh.z_breaks : mesh.x_breaks;
    e.pos = mesh.coord(nbreaks, b.pos);
    e.t_lo = mesh.axis_lo(tbreaks, b.span);
    e.t_hi = mesh.axis_hi(tbreaks, b.span);
    e.facet_ids = b.facet_ids;
    e.vertex_lo = verts[std::size_t(b.v_lo)].resolution;
    e.vertex_hi = verts[std::size_t(b.v_hi)].resolution;
    e.phat_mode_dofs = ent_modes[ei];
    e.uhat_dofs = ent_uhat[ei];
    for (int fid : b.facet_ids) dm.facet_entity[std::size_t(fid)] = int(ei);
  }

  // 7. Per-element facet traces with restriction to sub-spans where hanging.
  std::map<std::pair<int, bool>, Eigen::MatrixXd> restr_cache;  // (hier, hi half)
  auto restriction = [&](bool hier, double off) -> const Eigen::MatrixXd& {
    auto key = std::make_pair(hier ? 1 : 0, off > 0.25);
    auto it = restr_cache.find(key);
    if (it == restr_cache.end())
      it = restr_cache.emplace(key, restriction_matrix(pt, off, 0.5, hier)).first;
    return it->second;
  };

  for (const Facet& f : mesh.facets) {
    const int ei = dm.facet_entity[std::size_t(f.id)];
    const TraceEntity& ent = dm.entities[std::size_t(ei)];
    const EntityBuild& eb = ents[std::size_t(ei)];
    const bool slave = !(f.span.level == eb.span.level);
    double off = 0.0;
    if (slave) off = span_fraction(eb.span, span_lo(f.span));

    // p-hat rep rows of the master entity: v_lo, v_hi, modes
    std::vector<Row> master_phat;
    master_phat.push_back(ent.vertex_lo);
    master_phat.push_back(ent.vertex_hi);
    for (std::int64_t d : ent.phat_mode_dofs) master_phat.push_back({{d, 1.0}});

    for (int which = 0; which < 2; ++which) {
      const int elem = (which == 0) ? f.elem_lo : f.elem_hi;
      if (elem < 0) continue;
      const Element& el = mesh.elements[std::size_t(elem)];
      LocalFacetTrace lt;
      lt.facet = f.id;
      lt.sign = (which == 0) ? 1.0 : -1.0;
      if (f.axis == 0)
        lt.side = (which == 0) ? 1 : 0;
      else
        lt.side = (which == 0) ? 3 : 2;
      const AxisSpan& et = (f.axis == 0) ? el.sz : el.sx;
      lt.t0 = span_fraction(et, span_lo(f.span));
      lt.t1 = span_fraction(et, span_hi(f.span));

      lt.rows.resize(2 * std::size_t(pt + 1));
      if (!slave) {
        lt.rows[0] = ent.vertex_lo;
        lt.rows[1] = ent.vertex_hi;
        for (int j = 0; j < pt - 1; ++j)
          lt.rows[std::size_t(2 + j)] = {{ent.phat_mode_dofs[std::size_t(j)], 1.0}};
        for (int j = 0; j <= pt; ++j)
          lt.rows[std::size_t(pt + 1 + j)] = {{ent.uhat_dofs[std::size_t(j)], 1.0}};
      } else {
        const Eigen::MatrixXd& Ah = restriction(true, off);
        const Eigen::MatrixXd& Al = restriction(false, off);
        for (int i = 0; i <= pt; ++i) {
          std::vector<std::pair<double, const Row*>> parts;
          for (int j = 0; j <= pt; ++j)
            if (Ah(i, j) != 0.0) parts.emplace_back(Ah(i, j), &master_phat[std::size_t(j)]);
          lt.rows[std::size_t(i)] = combine(parts);
          Row urow;
          for (int j = 0; j <= pt; ++j)
            if (Al(i, j) != 0.0)
              urow.emplace_back(ent.uhat_dofs[std::size_t(j)], Al(i, j));
          lt.rows[std::size_t(pt + 1 + i)] = std::move(urow);
        }
      }
      dm.elem_traces[std::size_t(elem)].push_back(std::move(lt));
    }
  }
  // deterministic per-element ordering
  for (auto& lts : dm.elem_traces)
    std::sort(lts.begin(), lts.end(), [](const LocalFacetTrace& a, const LocalFacetTrace& b) {
      if (a.side != b.side) return a.side < b.side;
      return a.t0 < b.t0;
    });
  return dm;
}

}  // namespace dpgwave
