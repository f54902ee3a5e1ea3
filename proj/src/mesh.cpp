// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/mesh.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "json.hpp"

namespace dpgwave {

const char* to_string(DomainLabel label) {
  switch (label) {
    case DomainLabel::bulk: return "bulk";
    case DomainLabel::core_inner: return "core_inner";
    case DomainLabel::core_outer: return "core_outer";
    case DomainLabel::cladding_inner: return "cladding_inner";
    case DomainLabel::cladding_outer: return "cladding_outer";
  }
  return "?";
}

AxisKey span_lo(const AxisSpan& s) {
  AxisKey key{s.cell, s.k, s.level};
  while (key.level > 0 && key.k % 2 == 0) {
    key.k /= 2;
    --key.level;
  }
  return key;
}

AxisKey span_hi(const AxisSpan& s) {
  AxisKey key{s.cell, s.k + 1, s.level};
  while (key.level > 0 && key.k % 2 == 0) {
    key.k /= 2;
    --key.level;
  }
  if (key.level == 0 && key.k == 1) {
    key.cell += 1;
    key.k = 0;
  }
  return key;
}

bool spans_overlap(const AxisSpan& a, const AxisSpan& b) {
  if (a.cell != b.cell) return false;
  const int lvl = std::max(a.level, b.level);
  const std::int64_t alo = a.k << (lvl - a.level);
  const std::int64_t ahi = (a.k + 1) << (lvl - a.level);
  const std::int64_t blo = b.k << (lvl - b.level);
  const std::int64_t bhi = (b.k + 1) << (lvl - b.level);
  return std::max(alo, blo) < std::min(ahi, bhi);
}

bool span_contains(const AxisSpan& outer, const AxisSpan& inner) {
  if (outer.cell != inner.cell || inner.level < outer.level) return false;
  const int shift = inner.level - outer.level;
  return (inner.k >> shift) == outer.k;
}

double Mesh::coord(const std::vector<double>& breaks, const AxisKey& key) const {
  const double lo = breaks[key.cell];
  if (key.k == 0) return lo;
  const double hi = breaks[key.cell + 1];
  return lo + (hi - lo) * (double(key.k) / double(std::int64_t(1) << key.level));
}

double Mesh::axis_lo(const std::vector<double>& breaks, const AxisSpan& s) const {
  return coord(breaks, span_lo(s));
}

double Mesh::axis_hi(const std::vector<double>& breaks, const AxisSpan& s) const {
  return coord(breaks, span_hi(s));
}

double Mesh::measure(const Element& e) const {
  const double dz = zhi(e) - zlo(e);
  if (dim == 1) return dz;
  return dz * (xhi(e) - xlo(e));
}

double Mesh::domain_measure() const {
  const double dz = z_breaks.back() - z_breaks.front();
  if (dim == 1) return dz;
  return dz * (x_breaks.back() - x_breaks.front());
}

std::vector<int> Mesh::active_ids() const {
  std::vector<int> ids;
  for (const Element& e : elements)
    if (e.active) ids.push_back(e.id);
  return ids;
}

std::size_t Mesh::n_active() const {
  std::size_t n = 0;
  for (const Element& e : elements) n += e.active;
  return n;
}

const std::vector<int>& Mesh::side_facets(int elem, int side) const {
  return side_facets_[std::size_t(elem)][std::size_t(side)];
}

namespace {

struct SideEntry {
  AxisSpan tangent;
  int elem;
};

}  // namespace

void Mesh::rebuild_facets() {
  facets.clear();
  side_facets_.assign(elements.size(), {});

  auto add_facet = [&](int axis, AxisKey pos, AxisSpan span, int lo, int hi,
                       BoundaryTag tag) {
    Facet f;
    f.id = int(facets.size());
    f.axis = axis;
    f.pos = pos;
    f.span = span;
    f.elem_lo = lo;
    f.elem_hi = hi;
    f.tag = tag;
    facets.push_back(f);
    // side index: axis 0 -> x-hi(1) of lo elem, x-lo(0) of hi elem;
    //             axis 1 -> z-hi(3) of lo elem, z-lo(2) of hi elem.
    if (lo >= 0) side_facets_[std::size_t(lo)][axis == 0 ? 1 : 3].push_back(f.id);
    if (hi >= 0) side_facets_[std::size_t(hi)][axis == 0 ? 0 : 2].push_back(f.id);
  };

  // Group element sides by (axis, normal position); match lo vs hi sides by
  // tangential overlap. The facet span is the finer of the two sides.
  for (int axis = 0; axis < 2; ++axis) {
    if (dim == 1 && axis == 0) continue;
    std::map<AxisKey, std::pair<std::vector<SideEntry>, std::vector<SideEntry>>>
        lines;
    for (const Element& e : elements) {
      if (!e.active) continue;
      const AxisSpan& normal = (axis == 0) ? e.sx : e.sz;
      const AxisSpan& tangent = (axis == 0) ? e.sz : e.sx;
      lines[span_lo(normal)].second.push_back({tangent, e.id});  // e on hi side
      lines[span_hi(normal)].first.push_back({tangent, e.id});   // e on lo side
    }
    const int n_cells = int(((axis == 0) ? x_breaks : z_breaks).size()) - 1;
    for (auto& [pos, sides] : lines) {
      auto& lo_side = sides.first;
      auto& hi_side = sides.second;
      auto span_less = [](const SideEntry& a, const SideEntry& b) {
        return span_lo(a.tangent) < span_lo(b.tangent);
      };
      std::sort(lo_side.begin(), lo_side.end(), span_less);
      std::sort(hi_side.begin(), hi_side.end(), span_less);

      const bool domain_lo = (pos.cell == 0 && pos.k == 0);
      const bool domain_hi = (pos.cell == n_cells && pos.k == 0);
      if (domain_lo || domain_hi) {
        BoundaryTag tag = BoundaryTag::wall;
        if (axis == 1) tag = domain_lo ? BoundaryTag::input : BoundaryTag::output;
        for (const SideEntry& s : domain_lo ? hi_side : lo_side) {
          if (domain_lo)
            add_facet(axis, pos, s.tangent, -1, s.elem, tag);
          else
            add_facet(axis, pos, s.tangent, s.elem, -1, tag);
        }
        continue;
      }
      // Interior line: sides on each side are pairwise disjoint intervals, so
      // a sorted merge finds all overlaps. The facet takes the finer span.
      std::size_t ia = 0, ib = 0;
      while (ia < lo_side.size() && ib < hi_side.size()) {
        const SideEntry& a = lo_side[ia];
        const SideEntry& b = hi_side[ib];
        if (spans_overlap(a.tangent, b.tangent)) {
          const AxisSpan fine =
              (a.tangent.level >= b.tangent.level) ? a.tangent : b.tangent;
          add_facet(axis, pos, fine, a.elem, b.elem, BoundaryTag::none);
        }
        const AxisKey ha = span_hi(a.tangent), hb = span_hi(b.tangent);
        if (ha < hb)
          ++ia;
        else if (hb < ha)
          ++ib;
        else {
          ++ia;
          ++ib;
        }
      }
    }
  }
}

Mesh build_waveguide_mesh(int length_wavelengths, int elems_per_wavelength,
                          int transverse_layers, int p,
                          const std::vector<double>& layer_boundaries,
                          double z_extent,
                          const std::vector<DomainLabel>& labels) {
  if (length_wavelengths < 1)
    throw std::invalid_argument("build_waveguide_mesh: zero wavelengths");
  if (elems_per_wavelength < 1)
    throw std::invalid_argument("build_waveguide_mesh: zero elements per wavelength");
  if (p < 1) throw std::invalid_argument("build_waveguide_mesh: order must be >= 1");
  if (transverse_layers < 0)
    throw std::invalid_argument("build_waveguide_mesh: negative layer count");

  Mesh mesh;
  mesh.dim = (transverse_layers == 0) ? 1 : 2;
  const int n_cols = length_wavelengths * elems_per_wavelength;
  if (z_extent <= 0.0) z_extent = double(length_wavelengths);
  mesh.z_breaks.resize(std::size_t(n_cols) + 1);
  for (int c = 0; c <= n_cols; ++c)
    mesh.z_breaks[std::size_t(c)] = z_extent * double(c) / double(n_cols);

  int n_rows = 1;
  if (mesh.dim == 2) {
    n_rows = transverse_layers;
    if (!layer_boundaries.empty()) {
      if (int(layer_boundaries.size()) != transverse_layers - 1)
        throw std::invalid_argument(
            "build_waveguide_mesh: boundary count must be transverse_layers - 1");
      double prev = 0.0;
      for (double b : layer_boundaries) {
        if (!(b > prev && b < 1.0))
          throw std::invalid_argument(
              "build_waveguide_mesh: layer boundary outside (0,1) or not increasing");
        prev = b;
      }
      mesh.x_breaks.push_back(0.0);
      mesh.x_breaks.insert(mesh.x_breaks.end(), layer_boundaries.begin(),
                           layer_boundaries.end());
      mesh.x_breaks.push_back(1.0);
    } else {
      mesh.x_breaks.resize(std::size_t(n_rows) + 1);
      for (int r = 0; r <= n_rows; ++r)
        mesh.x_breaks[std::size_t(r)] = double(r) / double(n_rows);
    }
    mesh.layer_labels.resize(std::size_t(n_rows));
    static const DomainLabel cycle[4] = {
        DomainLabel::core_inner, DomainLabel::core_outer,
        DomainLabel::cladding_inner, DomainLabel::cladding_outer};
    for (int r = 0; r < n_rows; ++r) {
      if (!labels.empty())
        mesh.layer_labels[std::size_t(r)] = labels[std::size_t(r) % labels.size()];
      else if (!layer_boundaries.empty())
        mesh.layer_labels[std::size_t(r)] = cycle[r % 4];
      else
        mesh.layer_labels[std::size_t(r)] = DomainLabel::bulk;
    }
  } else {
    mesh.x_breaks = {0.0, 1.0};
    mesh.layer_labels = {DomainLabel::bulk};
  }

  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      Element e;
      e.id = int(mesh.elements.size());
      e.sx = {r, 0, 0};
      e.sz = {c, 0, 0};
      e.p = p;
      e.label = mesh.layer_labels[std::size_t(r)];
      mesh.elements.push_back(e);
    }
  }
  mesh.rebuild_facets();
  return mesh;
}

namespace {

// Split an active element along axis (0 = x, 1 = z, 2 = iso).
void split_element(Mesh& mesh, int id, int axis) {
  Element& parent = mesh.elements[std::size_t(id)];
  parent.active = false;
  parent.split_axis = axis;
  auto child_of = [&](AxisSpan sx, AxisSpan sz) {
    Element c;
    c.id = int(mesh.elements.size());
    c.sx = sx;
    c.sz = sz;
    c.p = mesh.elements[std::size_t(id)].p;
    c.label = mesh.elements[std::size_t(id)].label;
    c.parent = id;
    mesh.elements[std::size_t(id)]
        .children[std::size_t(mesh.elements[std::size_t(id)].n_children++)] = c.id;
    mesh.elements.push_back(c);
  };
  const AxisSpan sx = parent.sx, sz = parent.sz;
  const AxisSpan sx0{sx.cell, 2 * sx.k, sx.level + 1};
  const AxisSpan sx1{sx.cell, 2 * sx.k + 1, sx.level + 1};
  const AxisSpan sz0{sz.cell, 2 * sz.k, sz.level + 1};
  const AxisSpan sz1{sz.cell, 2 * sz.k + 1, sz.level + 1};
  if (axis == 0) {
    child_of(sx0, sz);
    child_of(sx1, sz);
  } else if (axis == 1) {
    child_of(sx, sz0);
    child_of(sx, sz1);
  } else {
    child_of(sx0, sz0);
    child_of(sx1, sz0);
    child_of(sx0, sz1);
    child_of(sx1, sz1);
  }
}

}  // namespace

int close_mesh(Mesh& mesh) {
  int total = 0;
  for (;;) {
    mesh.rebuild_facets();
    // need[axis] per element id
    std::map<int, std::array<bool, 2>> need;
    for (const Facet& f : mesh.facets) {
      if (f.elem_lo < 0 || f.elem_hi < 0) continue;
      const Element& a = mesh.elements[std::size_t(f.elem_lo)];
      const Element& b = mesh.elements[std::size_t(f.elem_hi)];
      const int tangent_axis = (f.axis == 0) ? 1 : 0;
      const int la = (tangent_axis == 0) ? a.sx.level : a.sz.level;
      const int lb = (tangent_axis == 0) ? b.sx.level : b.sz.level;
      if (la + 1 < lb) need[a.id][std::size_t(tangent_axis)] = true;
      if (lb + 1 < la) need[b.id][std::size_t(tangent_axis)] = true;
    }
    if (need.empty()) break;
    for (const auto& [id, axes] : need) {
      const int axis = (axes[0] && axes[1]) ? 2 : (axes[0] ? 0 : 1);
      split_element(mesh, id, axis);
      ++total;
    }
  }
  return total;
}

void refine(Mesh& mesh, const MarkSet& marks) {
  for (const auto& [id, mode] : marks.marks) {
    if (id < 0 || id >= int(mesh.elements.size()) ||
        !mesh.elements[std::size_t(id)].active)
      throw std::invalid_argument("refine: marked element is not active");
    if (mesh.dim == 1) {
      split_element(mesh, id, 1);
      continue;
    }
    switch (mode) {
      case RefineMode::iso: split_element(mesh, id, 2); break;
      case RefineMode::aniso_z: split_element(mesh, id, 1); break;
      case RefineMode::aniso_x: split_element(mesh, id, 0); break;
    }
  }
  close_mesh(mesh);
}

bool is_one_irregular(const Mesh& mesh) {
  // Brute-force pairwise check, independent of the facet bookkeeping.
  std::vector<int> ids = mesh.active_ids();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const Element& a = mesh.elements[std::size_t(ids[i])];
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const Element& b = mesh.elements[std::size_t(ids[j])];
      for (int axis = 0; axis < 2; ++axis) {
        if (mesh.dim == 1 && axis == 0) continue;
        const AxisSpan& na = (axis == 0) ? a.sx : a.sz;
        const AxisSpan& nb = (axis == 0) ? b.sx : b.sz;
        const AxisSpan& ta = (axis == 0) ? a.sz : a.sx;
        const AxisSpan& tb = (axis == 0) ? b.sz : b.sx;
        const bool touching = span_hi(na) == span_lo(nb) || span_hi(nb) == span_lo(na);
        if (!touching || !spans_overlap(ta, tb)) continue;
        if (std::abs(ta.level - tb.level) > 1) return false;
      }
    }
  }
  return true;
}

std::string Mesh::to_json() const {
  nlohmann::json j;
  j["dim"] = dim;
  j["x_breaks"] = x_breaks;
  j["z_breaks"] = z_breaks;
  auto& elems = j["elements"] = nlohmann::json::array();
  for (const Element& e : elements) {
    if (!e.active) continue;
    elems.push_back({{"id", e.id},
                     {"box", {xlo(e), xhi(e), zlo(e), zhi(e)}},
                     {"level", {e.sx.level, e.sz.level}},
                     {"label", to_string(e.label)},
                     {"p", e.p}});
  }
  auto& fs = j["facets"] = nlohmann::json::array();
  for (const Facet& f : facets) {
    const char* tag = f.tag == BoundaryTag::input    ? "input"
                      : f.tag == BoundaryTag::output ? "output"
                      : f.tag == BoundaryTag::wall   ? "wall"
                                                     : "interior";
    const auto& breaks = (f.axis == 0) ? z_breaks : x_breaks;
    fs.push_back({{"id", f.id},
                  {"axis", f.axis},
                  {"pos", coord((f.axis == 0) ? x_breaks : z_breaks, f.pos)},
                  {"span", {axis_lo(breaks, f.span), axis_hi(breaks, f.span)}},
                  {"tag", tag},
                  {"elems", {f.elem_lo, f.elem_hi}}});
  }
  return j.dump(1);
}

}  // namespace dpgwave
