// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace dpgwave {

enum class DomainLabel : int {
  bulk = 0,
  core_inner,
  core_outer,
  cladding_inner,
  cladding_outer
};

const char* to_string(DomainLabel label);

enum class BoundaryTag : int { none = 0, input, output, wall };

enum class RefineMode : int { iso = 0, aniso_z, aniso_x };

// Dyadic sub-interval of a base cell: within base cell `cell`, the interval
// [k, k+1] / 2^level. Base cells have arbitrary physical breakpoints, so all
// adjacency and containment tests stay exact in integer arithmetic.
struct AxisSpan {
  int cell = 0;
  std::int64_t k = 0;
  int level = 0;
};

// Canonical endpoint coordinate: cell + dyadic offset, normalized so that k
// is odd or zero and an offset of 1 rolls over into the next cell.
struct AxisKey {
  int cell = 0;
  std::int64_t k = 0;
  int level = 0;
  friend bool operator==(const AxisKey&, const AxisKey&) = default;
  friend auto operator<=>(const AxisKey& a, const AxisKey& b) {
    if (a.cell != b.cell) return a.cell <=> b.cell;
    const int lvl = a.level > b.level ? a.level : b.level;
    return (a.k << (lvl - a.level)) <=> (b.k << (lvl - b.level));
  }
};

AxisKey span_lo(const AxisSpan& s);
AxisKey span_hi(const AxisSpan& s);
// True if the two spans overlap on a set of positive measure.
bool spans_overlap(const AxisSpan& a, const AxisSpan& b);
// True if inner is contained in (or equal to) outer.
bool span_contains(const AxisSpan& outer, const AxisSpan& inner);

struct Element {
  int id = -1;
  AxisSpan sx, sz;  // sx is a dummy single-cell span in 1D
  int p = 1;
  DomainLabel label = DomainLabel::bulk;
  bool active = true;
  int parent = -1;
  std::array<int, 4> children{-1, -1, -1, -1};
  int n_children = 0;
  int split_axis = -1;  // 0 = x, 1 = z, 2 = iso
};

struct Facet {
  int id = -1;
  int axis = 1;       // normal axis: 0 = x, 1 = z
  int elem_lo = -1;   // element on the low-coordinate side (outward normal +axis)
  int elem_hi = -1;
  AxisSpan span;      // tangential extent (z-span for axis 0, x-span for axis 1);
                      // dummy in 1D where facets are points
  AxisKey pos;        // normal-axis position
  BoundaryTag tag = BoundaryTag::none;
};

struct MarkSet {
  std::vector<std::pair<int, RefineMode>> marks;
};

class Mesh {
 public:
  int dim = 1;
  std::vector<double> x_breaks;            // layer boundaries, 2D only
  std::vector<double> z_breaks;            // base column boundaries
  std::vector<DomainLabel> layer_labels;   // per x base cell
  std::vector<Element> elements;           // full refinement tree
  std::vector<Facet> facets;               // active skeleton, rebuilt on change

  double coord(const std::vector<double>& breaks, const AxisKey& key) const;
  double axis_lo(const std::vector<double>& breaks, const AxisSpan& s) const;
  double axis_hi(const std::vector<double>& breaks, const AxisSpan& s) const;

  double xlo(const Element& e) const { return axis_lo(x_breaks, e.sx); }
  double xhi(const Element& e) const { return axis_hi(x_breaks, e.sx); }
  double zlo(const Element& e) const { return axis_lo(z_breaks, e.sz); }
  double zhi(const Element& e) const { return axis_hi(z_breaks, e.sz); }
  double measure(const Element& e) const;
  double domain_measure() const;
  double z_extent() const { return z_breaks.back(); }

  std::vector<int> active_ids() const;
  std::size_t n_active() const;

  // Facet ids by element side; side 0/1 = x-lo/x-hi (2D), 2/3 = z-lo/z-hi.
  const std::vector<int>& side_facets(int elem, int side) const;

  void rebuild_facets();

  std::string to_json() const;

 private:
  // indexed [elem][side]
  std::vector<std::array<std::vector<int>, 4>> side_facets_;
};

/// Structured mesh of (0,1) x (0, z_extent) in 2D (or (0, z_extent) in 1D
/// when transverse_layers == 0) with length_wavelengths * elems_per_wavelength
/// uniform columns. Layer boundaries, when given, must be strictly increasing
/// inside (0,1) and imply transverse_layers bands; labels default to the
/// four-domain cycle when boundaries are given and to bulk otherwise.
Mesh build_waveguide_mesh(int length_wavelengths, int elems_per_wavelength,
                          int transverse_layers, int p,
                          const std::vector<double>& layer_boundaries = {},
                          double z_extent = -1.0,
                          const std::vector<DomainLabel>& labels = {});

/// Refine the marked elements (iso: 4 children in 2D, aniso: 2 children along
/// the stated axis; 1D elements always split in two), then close the mesh.
void refine(Mesh& mesh, const MarkSet& marks);

/// Apply the minimal additional refinements so that adjacent active elements
/// differ by at most one tangential refinement level across any facet.
/// Returns the number of elements force-refined. Idempotent.
int close_mesh(Mesh& mesh);

/// True if every facet of the active mesh satisfies the 1-irregularity bound.
bool is_one_irregular(const Mesh& mesh);

}  // namespace dpgwave
