// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/partition.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <stdexcept>

namespace dpgwave {

namespace {

// trace dof -> sorted unique list of adjacent active elements
std::vector<std::vector<int>> dof_adjacency(const Mesh& mesh, const DofMap& dofmap) {
  std::vector<std::vector<int>> adj(std::size_t(dofmap.n_trace));
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    for (const LocalFacetTrace& lf : dofmap.elem_traces[std::size_t(e.id)])
      for (const auto& row : lf.rows)
        for (const auto& [dof, w] : row) adj[std::size_t(dof)].push_back(e.id);
  }
  for (auto& v : adj) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
  return adj;
}

}  // namespace

void compute_workloads(const Mesh& mesh, const DofMap& dofmap,
                       PartitionState& state) {
  state.workload.assign(std::size_t(state.n_ranks), 0);
  state.interface_dofs = 0;
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const int r = state.rank_of[std::size_t(e.id)];
    state.workload[std::size_t(r)] += dofmap.field_count[std::size_t(e.id)];
  }
  const auto adj = dof_adjacency(mesh, dofmap);
  for (const auto& elems : adj) {
    if (elems.empty()) continue;
    const int r0 = state.rank_of[std::size_t(elems[0])];
    bool shared = false;
    for (int id : elems)
      if (state.rank_of[std::size_t(id)] != r0) {
        shared = true;
        break;
      }
    if (shared)
      state.interface_dofs += 1;
    else
      state.workload[std::size_t(r0)] += 1;
  }
}

std::vector<int> inherit_ranks(const Mesh& mesh, const PartitionState& prev) {
  std::vector<int> ranks(mesh.elements.size(), -1);
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    int id = e.id;
    while (id >= 0) {
      if (std::size_t(id) < prev.rank_of.size() && prev.rank_of[std::size_t(id)] >= 0) {
        ranks[std::size_t(e.id)] = prev.rank_of[std::size_t(id)];
        break;
      }
      id = mesh.elements[std::size_t(id)].parent;
    }
  }
  return ranks;
}

ColumnModel::ColumnModel(const Mesh& mesh, const DofMap& dofmap) {
  // distinct z-boundaries of active elements
  std::vector<double> bounds;
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    bounds.push_back(mesh.zlo(e));
    bounds.push_back(mesh.zhi(e));
  }
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  bounds_ = bounds;
  n_cols_ = int(bounds.size()) - 1;

  col_of_elem_.assign(mesh.elements.size(), -1);
  field_prefix_.assign(std::size_t(n_cols_) + 1, 0);
  std::vector<std::int64_t> span(std::size_t(n_cols_) * std::size_t(n_cols_), 0);
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const double mid = 0.5 * (mesh.zlo(e) + mesh.zhi(e));
    const int col = int(std::upper_bound(bounds_.begin(), bounds_.end(), mid) -
                        bounds_.begin()) - 1;
    col_of_elem_[std::size_t(e.id)] = col;
    field_prefix_[std::size_t(col) + 1] += dofmap.field_count[std::size_t(e.id)];
  }
  for (int c = 0; c < n_cols_; ++c)
    field_prefix_[std::size_t(c) + 1] += field_prefix_[std::size_t(c)];

  for (const auto& elems : dof_adjacency(mesh, dofmap)) {
    if (elems.empty()) continue;
    int lo = n_cols_, hi = -1;
    for (int id : elems) {
      lo = std::min(lo, col_of_elem_[std::size_t(id)]);
      hi = std::max(hi, col_of_elem_[std::size_t(id)]);
    }
    span[std::size_t(lo) * std::size_t(n_cols_) + std::size_t(hi)] += 1;
  }
  // span_prefix[u][v] = # dofs whose column interval [lo,hi] has lo >= u and
  // hi <= v: a suffix sum over lo followed by a prefix sum over v
  span_prefix_.assign(std::size_t(n_cols_ + 1) * std::size_t(n_cols_ + 1), 0);
  auto at = [&](int u, int v) -> std::int64_t& {
    return span_prefix_[std::size_t(u) * std::size_t(n_cols_ + 1) + std::size_t(v)];
  };
  for (int u = n_cols_ - 1; u >= 0; --u)
    for (int v = 0; v < n_cols_; ++v)
      at(u, v) = span[std::size_t(u) * std::size_t(n_cols_) + std::size_t(v)] +
                 at(u + 1, v);
  for (int u = 0; u < n_cols_; ++u)
    for (int v = 1; v < n_cols_; ++v) at(u, v) += at(u, v - 1);
  total_ = dofmap.n_total();
}

std::int64_t ColumnModel::workload(int a, int b) const {
  std::int64_t w = field_prefix_[std::size_t(b) + 1] - field_prefix_[std::size_t(a)];
  const auto at = [&](int u, int v) {
    return span_prefix_[std::size_t(u) * std::size_t(n_cols_ + 1) + std::size_t(v)];
  };
  // dofs with lo >= a and hi <= b
  std::int64_t dofs = at(a, b);
  w += dofs;
  return w;
}

PartitionState static_partition(const Mesh& mesh, const DofMap& dofmap,
                                int n_ranks) {
  if (n_ranks < 1) throw std::invalid_argument("static_partition: n_ranks >= 1");
  ColumnModel cols(mesh, dofmap);
  const int c = cols.n_columns();
  if (n_ranks > c)
    throw std::invalid_argument("static_partition: more ranks than element columns");
  PartitionState st;
  st.n_ranks = n_ranks;
  st.rank_of.assign(mesh.elements.size(), -1);
  std::vector<int> first(std::size_t(n_ranks) + 1, 0);
  const int base = c / n_ranks, extra = c % n_ranks;
  for (int r = 0; r < n_ranks; ++r)
    first[std::size_t(r) + 1] = first[std::size_t(r)] + base + (r < extra ? 1 : 0);
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const int col = cols.column_of(e.id);
    const int r = int(std::upper_bound(first.begin() + 1, first.end(), col) -
                      first.begin() - 1);
    st.rank_of[std::size_t(e.id)] = r;
  }
  for (int r = 1; r < n_ranks; ++r)
    st.cuts.push_back(cols.boundary(first[std::size_t(r)]));
  compute_workloads(mesh, dofmap, st);
  return st;
}

PartitionState rebalance_orthogonal(const PartitionState& prev, const Mesh& mesh,
                                    const DofMap& dofmap) {
  ColumnModel cols(mesh, dofmap);
  const int c = cols.n_columns();
  const int nr = prev.n_ranks;
  if (nr > c)
    throw std::invalid_argument("rebalance_orthogonal: more ranks than columns");
  const std::vector<int> inherited = inherit_ranks(mesh, prev);

  // phase 1: minimize the maximum segment workload
  const std::int64_t inf = std::numeric_limits<std::int64_t>::max();
  std::vector<std::int64_t> best(std::size_t(c) + 1, inf), next(std::size_t(c) + 1, inf);
  best[0] = 0;
  for (int r = 0; r < nr; ++r) {
    std::fill(next.begin(), next.end(), inf);
    for (int b = r + 1; b <= c; ++b) {
      for (int a = r; a < b; ++a) {
        if (best[std::size_t(a)] == inf) continue;
        const std::int64_t w =
            std::max(best[std::size_t(a)], cols.workload(a, b - 1));
        if (w < next[std::size_t(b)]) next[std::size_t(b)] = w;
      }
    }
    std::swap(best, next);
  }
  const std::int64_t opt = best[std::size_t(c)];

  // phase 2: among partitions with every segment <= opt, minimize migration
  std::vector<std::vector<std::int64_t>> elems_prefix(
      std::size_t(nr), std::vector<std::int64_t>(std::size_t(c) + 1, 0));
  std::vector<std::int64_t> count_prefix(std::size_t(c) + 1, 0);
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const int col = cols.column_of(e.id);
    count_prefix[std::size_t(col) + 1] += 1;
    const int pr = inherited[std::size_t(e.id)];
    if (pr >= 0 && pr < nr) elems_prefix[std::size_t(pr)][std::size_t(col) + 1] += 1;
  }
  for (int cc = 0; cc < c; ++cc) {
    count_prefix[std::size_t(cc) + 1] += count_prefix[std::size_t(cc)];
    for (int r = 0; r < nr; ++r)
      elems_prefix[std::size_t(r)][std::size_t(cc) + 1] +=
          elems_prefix[std::size_t(r)][std::size_t(cc)];
  }
  auto migration_cost = [&](int a, int b, int r) {
    const std::int64_t n = count_prefix[std::size_t(b) + 1] - count_prefix[std::size_t(a)];
    const std::int64_t keep =
        elems_prefix[std::size_t(r)][std::size_t(b) + 1] -
        elems_prefix[std::size_t(r)][std::size_t(a)];
    return n - keep;
  };

  std::vector<std::vector<std::int64_t>> mig(
      std::size_t(nr) + 1, std::vector<std::int64_t>(std::size_t(c) + 1, inf));
  std::vector<std::vector<int>> from(
      std::size_t(nr) + 1, std::vector<int>(std::size_t(c) + 1, -1));
  mig[0][0] = 0;
  for (int r = 1; r <= nr; ++r) {
    for (int b = r; b <= c; ++b) {
      for (int a = r - 1; a < b; ++a) {
        if (mig[std::size_t(r - 1)][std::size_t(a)] == inf) continue;
        if (cols.workload(a, b - 1) > opt) continue;
        const std::int64_t m = mig[std::size_t(r - 1)][std::size_t(a)] +
                               migration_cost(a, b - 1, r - 1);
        if (m < mig[std::size_t(r)][std::size_t(b)]) {
          mig[std::size_t(r)][std::size_t(b)] = m;
          from[std::size_t(r)][std::size_t(b)] = a;
        }
      }
    }
  }

  // reconstruct segments
  std::vector<int> starts(std::size_t(nr) + 1);
  starts[std::size_t(nr)] = c;
  for (int r = nr; r >= 1; --r)
    starts[std::size_t(r - 1)] = from[std::size_t(r)][std::size_t(starts[std::size_t(r)])];

  PartitionState st;
  st.n_ranks = nr;
  st.rank_of.assign(mesh.elements.size(), -1);
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    const int col = cols.column_of(e.id);
    int r = int(std::upper_bound(starts.begin() + 1, starts.end(), col) -
                starts.begin() - 1);
    if (r >= nr) r = nr - 1;
    st.rank_of[std::size_t(e.id)] = r;
  }
  for (int r = 1; r < nr; ++r) st.cuts.push_back(cols.boundary(starts[std::size_t(r)]));
  compute_workloads(mesh, dofmap, st);
  return st;
}

namespace {

struct Graph {
  std::vector<std::vector<std::pair<int, std::int64_t>>> nbrs;  // (elem, weight)
};

Graph element_graph(const Mesh& mesh, const DofMap& dofmap) {
  Graph g;
  g.nbrs.assign(mesh.elements.size(), {});
  const int pt = dofmap.p_trace;
  const std::int64_t w = (mesh.dim == 1) ? 2 : 2 * (pt + 1);
  for (const Facet& f : mesh.facets) {
    if (f.elem_lo < 0 || f.elem_hi < 0) continue;
    g.nbrs[std::size_t(f.elem_lo)].emplace_back(f.elem_hi, w);
    g.nbrs[std::size_t(f.elem_hi)].emplace_back(f.elem_lo, w);
  }
  return g;
}

}  // namespace

PartitionState rebalance_graph(const PartitionState& prev, const Mesh& mesh,
                               const DofMap& dofmap) {
  const int nr = prev.n_ranks;
  const Graph graph = element_graph(mesh, dofmap);
  std::vector<int> ranks = inherit_ranks(mesh, prev);
  std::vector<std::int64_t> load(std::size_t(nr), 0);
  std::int64_t total_fields = 0;
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    load[std::size_t(ranks[std::size_t(e.id)])] +=
        dofmap.field_count[std::size_t(e.id)];
    total_fields += dofmap.field_count[std::size_t(e.id)];
  }
  const double mean = double(total_fields) / nr;
  const double target = 1.1;

  const int max_moves = 64 * int(mesh.n_active());
  for (int move = 0; move < max_moves; ++move) {
    const std::int64_t cur_max = *std::max_element(load.begin(), load.end());
    if (double(cur_max) <= target * mean) break;
    int src = -1;
    for (int r = 0; r < nr; ++r)
      if (load[std::size_t(r)] == cur_max) {
        src = r;
        break;
      }
    // best boundary move out of src: smallest resulting max(load), then
    // largest cut-weight to the destination (FM-style gain), then id
    int best_elem = -1, best_rank = -1;
    std::int64_t best_new_max = cur_max;
    std::int64_t best_gain = std::numeric_limits<std::int64_t>::min();
    for (const Element& e : mesh.elements) {
      if (!e.active || ranks[std::size_t(e.id)] != src) continue;
      const std::int64_t w = dofmap.field_count[std::size_t(e.id)];
      std::map<int, std::int64_t> link;
      for (const auto& [nb, ew] : graph.nbrs[std::size_t(e.id)]) {
        const int r = ranks[std::size_t(nb)];
        if (r != src) link[r] += ew;
      }
      for (const auto& [r, lw] : link) {
        const std::int64_t nm = std::max(cur_max - w, load[std::size_t(r)] + w);
        const std::int64_t gain = lw;
        const bool better =
            nm < best_new_max || (nm == best_new_max && gain > best_gain) ||
            (nm == best_new_max && gain == best_gain && e.id < best_elem);
        if (better) {
          best_elem = e.id;
          best_rank = r;
          best_new_max = nm;
          best_gain = gain;
        }
      }
    }
    if (best_elem < 0 || best_new_max >= cur_max) break;
    load[std::size_t(src)] -= dofmap.field_count[std::size_t(best_elem)];
    load[std::size_t(best_rank)] += dofmap.field_count[std::size_t(best_elem)];
    ranks[std::size_t(best_elem)] = best_rank;
  }

  PartitionState st;
  st.n_ranks = nr;
  st.rank_of = std::move(ranks);
  compute_workloads(mesh, dofmap, st);
  return st;
}

BalanceMetrics balance_metrics(const PartitionState& prev,
                               const PartitionState& next, const Mesh& mesh) {
  if (prev.n_ranks != next.n_ranks)
    throw std::invalid_argument("balance_metrics: rank count mismatch");
  BalanceMetrics m;
  std::int64_t total = 0, mx = 0;
  for (std::int64_t w : next.workload) {
    total += w;
    mx = std::max(mx, w);
  }
  m.imbalance = double(mx) * next.n_ranks / double(total);
  m.interface = next.interface_dofs;
  const std::vector<int> inherited = inherit_ranks(mesh, prev);
  std::int64_t moved = 0, n = 0;
  for (const Element& e : mesh.elements) {
    if (!e.active) continue;
    ++n;
    if (inherited[std::size_t(e.id)] != next.rank_of[std::size_t(e.id)]) ++moved;
  }
  m.migration = n > 0 ? double(moved) / double(n) : 0.0;
  return m;
}

}  // namespace dpgwave
