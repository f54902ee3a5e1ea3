// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "dpgwave/mesh.hpp"
#include "dpgwave/spaces.hpp"

namespace dpgwave {

// Simulated distributed ownership of the active mesh. Workload of a rank is
// its interior DOF count: field DOFs of owned elements plus trace DOFs all of
// whose adjacent elements are owned; trace DOFs shared across ranks form the
// interface.
struct PartitionState {
  int n_ranks = 1;
  std::vector<int> rank_of;  // per element id, -1 if inactive
  std::vector<double> cuts;  // interior cut z-positions (orthogonal modes)
  std::vector<std::int64_t> workload;
  std::int64_t interface_dofs = 0;
};

struct BalanceMetrics {
  double imbalance = 1.0;   // max workload / mean workload
  double migration = 0.0;   // fraction of active elements changing rank
  std::int64_t interface = 0;
};

/// Fill workload / interface for the current rank map.
void compute_workloads(const Mesh& mesh, const DofMap& dofmap,
                       PartitionState& state);

/// Previous ownership carried onto the current (possibly refined) mesh:
/// children inherit the nearest partitioned ancestor's rank.
std::vector<int> inherit_ranks(const Mesh& mesh, const PartitionState& prev);

/// Contiguous z-slabs with near-equal column counts.
PartitionState static_partition(const Mesh& mesh, const DofMap& dofmap,
                                int n_ranks);

/// Optimal orthogonal cuts: minimizes the maximum rank workload over all
/// column-boundary cut placements, then minimizes migration from prev among
/// the minimizers. Elements belong to the slab containing their z-midpoint.
PartitionState rebalance_orthogonal(const PartitionState& prev, const Mesh& mesh,
                                    const DofMap& dofmap);

/// Greedy weighted boundary moves on the element adjacency graph (field DOFs
/// as vertex weights, facet trace DOFs as edge weights); targets imbalance
/// <= 1.1 while watching the edge cut. Deterministic.
PartitionState rebalance_graph(const PartitionState& prev, const Mesh& mesh,
                               const DofMap& dofmap);

/// Metrics of next relative to prev (same mesh for next's workloads).
BalanceMetrics balance_metrics(const PartitionState& prev,
                               const PartitionState& next, const Mesh& mesh);

/// Workload of contiguous column ranges for the orthogonal-cut model; used by
/// the rebalancer and by exhaustive verification.
class ColumnModel {
 public:
  ColumnModel(const Mesh& mesh, const DofMap& dofmap);
  int n_columns() const { return n_cols_; }
  int column_of(int elem_id) const { return col_of_elem_[std::size_t(elem_id)]; }
  double boundary(int i) const { return bounds_[std::size_t(i)]; }
  // total DOFs interior to columns [a, b]
  std::int64_t workload(int a, int b) const;
  std::int64_t total_dofs() const { return total_; }

 private:
  int n_cols_ = 0;
  std::vector<double> bounds_;
  std::vector<int> col_of_elem_;
  std::vector<std::int64_t> field_prefix_;
  // prefix[u][v]: trace DOFs with column interval inside [0..u] x [0..v]
  std::vector<std::int64_t> span_prefix_;
  std::int64_t total_ = 0;
};

}  // namespace dpgwave
