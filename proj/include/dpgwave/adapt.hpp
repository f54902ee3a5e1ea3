// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>

#include "dpgwave/dpg.hpp"
#include "dpgwave/observables.hpp"

namespace dpgwave {

struct AdaptConfig {
  double kappa = 0.5;  // bulk fraction of the squared residual
  RefineMode strategy = RefineMode::iso;
  int max_steps = 4;
  double residual_tol = 0.0;
};

/// Bulk marking: minimal prefix of the residuals sorted by (eta descending,
/// id ascending) whose squared sum reaches kappa times the squared total.
MarkSet dorfler_mark(const std::vector<std::pair<int, double>>& residuals,
                     double kappa, RefineMode mode = RefineMode::iso);

/// Marked-element count per domain label.
std::array<int, 5> domain_histogram(const MarkSet& marks, const Mesh& mesh);

struct AdaptStep {
  int step = 0;
  double total_residual = 0.0;
  std::int64_t n_dofs = 0;
  std::vector<int> marked;
  int closure_refined = 0;
  std::array<int, 5> marks_per_domain{};
  double rel_error_pct = -1.0;  // -1 when no exact solution is known
};

struct AdaptTrace {
  std::vector<AdaptStep> steps;
  std::string to_csv(const std::string& prefix_header,
                     const std::string& prefix_values) const;
};

/// solve -> residual -> mark -> refine -> close, recording each step; the
/// mesh is refined in place. Runs max_steps refinements (max_steps + 1
/// solves) unless the residual tolerance stops it early.
AdaptTrace adapt_loop(Mesh& mesh, const WaveProblem& problem,
                      const AdaptConfig& config,
                      const ExactModeField* exact = nullptr);

}  // namespace dpgwave
