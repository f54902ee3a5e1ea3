// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#include "dpgwave/adapt.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace dpgwave {

MarkSet dorfler_mark(const std::vector<std::pair<int, double>>& residuals,
                     double kappa, RefineMode mode) {
  if (residuals.empty()) throw std::invalid_argument("dorfler_mark: empty residual list");
  if (!(kappa > 0.0 && kappa < 1.0))
    throw std::invalid_argument("dorfler_mark: kappa must be in (0,1)");
  std::vector<std::pair<int, double>> sorted = residuals;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  double total2 = 0.0;
  for (const auto& [id, eta] : sorted) total2 += eta * eta;
  const double target = kappa * total2;
  MarkSet marks;
  double acc = 0.0;
  for (const auto& [id, eta] : sorted) {
    if (acc >= target) break;
    acc += eta * eta;
    marks.marks.emplace_back(id, mode);
  }
  return marks;
}

std::array<int, 5> domain_histogram(const MarkSet& marks, const Mesh& mesh) {
  std::array<int, 5> hist{};
  for (const auto& [id, mode] : marks.marks)
    hist[std::size_t(mesh.elements[std::size_t(id)].label)]++;
  return hist;
}

AdaptTrace adapt_loop(Mesh& mesh, const WaveProblem& problem,
                      const AdaptConfig& config,
                      const ExactModeField* exact) {
  if (!(config.kappa > 0.0 && config.kappa < 1.0))
    throw std::invalid_argument("adapt_loop: kappa must be in (0,1)");
  AdaptTrace trace;
  for (int step = 0;; ++step) {
    const DofMap dofmap = build_dof_map(mesh, problem.trial_px(), problem.trial_pz());
    const Assembly asmb = assemble(mesh, dofmap, problem);
    const Solution sol = solve(asmb);

    AdaptStep rec;
    rec.step = step;
    rec.total_residual = sol.total_residual;
    rec.n_dofs = sol.n_dofs;
    if (exact) rec.rel_error_pct = relative_l2_error(mesh, problem, sol, *exact);

    const bool stop = step >= config.max_steps ||
                      sol.total_residual <= config.residual_tol;
    if (!stop) {
      std::vector<std::pair<int, double>> residuals;
      for (int id : mesh.active_ids())
        residuals.emplace_back(id, sol.eta[std::size_t(id)]);
      const MarkSet marks =
          dorfler_mark(residuals, config.kappa, config.strategy);
      rec.marks_per_domain = domain_histogram(marks, mesh);
      for (const auto& [id, mode] : marks.marks) rec.marked.push_back(id);
      const std::size_t before = mesh.elements.size();
      refine(mesh, marks);
      // refine() splits the marked set first, then closes; every extra split
      // beyond the marked ones came from closure
      int splits = 0;
      for (std::size_t i = 0; i < mesh.elements.size(); ++i)
        if (!mesh.elements[i].active && mesh.elements[i].n_children > 0 &&
            std::size_t(mesh.elements[i].children[0]) >= before)
          ++splits;
      rec.closure_refined = splits - int(marks.marks.size());
    }
    trace.steps.push_back(std::move(rec));
    if (stop) break;
  }
  return trace;
}

std::string AdaptTrace::to_csv(const std::string& prefix_header,
                               const std::string& prefix_values) const {
  std::ostringstream os;
  os.precision(12);
  os << prefix_header
     << "step,total_residual,n_dofs,n_marked,closure_refined,rel_error_pct,"
        "marks_bulk,marks_core_inner,marks_core_outer,marks_cladding_inner,"
        "marks_cladding_outer\n";
  for (const AdaptStep& s : steps) {
    os << prefix_values << s.step << ',' << s.total_residual << ',' << s.n_dofs
       << ',' << s.marked.size() << ',' << s.closure_refined << ',';
    if (s.rel_error_pct >= 0.0) os << s.rel_error_pct;
    os << ',' << s.marks_per_domain[0] << ',' << s.marks_per_domain[1] << ','
       << s.marks_per_domain[2] << ',' << s.marks_per_domain[3] << ','
       << s.marks_per_domain[4] << '\n';
  }
  return os.str();
}

}  // namespace dpgwave
