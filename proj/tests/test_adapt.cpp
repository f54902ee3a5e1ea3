// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <random>

#include "doctest.h"
#include "dpgwave/adapt.hpp"
#include "dpgwave/experiments.hpp"

using namespace dpgwave;

TEST_CASE("dorfler marking on hand-computed lists") {
  SUBCASE("3,2,1 at kappa 0.5 marks only the largest") {
    // total^2 = 14, threshold 7, first element contributes 9
    const MarkSet m = dorfler_mark({{10, 3.0}, {11, 2.0}, {12, 1.0}}, 0.5);
    REQUIRE(m.marks.size() == 1);
    CHECK(m.marks[0].first == 10);
  }
  SUBCASE("kappa near one marks everything") {
    const MarkSet m = dorfler_mark({{0, 3.0}, {1, 2.0}, {2, 1.0}}, 0.999999);
    CHECK(m.marks.size() == 3);
  }
  SUBCASE("equal residuals, n=4, kappa=0.5 marks two") {
    const MarkSet m =
        dorfler_mark({{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}}, 0.5);
    CHECK(m.marks.size() == 2);
    CHECK(m.marks[0].first == 0);  // tie-break by smaller id
    CHECK(m.marks[1].first == 1);
  }
  SUBCASE("tiny kappa marks exactly one when residuals are distinct") {
    const MarkSet m = dorfler_mark({{4, 0.5}, {5, 0.9}, {6, 0.1}}, 0.01);
    REQUIRE(m.marks.size() == 1);
    CHECK(m.marks[0].first == 5);
  }
  SUBCASE("empty list throws") {
    CHECK_THROWS_AS(dorfler_mark({}, 0.5), std::invalid_argument);
  }
}

TEST_CASE("dorfler marking equals brute-force minimal prefix (1000 trials)") {
  std::mt19937 rng(2026);
  std::uniform_int_distribution<int> nsize(1, 12);
  std::uniform_real_distribution<double> val(0.0, 1.0);
  std::uniform_real_distribution<double> kap(0.05, 0.95);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = nsize(rng);
    std::vector<std::pair<int, double>> residuals;
    for (int i = 0; i < n; ++i) residuals.emplace_back(i, val(rng));
    const double kappa = kap(rng);
    const MarkSet m = dorfler_mark(residuals, kappa);

    // brute force: sorted by (eta desc, id asc), smallest J with
    // sum of squares >= kappa * total
    std::vector<std::pair<int, double>> sorted = residuals;
    std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });
    double total2 = 0.0;
    for (const auto& [id, eta] : sorted) total2 += eta * eta;
    int best_j = 0;
    double acc = 0.0;
    while (best_j < n && acc < kappa * total2) {
      acc += sorted[std::size_t(best_j)].second * sorted[std::size_t(best_j)].second;
      ++best_j;
    }
    REQUIRE(int(m.marks.size()) == best_j);
    for (int j = 0; j < best_j; ++j)
      CHECK(m.marks[std::size_t(j)].first == sorted[std::size_t(j)].first);
    // the marked prefix covers kappa; dropping its last member does not
    double marked2 = 0.0;
    for (const auto& [id, mode] : m.marks) {
      for (const auto& [rid, eta] : residuals)
        if (rid == id) marked2 += eta * eta;
    }
    CHECK(marked2 >= kappa * total2 - 1e-15);
    if (best_j > 0) {
      const double last = sorted[std::size_t(best_j - 1)].second;
      CHECK(marked2 - last * last < kappa * total2);
    }
  }
}

TEST_CASE("domain histogram") {
  Mesh mesh = build_waveguide_mesh(1, 2, 4, 1, {0.25, 0.5, 0.75});
  SUBCASE("no marks, all zeros") {
    const auto h = domain_histogram(MarkSet{}, mesh);
    for (int c : h) CHECK(c == 0);
  }
  SUBCASE("marks concentrate where placed") {
    MarkSet m;
    for (int id : mesh.active_ids())
      if (mesh.elements[std::size_t(id)].label == DomainLabel::core_inner)
        m.marks.emplace_back(id, RefineMode::iso);
    const auto h = domain_histogram(m, mesh);
    CHECK(h[std::size_t(DomainLabel::core_inner)] == 2);
    CHECK(h[std::size_t(DomainLabel::core_outer)] == 0);
  }
}

TEST_CASE("adapt loop on a small 2D guide: decreasing residual, growing dofs") {
  RectRun run = make_rect_run(2, 1, 2, 1, 2, 2);
  AdaptConfig cfg;
  cfg.kappa = 0.5;
  cfg.strategy = RefineMode::iso;
  cfg.max_steps = 3;
  const AdaptTrace trace = adapt_loop(run.mesh, run.problem, cfg);
  REQUIRE(trace.steps.size() == 4);
  for (std::size_t s = 1; s < trace.steps.size(); ++s) {
    CHECK(trace.steps[s].total_residual < trace.steps[s - 1].total_residual);
    CHECK(trace.steps[s].n_dofs > trace.steps[s - 1].n_dofs);
  }
  // every non-final step marked something
  for (std::size_t s = 0; s + 1 < trace.steps.size(); ++s)
    CHECK(trace.steps[s].marked.size() > 0);
  // csv shape: prefix columns + one line per step
  const std::string csv = trace.to_csv("mode,strategy,", "1,iso,");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4);
  CHECK(csv.find("step,total_residual,n_dofs") != std::string::npos);
}

TEST_CASE("invalid adapt config") {
  RectRun run = make_rect_run(2, 1, 1, 1, 1, 2);
  AdaptConfig cfg;
  cfg.kappa = 1.5;
  CHECK_THROWS_AS(adapt_loop(run.mesh, run.problem, cfg), std::invalid_argument);
}
