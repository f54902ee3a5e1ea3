// Copyright (c) 2026 The dpgwave developers. All rights reserved.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "dpgwave/adapt.hpp"
#include "dpgwave/config.hpp"
#include "dpgwave/physics.hpp"

namespace dpgwave {

struct ExperimentResult {
  int failures = 0;  // failed grid points (rows are still written)
  std::vector<std::pair<std::string, std::string>> files;  // (name, content)
};

// Experiment drivers. Each returns the CSV outputs it produced; run_experiment
// writes them under out_dir. All grids and physical parameters come from the
// config with desk-scale defaults (see --help of the CLI).
ExperimentResult run_pollution_sweep(const Config& cfg);
ExperimentResult run_aniso_sweep(const Config& cfg);
ExperimentResult run_adapt_study(const Config& cfg);
ExperimentResult run_partition_study(const Config& cfg);
ExperimentResult run_convergence_study(const Config& cfg);
ExperimentResult run_stability_probe(const Config& cfg);

/// Dispatch by name; writes result files into out_dir. Returns the process
/// exit code: 0 success, 2 partial row failures.
int run_experiment(const std::string& name, const Config& cfg,
                   const std::string& out_dir, unsigned seed);

// Shared setup helpers (also used by tests and the acceptance suite).

/// Slab-fiber analogue: 7 transverse layers labeled outward from the core.
struct SlabSetup {
  SlabGeometry geom;
  std::vector<double> boundaries;
  std::vector<DomainLabel> labels;
  int layers = 7;
};
SlabSetup default_slab_setup();

/// Mesh + problem for a slab run: z extent covers length_wavelengths of the
/// excited mode.
struct SlabRun {
  Mesh mesh;
  WaveProblem problem;
};
SlabRun make_slab_run(const SlabSetup& setup, double v_number, int mode, int p,
                      int dp, int length_wavelengths, int epw);

/// Mesh + problem for the rectangular-guide pollution studies (unit
/// wavelength along z).
struct RectRun {
  Mesh mesh;
  WaveProblem problem;
};
RectRun make_rect_run(int dim, int mode, int p, int dp, int length_wavelengths,
                      int epw, int layers = 2, int epw_z_override = -1,
                      int pz_override = -1);

}  // namespace dpgwave
