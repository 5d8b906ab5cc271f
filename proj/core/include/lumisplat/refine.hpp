#pragma once

#include <cstdint>
#include <vector>

#include "lumisplat/gaussian_cloud.hpp"

namespace lumisplat {

struct RefineConfig {
  int interval = 500;          // iterations between refinements
  int stop_iteration = 8000;   // never refine at or past this iteration
  double prune_opacity = 0.005;
  double clone_top_fraction = 0.05;  // clone the top fraction by positional grad
  int max_gaussians = 4000;
  bool enabled = true;
};

struct RefineResult {
  int pruned = 0;
  int cloned = 0;
  // New-cloud index -> old-cloud index, or -1 for fresh entries (clones),
  // used to remap optimizer moments.
  std::vector<int> moment_map;
};

bool refine_due(std::int64_t iteration, const RefineConfig& cfg);

// Prune low-opacity Gaussians, clone the ones with the largest average
// positional gradient norm (jittered position, halved scale, all other
// attributes copied). Deterministic for fixed seed and iteration.
RefineResult refine_step(GaussianCloud& cloud, const std::vector<double>& avg_pos_grad_norm,
                         const RefineConfig& cfg, std::int64_t iteration, std::uint64_t seed);

}  // namespace lumisplat
