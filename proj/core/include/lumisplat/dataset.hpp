#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "lumisplat/camera.hpp"
#include "lumisplat/gaussian_cloud.hpp"
#include "lumisplat/trainer.hpp"

namespace lumisplat {

// Synthetic multi-view benchmark: a fixed ground-truth Gaussian scene
// rendered from a camera ring, with per-view exposure/gamma degradation of
// the training split. `identity` leaves training views untouched.
struct DatasetSpec {
  std::string preset = "varying";  // lowlight | overexposure | varying | identity
  int train_views = 16;
  int test_views = 4;
  int width = 64;
  int height = 64;
  std::uint64_t seed = 7;
  int backdrop_gaussians = 200;  // enclosing sphere shell
  int content_gaussians = 110;   // blobs near the origin
  double backdrop_radius = 3.0;
  double ring_radius = 2.2;
  double ring_height = 0.9;
  double fov_x = 1.0471975511965976;  // 60 degrees
};

struct DegradationParams {
  double s = 1.0;      // exposure scale
  double gamma = 1.0;  // gamma exponent
};

// Per-preset uniform ranges; throws DataError for an unknown preset name.
DegradationParams sample_degradation(const std::string& preset, std::uint64_t seed,
                                     int view_index);

// pixel' = clamp((s * pixel)^gamma) per channel.
Image degrade(const Image& in, const DegradationParams& p);

// The ground-truth scene backing a synthetic dataset (deterministic).
GaussianCloud make_ground_truth_scene(const DatasetSpec& spec);

// Writes train/ (degraded), train_clean/, test/ (normal light), the two
// transforms files, and the degradation sidecar (never read by training).
void synth_dataset(const DatasetSpec& spec, const std::filesystem::path& out_dir);

// Loads a split ("train" or "test") written by synth_dataset or any
// transforms-file dataset with the same layout. Views ordered by id.
std::vector<ViewRecord> load_views(const std::filesystem::path& dataset_dir,
                                   const std::string& split);

// Cameras only (no images required), for test-time rendering.
std::vector<std::pair<std::string, Camera>> load_cameras(
    const std::filesystem::path& transforms_file);

}  // namespace lumisplat
