#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "lumisplat/image.hpp"

namespace lumisplat {

// Peak signal-to-noise ratio for images in [0, 1]. Identical images score
// +infinity.
double psnr(const Image& a, const Image& b);

// Mean structural similarity with the standard 11x11 sigma-1.5 window.
double ssim_metric(const Image& a, const Image& b);

struct ImagePairScore {
  std::string name;
  double psnr = 0.0;
  double ssim = 0.0;
};

// Scores every PNG in `rendered_dir` against the file of the same name in
// `reference_dir`. Throws DataError when a counterpart is missing or the
// directories hold no comparable pairs.
std::vector<ImagePairScore> evaluate_image_dirs(const std::filesystem::path& rendered_dir,
                                                const std::filesystem::path& reference_dir);

double mean_psnr(const std::vector<ImagePairScore>& scores);

// One row per image plus a trailing "mean" row.
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<ImagePairScore>& scores);

}  // namespace lumisplat
