#pragma once

#include <Eigen/Core>
#include <vector>

#include "lumisplat/camera.hpp"
#include "lumisplat/gaussian_cloud.hpp"
#include "lumisplat/image.hpp"

namespace lumisplat {

using Mat2 = Eigen::Matrix2d;
using Vec2 = Eigen::Vector2d;

struct RendererConfig {
  double near_plane = 0.01;        // camera-space z cull threshold, world units
  double blur_floor = 0.3;         // px^2 added to the projected covariance diagonal
  double sigma_cutoff_sq = 9.0;    // evaluate within the 3-sigma ellipse
  double min_transmittance = 1e-4; // stop compositing a pixel below this
};

struct ProjectedGaussian {
  Vec2 mean2d = Vec2::Zero();      // pixels
  Mat2 cov2d = Mat2::Identity();   // pixels^2, blur floor included
  double depth = 0.0;              // camera-space z
  Vec3 color = Vec3::Zero();       // sigmoid(base color logits)
  Vec3 color_out = Vec3::Zero();   // a*c + b
  double opacity = 0.0;            // sigmoid(opacity logit)
  int source_index = -1;
};

// Image buffers plus everything the backward pass needs: the canonically
// sorted gaussians and the per-pixel contributor lists (CSR over pixels).
struct RenderOutput {
  Image image_in;
  Image image_out;
  std::vector<double> depth_map;            // alpha-weighted expected depth
  std::vector<double> final_transmittance;  // per pixel
  Vec3 background = Vec3::Zero();
  std::vector<ProjectedGaussian> sorted;    // depth order, ties by source_index
  std::vector<int> pixel_offsets;           // size W*H+1
  std::vector<int> pixel_entries;           // indices into `sorted`
};

// EWA-style perspective projection of every Gaussian; those behind the near
// plane are dropped. Output order follows the cloud; sorting happens in
// render().
std::vector<ProjectedGaussian> project(const GaussianCloud& cloud, const Camera& camera,
                                       const RendererConfig& cfg = {});

// Front-to-back alpha compositing of both color sets in a single pass.
// Pixel samples sit at (ix + 0.5, iy + 0.5). The input list may arrive in any
// order; a canonical depth sort is applied internally.
RenderOutput render(std::vector<ProjectedGaussian> projected, const Camera& camera,
                    const Vec3& background, const RendererConfig& cfg = {});

// Analytic adjoint of project+render. Gradients w.r.t. every cloud parameter;
// accumulation is row-major over pixels, so results do not depend on anything
// but the inputs. Throws std::invalid_argument on shape mismatch.
CloudGrads render_backward(const GaussianCloud& cloud, const Camera& camera,
                           const RenderOutput& output, const Image& grad_in,
                           const Image& grad_out, const RendererConfig& cfg = {});

}  // namespace lumisplat
