#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "lumisplat/image.hpp"

namespace lumisplat {

using Vec4 = Eigen::Vector4d;
using Mat3 = Eigen::Matrix3d;

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  Vec3 diagonal() const { return max - min; }
  bool degenerate() const {
    return (max.array() <= min.array()).any();
  }
  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
};

// Explicit scene: anisotropic Gaussians with two color sets. Base colors and
// opacities live behind sigmoids of unconstrained parameters; the per-Gaussian
// gain/offset pair (a, b) produces the second color set c_out = a*c + b.
struct GaussianCloud {
  std::vector<Vec3> positions;
  std::vector<Vec3> log_scales;      // log of per-axis std-dev, world units
  std::vector<Vec4> rotations;       // quaternion (w, x, y, z), unit norm
  std::vector<double> opacity_logits;
  std::vector<Vec3> color_logits;    // base color = sigmoid(logit), per channel
  std::vector<Vec3> gains;           // a, init (1,1,1)
  std::vector<Vec3> offsets;         // b, init (0,0,0)

  int count() const { return static_cast<int>(positions.size()); }

  double opacity(int i) const;
  Vec3 base_color(int i) const;
  Vec3 color_out(int i) const;  // a*c + b, unclamped

  void renormalize_rotations();
  void resize(int n);
};

// Mirror of the trainable cloud fields, used to accumulate gradients.
struct CloudGrads {
  std::vector<Vec3> positions;
  std::vector<Vec3> log_scales;
  std::vector<Vec4> rotations;
  std::vector<double> opacity_logits;
  std::vector<Vec3> color_logits;
  std::vector<Vec3> gains;
  std::vector<Vec3> offsets;

  explicit CloudGrads(int n = 0) { resize(n); }
  void resize(int n);
  void set_zero();
  int count() const { return static_cast<int>(positions.size()); }
};

// Uniform random cloud standing in for structure-from-motion points.
// Deterministic for a fixed seed. Throws std::invalid_argument on count < 1
// or a degenerate bounding box.
GaussianCloud new_cloud_random(int count, const Aabb& bounds, std::uint64_t seed);

// Eq-3-style affine color transform, c_out_i = a_i * c_i + b_i, unclamped.
std::vector<Vec3> transformed_colors(const GaussianCloud& cloud);

double sigmoid(double x);
double logit(double p);

// Rotation matrix from a (not necessarily unit) quaternion; normalizes first.
Mat3 rotation_from_quat(const Vec4& q);

}  // namespace lumisplat
