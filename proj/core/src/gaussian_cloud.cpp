#include "lumisplat/gaussian_cloud.hpp"

#include <cmath>
#include <stdexcept>

#include "lumisplat/camera.hpp"
#include "lumisplat/rng.hpp"

namespace lumisplat {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

Mat3 rotation_from_quat(const Vec4& q) {
  const double n = q.norm();
  const double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

double GaussianCloud::opacity(int i) const { return sigmoid(opacity_logits[i]); }

Vec3 GaussianCloud::base_color(int i) const {
  return color_logits[i].unaryExpr([](double v) { return sigmoid(v); });
}

Vec3 GaussianCloud::color_out(int i) const {
  return gains[i].cwiseProduct(base_color(i)) + offsets[i];
}

void GaussianCloud::renormalize_rotations() {
  for (auto& q : rotations) q /= q.norm();
}

void GaussianCloud::resize(int n) {
  positions.resize(n);
  log_scales.resize(n);
  rotations.resize(n);
  opacity_logits.resize(n);
  color_logits.resize(n);
  gains.resize(n);
  offsets.resize(n);
}

void CloudGrads::resize(int n) {
  positions.assign(n, Vec3::Zero());
  log_scales.assign(n, Vec3::Zero());
  rotations.assign(n, Vec4::Zero());
  opacity_logits.assign(n, 0.0);
  color_logits.assign(n, Vec3::Zero());
  gains.assign(n, Vec3::Zero());
  offsets.assign(n, Vec3::Zero());
}

void CloudGrads::set_zero() { resize(count()); }

GaussianCloud new_cloud_random(int count, const Aabb& bounds, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("new_cloud_random: count must be >= 1");
  if (bounds.degenerate()) throw std::invalid_argument("new_cloud_random: degenerate bounds");

  Rng rng(derive_seed(seed, /*stream=*/0x10ad));
  GaussianCloud cloud;
  cloud.resize(count);

  const double sigma = bounds.diagonal().norm() / std::cbrt(static_cast<double>(count)) * 0.5;
  const double log_sigma = std::log(sigma);
  const double opacity_logit = logit(0.1);

  for (int i = 0; i < count; ++i) {
    for (int a = 0; a < 3; ++a)
      cloud.positions[i][a] = rng.uniform(bounds.min[a], bounds.max[a]);
    cloud.log_scales[i].setConstant(log_sigma);
    cloud.rotations[i] = Vec4(1, 0, 0, 0);
    cloud.opacity_logits[i] = opacity_logit;
    for (int c = 0; c < 3; ++c)
      cloud.color_logits[i][c] = logit(rng.uniform(0.2, 0.8));
    cloud.gains[i] = Vec3::Ones();
    cloud.offsets[i] = Vec3::Zero();
  }
  return cloud;
}

std::vector<Vec3> transformed_colors(const GaussianCloud& cloud) {
  std::vector<Vec3> out(cloud.count());
  for (int i = 0; i < cloud.count(); ++i) out[i] = cloud.color_out(i);
  return out;
}

Camera make_lookat_camera(int width, int height, double fov_x_rad,
                          const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up).normalized();
  const Eigen::Vector3d down = forward.cross(right);  // y axis points down

  Camera cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.5 * width / std::tan(0.5 * fov_x_rad);
  cam.fy = cam.fx;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;

  Mat3 r;
  r.row(0) = right;
  r.row(1) = down;
  r.row(2) = forward;
  cam.world_to_camera.setIdentity();
  cam.world_to_camera.topLeftCorner<3, 3>() = r;
  cam.world_to_camera.topRightCorner<3, 1>() = -r * eye;
  return cam;
}

}  // namespace lumisplat
