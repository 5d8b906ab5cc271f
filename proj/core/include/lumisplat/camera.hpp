#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lumisplat {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Pinhole camera. world_to_camera maps world points into a frame with x
// right, y down, z forward; a point is visible when its camera z is positive.
struct Camera {
  int width = 0;
  int height = 0;
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  Mat4 world_to_camera = Mat4::Identity();

  Eigen::Matrix3d rotation() const { return world_to_camera.topLeftCorner<3, 3>(); }
  Eigen::Vector3d translation() const { return world_to_camera.topRightCorner<3, 1>(); }

  Eigen::Vector3d to_camera(const Eigen::Vector3d& p_world) const {
    return rotation() * p_world + translation();
  }

  bool valid() const {
    if (width <= 0 || height <= 0 || fx <= 0.0 || fy <= 0.0) return false;
    const Mat3 r = rotation();
    const Mat3 err = r * r.transpose() - Mat3::Identity();
    return err.cwiseAbs().maxCoeff() < 1e-6 && r.determinant() > 0.0;
  }
};

// Camera positioned at `eye` looking at `target`, y-up world.
Camera make_lookat_camera(int width, int height, double fov_x_rad,
                          const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                          const Eigen::Vector3d& up = Eigen::Vector3d(0, 1, 0));

}  // namespace lumisplat
