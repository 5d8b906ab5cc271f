#include "lumisplat/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lumisplat/errors.hpp"

namespace lumisplat {

namespace {

// Everything derived while projecting one Gaussian. Recomputed in the
// backward pass so the forward output can stay lean.
struct ProjectionDetail {
  bool visible = false;
  Eigen::Vector3d t = Eigen::Vector3d::Zero();  // camera-space position
  Mat3 rot = Mat3::Identity();                  // from the quaternion
  Vec3 scales = Vec3::Zero();                   // exp(log_scales)
  Mat3 cov3d = Mat3::Identity();
  Eigen::Matrix<double, 2, 3> jac = Eigen::Matrix<double, 2, 3>::Zero();
  Eigen::Matrix<double, 2, 3> jw = Eigen::Matrix<double, 2, 3>::Zero();  // J * R_cam
  Vec2 mean2d = Vec2::Zero();
  Mat2 cov2d = Mat2::Identity();
};

ProjectionDetail project_one(const GaussianCloud& cloud, int i, const Camera& camera,
                             const RendererConfig& cfg) {
  ProjectionDetail d;
  d.t = camera.to_camera(cloud.positions[i]);
  if (d.t.z() <= cfg.near_plane) return d;
  d.visible = true;

  const double tz = d.t.z();
  d.mean2d = Vec2(camera.fx * d.t.x() / tz + camera.cx,
                  camera.fy * d.t.y() / tz + camera.cy);

  d.rot = rotation_from_quat(cloud.rotations[i]);
  d.scales = cloud.log_scales[i].array().exp();
  d.cov3d = d.rot * d.scales.array().square().matrix().asDiagonal() * d.rot.transpose();

  d.jac << camera.fx / tz, 0.0, -camera.fx * d.t.x() / (tz * tz),
      0.0, camera.fy / tz, -camera.fy * d.t.y() / (tz * tz);
  d.jw = d.jac * camera.rotation();
  d.cov2d = d.jw * d.cov3d * d.jw.transpose();
  d.cov2d(0, 0) += cfg.blur_floor;
  d.cov2d(1, 1) += cfg.blur_floor;
  return d;
}

struct PixelBounds {
  int x0, x1, y0, y1;  // inclusive; empty when x0 > x1
  bool empty() const { return x0 > x1 || y0 > y1; }
};

// Conservative pixel rectangle covering the 3-sigma ellipse. The marginal
// extent of {q = cutoff} along x is sqrt(cutoff * cov_xx).
PixelBounds bounds_for(const ProjectedGaussian& g, int width, int height, double cutoff_sq) {
  const double rx = std::sqrt(cutoff_sq * g.cov2d(0, 0)) + 1e-6;
  const double ry = std::sqrt(cutoff_sq * g.cov2d(1, 1)) + 1e-6;
  PixelBounds b;
  b.x0 = std::max(0, static_cast<int>(std::ceil(g.mean2d.x() - rx - 0.5)));
  b.x1 = std::min(width - 1, static_cast<int>(std::floor(g.mean2d.x() + rx - 0.5)));
  b.y0 = std::max(0, static_cast<int>(std::ceil(g.mean2d.y() - ry - 0.5)));
  b.y1 = std::min(height - 1, static_cast<int>(std::floor(g.mean2d.y() + ry - 0.5)));
  return b;
}

struct Conic {
  double a, b, c;  // q = a*dx^2 + 2*b*dx*dy + c*dy^2
};

Conic conic_of(const Mat2& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  if (!(det > 0.0) || !(cov(0, 0) > 0.0))
    throw NumericError("projected covariance not positive definite");
  return {cov(1, 1) / det, -cov(0, 1) / det, cov(0, 0) / det};
}

}  // namespace

std::vector<ProjectedGaussian> project(const GaussianCloud& cloud, const Camera& camera,
                                       const RendererConfig& cfg) {
  std::vector<ProjectedGaussian> out;
  out.reserve(cloud.count());
  for (int i = 0; i < cloud.count(); ++i) {
    const ProjectionDetail d = project_one(cloud, i, camera, cfg);
    if (!d.visible) continue;
    ProjectedGaussian g;
    g.mean2d = d.mean2d;
    g.cov2d = d.cov2d;
    g.depth = d.t.z();
    g.color = cloud.base_color(i);
    g.color_out = cloud.color_out(i);
    g.opacity = cloud.opacity(i);
    g.source_index = i;
    out.push_back(g);
  }
  return out;
}

RenderOutput render(std::vector<ProjectedGaussian> projected, const Camera& camera,
                    const Vec3& background, const RendererConfig& cfg) {
  RenderOutput out;
  out.background = background;
  out.image_in = Image(camera.width, camera.height);
  out.image_out = Image(camera.width, camera.height);
  const int num_pixels = camera.width * camera.height;
  out.depth_map.assign(num_pixels, 0.0);
  out.final_transmittance.assign(num_pixels, 1.0);

  std::sort(projected.begin(), projected.end(),
            [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
              if (a.depth != b.depth) return a.depth < b.depth;
              return a.source_index < b.source_index;
            });
  out.sorted = std::move(projected);

  // CSR contributor lists: two passes over the bounding boxes keeps per-pixel
  // entries in global depth order.
  out.pixel_offsets.assign(num_pixels + 1, 0);
  std::vector<Conic> conics(out.sorted.size());
  std::vector<PixelBounds> boxes(out.sorted.size());
  for (size_t j = 0; j < out.sorted.size(); ++j) {
    conics[j] = conic_of(out.sorted[j].cov2d);
    boxes[j] = bounds_for(out.sorted[j], camera.width, camera.height, cfg.sigma_cutoff_sq);
    const PixelBounds& b = boxes[j];
    if (b.empty()) continue;
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x) ++out.pixel_offsets[y * camera.width + x + 1];
  }
  for (int p = 0; p < num_pixels; ++p) out.pixel_offsets[p + 1] += out.pixel_offsets[p];
  out.pixel_entries.resize(out.pixel_offsets[num_pixels]);
  std::vector<int> cursor(out.pixel_offsets.begin(), out.pixel_offsets.end() - 1);
  for (size_t j = 0; j < out.sorted.size(); ++j) {
    const PixelBounds& b = boxes[j];
    if (b.empty()) continue;
    for (int y = b.y0; y <= b.y1; ++y)
      for (int x = b.x0; x <= b.x1; ++x)
        out.pixel_entries[cursor[y * camera.width + x]++] = static_cast<int>(j);
  }

  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const int p = y * camera.width + x;
      const double px = x + 0.5, py = y + 0.5;
      double transmittance = 1.0;
      Vec3 acc_in = Vec3::Zero(), acc_out = Vec3::Zero();
      double acc_depth = 0.0;
      for (int e = out.pixel_offsets[p]; e < out.pixel_offsets[p + 1]; ++e) {
        const int j = out.pixel_entries[e];
        const ProjectedGaussian& g = out.sorted[j];
        const double dx = px - g.mean2d.x();
        const double dy = py - g.mean2d.y();
        const Conic& k = conics[j];
        const double q = k.a * dx * dx + 2.0 * k.b * dx * dy + k.c * dy * dy;
        if (q > cfg.sigma_cutoff_sq) continue;
        const double alpha = g.opacity * std::exp(-0.5 * q);
        const double weight = alpha * transmittance;
        acc_in += g.color * weight;
        acc_out += g.color_out * weight;
        acc_depth += g.depth * weight;
        transmittance *= 1.0 - alpha;
        if (transmittance < cfg.min_transmittance) break;
      }
      acc_in += background * transmittance;
      acc_out += background * transmittance;
      out.image_in.set_pixel(y, x, acc_in);
      out.image_out.set_pixel(y, x, acc_out);
      out.depth_map[p] = acc_depth;
      out.final_transmittance[p] = transmittance;
    }
  }
  return out;
}

CloudGrads render_backward(const GaussianCloud& cloud, const Camera& camera,
                           const RenderOutput& output, const Image& grad_in,
                           const Image& grad_out, const RendererConfig& cfg) {
  if (grad_in.width != camera.width || grad_in.height != camera.height ||
      grad_out.width != camera.width || grad_out.height != camera.height)
    throw std::invalid_argument("render_backward: gradient image dimensions mismatch");

  const size_t n = output.sorted.size();
  std::vector<Conic> conics(n);
  for (size_t j = 0; j < n; ++j) conics[j] = conic_of(output.sorted[j].cov2d);

  // Gradients w.r.t. per-projected-gaussian quantities.
  std::vector<Vec2> g_mean(n, Vec2::Zero());
  std::vector<Eigen::Vector3d> g_conic(n, Eigen::Vector3d::Zero());  // (a, b, c) of the conic
  std::vector<double> g_opacity(n, 0.0);
  std::vector<Vec3> g_color(n, Vec3::Zero());
  std::vector<Vec3> g_color_out(n, Vec3::Zero());

  struct Contrib {
    int j;
    double alpha;
    double trans;  // transmittance in front of this contributor
    double dx, dy;
    double gauss;  // exp(-q/2)
  };
  std::vector<Contrib> walk;

  for (int y = 0; y < camera.height; ++y) {
    for (int x = 0; x < camera.width; ++x) {
      const int p = y * camera.width + x;
      const Vec3 gin = grad_in.pixel(y, x);
      const Vec3 gout = grad_out.pixel(y, x);
      if (gin.isZero(0.0) && gout.isZero(0.0)) continue;

      // Replay the forward walk with identical arithmetic.
      walk.clear();
      const double px = x + 0.5, py = y + 0.5;
      double transmittance = 1.0;
      for (int e = output.pixel_offsets[p]; e < output.pixel_offsets[p + 1]; ++e) {
        const int j = output.pixel_entries[e];
        const ProjectedGaussian& g = output.sorted[j];
        const double dx = px - g.mean2d.x();
        const double dy = py - g.mean2d.y();
        const Conic& k = conics[j];
        const double q = k.a * dx * dx + 2.0 * k.b * dx * dy + k.c * dy * dy;
        if (q > cfg.sigma_cutoff_sq) continue;
        const double gauss = std::exp(-0.5 * q);
        const double alpha = g.opacity * gauss;
        walk.push_back({j, alpha, transmittance, dx, dy, gauss});
        transmittance *= 1.0 - alpha;
        if (transmittance < cfg.min_transmittance) break;
      }

      // Reverse sweep. suffix_* holds the composited value behind the current
      // contributor, including the background term.
      Vec3 suffix_in = output.background * transmittance;
      Vec3 suffix_out = output.background * transmittance;
      for (auto it = walk.rbegin(); it != walk.rend(); ++it) {
        const ProjectedGaussian& g = output.sorted[it->j];
        const double weight = it->alpha * it->trans;

        g_color[it->j] += gin * weight;
        g_color_out[it->j] += gout * weight;

        const double one_minus = 1.0 - it->alpha;
        double dalpha = gin.dot(g.color * it->trans - suffix_in / one_minus) +
                        gout.dot(g.color_out * it->trans - suffix_out / one_minus);

        suffix_in += g.color * weight;
        suffix_out += g.color_out * weight;

        g_opacity[it->j] += dalpha * it->gauss;
        const double dq = -0.5 * dalpha * it->alpha;
        const Conic& k = conics[it->j];
        const double ddx = dq * 2.0 * (k.a * it->dx + k.b * it->dy);
        const double ddy = dq * 2.0 * (k.b * it->dx + k.c * it->dy);
        g_mean[it->j] -= Vec2(ddx, ddy);
        g_conic[it->j] +=
            dq * Eigen::Vector3d(it->dx * it->dx, 2.0 * it->dx * it->dy, it->dy * it->dy);
      }
    }
  }

  // Chain per-gaussian image-space gradients back to the cloud parameters.
  CloudGrads grads(cloud.count());
  for (size_t j = 0; j < n; ++j) {
    const ProjectedGaussian& g = output.sorted[j];
    const int i = g.source_index;
    const ProjectionDetail d = project_one(cloud, i, camera, cfg);

    // conic -> cov2d: d(S^-1) = -S^-1 dS S^-1 with S symmetric.
    Mat2 gk;
    gk << g_conic[j][0], g_conic[j][1], g_conic[j][1], g_conic[j][2];
    Mat2 inv;
    inv << conics[j].a, conics[j].b, conics[j].b, conics[j].c;
    const Mat2 g_cov2d = -inv * gk * inv;

    // cov2d = (J W) cov3d (J W)^T + blur; full-matrix chain.
    const Mat3 g_cov3d = d.jw.transpose() * g_cov2d * d.jw;
    const Eigen::Matrix<double, 2, 3> g_jw = (g_cov2d + g_cov2d.transpose()) * d.jw * d.cov3d;
    const Eigen::Matrix<double, 2, 3> g_jac = g_jw * camera.rotation().transpose();

    // cov3d = R diag(s^2) R^T.
    const Mat3 g_rot = (g_cov3d + g_cov3d.transpose()) * d.rot *
                       d.scales.array().square().matrix().asDiagonal();
    const Vec3 diag = (d.rot.transpose() * g_cov3d * d.rot).diagonal();
    grads.log_scales[i] += 2.0 * diag.cwiseProduct(d.scales.array().square().matrix());

    // Rotation back to the quaternion through normalization.
    const Vec4 q = cloud.rotations[i] / cloud.rotations[i].norm();
    const double w = q[0], qx = q[1], qy = q[2], qz = q[3];
    Mat3 dR[4];
    dR[0] << 0, -qz, qy, qz, 0, -qx, -qy, qx, 0;
    dR[1] << 0, qy, qz, qy, -2 * qx, -w, qz, w, -2 * qx;
    dR[2] << -2 * qy, qx, w, qx, 0, qz, -w, qz, -2 * qy;
    dR[3] << -2 * qz, -w, qx, w, -2 * qz, qy, qx, qy, 0;
    Vec4 g_qhat;
    for (int k = 0; k < 4; ++k) g_qhat[k] = 2.0 * (g_rot.array() * dR[k].array()).sum();
    const double qnorm = cloud.rotations[i].norm();
    grads.rotations[i] += (g_qhat - q * q.dot(g_qhat)) / qnorm;

    // Projection Jacobian's dependence on the camera-space position.
    Eigen::Vector3d g_t = Eigen::Vector3d::Zero();
    const double tz = d.t.z(), tz2 = tz * tz, tz3 = tz2 * tz;
    g_t.x() += g_jac(0, 2) * (-camera.fx / tz2);
    g_t.y() += g_jac(1, 2) * (-camera.fy / tz2);
    g_t.z() += g_jac(0, 0) * (-camera.fx / tz2) + g_jac(1, 1) * (-camera.fy / tz2) +
               g_jac(0, 2) * (2.0 * camera.fx * d.t.x() / tz3) +
               g_jac(1, 2) * (2.0 * camera.fy * d.t.y() / tz3);

    g_t.x() += g_mean[j].x() * camera.fx / tz;
    g_t.y() += g_mean[j].y() * camera.fy / tz;
    g_t.z() += -g_mean[j].x() * camera.fx * d.t.x() / tz2 -
               g_mean[j].y() * camera.fy * d.t.y() / tz2;

    grads.positions[i] += camera.rotation().transpose() * g_t;

    // Colors: c_out = a*c + b, c = sigmoid(logit), o = sigmoid(logit).
    const Vec3 c = g.color;
    const Vec3 dc_total = g_color[j] + cloud.gains[i].cwiseProduct(g_color_out[j]);
    grads.color_logits[i] += dc_total.cwiseProduct(c).cwiseProduct(Vec3::Ones() - c);
    grads.gains[i] += c.cwiseProduct(g_color_out[j]);
    grads.offsets[i] += g_color_out[j];
    grads.opacity_logits[i] += g_opacity[j] * g.opacity * (1.0 - g.opacity);
  }
  return grads;
}

}  // namespace lumisplat
