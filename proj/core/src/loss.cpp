#include "lumisplat/loss.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace lumisplat {

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;  // stabilizers on the [0,1] range
constexpr double kSsimC2 = 0.03 * 0.03;

// Gaussian window, normalized; side shrinks (and stays odd) for tiny images.
std::vector<double> ssim_kernel(int side, double sigma) {
  std::vector<double> k(static_cast<size_t>(side) * side);
  const double c = (side - 1) / 2.0;
  double sum = 0.0;
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double d2 = (y - c) * (y - c) + (x - c) * (x - c);
      k[static_cast<size_t>(y) * side + x] = std::exp(-d2 / (2.0 * sigma * sigma));
      sum += k[static_cast<size_t>(y) * side + x];
    }
  for (double& v : k) v /= sum;
  return k;
}

int effective_window(const LossConfig& cfg, const Image& img) {
  int side = std::min({cfg.ssim_window, img.height, img.width});
  if (side % 2 == 0) --side;
  return std::max(side, 1);
}

double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

double omega_at(int iteration, const LossConfig& cfg) {
  return iteration < cfg.omega_switch_iteration ? cfg.omega_before : cfg.omega_after;
}

double ssim(const Image& a, const Image& b, const LossConfig& cfg, double upstream,
            Image* grad_a, Image* grad_b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ssim: shape mismatch");
  const int side = effective_window(cfg, a);
  const std::vector<double> kern = ssim_kernel(side, cfg.ssim_sigma);
  const int ny = a.height - side + 1;
  const int nx = a.width - side + 1;
  const double inv_count = 1.0 / (static_cast<double>(ny) * nx * 3);

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    for (int ty = 0; ty < ny; ++ty) {
      for (int tx = 0; tx < nx; ++tx) {
        double mx = 0.0, my = 0.0, xx = 0.0, yy = 0.0, xy = 0.0;
        for (int i = 0; i < side; ++i)
          for (int j = 0; j < side; ++j) {
            const double k = kern[static_cast<size_t>(i) * side + j];
            const double va = a.at(ty + i, tx + j, c);
            const double vb = b.at(ty + i, tx + j, c);
            mx += k * va;
            my += k * vb;
            xx += k * va * va;
            yy += k * vb * vb;
            xy += k * va * vb;
          }
        const double sx = xx - mx * mx;
        const double sy = yy - my * my;
        const double sxy = xy - mx * my;
        const double a1 = 2.0 * mx * my + kSsimC1;
        const double a2 = 2.0 * sxy + kSsimC2;
        const double b1 = mx * mx + my * my + kSsimC1;
        const double b2 = sx + sy + kSsimC2;
        const double num = a1 * a2, den = b1 * b2;
        total += num / den;

        if (grad_a || grad_b) {
          // d(num/den) through the five window statistics.
          const double inv_den = 1.0 / den;
          const double g_up = upstream * inv_count;
          const double d_mx = g_up * (2.0 * my * a2 - num * inv_den * 2.0 * mx * b2) * inv_den;
          const double d_my = g_up * (2.0 * mx * a2 - num * inv_den * 2.0 * my * b2) * inv_den;
          const double d_sxy = g_up * 2.0 * a1 * inv_den;
          const double d_svar = g_up * (-num * inv_den * b1) * inv_den;  // same for sx and sy
          for (int i = 0; i < side; ++i)
            for (int j = 0; j < side; ++j) {
              const double k = kern[static_cast<size_t>(i) * side + j];
              const double va = a.at(ty + i, tx + j, c);
              const double vb = b.at(ty + i, tx + j, c);
              if (grad_a)
                grad_a->at(ty + i, tx + j, c) +=
                    k * (d_mx + d_svar * 2.0 * (va - mx) + d_sxy * (vb - my));
              if (grad_b)
                grad_b->at(ty + i, tx + j, c) +=
                    k * (d_my + d_svar * 2.0 * (vb - my) + d_sxy * (va - mx));
            }
        }
      }
    }
  }
  return total * inv_count;
}

double l_3dgs(const Image& pred, const Image& target, const LossConfig& cfg, double upstream,
              Image* grad_pred, Image* grad_target) {
  if (!pred.same_shape(target)) throw std::invalid_argument("l_3dgs: shape mismatch");

  double l1 = 0.0;
  const double inv_n = 1.0 / static_cast<double>(pred.data.size());
  for (size_t i = 0; i < pred.data.size(); ++i) l1 += std::abs(pred.data[i] - target.data[i]);
  l1 *= inv_n;

  if (upstream != 0.0 && (grad_pred || grad_target)) {
    const double w = upstream * (1.0 - cfg.lambda_dssim) * inv_n;
    for (size_t i = 0; i < pred.data.size(); ++i) {
      const double s = sign(pred.data[i] - target.data[i]);
      if (grad_pred) grad_pred->data[i] += w * s;
      if (grad_target) grad_target->data[i] -= w * s;
    }
  }

  // DSSIM = (1 - SSIM)/2, so d(loss)/d(SSIM) = -lambda/2.
  const double ssim_upstream = -upstream * cfg.lambda_dssim / 2.0;
  const double s = ssim(pred, target, cfg, ssim_upstream, grad_pred, grad_target);
  return cfg.lambda_dssim * (1.0 - s) / 2.0 + (1.0 - cfg.lambda_dssim) * l1;
}

double l_spa(const Image& pred, const Image& input, const LossConfig& cfg, double upstream,
             Image* grad_pred) {
  if (!pred.same_shape(input)) throw std::invalid_argument("l_spa: shape mismatch");
  const int r = cfg.spa_region;
  if (pred.height < r || pred.width < r)
    throw std::invalid_argument("l_spa: image smaller than one pooling region");
  const int gh = pred.height / r;
  const int gw = pred.width / r;
  const double inv_area = 1.0 / static_cast<double>(r * r);

  std::vector<double> pp(static_cast<size_t>(gh) * gw, 0.0);  // pooled pred luminance
  std::vector<double> pi(pp.size(), 0.0);                     // pooled input luminance
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx) {
      double sp = 0.0, si = 0.0;
      for (int y = gy * r; y < (gy + 1) * r; ++y)
        for (int x = gx * r; x < (gx + 1) * r; ++x) {
          const Vec3 p = pred.pixel(y, x);
          const Vec3 q = input.pixel(y, x);
          sp += luminance(p[0], p[1], p[2]);
          si += luminance(q[0], q[1], q[2]);
        }
      pp[static_cast<size_t>(gy) * gw + gx] = sp * inv_area;
      pi[static_cast<size_t>(gy) * gw + gx] = si * inv_area;
    }

  const double coef = 0.5 / std::max(mean_luminance(input), cfg.spa_lum_floor);
  const double inv_k = 1.0 / (static_cast<double>(gh) * gw);

  std::vector<double> g_pool;  // d(loss)/d(pooled pred)
  if (grad_pred) g_pool.assign(pp.size(), 0.0);

  double loss = 0.0;
  const int dy[4] = {-1, 1, 0, 0};
  const int dx[4] = {0, 0, -1, 1};
  for (int gy = 0; gy < gh; ++gy)
    for (int gx = 0; gx < gw; ++gx)
      for (int n = 0; n < 4; ++n) {
        const int oy = gy + dy[n], ox = gx + dx[n];
        if (oy < 0 || oy >= gh || ox < 0 || ox >= gw) continue;
        const size_t at = static_cast<size_t>(gy) * gw + gx;
        const size_t nb = static_cast<size_t>(oy) * gw + ox;
        const double dp = pp[at] - pp[nb];
        const double di = pi[at] - pi[nb];
        const double term = std::abs(dp) - coef * std::abs(di);
        loss += term * term;
        if (grad_pred) {
          const double g = upstream * inv_k * 2.0 * term * sign(dp);
          g_pool[at] += g;
          g_pool[nb] -= g;
        }
      }
  loss *= inv_k;

  if (grad_pred) {
    for (int gy = 0; gy < gh; ++gy)
      for (int gx = 0; gx < gw; ++gx) {
        const double g = g_pool[static_cast<size_t>(gy) * gw + gx] * inv_area;
        if (g == 0.0) continue;
        for (int y = gy * r; y < (gy + 1) * r; ++y)
          for (int x = gx * r; x < (gx + 1) * r; ++x) {
            grad_pred->at(y, x, 0) += g * 0.299;
            grad_pred->at(y, x, 1) += g * 0.587;
            grad_pred->at(y, x, 2) += g * 0.114;
          }
      }
  }
  return loss;
}

double l_curve(const Curve& curve, const Curve& target, const Curve& prior, int iteration,
               const LossConfig& cfg, double upstream, Curve* grad_curve, Curve* grad_prior) {
  const double omega = omega_at(iteration, cfg);
  const double inv_n = 1.0 / kCurveSize;
  double cdf_term = 0.0, prior_term = 0.0;
  for (int i = 0; i < kCurveSize; ++i) {
    const double dc = curve[i] - target[i];
    const double dp = curve[i] - prior[i];
    cdf_term += dc * dc;
    prior_term += dp * dp;
    if (grad_curve)
      (*grad_curve)[i] += upstream * inv_n * (2.0 * omega * dc + dp);
    if (grad_prior) (*grad_prior)[i] -= upstream * inv_n * dp;
  }
  return omega * cdf_term * inv_n + 0.5 * prior_term * inv_n;
}

double l_tv(const Curve& curve, double upstream, Curve* grad_curve) {
  double loss = 0.0;
  for (int i = 0; i + 1 < kCurveSize; ++i) {
    const double d = curve[i + 1] - curve[i];
    loss += d * d;
    if (grad_curve) {
      const double g = upstream * (2.0 / 255.0) * d;
      (*grad_curve)[i + 1] += g;
      (*grad_curve)[i] -= g;
    }
  }
  return loss / 255.0;
}

double combine_losses(LossReport& report, const LossConfig& cfg) {
  report.total = report.reg + report.spa + report.tv + cfg.curve_weight * report.curve;
  return report.total;
}

}  // namespace lumisplat
