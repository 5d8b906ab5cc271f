#pragma once

#include "lumisplat/image.hpp"
#include "lumisplat/tone_curve.hpp"

namespace lumisplat {

struct LossConfig {
  double lambda_dssim = 0.2;  // mixes DSSIM against L1
  double omega_before = 1.0;  // curve-loss CDF weight before the switch
  double omega_after = 0.1;
  int omega_switch_iteration = 3000;
  double curve_weight = 10.0;  // curve-loss factor in the total
  int ssim_window = 11;
  double ssim_sigma = 1.5;
  int spa_region = 4;          // pooling region side, pixels
  double spa_lum_floor = 0.05; // floor for the adaptive 0.5/mean coefficient
};

double omega_at(int iteration, const LossConfig& cfg);

// Mean SSIM over valid window positions, per channel, Gaussian-weighted
// window (shrunk to fit images smaller than the window). When grad pointers
// are given, d(upstream * SSIM)/d(image) is accumulated into them.
double ssim(const Image& a, const Image& b, const LossConfig& cfg, double upstream = 0.0,
            Image* grad_a = nullptr, Image* grad_b = nullptr);

// Mixed image loss: lambda*DSSIM + (1-lambda)*L1, DSSIM = (1-SSIM)/2.
double l_3dgs(const Image& pred, const Image& target, const LossConfig& cfg,
              double upstream = 0.0, Image* grad_pred = nullptr, Image* grad_target = nullptr);

// Spatial-consistency loss between the enhanced render and the raw input:
// luminance, non-overlapping region pooling, squared mismatch of neighbor
// differences with the adaptive coefficient 0.5/mean-luminance.
double l_spa(const Image& pred, const Image& input, const LossConfig& cfg,
             double upstream = 0.0, Image* grad_pred = nullptr);

// Curve anchor loss: omega*mean((curve-target)^2) + 0.5*mean((curve-prior)^2).
double l_curve(const Curve& curve, const Curve& target, const Curve& prior, int iteration,
               const LossConfig& cfg, double upstream = 0.0, Curve* grad_curve = nullptr,
               Curve* grad_prior = nullptr);

// Smoothness: (1/255) * sum of squared neighbor differences.
double l_tv(const Curve& curve, double upstream = 0.0, Curve* grad_curve = nullptr);

struct LossReport {
  double reg = 0.0;
  double spa = 0.0;
  double curve = 0.0;
  double tv = 0.0;
  double total = 0.0;
};

// total = reg + spa + tv + curve_weight * curve
double combine_losses(LossReport& report, const LossConfig& cfg);

}  // namespace lumisplat
