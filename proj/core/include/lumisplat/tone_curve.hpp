#pragma once

#include <array>

#include "lumisplat/color_matrix.hpp"
#include "lumisplat/image.hpp"

namespace lumisplat {

// 256-entry lookup table over input intensity i/255.
inline constexpr int kCurveSize = 256;
using Curve = std::array<double, kCurveSize>;

// Curve values are clamped to this range when applied to pixels; losses see
// the raw values.
inline constexpr double kCurveApplyMin = 0.0;
inline constexpr double kCurveApplyMax = 1.5;

Curve identity_ramp();
Curve compose_curve(const Curve& global, const Curve& bias);

// LUT application: input clamped to [0,1], linear interpolation between
// entries, entry values clamped to [0, 1.5].
Image apply_curve(const Image& in, const Curve& curve);

// Adjoint: interpolation weights go to the curve entries; the input-value
// gradient is the local LUT slope, zero where the input clamp was active.
// grad_in is accumulated into when non-null.
void apply_curve_backward(const Image& in, const Curve& curve, const Image& grad_output,
                          Curve& grad_curve, Image* grad_in);

// Parametric prior curves over x = i/255.
struct PriorParams {
  double g = 1.0;  // power exponent, > 0
  double a = 0.5;  // s-curve pivot, in (0,1)
  double b = 1.0;  // s-curve exponent, > 0
};

struct PriorParamGrads {
  double g = 0.0, a = 0.0, b = 0.0;
};

// How the power curve and s-curve combine into the prior. The elementwise
// product is the default; functional composition is kept as an alternative
// reading behind this flag.
enum class PriorMode { kProduct, kCompose };

// y = (x + 1e-4)^g
Curve eval_power(double g);
// y = a - a*(1 - x/a)^b for x <= a; y = a + (1-a)*((x-a)/(1-a))^b otherwise
Curve eval_scurve(double a, double b);
Curve prior_curve(const PriorParams& p, PriorMode mode = PriorMode::kProduct);
PriorParamGrads prior_curve_backward(const PriorParams& p, const Curve& grad_prior,
                                     PriorMode mode = PriorMode::kProduct);

// Histogram-equalization transfer function of the image's luminance:
// target[i] = fraction of pixels with luminance bin <= i.
Curve he_cdf_target(const Image& in);

// Full enhancement pipeline: output = apply_curve(in * m) * m^-1.
struct EnhanceResult {
  Image mapped;  // in * m
  Image curved;  // LUT(mapped)
  Image output;  // curved * m^-1
  Mat3 m_inv;
};

EnhanceResult enhance_view(const Image& in, const Mat3& m, const Curve& curve);

struct EnhanceGrads {
  Mat3 matrix = Mat3::Zero();
  Curve curve{};
};

// grad_input is accumulated into when non-null (unused in training; the
// input image is data).
EnhanceGrads enhance_backward(const Image& in, const Mat3& m, const Curve& curve,
                              const EnhanceResult& fwd, const Image& grad_output,
                              Image* grad_input = nullptr);

}  // namespace lumisplat
