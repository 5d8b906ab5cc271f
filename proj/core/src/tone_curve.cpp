#include "lumisplat/tone_curve.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lumisplat/errors.hpp"
#include "lumisplat/instrument.hpp"

namespace lumisplat {

namespace {

constexpr double kPowerEps = 1e-4;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Index/fraction pair for LUT interpolation of a value already in [0,1].
struct LutPos {
  int i0;
  double f;
};

LutPos lut_pos(double v) {
  const double t = v * 255.0;
  const int i0 = std::min(static_cast<int>(t), kCurveSize - 2);
  return {i0, t - i0};
}

double clamp_entry(double e) { return std::clamp(e, kCurveApplyMin, kCurveApplyMax); }

}  // namespace

Curve identity_ramp() {
  Curve c;
  for (int i = 0; i < kCurveSize; ++i) c[i] = i / 255.0;
  return c;
}

Curve compose_curve(const Curve& global, const Curve& bias) {
  Curve c;
  for (int i = 0; i < kCurveSize; ++i) c[i] = global[i] + bias[i];
  return c;
}

Image apply_curve(const Image& in, const Curve& curve) {
  instrument::count_curve_application();
  Image out(in.width, in.height);
  for (size_t n = 0; n < in.data.size(); ++n) {
    const LutPos p = lut_pos(clamp01(in.data[n]));
    out.data[n] = clamp_entry(curve[p.i0]) * (1.0 - p.f) + clamp_entry(curve[p.i0 + 1]) * p.f;
  }
  return out;
}

void apply_curve_backward(const Image& in, const Curve& curve, const Image& grad_output,
                          Curve& grad_curve, Image* grad_in) {
  if (!in.same_shape(grad_output))
    throw std::invalid_argument("apply_curve_backward: shape mismatch");
  for (size_t n = 0; n < in.data.size(); ++n) {
    const double g = grad_output.data[n];
    if (g == 0.0) continue;
    const double v = in.data[n];
    const LutPos p = lut_pos(clamp01(v));
    const double e0 = curve[p.i0], e1 = curve[p.i0 + 1];
    // Entry clamp blocks the gradient only strictly outside [0, 1.5].
    if (e0 >= kCurveApplyMin && e0 <= kCurveApplyMax) grad_curve[p.i0] += g * (1.0 - p.f);
    if (e1 >= kCurveApplyMin && e1 <= kCurveApplyMax) grad_curve[p.i0 + 1] += g * p.f;
    if (grad_in && v >= 0.0 && v <= 1.0)
      grad_in->data[n] += g * (clamp_entry(e1) - clamp_entry(e0)) * 255.0;
  }
}

Curve eval_power(double g) {
  Curve c;
  for (int i = 0; i < kCurveSize; ++i) c[i] = std::pow(i / 255.0 + kPowerEps, g);
  return c;
}

Curve eval_scurve(double a, double b) {
  Curve c;
  for (int i = 0; i < kCurveSize; ++i) {
    const double x = i / 255.0;
    if (x <= a)
      c[i] = a - a * std::pow(1.0 - x / a, b);
    else
      c[i] = a + (1.0 - a) * std::pow((x - a) / (1.0 - a), b);
  }
  return c;
}

Curve prior_curve(const PriorParams& p, PriorMode mode) {
  const Curve po = eval_power(p.g);
  const Curve s = eval_scurve(p.a, p.b);
  Curve out;
  if (mode == PriorMode::kProduct) {
    for (int i = 0; i < kCurveSize; ++i) out[i] = po[i] * s[i];
  } else {
    for (int i = 0; i < kCurveSize; ++i) out[i] = std::pow(s[i] + kPowerEps, p.g);
  }
  return out;
}

PriorParamGrads prior_curve_backward(const PriorParams& p, const Curve& grad_prior,
                                     PriorMode mode) {
  const Curve po = eval_power(p.g);
  const Curve s = eval_scurve(p.a, p.b);
  PriorParamGrads out;
  for (int i = 0; i < kCurveSize; ++i) {
    const double gp = grad_prior[i];
    if (gp == 0.0) continue;
    const double x = i / 255.0;

    // S-curve partials; the pow terms vanish at the pivot for b > 0.
    double ds_da, ds_db;
    if (x <= p.a) {
      const double u = 1.0 - x / p.a;
      const double ub = std::pow(u, p.b);
      ds_da = 1.0 - ub - (u > 0.0 ? p.b * std::pow(u, p.b - 1.0) * x / p.a : 0.0);
      ds_db = u > 0.0 ? -p.a * ub * std::log(u) : 0.0;
    } else {
      const double v = (x - p.a) / (1.0 - p.a);
      const double vb = std::pow(v, p.b);
      ds_da = 1.0 - vb + (v > 0.0 ? p.b * std::pow(v, p.b - 1.0) * (x - 1.0) / (1.0 - p.a) : 0.0);
      ds_db = v > 0.0 ? (1.0 - p.a) * vb * std::log(v) : 0.0;
    }

    if (mode == PriorMode::kProduct) {
      out.g += gp * s[i] * po[i] * std::log(x + kPowerEps);
      out.a += gp * po[i] * ds_da;
      out.b += gp * po[i] * ds_db;
    } else {
      const double base = s[i] + kPowerEps;
      const double val = std::pow(base, p.g);
      out.g += gp * val * std::log(base);
      const double dval_ds = p.g * std::pow(base, p.g - 1.0);
      out.a += gp * dval_ds * ds_da;
      out.b += gp * dval_ds * ds_db;
    }
  }
  return out;
}

Curve he_cdf_target(const Image& in) {
  if (in.data.empty()) throw std::invalid_argument("he_cdf_target: empty image");
  std::array<long, kCurveSize> hist{};
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      const Vec3 px = in.pixel(y, x);
      ++hist[static_cast<int>(std::lround(clamp01(luminance(px[0], px[1], px[2])) * 255.0))];
    }
  Curve target;
  long cum = 0;
  const double total = static_cast<double>(in.width) * in.height;
  for (int i = 0; i < kCurveSize; ++i) {
    cum += hist[i];
    target[i] = cum / total;
  }
  return target;
}

EnhanceResult enhance_view(const Image& in, const Mat3& m, const Curve& curve) {
  EnhanceResult r;
  const double det = m.determinant();
  if (std::abs(det) < kMatrixDetGuard)
    throw NumericError("enhance_view: color matrix determinant below guard");
  r.m_inv = m.inverse();
  r.mapped = matrix_map(in, m);
  r.curved = apply_curve(r.mapped, curve);
  r.output = matrix_map(r.curved, r.m_inv);
  return r;
}

EnhanceGrads enhance_backward(const Image& in, const Mat3& m, const Curve& curve,
                              const EnhanceResult& fwd, const Image& grad_output,
                              Image* grad_input) {
  EnhanceGrads grads;

  // output = curved * m_inv: input-side gradient plus the matrix gradient
  // through the inverse, d(m^-1) = -m^-1 dm m^-1.
  Mat3 grad_minv = Mat3::Zero();
  Image grad_curved(in.width, in.height);
  matrix_map_backward(fwd.curved, fwd.m_inv, grad_output, grad_minv, &grad_curved);
  grads.matrix -= fwd.m_inv.transpose() * grad_minv * fwd.m_inv.transpose();

  Image grad_mapped(in.width, in.height);
  apply_curve_backward(fwd.mapped, curve, grad_curved, grads.curve, &grad_mapped);

  matrix_map_backward(in, m, grad_mapped, grads.matrix, grad_input);
  return grads;
}

}  // namespace lumisplat
