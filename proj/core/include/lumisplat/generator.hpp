#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "lumisplat/camera.hpp"
#include "lumisplat/image.hpp"
#include "lumisplat/tone_curve.hpp"

namespace lumisplat {

using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;

// View-adaptive generator: conv trunk over the (resized) view image, the
// flattened camera matrix as attention query, an FFN head. Two instances are
// trained, differing only in head width: 256 outputs (curve bias) or 3
// outputs (prior parameters).
inline constexpr int kGenImageSize = 64;   // trunk input resolution
inline constexpr int kConv1Channels = 16;  // after conv1 (32x32)
inline constexpr int kConv2Channels = 32;  // after conv2 (16x16)
inline constexpr int kTokenCount = 256;    // 16*16 spatial tokens
inline constexpr int kAttnDim = 64;
inline constexpr double kLeakySlope = 0.01;

struct GeneratorWeights {
  MatX conv1_w;  // 16 x 27   (out_ch x in_ch*3*3)
  VecX conv1_b;
  MatX conv2_w;  // 32 x 144
  VecX conv2_b;
  MatX key_w;    // 64 x 32
  VecX key_b;
  MatX value_w;  // 64 x 32
  VecX value_b;
  MatX query_w;  // 64 x 16
  VecX query_b;
  MatX attn_w;   // 64 x 64
  VecX attn_b;
  MatX ffn1_w;   // hidden x 64
  VecX ffn1_b;
  MatX ffn2_w;   // out x hidden
  VecX ffn2_b;

  int output_dim() const { return static_cast<int>(ffn2_b.size()); }

  // Fixed canonical tensor order used by the optimizer, checkpoints, and
  // deterministic initialization.
  template <class F>
  void visit(F&& f) {
    f(conv1_w); f(conv1_b); f(conv2_w); f(conv2_b);
    f(key_w); f(key_b); f(value_w); f(value_b);
    f(query_w); f(query_b); f(attn_w); f(attn_b);
    f(ffn1_w); f(ffn1_b); f(ffn2_w); f(ffn2_b);
  }
  template <class F>
  void visit(F&& f) const {
    f(conv1_w); f(conv1_b); f(conv2_w); f(conv2_b);
    f(key_w); f(key_b); f(value_w); f(value_b);
    f(query_w); f(query_b); f(attn_w); f(attn_b);
    f(ffn1_w); f(ffn1_b); f(ffn2_w); f(ffn2_b);
  }

  size_t param_count() const;
  void set_zero();
};

// Zero-shaped weights (for gradient accumulators).
GeneratorWeights zero_generator(int hidden, int out);
// Trunk: fan-in-scaled uniform noise; head (ffn2): zeros, so the generator
// contributes nothing at step 0. Deterministic for a fixed seed.
GeneratorWeights init_generator(int hidden, int out, std::uint64_t seed);
GeneratorWeights make_curve_generator(std::uint64_t seed);  // hidden 256, out 256
GeneratorWeights make_param_generator(std::uint64_t seed);  // hidden 64,  out 3

// Everything the backward pass needs from the forward pass.
struct GeneratorForward {
  std::vector<double> input;       // 64x64x3, plane-major (c, y, x)
  std::vector<double> conv1_pre;   // 16x32x32
  std::vector<double> conv1_post;
  std::vector<double> conv2_pre;   // 32x16x16
  std::vector<double> conv2_post;
  MatX tokens;   // 256 x 32
  MatX keys;     // 256 x 64
  MatX values;   // 256 x 64
  VecX cam_flat; // 16, row-major world-to-camera
  VecX query;    // 64
  VecX softmax;  // 256
  VecX ctx;      // 64
  VecX attn_post;  // 64
  VecX ffn1_pre;
  VecX ffn1_post;
  VecX raw;      // output_dim
};

// Raw (pre-squash) head outputs; fills the cache for the backward pass.
VecX generator_forward(const Image& image, const Camera& camera, const GeneratorWeights& w,
                       GeneratorForward& cache);
// Accumulates weight gradients for upstream d(loss)/d(raw).
void generator_backward(const GeneratorWeights& w, const GeneratorForward& cache,
                        const VecX& grad_raw, GeneratorWeights& grads);

// Output squashings and their adjoints.
Curve squash_curve_bias(const VecX& raw);                      // 0.2*tanh
VecX squash_curve_bias_backward(const VecX& raw, const Curve& grad_bias);
PriorParams squash_prior_params(const VecX& raw3);             // log-uniform maps
VecX squash_prior_params_backward(const VecX& raw3, const PriorParamGrads& g);

// Convenience wrappers (these bump the generator instrumentation counter).
Curve gen_curve_bias(const Image& image, const Camera& camera, const GeneratorWeights& w,
                     GeneratorForward* cache = nullptr);
PriorParams gen_prior_params(const Image& image, const Camera& camera,
                             const GeneratorWeights& w, GeneratorForward* cache = nullptr);

}  // namespace lumisplat
