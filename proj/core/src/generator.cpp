#include "lumisplat/generator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lumisplat/gaussian_cloud.hpp"
#include "lumisplat/instrument.hpp"
#include "lumisplat/rng.hpp"

namespace lumisplat {

namespace {

constexpr std::uint64_t kInitStream = 0x6e57;  // generator weight init

double leaky(double x) { return x > 0.0 ? x : kLeakySlope * x; }
double leaky_grad(double x) { return x > 0.0 ? 1.0 : kLeakySlope; }

// Plane-major feature maps: index = (c*h + y)*w + x.
size_t fm_index(int c, int y, int x, int h, int w) {
  return (static_cast<size_t>(c) * h + y) * w + x;
}

// 3x3 stride-2 pad-1 convolution; kernel column layout (ci*3 + ky)*3 + kx.
void conv_forward(const std::vector<double>& in, int in_ch, int in_size,
                  const MatX& w, const VecX& b, std::vector<double>& out) {
  const int out_size = in_size / 2;
  const int out_ch = static_cast<int>(b.size());
  out.assign(static_cast<size_t>(out_ch) * out_size * out_size, 0.0);
  for (int co = 0; co < out_ch; ++co) {
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        double acc = b[co];
        for (int ci = 0; ci < in_ch; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * y + ky - 1;
            if (iy < 0 || iy >= in_size) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * x + kx - 1;
              if (ix < 0 || ix >= in_size) continue;
              acc += in[fm_index(ci, iy, ix, in_size, in_size)] * w(co, (ci * 3 + ky) * 3 + kx);
            }
          }
        }
        out[fm_index(co, y, x, out_size, out_size)] = acc;
      }
    }
  }
}

// Accumulates kernel/bias gradients; propagates into grad_in when non-null.
void conv_backward(const std::vector<double>& in, int in_ch, int in_size, const MatX& w,
                   const std::vector<double>& grad_out, MatX& grad_w, VecX& grad_b,
                   std::vector<double>* grad_in) {
  const int out_size = in_size / 2;
  const int out_ch = static_cast<int>(grad_b.size());
  for (int co = 0; co < out_ch; ++co) {
    for (int y = 0; y < out_size; ++y) {
      for (int x = 0; x < out_size; ++x) {
        const double g = grad_out[fm_index(co, y, x, out_size, out_size)];
        if (g == 0.0) continue;
        grad_b[co] += g;
        for (int ci = 0; ci < in_ch; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            const int iy = 2 * y + ky - 1;
            if (iy < 0 || iy >= in_size) continue;
            for (int kx = 0; kx < 3; ++kx) {
              const int ix = 2 * x + kx - 1;
              if (ix < 0 || ix >= in_size) continue;
              const size_t ii = fm_index(ci, iy, ix, in_size, in_size);
              grad_w(co, (ci * 3 + ky) * 3 + kx) += g * in[ii];
              if (grad_in) (*grad_in)[ii] += g * w(co, (ci * 3 + ky) * 3 + kx);
            }
          }
        }
      }
    }
  }
}

void fill_uniform(MatX& m, double bound, Rng& rng) {
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) m(r, c) = rng.uniform(-bound, bound);
}

void fill_uniform(VecX& v, double bound, Rng& rng) {
  for (int i = 0; i < v.size(); ++i) v[i] = rng.uniform(-bound, bound);
}

}  // namespace

size_t GeneratorWeights::param_count() const {
  size_t n = 0;
  visit([&n](const auto& t) { n += t.size(); });
  return n;
}

void GeneratorWeights::set_zero() {
  visit([](auto& t) { t.setZero(); });
}

GeneratorWeights zero_generator(int hidden, int out) {
  GeneratorWeights w;
  w.conv1_w = MatX::Zero(kConv1Channels, 27);
  w.conv1_b = VecX::Zero(kConv1Channels);
  w.conv2_w = MatX::Zero(kConv2Channels, kConv1Channels * 9);
  w.conv2_b = VecX::Zero(kConv2Channels);
  w.key_w = MatX::Zero(kAttnDim, kConv2Channels);
  w.key_b = VecX::Zero(kAttnDim);
  w.value_w = MatX::Zero(kAttnDim, kConv2Channels);
  w.value_b = VecX::Zero(kAttnDim);
  w.query_w = MatX::Zero(kAttnDim, 16);
  w.query_b = VecX::Zero(kAttnDim);
  w.attn_w = MatX::Zero(kAttnDim, kAttnDim);
  w.attn_b = VecX::Zero(kAttnDim);
  w.ffn1_w = MatX::Zero(hidden, kAttnDim);
  w.ffn1_b = VecX::Zero(hidden);
  w.ffn2_w = MatX::Zero(out, hidden);
  w.ffn2_b = VecX::Zero(out);
  return w;
}

GeneratorWeights init_generator(int hidden, int out, std::uint64_t seed) {
  GeneratorWeights w = zero_generator(hidden, out);
  Rng rng(derive_seed(seed, kInitStream, 0));
  const auto fan = [](const MatX& m) { return 1.0 / std::sqrt(static_cast<double>(m.cols())); };
  fill_uniform(w.conv1_w, fan(w.conv1_w), rng);
  fill_uniform(w.conv1_b, fan(w.conv1_w), rng);
  fill_uniform(w.conv2_w, fan(w.conv2_w), rng);
  fill_uniform(w.conv2_b, fan(w.conv2_w), rng);
  fill_uniform(w.key_w, fan(w.key_w), rng);
  fill_uniform(w.key_b, fan(w.key_w), rng);
  fill_uniform(w.value_w, fan(w.value_w), rng);
  fill_uniform(w.value_b, fan(w.value_w), rng);
  fill_uniform(w.query_w, fan(w.query_w), rng);
  fill_uniform(w.query_b, fan(w.query_w), rng);
  fill_uniform(w.attn_w, fan(w.attn_w), rng);
  fill_uniform(w.attn_b, fan(w.attn_w), rng);
  fill_uniform(w.ffn1_w, fan(w.ffn1_w), rng);
  fill_uniform(w.ffn1_b, fan(w.ffn1_w), rng);
  // Head stays zero so the generated bias/params are neutral at step 0.
  return w;
}

GeneratorWeights make_curve_generator(std::uint64_t seed) {
  return init_generator(256, kCurveSize, seed);
}

GeneratorWeights make_param_generator(std::uint64_t seed) { return init_generator(64, 3, seed); }

VecX generator_forward(const Image& image, const Camera& camera, const GeneratorWeights& w,
                       GeneratorForward& cache) {
  if (image.empty()) throw std::invalid_argument("generator_forward: empty image");
  const Image resized = resize_bilinear(image, kGenImageSize, kGenImageSize);
  cache.input.assign(static_cast<size_t>(3) * kGenImageSize * kGenImageSize, 0.0);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < kGenImageSize; ++y)
      for (int x = 0; x < kGenImageSize; ++x)
        cache.input[fm_index(c, y, x, kGenImageSize, kGenImageSize)] = resized.at(y, x, c);

  conv_forward(cache.input, 3, kGenImageSize, w.conv1_w, w.conv1_b, cache.conv1_pre);
  cache.conv1_post.resize(cache.conv1_pre.size());
  for (size_t i = 0; i < cache.conv1_pre.size(); ++i)
    cache.conv1_post[i] = leaky(cache.conv1_pre[i]);

  conv_forward(cache.conv1_post, kConv1Channels, kGenImageSize / 2, w.conv2_w, w.conv2_b,
               cache.conv2_pre);
  cache.conv2_post.resize(cache.conv2_pre.size());
  for (size_t i = 0; i < cache.conv2_pre.size(); ++i)
    cache.conv2_post[i] = leaky(cache.conv2_pre[i]);

  // 16x16 feature map -> 256 tokens of dim 32, row-major spatial order.
  const int side = kGenImageSize / 4;
  cache.tokens.resize(kTokenCount, kConv2Channels);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < kConv2Channels; ++c)
        cache.tokens(y * side + x, c) = cache.conv2_post[fm_index(c, y, x, side, side)];

  cache.keys = cache.tokens * w.key_w.transpose();
  cache.keys.rowwise() += w.key_b.transpose();
  cache.values = cache.tokens * w.value_w.transpose();
  cache.values.rowwise() += w.value_b.transpose();

  cache.cam_flat.resize(16);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) cache.cam_flat[r * 4 + c] = camera.world_to_camera(r, c);
  cache.query = w.query_w * cache.cam_flat + w.query_b;

  // Single-head scaled dot-product attention, one query over 256 tokens.
  VecX scores = cache.keys * cache.query / std::sqrt(static_cast<double>(kAttnDim));
  const double smax = scores.maxCoeff();
  cache.softmax = (scores.array() - smax).exp();
  cache.softmax /= cache.softmax.sum();
  cache.ctx = cache.values.transpose() * cache.softmax;

  cache.attn_post = w.attn_w * cache.ctx + w.attn_b;
  cache.ffn1_pre = w.ffn1_w * cache.attn_post + w.ffn1_b;
  cache.ffn1_post = cache.ffn1_pre.unaryExpr([](double v) { return leaky(v); });
  cache.raw = w.ffn2_w * cache.ffn1_post + w.ffn2_b;
  return cache.raw;
}

void generator_backward(const GeneratorWeights& w, const GeneratorForward& cache,
                        const VecX& grad_raw, GeneratorWeights& grads) {
  if (cache.raw.size() != grad_raw.size())
    throw std::invalid_argument("generator_backward: missing or mismatched forward cache");

  grads.ffn2_w += grad_raw * cache.ffn1_post.transpose();
  grads.ffn2_b += grad_raw;
  VecX g = w.ffn2_w.transpose() * grad_raw;

  for (int i = 0; i < g.size(); ++i) g[i] *= leaky_grad(cache.ffn1_pre[i]);
  grads.ffn1_w += g * cache.attn_post.transpose();
  grads.ffn1_b += g;
  VecX g_attn = w.ffn1_w.transpose() * g;

  grads.attn_w += g_attn * cache.ctx.transpose();
  grads.attn_b += g_attn;
  const VecX g_ctx = w.attn_w.transpose() * g_attn;

  // Attention: ctx = values^T p with p = softmax(keys q / sqrt(d)).
  const VecX g_p = cache.values * g_ctx;
  const MatX g_values = cache.softmax * g_ctx.transpose();
  const double pdot = cache.softmax.dot(g_p);
  const VecX g_scores = cache.softmax.cwiseProduct(g_p - VecX::Constant(g_p.size(), pdot));
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(kAttnDim));
  const VecX g_query = cache.keys.transpose() * g_scores * inv_scale;
  const MatX g_keys = g_scores * cache.query.transpose() * inv_scale;

  grads.query_w += g_query * cache.cam_flat.transpose();
  grads.query_b += g_query;

  grads.key_w += g_keys.transpose() * cache.tokens;
  grads.key_b += g_keys.colwise().sum().transpose();
  grads.value_w += g_values.transpose() * cache.tokens;
  grads.value_b += g_values.colwise().sum().transpose();

  const MatX g_tokens = g_keys * w.key_w + g_values * w.value_w;

  const int side = kGenImageSize / 4;
  std::vector<double> g_conv2(cache.conv2_pre.size(), 0.0);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < kConv2Channels; ++c)
        g_conv2[fm_index(c, y, x, side, side)] =
            g_tokens(y * side + x, c) * leaky_grad(cache.conv2_pre[fm_index(c, y, x, side, side)]);

  std::vector<double> g_conv1_post(cache.conv1_post.size(), 0.0);
  conv_backward(cache.conv1_post, kConv1Channels, kGenImageSize / 2, w.conv2_w, g_conv2,
                grads.conv2_w, grads.conv2_b, &g_conv1_post);

  for (size_t i = 0; i < g_conv1_post.size(); ++i)
    g_conv1_post[i] *= leaky_grad(cache.conv1_pre[i]);
  // The view image is data, not a parameter: no input gradient needed.
  conv_backward(cache.input, 3, kGenImageSize, w.conv1_w, g_conv1_post, grads.conv1_w,
                grads.conv1_b, nullptr);
}

Curve squash_curve_bias(const VecX& raw) {
  Curve bias;
  for (int i = 0; i < kCurveSize; ++i) bias[i] = 0.2 * std::tanh(raw[i]);
  return bias;
}

VecX squash_curve_bias_backward(const VecX& raw, const Curve& grad_bias) {
  VecX g(kCurveSize);
  for (int i = 0; i < kCurveSize; ++i) {
    const double t = std::tanh(raw[i]);
    g[i] = grad_bias[i] * 0.2 * (1.0 - t * t);
  }
  return g;
}

PriorParams squash_prior_params(const VecX& raw3) {
  PriorParams p;
  p.g = 0.25 * std::pow(16.0, sigmoid(raw3[0]));
  p.a = std::clamp(sigmoid(raw3[1]), 0.01, 0.99);
  p.b = 0.5 * std::pow(8.0, sigmoid(raw3[2]));
  return p;
}

VecX squash_prior_params_backward(const VecX& raw3, const PriorParamGrads& g) {
  VecX out(3);
  const double sg = sigmoid(raw3[0]);
  out[0] = g.g * 0.25 * std::pow(16.0, sg) * std::log(16.0) * sg * (1.0 - sg);
  const double sa = sigmoid(raw3[1]);
  out[1] = (sa > 0.01 && sa < 0.99) ? g.a * sa * (1.0 - sa) : 0.0;
  const double sb = sigmoid(raw3[2]);
  out[2] = g.b * 0.5 * std::pow(8.0, sb) * std::log(8.0) * sb * (1.0 - sb);
  return out;
}

Curve gen_curve_bias(const Image& image, const Camera& camera, const GeneratorWeights& w,
                     GeneratorForward* cache) {
  instrument::count_generator_forward();
  GeneratorForward local;
  GeneratorForward& fwd = cache ? *cache : local;
  return squash_curve_bias(generator_forward(image, camera, w, fwd));
}

PriorParams gen_prior_params(const Image& image, const Camera& camera,
                             const GeneratorWeights& w, GeneratorForward* cache) {
  instrument::count_generator_forward();
  GeneratorForward local;
  GeneratorForward& fwd = cache ? *cache : local;
  return squash_prior_params(generator_forward(image, camera, w, fwd));
}

}  // namespace lumisplat
