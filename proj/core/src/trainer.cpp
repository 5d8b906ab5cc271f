#include "lumisplat/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "lumisplat/checkpoint.hpp"
#include "lumisplat/errors.hpp"
#include "lumisplat/rng.hpp"

namespace lumisplat {

namespace {

constexpr std::uint64_t kCurveGenStream = 0xc0e5;
constexpr std::uint64_t kParamGenStream = 0x9a2a;

void accumulate(CloudGrads& into, const CloudGrads& add) {
  for (int i = 0; i < into.count(); ++i) {
    into.positions[i] += add.positions[i];
    into.log_scales[i] += add.log_scales[i];
    into.rotations[i] += add.rotations[i];
    into.opacity_logits[i] += add.opacity_logits[i];
    into.color_logits[i] += add.color_logits[i];
    into.gains[i] += add.gains[i];
    into.offsets[i] += add.offsets[i];
  }
}

// One parameter block per generator tensor, in canonical tensor order.
std::vector<ParamBlock> generator_blocks(GeneratorWeights& w, const GeneratorWeights& g) {
  std::vector<ParamBlock> blocks;
  w.visit([&](auto& t) { blocks.push_back({t.data(), nullptr, static_cast<size_t>(t.size()), nullptr}); });
  size_t i = 0;
  g.visit([&](const auto& t) { blocks[i++].grad = t.data(); });
  return blocks;
}

const Curve& ramp_anchor() {
  static const Curve ramp = identity_ramp();
  return ramp;
}

}  // namespace

TrainConfig make_ablation_config(TrainConfig base, const std::string& label) {
  if (label == "baseline") {
    base.enable_tone_pipeline = false;
    base.enable_global_curve = false;
    base.enable_curve_bias = false;
    base.enable_matrices = false;
  } else if (label == "global_only") {
    base.enable_tone_pipeline = true;
    base.enable_global_curve = true;
    base.enable_curve_bias = false;
    base.enable_matrices = false;
  } else if (label == "bias_only") {
    base.enable_tone_pipeline = true;
    base.enable_global_curve = false;
    base.enable_curve_bias = true;
    base.enable_matrices = false;
  } else if (label == "global_plus_bias") {
    base.enable_tone_pipeline = true;
    base.enable_global_curve = true;
    base.enable_curve_bias = true;
    base.enable_matrices = false;
  } else if (label == "full") {
    base.enable_tone_pipeline = true;
    base.enable_global_curve = true;
    base.enable_curve_bias = true;
    base.enable_matrices = true;
  } else {
    throw DataError("unknown ablation label: " + label);
  }
  return base;
}

void OptimState::configure(const TrainConfig& cfg, double extent) {
  positions.configure("gaussian_geometry/positions", {.lr = cfg.lr_position * extent});
  log_scales.configure("gaussian_geometry/log_scales", {.lr = cfg.lr_scale});
  rotations.configure("gaussian_geometry/rotations", {.lr = cfg.lr_rotation});
  opacities.configure("gaussian_geometry/opacities", {.lr = cfg.lr_opacity});
  colors.configure("gaussian_color", {.lr = cfg.lr_color});
  gains.configure("color_adjust_ab/gains", {.lr = cfg.lr_ab});
  offsets.configure("color_adjust_ab/offsets", {.lr = cfg.lr_ab});
  matrices.configure("view_matrices", {.lr = cfg.lr_matrix, .weight_decay = cfg.wd_matrix});
  global_curve.configure("global_curve", {.lr = cfg.lr_curve, .weight_decay = cfg.wd_curve});
  curve_gen.configure("generator_weights/curve",
                      {.lr = cfg.lr_generator, .weight_decay = cfg.wd_generator});
  param_gen.configure("generator_weights/params",
                      {.lr = cfg.lr_generator, .weight_decay = cfg.wd_generator});
}

Trainer::Trainer(std::vector<ViewRecord> views, TrainConfig cfg)
    : views_(std::move(views)), cfg_(std::move(cfg)) {
  if (views_.size() < 2) throw DataError("training needs at least 2 views");
}

void Trainer::init() {
  state_ = TrainerState{};
  Aabb bounds;
  bounds.min = Vec3::Constant(-cfg_.scene_bound);
  bounds.max = Vec3::Constant(cfg_.scene_bound);
  state_.extent = bounds.diagonal().norm();
  state_.model.cloud = new_cloud_random(cfg_.init_gaussians, bounds, cfg_.seed);
  state_.model.global_curve = identity_ramp();
  state_.model.matrices.assign(views_.size(), Mat3::Identity());
  state_.model.curve_gen = make_curve_generator(derive_seed(cfg_.seed, kCurveGenStream, 0));
  state_.model.param_gen = make_param_generator(derive_seed(cfg_.seed, kParamGenStream, 0));
  state_.pos_grad_accum.assign(state_.model.cloud.count(), 0.0);
  state_.accum_window = 0;
  state_.optim.configure(cfg_, state_.extent);

  grads_.cloud.resize(state_.model.cloud.count());
  grads_.matrices.assign(views_.size(), Mat3::Zero());
  grads_.global_curve.fill(0.0);
  grads_.curve_gen = zero_generator(kCurveSize, kCurveSize);
  grads_.param_gen = zero_generator(kAttnDim, 3);
}

void Trainer::resume_from(const std::filesystem::path& checkpoint) {
  load_checkpoint(checkpoint, state_);
  if (state_.model.matrices.size() != views_.size())
    throw DataError("checkpoint holds " + std::to_string(state_.model.matrices.size()) +
                    " view matrices but the dataset has " + std::to_string(views_.size()) +
                    " views");
  state_.optim.configure(cfg_, state_.extent);

  grads_.cloud.resize(state_.model.cloud.count());
  grads_.matrices.assign(views_.size(), Mat3::Zero());
  grads_.global_curve.fill(0.0);
  grads_.curve_gen = zero_generator(kCurveSize, kCurveSize);
  grads_.param_gen = zero_generator(kAttnDim, 3);
}

void Trainer::zero_gradients() {
  grads_.cloud.resize(state_.model.cloud.count());
  grads_.cloud.set_zero();
  for (Mat3& m : grads_.matrices) m.setZero();
  grads_.global_curve.fill(0.0);
  grads_.curve_gen.set_zero();
  grads_.param_gen.set_zero();
}

ViewForward Trainer::forward_view(int k, std::int64_t iteration) const {
  const ViewRecord& view = views_.at(static_cast<size_t>(k));
  ViewForward fwd;

  if (cfg_.enable_tone_pipeline) {
    if (cfg_.enable_curve_bias)
      fwd.bias = gen_curve_bias(view.image, view.camera, state_.model.curve_gen,
                                &fwd.bias_cache);
    fwd.composed = compose_curve(state_.model.global_curve, fwd.bias);
    fwd.prior_params =
        gen_prior_params(view.image, view.camera, state_.model.param_gen, &fwd.param_cache);
    fwd.prior = prior_curve(fwd.prior_params, cfg_.prior_mode);
    fwd.enhance = enhance_view(view.image, state_.model.matrices.at(static_cast<size_t>(k)),
                               fwd.composed);
  }

  fwd.render = render(project(state_.model.cloud, view.camera), view.camera, cfg_.background);

  LossReport& losses = fwd.losses;
  losses.reg = l_3dgs(fwd.render.image_in, view.image, cfg_.loss);
  if (cfg_.enable_tone_pipeline) {
    losses.reg += l_3dgs(fwd.render.image_out, fwd.enhance.output, cfg_.loss);
    losses.spa = l_spa(fwd.render.image_out, view.image, cfg_.loss);
    losses.curve = l_curve(fwd.composed, view.he_target, fwd.prior,
                           static_cast<int>(iteration), cfg_.loss);
    losses.tv = l_tv(fwd.composed);
  }
  combine_losses(losses, cfg_.loss);
  return fwd;
}

void Trainer::backward_view(int k, std::int64_t iteration, const ViewForward& fwd) {
  const ViewRecord& view = views_.at(static_cast<size_t>(k));
  Image grad_in_img(view.image.width, view.image.height);
  Image grad_out_img(view.image.width, view.image.height);

  l_3dgs(fwd.render.image_in, view.image, cfg_.loss, 1.0, &grad_in_img, nullptr);

  if (cfg_.enable_tone_pipeline) {
    Image grad_cout(view.image.width, view.image.height);
    l_3dgs(fwd.render.image_out, fwd.enhance.output, cfg_.loss, 1.0, &grad_out_img,
           &grad_cout);
    l_spa(fwd.render.image_out, view.image, cfg_.loss, 1.0, &grad_out_img);

    Curve grad_composed{};
    Curve grad_prior{};
    l_curve(fwd.composed, view.he_target, fwd.prior, static_cast<int>(iteration), cfg_.loss,
            cfg_.loss.curve_weight, &grad_composed, &grad_prior);
    l_tv(fwd.composed, 1.0, &grad_composed);

    const EnhanceGrads eg =
        enhance_backward(view.image, state_.model.matrices.at(static_cast<size_t>(k)),
                         fwd.composed, fwd.enhance, grad_cout);
    if (cfg_.enable_matrices) grads_.matrices.at(static_cast<size_t>(k)) += eg.matrix;
    for (int i = 0; i < kCurveSize; ++i) grad_composed[i] += eg.curve[i];

    if (cfg_.enable_global_curve)
      for (int i = 0; i < kCurveSize; ++i) grads_.global_curve[i] += grad_composed[i];
    if (cfg_.enable_curve_bias) {
      const VecX grad_raw = squash_curve_bias_backward(fwd.bias_cache.raw, grad_composed);
      generator_backward(state_.model.curve_gen, fwd.bias_cache, grad_raw, grads_.curve_gen);
    }

    const PriorParamGrads pg =
        prior_curve_backward(fwd.prior_params, grad_prior, cfg_.prior_mode);
    const VecX grad_raw3 = squash_prior_params_backward(fwd.param_cache.raw, pg);
    generator_backward(state_.model.param_gen, fwd.param_cache, grad_raw3, grads_.param_gen);
  }

  const CloudGrads cg =
      render_backward(state_.model.cloud, view.camera, fwd.render, grad_in_img, grad_out_img);
  accumulate(grads_.cloud, cg);
}

void Trainer::fill_grad_norms(IterationStats& stats) const {
  double geom = 0, color = 0, ab = 0, mats = 0, curve = 0, gen = 0;
  for (int i = 0; i < grads_.cloud.count(); ++i) {
    geom += grads_.cloud.positions[i].squaredNorm() + grads_.cloud.log_scales[i].squaredNorm() +
            grads_.cloud.rotations[i].squaredNorm() +
            grads_.cloud.opacity_logits[i] * grads_.cloud.opacity_logits[i];
    color += grads_.cloud.color_logits[i].squaredNorm();
    ab += grads_.cloud.gains[i].squaredNorm() + grads_.cloud.offsets[i].squaredNorm();
  }
  for (const Mat3& m : grads_.matrices) mats += m.squaredNorm();
  for (double v : grads_.global_curve) curve += v * v;
  const auto add = [&gen](const auto& t) { gen += t.squaredNorm(); };
  grads_.curve_gen.visit(add);
  grads_.param_gen.visit(add);
  stats.grad_norms[0] = std::sqrt(geom);
  stats.grad_norms[1] = std::sqrt(color);
  stats.grad_norms[2] = std::sqrt(ab);
  stats.grad_norms[3] = std::sqrt(mats);
  stats.grad_norms[4] = std::sqrt(curve);
  stats.grad_norms[5] = std::sqrt(gen);
}

void Trainer::optimizer_step() {
  GaussianCloud& cloud = state_.model.cloud;
  const size_t n = static_cast<size_t>(cloud.count());
  OptimState& opt = state_.optim;

  opt.positions.step(
      {{cloud.positions[0].data(), grads_.cloud.positions[0].data(), 3 * n, nullptr}});
  opt.log_scales.step(
      {{cloud.log_scales[0].data(), grads_.cloud.log_scales[0].data(), 3 * n, nullptr}});
  opt.rotations.step(
      {{cloud.rotations[0].data(), grads_.cloud.rotations[0].data(), 4 * n, nullptr}});
  opt.opacities.step(
      {{cloud.opacity_logits.data(), grads_.cloud.opacity_logits.data(), n, nullptr}});
  opt.colors.step(
      {{cloud.color_logits[0].data(), grads_.cloud.color_logits[0].data(), 3 * n, nullptr}});

  if (cfg_.enable_tone_pipeline) {
    opt.gains.step({{cloud.gains[0].data(), grads_.cloud.gains[0].data(), 3 * n, nullptr}});
    opt.offsets.step(
        {{cloud.offsets[0].data(), grads_.cloud.offsets[0].data(), 3 * n, nullptr}});

    if (cfg_.enable_matrices) {
      // Decay pulls each view matrix toward identity (column-major layout).
      std::vector<double> anchor(9 * views_.size(), 0.0);
      for (size_t v = 0; v < views_.size(); ++v)
        for (int d = 0; d < 3; ++d) anchor[9 * v + 4 * static_cast<size_t>(d)] = 1.0;
      const std::vector<Mat3> before = state_.model.matrices;
      opt.matrices.step({{state_.model.matrices[0].data(), grads_.matrices[0].data(),
                          9 * views_.size(), anchor.data()}});
      // A step that would make a matrix numerically singular is rolled back
      // for that view; moments keep the update.
      for (size_t v = 0; v < views_.size(); ++v)
        if (std::abs(state_.model.matrices[v].determinant()) < kMatrixDetGuard)
          state_.model.matrices[v] = before[v];
    }
    if (cfg_.enable_global_curve) {
      opt.global_curve.step({{state_.model.global_curve.data(), grads_.global_curve.data(),
                              static_cast<size_t>(kCurveSize), ramp_anchor().data()}});
    }
    if (cfg_.enable_curve_bias)
      opt.curve_gen.step(generator_blocks(state_.model.curve_gen, grads_.curve_gen));
    opt.param_gen.step(generator_blocks(state_.model.param_gen, grads_.param_gen));
  }

  cloud.renormalize_rotations();
}

void Trainer::maybe_refine(IterationStats& stats) {
  if (!refine_due(state_.iteration, cfg_.refine)) return;
  GaussianCloud& cloud = state_.model.cloud;
  const size_t n = static_cast<size_t>(cloud.count());

  std::vector<double> avg(n, 0.0);
  const double window = static_cast<double>(std::max<std::int64_t>(state_.accum_window, 1));
  for (size_t i = 0; i < n; ++i) avg[i] = state_.pos_grad_accum[i] / window;

  const RefineResult res =
      refine_step(cloud, avg, cfg_.refine, state_.iteration, cfg_.seed);
  stats.pruned = res.pruned;
  stats.cloned = res.cloned;

  OptimState& opt = state_.optim;
  opt.positions.remap(res.moment_map, 3);
  opt.log_scales.remap(res.moment_map, 3);
  opt.rotations.remap(res.moment_map, 4);
  opt.opacities.remap(res.moment_map, 1);
  opt.colors.remap(res.moment_map, 3);
  opt.gains.remap(res.moment_map, 3);
  opt.offsets.remap(res.moment_map, 3);

  state_.pos_grad_accum.assign(static_cast<size_t>(cloud.count()), 0.0);
  state_.accum_window = 0;
  grads_.cloud.resize(cloud.count());
}

IterationStats Trainer::train_iteration() {
  const std::int64_t t = state_.iteration;
  const int k = static_cast<int>(t % static_cast<std::int64_t>(views_.size()));

  zero_gradients();
  const ViewForward fwd = forward_view(k, t);
  if (!std::isfinite(fwd.losses.total))
    throw NumericError("non-finite training loss at iteration " + std::to_string(t));
  backward_view(k, t, fwd);

  IterationStats stats;
  stats.losses = fwd.losses;
  fill_grad_norms(stats);

  const size_t n = static_cast<size_t>(state_.model.cloud.count());
  if (state_.pos_grad_accum.size() != n) state_.pos_grad_accum.assign(n, 0.0);
  for (size_t i = 0; i < n; ++i)
    state_.pos_grad_accum[i] += grads_.cloud.positions[i].norm();
  state_.accum_window += 1;

  optimizer_step();
  state_.iteration = t + 1;
  maybe_refine(stats);
  stats.gaussians = state_.model.cloud.count();
  return stats;
}

std::filesystem::path Trainer::run(const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  std::ofstream csv(out_dir / "train_log.csv");
  if (!csv) throw DataError("cannot write training log in " + out_dir.string());
  csv << "iteration,l_reg,l_spa,l_curve,l_tv,l_total,"
         "grad_gaussian_geometry,grad_gaussian_color,grad_color_adjust_ab,"
         "grad_view_matrices,grad_global_curve,grad_generator_weights,"
         "gaussians,pruned,cloned\n";

  char buf[640];
  while (state_.iteration < cfg_.iterations) {
    const std::int64_t t = state_.iteration;
    const IterationStats stats = train_iteration();
    std::snprintf(buf, sizeof(buf),
                  "%lld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,"
                  "%d,%d,%d\n",
                  static_cast<long long>(t), stats.losses.reg, stats.losses.spa,
                  stats.losses.curve, stats.losses.tv, stats.losses.total,
                  stats.grad_norms[0], stats.grad_norms[1], stats.grad_norms[2],
                  stats.grad_norms[3], stats.grad_norms[4], stats.grad_norms[5],
                  stats.gaussians, stats.pruned, stats.cloned);
    csv << buf;

    if (cfg_.checkpoint_every > 0 && state_.iteration % cfg_.checkpoint_every == 0 &&
        state_.iteration < cfg_.iterations) {
      std::snprintf(buf, sizeof(buf), "ckpt_%06lld.bin",
                    static_cast<long long>(state_.iteration));
      save_checkpoint(out_dir / buf, state_);
    }
  }

  const std::filesystem::path final_path = out_dir / "checkpoint_final.bin";
  save_checkpoint(final_path, state_);
  return final_path;
}

double Trainer::loss_all_views(std::int64_t iteration) const {
  double total = 0.0;
  for (size_t k = 0; k < views_.size(); ++k)
    total += forward_view(static_cast<int>(k), iteration).losses.total;
  return total;
}

void Trainer::gradients_all_views(std::int64_t iteration) {
  zero_gradients();
  for (size_t k = 0; k < views_.size(); ++k) {
    const ViewForward fwd = forward_view(static_cast<int>(k), iteration);
    backward_view(static_cast<int>(k), iteration, fwd);
  }
}

std::vector<AuditSlice> Trainer::audit_slices() {
  GaussianCloud& cloud = state_.model.cloud;
  CloudGrads& cg = grads_.cloud;
  const size_t n = static_cast<size_t>(cloud.count());

  // The first six slices cover each reported parameter group once, so small
  // sample budgets still touch every group under round-robin sampling.
  std::vector<AuditSlice> slices;
  slices.push_back({"gaussian_geometry", cloud.positions[0].data(),
                    cg.positions[0].data(), 3 * n});
  slices.push_back({"gaussian_color", cloud.color_logits[0].data(),
                    cg.color_logits[0].data(), 3 * n});
  slices.push_back({"color_adjust_ab", cloud.gains[0].data(), cg.gains[0].data(), 3 * n});
  slices.push_back({"view_matrices", state_.model.matrices[0].data(),
                    grads_.matrices[0].data(), 9 * views_.size()});
  slices.push_back({"global_curve", state_.model.global_curve.data(),
                    grads_.global_curve.data(), static_cast<size_t>(kCurveSize)});

  const auto add_generator = [&slices](GeneratorWeights& w, GeneratorWeights& g) {
    std::vector<ParamBlock> blocks = generator_blocks(w, g);
    for (const ParamBlock& b : blocks)
      slices.push_back({"generator_weights", b.data, b.grad, b.count});
  };
  add_generator(state_.model.curve_gen, grads_.curve_gen);

  slices.push_back({"gaussian_geometry", cloud.log_scales[0].data(),
                    cg.log_scales[0].data(), 3 * n});
  slices.push_back({"gaussian_geometry", cloud.rotations[0].data(),
                    cg.rotations[0].data(), 4 * n});
  slices.push_back({"gaussian_geometry", cloud.opacity_logits.data(),
                    cg.opacity_logits.data(), n});
  slices.push_back({"color_adjust_ab", cloud.offsets[0].data(), cg.offsets[0].data(), 3 * n});
  add_generator(state_.model.param_gen, grads_.param_gen);
  return slices;
}

Image render_novel_view(const ModelState& model, const Camera& camera,
                        const Vec3& background) {
  const RenderOutput out = render(project(model.cloud, camera), camera, background);
  Image img = out.image_out;
  for (double& v : img.data) v = std::clamp(v, 0.0, 1.0);
  return img;
}

}  // namespace lumisplat
