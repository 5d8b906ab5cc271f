#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lumisplat/camera.hpp"
#include "lumisplat/gaussian_cloud.hpp"
#include "lumisplat/generator.hpp"
#include "lumisplat/loss.hpp"
#include "lumisplat/optimizer.hpp"
#include "lumisplat/refine.hpp"
#include "lumisplat/renderer.hpp"
#include "lumisplat/tone_curve.hpp"

namespace lumisplat {

// One training view: the (possibly degraded) input image, its camera, and
// the cached histogram-equalization target for the curve loss.
struct ViewRecord {
  int id = 0;
  std::string name;
  Image image;
  Camera camera;
  Curve he_target{};
};

// Everything that is learned.
struct ModelState {
  GaussianCloud cloud;
  Curve global_curve{};
  std::vector<Mat3> matrices;  // one per training view
  GeneratorWeights curve_gen;
  GeneratorWeights param_gen;
};

struct TrainConfig {
  std::int64_t iterations = 10000;
  std::uint64_t seed = 1;
  int init_gaussians = 800;
  double scene_bound = 3.2;  // half-side of the init box, world units
  std::int64_t checkpoint_every = 1000;
  LossConfig loss;
  RefineConfig refine;
  PriorMode prior_mode = PriorMode::kProduct;

  // Per-group learning rates / decay. Position rate is multiplied by the
  // scene extent (init-box diagonal).
  double lr_position = 1.6e-4;
  double lr_scale = 5e-3;
  double lr_rotation = 1e-3;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  double lr_ab = 2.5e-3;
  double lr_matrix = 2.5e-4;
  double wd_matrix = 1e-5;
  double lr_curve = 1e-3;
  double wd_curve = 1e-4;
  double lr_generator = 1e-5;
  double wd_generator = 1e-5;

  // Ablation toggles. Disabling the tone pipeline trains plain splats on the
  // inputs (the frozen-identity baseline).
  bool enable_tone_pipeline = true;
  bool enable_global_curve = true;
  bool enable_curve_bias = true;
  bool enable_matrices = true;

  Vec3 background = Vec3::Zero();
};

// labels: baseline | global_only | bias_only | global_plus_bias | full
TrainConfig make_ablation_config(TrainConfig base, const std::string& label);

struct OptimState {
  AdamGroup positions, log_scales, rotations, opacities, colors, gains, offsets;
  AdamGroup matrices, global_curve, curve_gen, param_gen;

  void configure(const TrainConfig& cfg, double extent);
  template <class F>
  void visit(F&& f) {
    f(positions); f(log_scales); f(rotations); f(opacities); f(colors);
    f(gains); f(offsets); f(matrices); f(global_curve); f(curve_gen); f(param_gen);
  }
  template <class F>
  void visit(F&& f) const {
    f(positions); f(log_scales); f(rotations); f(opacities); f(colors);
    f(gains); f(offsets); f(matrices); f(global_curve); f(curve_gen); f(param_gen);
  }
};

struct TrainerState {
  std::int64_t iteration = 0;
  double extent = 1.0;
  ModelState model;
  OptimState optim;
  // Positional-gradient accumulator driving refinement.
  std::vector<double> pos_grad_accum;
  std::int64_t accum_window = 0;
};

// Gradient buffers mirroring ModelState.
struct GradientState {
  CloudGrads cloud;
  std::vector<Mat3> matrices;
  Curve global_curve{};
  GeneratorWeights curve_gen;
  GeneratorWeights param_gen;
};

// Cached forward pass of one view at one iteration.
struct ViewForward {
  GeneratorForward bias_cache;
  GeneratorForward param_cache;
  Curve bias{};
  PriorParams prior_params;
  Curve composed{};
  Curve prior{};
  EnhanceResult enhance;  // pseudo-enhanced target C_out
  RenderOutput render;
  LossReport losses;
};

struct IterationStats {
  LossReport losses;
  // Aggregated gradient norms in reporting order: gaussian_geometry,
  // gaussian_color, color_adjust_ab, view_matrices, global_curve,
  // generator_weights.
  double grad_norms[6] = {0, 0, 0, 0, 0, 0};
  int gaussians = 0;
  int pruned = 0;
  int cloned = 0;
};

class Trainer {
 public:
  Trainer(std::vector<ViewRecord> views, TrainConfig cfg);

  void init();  // fresh model + optimizer state
  void resume_from(const std::filesystem::path& checkpoint);

  const TrainConfig& config() const { return cfg_; }
  TrainerState& state() { return state_; }
  const TrainerState& state() const { return state_; }
  const std::vector<ViewRecord>& views() const { return views_; }
  GradientState& gradients() { return grads_; }

  IterationStats train_iteration();
  // Full loop: CSV log, periodic checkpoints, final checkpoint. Returns the
  // final checkpoint path.
  std::filesystem::path run(const std::filesystem::path& out_dir);

  ViewForward forward_view(int k, std::int64_t iteration) const;

  // Audit support: loss summed over all views at a fixed iteration index,
  // and one backward pass of that sum into the gradient buffers.
  double loss_all_views(std::int64_t iteration) const;
  void gradients_all_views(std::int64_t iteration);
  std::vector<AuditSlice> audit_slices();

 private:
  void zero_gradients();
  void backward_view(int k, std::int64_t iteration, const ViewForward& fwd);
  void fill_grad_norms(IterationStats& stats) const;
  void optimizer_step();
  void maybe_refine(IterationStats& stats);

  std::vector<ViewRecord> views_;
  TrainConfig cfg_;
  TrainerState state_;
  GradientState grads_;
};

// Test-time rendering: splats with their output colors only; no curve,
// matrix, or generator involvement. Clamped to [0,1].
Image render_novel_view(const ModelState& model, const Camera& camera,
                        const Vec3& background = Vec3::Zero());

}  // namespace lumisplat
