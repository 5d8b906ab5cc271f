#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace lumisplat {

// A contiguous run of parameters with matching gradients. `anchor` is the
// value weight decay pulls toward (zero when null).
struct ParamBlock {
  double* data = nullptr;
  const double* grad = nullptr;
  size_t count = 0;
  const double* anchor = nullptr;
};

struct AdamConfig {
  double lr = 1e-3;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction and decoupled weight decay toward an anchor.
// One group owns one logical set of parameters; moments persist across steps
// and can be remapped when the parameter set is resized (refinement).
class AdamGroup {
 public:
  AdamGroup() = default;
  AdamGroup(std::string name, const AdamConfig& cfg) : name_(std::move(name)), cfg_(cfg) {}

  const std::string& name() const { return name_; }
  const AdamConfig& config() const { return cfg_; }
  // Re-applies name and hyperparameters without touching moments (used after
  // loading a checkpoint).
  void configure(std::string name, const AdamConfig& cfg) {
    name_ = std::move(name);
    cfg_ = cfg;
  }

  // Throws NumericError naming the group when a gradient is non-finite;
  // parameters are untouched in that case.
  void step(const std::vector<ParamBlock>& blocks);

  // Rebuild moments for per-entity storage with `stride` doubles per entity:
  // entity i of the new set copies moments from map[i] (or starts fresh at
  // zero when map[i] < 0).
  void remap(const std::vector<int>& map, int stride);

  // Checkpoint access.
  std::int64_t step_count() const { return t_; }
  const std::vector<double>& moment1() const { return m_; }
  const std::vector<double>& moment2() const { return v_; }
  void restore(std::int64_t t, std::vector<double> m, std::vector<double> v);

 private:
  std::string name_;
  AdamConfig cfg_;
  std::int64_t t_ = 0;
  std::vector<double> m_, v_;
};

// Finite-difference gradient audit. `eval_loss` recomputes the loss at the
// current parameter values; each slice pairs live parameters with their
// analytic gradients from one backward pass at the base point.
struct AuditSlice {
  std::string group;
  double* data = nullptr;
  const double* grad = nullptr;
  size_t count = 0;
};

struct AuditSample {
  std::string group;
  size_t index = 0;
  double analytic = 0.0;
  double fd = 0.0;
  double score = 0.0;  // |analytic - fd| / max(|analytic|, |fd|, floor)
};

struct AuditReport {
  bool pass = true;
  double max_score = 0.0;
  AuditSample worst;
  int checked = 0;
  std::vector<AuditSample> samples;
};

// Samples parameters round-robin across slices so every group is covered.
// Central differences with the given step; score floor makes gradients that
// agree within 1e-5 absolute pass regardless of relative error.
AuditReport grad_audit(const std::function<double()>& eval_loss,
                       const std::vector<AuditSlice>& slices, int sample_count,
                       double step = 1e-4, double tolerance = 1e-3,
                       std::uint64_t seed = 2024);

}  // namespace lumisplat
