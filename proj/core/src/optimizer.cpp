#include "lumisplat/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lumisplat/errors.hpp"
#include "lumisplat/rng.hpp"

namespace lumisplat {

void AdamGroup::step(const std::vector<ParamBlock>& blocks) {
  size_t total = 0;
  for (const ParamBlock& b : blocks) total += b.count;
  if (m_.empty()) {
    m_.assign(total, 0.0);
    v_.assign(total, 0.0);
  } else if (m_.size() != total) {
    throw std::invalid_argument("AdamGroup(" + name_ + "): parameter count changed without remap");
  }

  for (const ParamBlock& b : blocks)
    for (size_t i = 0; i < b.count; ++i)
      if (!std::isfinite(b.grad[i]))
        throw NumericError("non-finite gradient in parameter group " + name_);

  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  size_t off = 0;
  for (const ParamBlock& b : blocks) {
    for (size_t i = 0; i < b.count; ++i) {
      const double g = b.grad[i];
      double& m = m_[off + i];
      double& v = v_[off + i];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      b.data[i] -= cfg_.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg_.eps);
      if (cfg_.weight_decay > 0.0) {
        const double anchor = b.anchor ? b.anchor[i] : 0.0;
        b.data[i] -= cfg_.lr * cfg_.weight_decay * (b.data[i] - anchor);
      }
    }
    off += b.count;
  }
}

void AdamGroup::remap(const std::vector<int>& map, int stride) {
  std::vector<double> nm(map.size() * stride, 0.0), nv(map.size() * stride, 0.0);
  for (size_t i = 0; i < map.size(); ++i) {
    if (map[i] < 0) continue;  // fresh entity starts with zero moments
    for (int k = 0; k < stride; ++k) {
      nm[i * stride + k] = m_[static_cast<size_t>(map[i]) * stride + k];
      nv[i * stride + k] = v_[static_cast<size_t>(map[i]) * stride + k];
    }
  }
  m_ = std::move(nm);
  v_ = std::move(nv);
}

void AdamGroup::restore(std::int64_t t, std::vector<double> m, std::vector<double> v) {
  t_ = t;
  m_ = std::move(m);
  v_ = std::move(v);
}

AuditReport grad_audit(const std::function<double()>& eval_loss,
                       const std::vector<AuditSlice>& slices, int sample_count, double step,
                       double tolerance, std::uint64_t seed) {
  AuditReport report;
  if (slices.empty()) return report;
  Rng rng(derive_seed(seed, 0xa0d1, 0));
  // The absolute floor: differences below tolerance * floor always pass.
  const double floor = 1e-5 / tolerance;

  for (int s = 0; s < sample_count; ++s) {
    const AuditSlice& slice = slices[s % slices.size()];
    if (slice.count == 0) continue;
    const size_t idx =
        static_cast<size_t>(rng.uniform_int(0, static_cast<int>(slice.count) - 1));

    const double saved = slice.data[idx];
    slice.data[idx] = saved + step;
    const double up = eval_loss();
    slice.data[idx] = saved - step;
    const double down = eval_loss();
    slice.data[idx] = saved;

    AuditSample sample;
    sample.group = slice.group;
    sample.index = idx;
    sample.analytic = slice.grad[idx];
    sample.fd = (up - down) / (2.0 * step);
    sample.score = std::abs(sample.analytic - sample.fd) /
                   std::max({std::abs(sample.analytic), std::abs(sample.fd), floor});
    ++report.checked;
    if (sample.score > report.max_score) {
      report.max_score = sample.score;
      report.worst = sample;
    }
    report.samples.push_back(std::move(sample));
  }
  report.pass = report.max_score <= tolerance;
  return report;
}

}  // namespace lumisplat
