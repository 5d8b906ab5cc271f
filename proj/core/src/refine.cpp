#include "lumisplat/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lumisplat/rng.hpp"

namespace lumisplat {

namespace {
constexpr std::uint64_t kJitterStream = 0x4ef1;  // refinement clone jitter
}

bool refine_due(std::int64_t iteration, const RefineConfig& cfg) {
  return cfg.enabled && iteration > 0 && iteration % cfg.interval == 0 &&
         iteration < cfg.stop_iteration;
}

RefineResult refine_step(GaussianCloud& cloud, const std::vector<double>& avg_pos_grad_norm,
                         const RefineConfig& cfg, std::int64_t iteration, std::uint64_t seed) {
  const int n = cloud.count();
  if (static_cast<int>(avg_pos_grad_norm.size()) != n)
    throw std::invalid_argument("refine_step: accumulator size mismatch");

  RefineResult result;
  std::vector<int> keep;
  keep.reserve(n);
  for (int i = 0; i < n; ++i)
    if (cloud.opacity(i) >= cfg.prune_opacity) keep.push_back(i);
  if (keep.empty())  // never empty the scene; skip pruning entirely
    for (int i = 0; i < n; ++i) keep.push_back(i);
  result.pruned = n - static_cast<int>(keep.size());

  // Clone candidates: kept Gaussians in the top fraction by averaged
  // positional gradient norm, largest first, ties by index.
  const int want = static_cast<int>(keep.size() * cfg.clone_top_fraction);
  const int room = cfg.max_gaussians - static_cast<int>(keep.size());
  std::vector<int> parents;
  if (want > 0 && room > 0) {
    std::vector<int> order = keep;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return avg_pos_grad_norm[a] > avg_pos_grad_norm[b];
    });
    for (int j = 0; j < want && j < room; ++j) {
      if (avg_pos_grad_norm[order[j]] <= 0.0) break;
      parents.push_back(order[j]);
    }
    std::sort(parents.begin(), parents.end());
  }
  result.cloned = static_cast<int>(parents.size());

  GaussianCloud next;
  next.resize(static_cast<int>(keep.size() + parents.size()));
  result.moment_map.reserve(keep.size() + parents.size());
  int w = 0;
  for (int src : keep) {
    next.positions[w] = cloud.positions[src];
    next.log_scales[w] = cloud.log_scales[src];
    next.rotations[w] = cloud.rotations[src];
    next.opacity_logits[w] = cloud.opacity_logits[src];
    next.color_logits[w] = cloud.color_logits[src];
    next.gains[w] = cloud.gains[src];
    next.offsets[w] = cloud.offsets[src];
    result.moment_map.push_back(src);
    ++w;
  }

  Rng rng(derive_seed(seed, kJitterStream, static_cast<std::uint64_t>(iteration)));
  const double half_log = std::log(2.0);
  for (int src : parents) {
    const double sigma = 0.5 * std::exp(cloud.log_scales[src].mean());
    next.positions[w] = cloud.positions[src] +
                        Vec3(rng.normal(), rng.normal(), rng.normal()) * sigma;
    next.log_scales[w] = cloud.log_scales[src] - Vec3::Constant(half_log);
    next.rotations[w] = cloud.rotations[src];
    next.opacity_logits[w] = cloud.opacity_logits[src];
    next.color_logits[w] = cloud.color_logits[src];
    next.gains[w] = cloud.gains[src];
    next.offsets[w] = cloud.offsets[src];
    result.moment_map.push_back(-1);
    ++w;
  }

  cloud = std::move(next);
  return result;
}

}  // namespace lumisplat
