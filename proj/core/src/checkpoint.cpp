#include "lumisplat/checkpoint.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <vector>

#include "lumisplat/errors.hpp"

namespace lumisplat {

namespace {

constexpr char kMagic[8] = {'L', 'M', 'S', 'P', 'L', 'T', '0', '1'};

void put_i64(std::ostream& os, std::int64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64(std::ostream& os, double v) { os.write(reinterpret_cast<const char*>(&v), 8); }
void put_f64s(std::ostream& os, const double* p, size_t n) {
  os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * 8));
}

std::int64_t get_i64(std::istream& is) {
  std::int64_t v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw DataError("checkpoint: truncated file");
  return v;
}
double get_f64(std::istream& is) {
  double v = 0;
  if (!is.read(reinterpret_cast<char*>(&v), 8)) throw DataError("checkpoint: truncated file");
  return v;
}
void get_f64s(std::istream& is, double* p, size_t n) {
  if (!is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * 8)))
    throw DataError("checkpoint: truncated file");
}

template <class VecOfVecs>
void put_vecs(std::ostream& os, const VecOfVecs& vv) {
  for (const auto& v : vv) put_f64s(os, v.data(), static_cast<size_t>(v.size()));
}
template <class VecOfVecs>
void get_vecs(std::istream& is, VecOfVecs& vv) {
  for (auto& v : vv) get_f64s(is, v.data(), static_cast<size_t>(v.size()));
}

void put_generator(std::ostream& os, const GeneratorWeights& w) {
  w.visit([&os](const auto& t) {
    put_i64(os, static_cast<std::int64_t>(t.rows()));
    put_i64(os, static_cast<std::int64_t>(t.cols()));
    put_f64s(os, t.data(), static_cast<size_t>(t.size()));
  });
}

void get_generator(std::istream& is, GeneratorWeights& w) {
  w.visit([&is](auto& t) {
    const std::int64_t rows = get_i64(is);
    const std::int64_t cols = get_i64(is);
    t.resize(rows, cols);
    get_f64s(is, t.data(), static_cast<size_t>(t.size()));
  });
}

void put_adam(std::ostream& os, const AdamGroup& g) {
  put_i64(os, g.step_count());
  put_i64(os, static_cast<std::int64_t>(g.moment1().size()));
  put_f64s(os, g.moment1().data(), g.moment1().size());
  put_f64s(os, g.moment2().data(), g.moment2().size());
}

void get_adam(std::istream& is, AdamGroup& g) {
  const std::int64_t t = get_i64(is);
  const std::int64_t n = get_i64(is);
  if (n < 0) throw DataError("checkpoint: negative optimizer state size");
  std::vector<double> m(static_cast<size_t>(n)), v(static_cast<size_t>(n));
  get_f64s(is, m.data(), m.size());
  get_f64s(is, v.data(), v.size());
  g.restore(t, std::move(m), std::move(v));
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const TrainerState& state) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("checkpoint: cannot open for writing: " + path.string());
  os.write(kMagic, sizeof(kMagic));
  put_i64(os, state.iteration);
  put_f64(os, state.extent);

  const GaussianCloud& c = state.model.cloud;
  put_i64(os, c.count());
  put_vecs(os, c.positions);
  put_vecs(os, c.log_scales);
  put_vecs(os, c.rotations);
  put_f64s(os, c.opacity_logits.data(), c.opacity_logits.size());
  put_vecs(os, c.color_logits);
  put_vecs(os, c.gains);
  put_vecs(os, c.offsets);

  put_f64s(os, state.model.global_curve.data(), kCurveSize);

  put_i64(os, static_cast<std::int64_t>(state.model.matrices.size()));
  for (const Mat3& m : state.model.matrices)
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) put_f64(os, m(r, col));  // row-major per view

  put_generator(os, state.model.curve_gen);
  put_generator(os, state.model.param_gen);

  state.optim.visit([&os](const AdamGroup& g) { put_adam(os, g); });

  put_i64(os, static_cast<std::int64_t>(state.pos_grad_accum.size()));
  put_f64s(os, state.pos_grad_accum.data(), state.pos_grad_accum.size());
  put_i64(os, state.accum_window);

  if (!os) throw DataError("checkpoint: write failed: " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, TrainerState& state) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("checkpoint: cannot open: " + path.string());
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kMagic))
    throw DataError("checkpoint: bad magic: " + path.string());

  state.iteration = get_i64(is);
  state.extent = get_f64(is);

  const std::int64_t n = get_i64(is);
  if (n < 1) throw DataError("checkpoint: invalid gaussian count");
  GaussianCloud& c = state.model.cloud;
  c.resize(static_cast<int>(n));
  get_vecs(is, c.positions);
  get_vecs(is, c.log_scales);
  get_vecs(is, c.rotations);
  get_f64s(is, c.opacity_logits.data(), c.opacity_logits.size());
  get_vecs(is, c.color_logits);
  get_vecs(is, c.gains);
  get_vecs(is, c.offsets);

  get_f64s(is, state.model.global_curve.data(), kCurveSize);

  const std::int64_t views = get_i64(is);
  if (views < 0) throw DataError("checkpoint: invalid view count");
  state.model.matrices.assign(static_cast<size_t>(views), Mat3::Identity());
  for (Mat3& m : state.model.matrices)
    for (int r = 0; r < 3; ++r)
      for (int col = 0; col < 3; ++col) m(r, col) = get_f64(is);

  get_generator(is, state.model.curve_gen);
  get_generator(is, state.model.param_gen);

  state.optim.visit([&is](AdamGroup& g) { get_adam(is, g); });

  const std::int64_t accum = get_i64(is);
  if (accum != n) throw DataError("checkpoint: accumulator size mismatch");
  state.pos_grad_accum.assign(static_cast<size_t>(accum), 0.0);
  get_f64s(is, state.pos_grad_accum.data(), state.pos_grad_accum.size());
  state.accum_window = get_i64(is);
}

}  // namespace lumisplat
