#include "lumisplat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "lumisplat/errors.hpp"
#include "lumisplat/loss.hpp"

namespace lumisplat {

double psnr(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: image shapes differ");
  if (a.empty()) throw std::invalid_argument("psnr: empty image");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    const double d = a.data[i] - b.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data.size());
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double ssim_metric(const Image& a, const Image& b) { return ssim(a, b, LossConfig{}); }

std::vector<ImagePairScore> evaluate_image_dirs(const std::filesystem::path& rendered_dir,
                                                const std::filesystem::path& reference_dir) {
  if (!std::filesystem::is_directory(rendered_dir))
    throw DataError("not a directory: " + rendered_dir.string());
  if (!std::filesystem::is_directory(reference_dir))
    throw DataError("not a directory: " + reference_dir.string());

  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(rendered_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".png")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no PNG images in " + rendered_dir.string());

  std::vector<ImagePairScore> scores;
  for (const auto& file : files) {
    const std::filesystem::path ref = reference_dir / file.filename();
    if (!std::filesystem::exists(ref))
      throw DataError("no reference image for " + file.filename().string() + " in " +
                      reference_dir.string());
    const Image rendered = read_png(file);
    const Image reference = read_png(ref);
    if (!rendered.same_shape(reference))
      throw DataError("image dimensions differ for " + file.filename().string());
    ImagePairScore s;
    s.name = file.stem().string();
    s.psnr = psnr(rendered, reference);
    s.ssim = ssim_metric(rendered, reference);
    scores.push_back(std::move(s));
  }
  return scores;
}

double mean_psnr(const std::vector<ImagePairScore>& scores) {
  if (scores.empty()) throw std::invalid_argument("mean_psnr: no scores");
  double sum = 0.0;
  for (const auto& s : scores) sum += s.psnr;
  return sum / static_cast<double>(scores.size());
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<ImagePairScore>& scores) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << "name,psnr,ssim\n";
  char buf[96];
  double psnr_sum = 0.0, ssim_sum = 0.0;
  for (const auto& s : scores) {
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g\n", s.name.c_str(), s.psnr, s.ssim);
    os << buf;
    psnr_sum += s.psnr;
    ssim_sum += s.ssim;
  }
  if (!scores.empty()) {
    const double n = static_cast<double>(scores.size());
    std::snprintf(buf, sizeof(buf), "mean,%.17g,%.17g\n", psnr_sum / n, ssim_sum / n);
    os << buf;
  }
}

}  // namespace lumisplat
