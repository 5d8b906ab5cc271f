#pragma once

#include <Eigen/Core>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace lumisplat {

using Vec3 = Eigen::Vector3d;

// RGB image, row-major, channel-interleaved doubles. Pixel values nominally
// in [0,1]; intermediates of the enhancement pipeline may leave that range.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> data;

  Image() = default;
  Image(int w, int h) : width(w), height(h), data(static_cast<size_t>(w) * h * 3, 0.0) {}

  static Image constant(int w, int h, const Vec3& rgb) {
    Image img(w, h);
    for (int i = 0; i < w * h; ++i)
      for (int c = 0; c < 3; ++c) img.data[static_cast<size_t>(i) * 3 + c] = rgb[c];
    return img;
  }

  double& at(int y, int x, int c) {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<size_t>(y) * width + x) * 3 + c];
  }

  Vec3 pixel(int y, int x) const {
    const size_t i = (static_cast<size_t>(y) * width + x) * 3;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set_pixel(int y, int x, const Vec3& rgb) {
    const size_t i = (static_cast<size_t>(y) * width + x) * 3;
    data[i] = rgb[0];
    data[i + 1] = rgb[1];
    data[i + 2] = rgb[2];
  }

  size_t value_count() const { return data.size(); }
  int pixel_count() const { return width * height; }
  bool empty() const { return width == 0 || height == 0; }
  bool same_shape(const Image& other) const {
    return width == other.width && height == other.height;
  }
};

// Rec.601 luma, the weighting used for histograms and the spatial loss.
inline double luminance(double r, double g, double b) {
  return 0.299 * r + 0.587 * g + 0.114 * b;
}

std::vector<double> luminance_map(const Image& img);
double mean_luminance(const Image& img);

// Bilinear resize with half-pixel centers; exact copy when sizes match.
Image resize_bilinear(const Image& img, int out_w, int out_h);

// 8-bit PNG I/O. Reading expands gray/palette/alpha to RGB and scales to
// [0,1]; writing quantizes round(clamp(v,0,1)*255). Throws DataError.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

// Float PFM (color, little-endian, bottom-up rows per convention).
void write_pfm(const std::filesystem::path& path, const Image& img);

double max_abs_diff(const Image& a, const Image& b);

}  // namespace lumisplat
