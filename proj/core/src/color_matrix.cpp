#include "lumisplat/color_matrix.hpp"

#include <cmath>
#include <stdexcept>

#include "lumisplat/errors.hpp"
#include "lumisplat/instrument.hpp"

namespace lumisplat {

namespace {

Image apply(const Image& in, const Mat3& m) {
  instrument::count_matrix_map();
  Image out(in.width, in.height);
  // Row-vector convention out = px * m, i.e. out_j = sum_i px_i * m(i,j).
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) out.set_pixel(y, x, m.transpose() * in.pixel(y, x));
  return out;
}

}  // namespace

Image matrix_map(const Image& in, const Mat3& m) { return apply(in, m); }

Image matrix_map_inverse(const Image& in, const Mat3& m) {
  const double det = m.determinant();
  if (std::abs(det) < kMatrixDetGuard)
    throw NumericError("color matrix determinant below invertibility guard");
  return apply(in, m.inverse());
}

void matrix_map_backward(const Image& in, const Mat3& m, const Image& grad_output,
                         Mat3& grad_m, Image* grad_in) {
  if (!in.same_shape(grad_output))
    throw std::invalid_argument("matrix_map_backward: shape mismatch");
  for (int y = 0; y < in.height; ++y) {
    for (int x = 0; x < in.width; ++x) {
      const Vec3 px = in.pixel(y, x);
      const Vec3 g = grad_output.pixel(y, x);
      grad_m += px * g.transpose();
      if (grad_in) grad_in->set_pixel(y, x, grad_in->pixel(y, x) + m * g);
    }
  }
}

}  // namespace lumisplat
