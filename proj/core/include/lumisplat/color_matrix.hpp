#pragma once

#include <Eigen/Dense>

#include "lumisplat/image.hpp"

namespace lumisplat {

using Mat3 = Eigen::Matrix3d;

// Smallest |det| a view's color matrix may reach; the optimizer rolls back
// any step that would cross it, and the inverse map refuses to proceed.
inline constexpr double kMatrixDetGuard = 1e-3;

// Per-pixel row-vector map: out = px * m. Values may leave [0,1].
Image matrix_map(const Image& in, const Mat3& m);

// Per-pixel row-vector map by m^-1. Throws NumericError when |det| is
// below the guard.
Image matrix_map_inverse(const Image& in, const Mat3& m);

// Adjoint of matrix_map: given d(loss)/d(out), accumulate the matrix
// gradient and optionally the input-image gradient (skipped when null).
void matrix_map_backward(const Image& in, const Mat3& m, const Image& grad_output,
                         Mat3& grad_m, Image* grad_in);

}  // namespace lumisplat
