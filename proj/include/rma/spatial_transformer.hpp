#pragma once

// Scale-and-translate spatial transformer.
//
// The transform matrix is restricted to
//     [[s_x, 0, t_x],
//      [0, s_y, t_y]]
// acting on normalized coordinates in [-1, 1] (align-corners: -1 and +1 are
// the centres of the first and last pixels). Samples falling outside the map
// read zeros.

#include <array>
#include <cstddef>

#include "rma/autodiff.hpp"
#include "rma/tensor.hpp"

namespace rma {

struct TransformParams {
  double scale_x = 1.0;
  double scale_y = 1.0;
  double shift_x = 0.0;
  double shift_y = 0.0;

  static TransformParams identity() { return {}; }
  bool finite() const;

  /// (s_x, s_y, t_x, t_y) as a 4-element tensor.
  template <typename S>
  BasicTensor<S> to_tensor() const {
    return BasicTensor<S>(Shape{4}, {static_cast<S>(scale_x), static_cast<S>(scale_y),
                                     static_cast<S>(shift_x), static_cast<S>(shift_y)});
  }
  template <typename S>
  static TransformParams from_tensor(const BasicTensor<S>& t) {
    return {static_cast<double>(t[0]), static_cast<double>(t[1]), static_cast<double>(t[2]),
            static_cast<double>(t[3])};
  }
  bool operator==(const TransformParams&) const = default;
};

using AffineMatrix = std::array<std::array<double, 3>, 2>;

AffineMatrix build_matrix(const TransformParams& p);

/// Source coordinates [h x w x 2] (x_s, y_s) for every output cell under M.
TensorD affine_grid(const AffineMatrix& m, std::size_t height, std::size_t width);

template <typename S>
BasicTensor<S> bilinear_sample(const BasicTensor<S>& map, const BasicTensor<S>& grid);

/// Samples a [D x h x w] region of `map` through the transform `params`.
template <typename S>
Var<S> spatial_transform(Var<S> map, Var<S> params, std::size_t height, std::size_t width);

template <typename S>
BasicTensor<S> spatial_transform(const BasicTensor<S>& map, const TransformParams& params,
                                 std::size_t height, std::size_t width);

/// Axis-aligned rectangle in image pixels.
struct PixelBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
};

/// Image-space footprint of an attention region, clipped to the image.
PixelBox region_box(const TransformParams& p, double image_width, double image_height);

}  // namespace rma
