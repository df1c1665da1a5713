#include "rma/spatial_transformer.hpp"

#include <algorithm>
#include <cmath>

#include "rma/errors.hpp"
#include "rma/kernels.hpp"

namespace rma {

bool TransformParams::finite() const {
  return std::isfinite(scale_x) && std::isfinite(scale_y) && std::isfinite(shift_x) &&
         std::isfinite(shift_y);
}

AffineMatrix build_matrix(const TransformParams& p) {
  return {{{p.scale_x, 0.0, p.shift_x}, {0.0, p.scale_y, p.shift_y}}};
}

TensorD affine_grid(const AffineMatrix& m, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0) throw DimensionError("affine_grid: grid size must be positive");
  const auto target = [](std::size_t i, std::size_t n) {
    return n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  TensorD grid(Shape{height, width, 2});
  for (std::size_t i = 0; i < height; ++i) {
    const double yt = target(i, height);
    for (std::size_t j = 0; j < width; ++j) {
      const double xt = target(j, width);
      grid.at(i, j, 0) = m[0][0] * xt + m[0][1] * yt + m[0][2];
      grid.at(i, j, 1) = m[1][0] * xt + m[1][1] * yt + m[1][2];
    }
  }
  return grid;
}

template <typename S>
BasicTensor<S> bilinear_sample(const BasicTensor<S>& map, const BasicTensor<S>& grid) {
  Graph<S> g;
  return ops::bilinear_sample(g.constant(map), g.constant(grid)).value();
}

template <typename S>
Var<S> spatial_transform(Var<S> map, Var<S> params, std::size_t height, std::size_t width) {
  return ops::bilinear_sample(map, ops::affine_grid(params, height, width));
}

template <typename S>
BasicTensor<S> spatial_transform(const BasicTensor<S>& map, const TransformParams& params,
                                 std::size_t height, std::size_t width) {
  Graph<S> g;
  return spatial_transform(g.constant(map), g.constant(params.to_tensor<S>()), height, width)
      .value();
}

PixelBox region_box(const TransformParams& p, double image_width, double image_height) {
  const double cx = (p.shift_x + 1.0) / 2.0 * image_width;
  const double cy = (p.shift_y + 1.0) / 2.0 * image_height;
  const double hw = std::abs(p.scale_x) * image_width / 2.0;
  const double hh = std::abs(p.scale_y) * image_height / 2.0;
  PixelBox box{cx - hw, cy - hh, cx + hw, cy + hh};
  box.x0 = std::clamp(box.x0, 0.0, image_width);
  box.x1 = std::clamp(box.x1, 0.0, image_width);
  box.y0 = std::clamp(box.y0, 0.0, image_height);
  box.y1 = std::clamp(box.y1, 0.0, image_height);
  return box;
}

template Tensor bilinear_sample(const Tensor&, const Tensor&);
template TensorD bilinear_sample(const TensorD&, const TensorD&);
template Var<float> spatial_transform(Var<float>, Var<float>, std::size_t, std::size_t);
template Var<double> spatial_transform(Var<double>, Var<double>, std::size_t, std::size_t);
template Tensor spatial_transform(const Tensor&, const TransformParams&, std::size_t, std::size_t);
template TensorD spatial_transform(const TensorD&, const TransformParams&, std::size_t,
                                   std::size_t);

}  // namespace rma
