#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <utility>

#include "rma/kernels.hpp"

namespace rma::kernels::detail {

// Patch matrix of a convolution input: one row per (c, ky, kx) tap and one
// column per output position, zero where the tap falls in the padding. With
// `position_major` the transpose is written instead.
template <typename T>
void im2col(const T* input, const ConvGeometry& g, T* col, bool position_major) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w, positions = oh * ow;
  const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
  std::size_t r = 0;
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    const T* plane = input + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel_w; ++kx, ++r) {
        for (std::size_t y = 0; y < oh; ++y) {
          const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                          static_cast<std::ptrdiff_t>(g.padding);
          for (std::size_t x = 0; x < ow; ++x) {
            const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                            static_cast<std::ptrdiff_t>(g.padding);
            const T v = iy >= 0 && iy < h && ix >= 0 && ix < w ? plane[iy * w + ix] : T(0);
            const std::size_t pos = y * ow + x;
            col[position_major ? pos * rows + r : r * positions + pos] = v;
          }
        }
      }
    }
  }
}

// Adds a position-major patch-gradient matrix back onto input channel c.
template <typename T>
void col2im_channel(const T* dcol, const ConvGeometry& g, std::size_t c, T* din) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const auto h = static_cast<std::ptrdiff_t>(g.height), w = static_cast<std::ptrdiff_t>(g.width);
  T* plane = din + c * g.height * g.width;
  for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
      const std::size_t r = (c * g.kernel_h + ky) * g.kernel_w + kx;
      for (std::size_t y = 0; y < oh; ++y) {
        const auto iy = static_cast<std::ptrdiff_t>(y * g.stride + ky) -
                        static_cast<std::ptrdiff_t>(g.padding);
        if (iy < 0 || iy >= h) continue;
        for (std::size_t x = 0; x < ow; ++x) {
          const auto ix = static_cast<std::ptrdiff_t>(x * g.stride + kx) -
                          static_cast<std::ptrdiff_t>(g.padding);
          if (ix < 0 || ix >= w) continue;
          plane[iy * w + ix] += dcol[(y * ow + x) * rows + r];
        }
      }
    }
  }
}

// Pixel-space neighbourhood of one normalized sample point.
template <typename T>
struct Corner {
  std::ptrdiff_t x0, y0;
  T fx, fy;
  T scale_x, scale_y;
  bool far;
};

template <typename T>
inline Corner<T> locate(T xs, T ys, std::size_t height, std::size_t width) {
  Corner<T> k{};
  k.scale_x = T(0.5) * static_cast<T>(width - 1);
  k.scale_y = T(0.5) * static_cast<T>(height - 1);
  const T u = (xs + T(1)) * k.scale_x;
  const T v = (ys + T(1)) * k.scale_y;
  const T limit = T(1) + static_cast<T>(width + height);
  k.far = !(std::abs(u) < limit && std::abs(v) < limit);
  if (k.far) return k;
  const T fu = std::floor(u), fv = std::floor(v);
  k.x0 = static_cast<std::ptrdiff_t>(fu);
  k.y0 = static_cast<std::ptrdiff_t>(fv);
  k.fx = u - fu;
  k.fy = v - fv;
  return k;
}

template <typename T>
inline T pixel(const T* plane, std::ptrdiff_t y, std::ptrdiff_t x, std::size_t height, std::size_t width) {
  if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(height) ||
      x >= static_cast<std::ptrdiff_t>(width)) {
    return T(0);
  }
  return plane[y * static_cast<std::ptrdiff_t>(width) + x];
}

template <typename T>
inline void scatter(T* plane, std::ptrdiff_t y, std::ptrdiff_t x, std::size_t height, std::size_t width,
             T value) {
  if (y < 0 || x < 0 || y >= static_cast<std::ptrdiff_t>(height) ||
      x >= static_cast<std::ptrdiff_t>(width)) {
    return;
  }
  plane[y * static_cast<std::ptrdiff_t>(width) + x] += value;
}

}  // namespace rma::kernels::detail
