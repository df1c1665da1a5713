#include <cmath>
#include <vector>

#include "rma/kernels.hpp"
#include "kernels_detail.hpp"

namespace rma::kernels::serial {

using detail::locate;
using detail::pixel;
using detail::scatter;

template <typename T>
void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,
            std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    T* row = c.data() + i * n;
    if (n == 1) {
      // Matrix-vector product: same summation order as the general loop.
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p];
      row[0] = acc;
      continue;
    }
    for (std::size_t j = 0; j < n; ++j) row[j] = T(0);
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * brow[j];
    }
  }
}

template <typename T>
void matmul_grad_a(std::span<const T> dc, std::span<const T> b, std::span<T> da, std::size_t m,
                   std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    if (n == 1) {
      for (std::size_t p = 0; p < k; ++p) da[i * k + p] += dc[i] * b[p];
      continue;
    }
    for (std::size_t p = 0; p < k; ++p) {
      T acc = T(0);
      for (std::size_t j = 0; j < n; ++j) acc += dc[i * n + j] * b[p * n + j];
      da[i * k + p] += acc;
    }
  }
}

template <typename T>
void matmul_grad_b(std::span<const T> a, std::span<const T> dc, std::span<T> db, std::size_t m,
                   std::size_t k, std::size_t n) {
  if (n == 1) {
    // Vector case: i outermost keeps the p loop contiguous; per-element order is unchanged.
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t p = 0; p < k; ++p) db[p] += a[i * k + p] * dc[i];
    }
    return;
  }
  for (std::size_t p = 0; p < k; ++p) {
    T* row = db.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = a[i * k + p];
      const T* dcrow = dc.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * dcrow[j];
    }
  }
}

template <typename T>
void conv2d(std::span<const T> input, std::span<const T> kernels, std::span<T> out,
            const ConvGeometry& g) {
  // Each output sums its taps in (c, ky, kx) order, padding taps contributing +0.
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t positions = g.out_height() * g.out_width();
  std::vector<T> col(rows * positions);
  detail::im2col(input.data(), g, col.data(), false);
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    T* plane = out.data() + o * positions;
    const T* wrow = kernels.data() + o * rows;
    for (std::size_t i = 0; i < positions; ++i) plane[i] = T(0);
    for (std::size_t r = 0; r < rows; ++r) {
      const T w = wrow[r];
      const T* src = col.data() + r * positions;
      for (std::size_t i = 0; i < positions; ++i) plane[i] += w * src[i];
    }
  }
}

template <typename T>
void conv2d_grad_input(std::span<const T> dout, std::span<const T> kernels, std::span<T> din,
                       const ConvGeometry& g) {
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t positions = g.out_height() * g.out_width();
  std::vector<T> dcol(positions * rows, T(0));
  for (std::size_t pos = 0; pos < positions; ++pos) {
    T* drow = dcol.data() + pos * rows;
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const T d = dout[o * positions + pos];
      const T* wrow = kernels.data() + o * rows;
      for (std::size_t r = 0; r < rows; ++r) drow[r] += d * wrow[r];
    }
  }
  for (std::size_t c = 0; c < g.in_channels; ++c) {
    detail::col2im_channel(dcol.data(), g, c, din.data());
  }
}

template <typename T>
void conv2d_grad_kernels(std::span<const T> dout, std::span<const T> input, std::span<T> dk,
                         const ConvGeometry& g) {
  const std::size_t rows = g.in_channels * g.kernel_h * g.kernel_w;
  const std::size_t positions = g.out_height() * g.out_width();
  std::vector<T> col(positions * rows);
  detail::im2col(input.data(), g, col.data(), true);
  for (std::size_t o = 0; o < g.out_channels; ++o) {
    std::vector<T> acc(rows, T(0));
    const T* d = dout.data() + o * positions;
    for (std::size_t pos = 0; pos < positions; ++pos) {
      const T dv = d[pos];
      const T* crow = col.data() + pos * rows;
      for (std::size_t r = 0; r < rows; ++r) acc[r] += dv * crow[r];
    }
    T* drow = dk.data() + o * rows;
    for (std::size_t r = 0; r < rows; ++r) drow[r] += acc[r];
  }
}

template <typename T>
void maxpool2d(std::span<const T> input, std::span<T> out, std::span<std::uint32_t> argmax,
               const PoolGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* in = input.data() + c * g.height * g.width;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (y * g.stride) * g.width + x * g.stride;
        for (std::size_t wy = 0; wy < g.window; ++wy) {
          for (std::size_t wx = 0; wx < g.window; ++wx) {
            const std::size_t idx = (y * g.stride + wy) * g.width + x * g.stride + wx;
            if (in[idx] > in[best] || (in[idx] != in[idx] && in[best] == in[best])) best = idx;
          }
        }
        const std::size_t o = (c * oh + y) * ow + x;
        out[o] = in[best];
        argmax[o] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

template <typename T>
void maxpool2d_grad(std::span<const T> dout, std::span<const std::uint32_t> argmax,
                    std::span<T> din, const PoolGeometry& g) {
  const std::size_t per_channel = g.out_height() * g.out_width();
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* plane = din.data() + c * g.height * g.width;
    for (std::size_t i = 0; i < per_channel; ++i) {
      plane[argmax[c * per_channel + i]] += dout[c * per_channel + i];
    }
  }
}


template <typename T>
void bilinear_sample(std::span<const T> map, std::span<const T> grid, std::span<T> out,
                     const SampleGeometry& g) {
  for (std::size_t d = 0; d < g.channels; ++d) {
    const T* plane = map.data() + d * g.height * g.width;
    for (std::size_t p = 0; p < g.points; ++p) {
      const auto k = locate(grid[2 * p], grid[2 * p + 1], g.height, g.width);
      T value = T(0);
      if (!k.far) {
        const T v00 = pixel(plane, k.y0, k.x0, g.height, g.width);
        const T v01 = pixel(plane, k.y0, k.x0 + 1, g.height, g.width);
        const T v10 = pixel(plane, k.y0 + 1, k.x0, g.height, g.width);
        const T v11 = pixel(plane, k.y0 + 1, k.x0 + 1, g.height, g.width);
        value = (T(1) - k.fy) * ((T(1) - k.fx) * v00 + k.fx * v01) +
                k.fy * ((T(1) - k.fx) * v10 + k.fx * v11);
      }
      out[d * g.points + p] = value;
    }
  }
}

template <typename T>
void bilinear_sample_grad(std::span<const T> map, std::span<const T> grid,
                          std::span<const T> dout, std::span<T> dmap, std::span<T> dgrid,
                          const SampleGeometry& g) {
  if (!dmap.empty()) {
    for (std::size_t d = 0; d < g.channels; ++d) {
      T* plane = dmap.data() + d * g.height * g.width;
      for (std::size_t p = 0; p < g.points; ++p) {
        const auto k = locate(grid[2 * p], grid[2 * p + 1], g.height, g.width);
        if (k.far) continue;
        const T go = dout[d * g.points + p];
        scatter(plane, k.y0, k.x0, g.height, g.width, go * (T(1) - k.fx) * (T(1) - k.fy));
        scatter(plane, k.y0, k.x0 + 1, g.height, g.width, go * k.fx * (T(1) - k.fy));
        scatter(plane, k.y0 + 1, k.x0, g.height, g.width, go * (T(1) - k.fx) * k.fy);
        scatter(plane, k.y0 + 1, k.x0 + 1, g.height, g.width, go * k.fx * k.fy);
      }
    }
  }
  if (!dgrid.empty()) {
    for (std::size_t p = 0; p < g.points; ++p) {
      const auto k = locate(grid[2 * p], grid[2 * p + 1], g.height, g.width);
      if (k.far) continue;
      T du = T(0), dv = T(0);
      for (std::size_t d = 0; d < g.channels; ++d) {
        const T* plane = map.data() + d * g.height * g.width;
        const T go = dout[d * g.points + p];
        const T v00 = pixel(plane, k.y0, k.x0, g.height, g.width);
        const T v01 = pixel(plane, k.y0, k.x0 + 1, g.height, g.width);
        const T v10 = pixel(plane, k.y0 + 1, k.x0, g.height, g.width);
        const T v11 = pixel(plane, k.y0 + 1, k.x0 + 1, g.height, g.width);
        du += go * ((T(1) - k.fy) * (v01 - v00) + k.fy * (v11 - v10));
        dv += go * ((T(1) - k.fx) * (v10 - v00) + k.fx * (v11 - v01));
      }
      dgrid[2 * p] += du * k.scale_x;
      dgrid[2 * p + 1] += dv * k.scale_y;
    }
  }
}

#define RMA_INSTANTIATE(T)                                                                        \
  template void matmul<T>(std::span<const T>, std::span<const T>, std::span<T>, std::size_t,      \
                          std::size_t, std::size_t);                                              \
  template void matmul_grad_a<T>(std::span<const T>, std::span<const T>, std::span<T>,            \
                                 std::size_t, std::size_t, std::size_t);                          \
  template void matmul_grad_b<T>(std::span<const T>, std::span<const T>, std::span<T>,            \
                                 std::size_t, std::size_t, std::size_t);                          \
  template void conv2d<T>(std::span<const T>, std::span<const T>, std::span<T>,                   \
                          const ConvGeometry&);                                                   \
  template void conv2d_grad_input<T>(std::span<const T>, std::span<const T>, std::span<T>,        \
                                     const ConvGeometry&);                                        \
  template void conv2d_grad_kernels<T>(std::span<const T>, std::span<const T>, std::span<T>,      \
                                       const ConvGeometry&);                                      \
  template void maxpool2d<T>(std::span<const T>, std::span<T>, std::span<std::uint32_t>,          \
                             const PoolGeometry&);                                                \
  template void maxpool2d_grad<T>(std::span<const T>, std::span<const std::uint32_t>,             \
                                  std::span<T>, const PoolGeometry&);                             \
  template void bilinear_sample<T>(std::span<const T>, std::span<const T>, std::span<T>,          \
                                   const SampleGeometry&);                                        \
  template void bilinear_sample_grad<T>(std::span<const T>, std::span<const T>,                   \
                                        std::span<const T>, std::span<T>, std::span<T>,           \
                                        const SampleGeometry&);

RMA_INSTANTIATE(float)
RMA_INSTANTIATE(double)

}  // namespace rma::kernels::serial
