#pragma once

// Raw compute kernels behind the differentiable ops.
//
// Every kernel exists twice: `kernels::serial` is the plain loop nest kept as
// the reference, `kernels` is the OpenMP version. Both accumulate each output
// element in the same order, so their results are bit-identical and
// independent of the thread count.

#include <cstddef>
#include <cstdint>
#include <span>

namespace rma::kernels {

struct ConvGeometry {
  std::size_t in_channels, height, width;
  std::size_t out_channels, kernel_h, kernel_w;
  std::size_t stride, padding;

  std::size_t out_height() const { return (height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel_w) / stride + 1; }
};

struct PoolGeometry {
  std::size_t channels, height, width;
  std::size_t window, stride;

  std::size_t out_height() const { return (height - window) / stride + 1; }
  std::size_t out_width() const { return (width - window) / stride + 1; }
};

/// Bilinear sampling of a [channels x height x width] map at `points` normalized
/// (x, y) locations in [-1, 1], align-corners, zero padding outside.
struct SampleGeometry {
  std::size_t channels, height, width;
  std::size_t points;
};

#define RMA_KERNEL_DECLS                                                                          \
  template <typename T>                                                                           \
  void matmul(std::span<const T> a, std::span<const T> b, std::span<T> c, std::size_t m,          \
              std::size_t k, std::size_t n);                                                      \
  /* da += dc * b^T */                                                                            \
  template <typename T>                                                                           \
  void matmul_grad_a(std::span<const T> dc, std::span<const T> b, std::span<T> da, std::size_t m, \
                     std::size_t k, std::size_t n);                                               \
  /* db += a^T * dc */                                                                            \
  template <typename T>                                                                           \
  void matmul_grad_b(std::span<const T> a, std::span<const T> dc, std::span<T> db, std::size_t m, \
                     std::size_t k, std::size_t n);                                               \
  template <typename T>                                                                           \
  void conv2d(std::span<const T> input, std::span<const T> kernels, std::span<T> out,             \
              const ConvGeometry& g);                                                             \
  template <typename T>                                                                           \
  void conv2d_grad_input(std::span<const T> dout, std::span<const T> kernels, std::span<T> din,   \
                         const ConvGeometry& g);                                                  \
  template <typename T>                                                                           \
  void conv2d_grad_kernels(std::span<const T> dout, std::span<const T> input, std::span<T> dk,    \
                           const ConvGeometry& g);                                                \
  template <typename T>                                                                           \
  void maxpool2d(std::span<const T> input, std::span<T> out, std::span<std::uint32_t> argmax,     \
                 const PoolGeometry& g);                                                          \
  template <typename T>                                                                           \
  void maxpool2d_grad(std::span<const T> dout, std::span<const std::uint32_t> argmax,             \
                      std::span<T> din, const PoolGeometry& g);                                   \
  template <typename T>                                                                           \
  void bilinear_sample(std::span<const T> map, std::span<const T> grid, std::span<T> out,         \
                       const SampleGeometry& g);                                                  \
  template <typename T>                                                                           \
  void bilinear_sample_grad(std::span<const T> map, std::span<const T> grid,                      \
                            std::span<const T> dout, std::span<T> dmap, std::span<T> dgrid,       \
                            const SampleGeometry& g);

RMA_KERNEL_DECLS

namespace serial {
RMA_KERNEL_DECLS
}  // namespace serial

#undef RMA_KERNEL_DECLS

}  // namespace rma::kernels
