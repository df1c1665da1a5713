// Serial reference vs OpenMP kernels at the sizes the model actually runs.
#include <benchmark/benchmark.h>

#include <vector>

#include "rma/kernels.hpp"
#include "rma/random.hpp"

namespace {

using rma::kernels::ConvGeometry;

std::vector<float> filled(std::size_t n, std::uint64_t seed) {
  rma::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return v;
}

ConvGeometry conv_shape(const benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto side = static_cast<std::size_t>(state.range(1));
  return {c, side, side, 2 * c, 3, 3, 1, 1};
}

template <bool Parallel>
void BM_Conv2d(benchmark::State& state) {
  const auto g = conv_shape(state);
  const auto in = filled(g.in_channels * g.height * g.width, 1);
  const auto k = filled(g.out_channels * g.in_channels * 9, 2);
  std::vector<float> out(g.out_channels * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) {
      rma::kernels::conv2d<float>(in, k, out, g);
    } else {
      rma::kernels::serial::conv2d<float>(in, k, out, g);
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() *
                          static_cast<std::int64_t>(out.size() * g.in_channels * 9));
}

template <bool Parallel>
void BM_Conv2dGradKernels(benchmark::State& state) {
  const auto g = conv_shape(state);
  const auto in = filled(g.in_channels * g.height * g.width, 1);
  const auto dout = filled(g.out_channels * g.out_height() * g.out_width(), 3);
  std::vector<float> dk(g.out_channels * g.in_channels * 9);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rma::kernels::conv2d_grad_kernels<float>(dout, in, dk, g);
    } else {
      rma::kernels::serial::conv2d_grad_kernels<float>(dout, in, dk, g);
    }
    benchmark::DoNotOptimize(dk.data());
  }
}

template <bool Parallel>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = filled(n * n, 4), b = filled(n * n, 5);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rma::kernels::matmul<float>(a, b, c, n, n, n);
    } else {
      rma::kernels::serial::matmul<float>(a, b, c, n, n, n);
    }
    benchmark::DoNotOptimize(c.data());
  }
}

template <bool Parallel>
void BM_BilinearSample(benchmark::State& state) {
  const auto points = static_cast<std::size_t>(state.range(0));
  const rma::kernels::SampleGeometry g{32, 8, 8, points};
  const auto map = filled(32 * 64, 6);
  auto grid = filled(points * 2, 7);
  std::vector<float> out(32 * points);
  for (auto _ : state) {
    if constexpr (Parallel) {
      rma::kernels::bilinear_sample<float>(map, grid, out, g);
    } else {
      rma::kernels::serial::bilinear_sample<float>(map, grid, out, g);
    }
    benchmark::DoNotOptimize(out.data());
  }
}

}  // namespace

BENCHMARK(BM_Conv2d<false>)->Args({3, 32})->Args({16, 16})->Args({32, 8});
BENCHMARK(BM_Conv2d<true>)->Args({3, 32})->Args({16, 16})->Args({32, 8});
BENCHMARK(BM_Conv2dGradKernels<false>)->Args({16, 16});
BENCHMARK(BM_Conv2dGradKernels<true>)->Args({16, 16});
BENCHMARK(BM_Matmul<false>)->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<true>)->Arg(64)->Arg(256);
BENCHMARK(BM_BilinearSample<false>)->Arg(16)->Arg(1024);
BENCHMARK(BM_BilinearSample<true>)->Arg(16)->Arg(1024);

BENCHMARK_MAIN();
