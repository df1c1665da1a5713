#include <doctest.h>
#include <omp.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "rma/kernels.hpp"
#include "rma/random.hpp"

using namespace rma;
namespace k = rma::kernels;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
  return v;
}

// Forces the parallel kernels onto several threads, even on a single core.
struct Threads {
  int saved;
  explicit Threads(int n) : saved(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~Threads() { omp_set_num_threads(saved); }
};

const k::ConvGeometry kConvCases[] = {
    {3, 32, 32, 16, 3, 3, 1, 1},  // first encoder block
    {16, 16, 16, 32, 3, 3, 1, 1},
    {2, 7, 9, 3, 3, 2, 2, 1},     // stride and asymmetric kernel
    {4, 5, 5, 2, 5, 5, 1, 2},     // kernel as large as the map
    {1, 6, 6, 1, 1, 1, 1, 0},
};

}  // namespace

TEST_CASE("conv2d matches the direct oracle bit for bit") {
  for (const auto& g : kConvCases) {
    const auto in = noise(g.in_channels * g.height * g.width, 1);
    const auto w = noise(g.out_channels * g.in_channels * g.kernel_h * g.kernel_w, 2);
    const auto expect = oracle::conv2d(in, g.in_channels, g.height, g.width, w, g.out_channels,
                                       g.kernel_h, g.kernel_w, g.stride, g.padding);
    std::vector<float> out(expect.size(), 99.0f);
    k::serial::conv2d<float>(in, w, out, g);
    CHECK(out == expect);
  }
}

TEST_CASE("maxpool2d matches the direct oracle and routes to the first maximum") {
  const k::PoolGeometry g{3, 8, 6, 2, 2};
  const auto in = noise(3 * 8 * 6, 3);
  std::vector<float> out(3 * 4 * 3);
  std::vector<std::uint32_t> arg(out.size());
  k::serial::maxpool2d<float>(in, out, arg, g);
  CHECK(out == oracle::maxpool(in, 3, 8, 6, 2, 2));
  // argmax indexes within the channel plane.
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(in[(i / 12) * 48 + arg[i]] == out[i]);

  // A window of equal values routes to its top-left element.
  std::vector<float> flat(4, 1.0f), o1(1);
  std::vector<std::uint32_t> a1(1);
  k::serial::maxpool2d<float>(flat, o1, a1, {1, 2, 2, 2, 2});
  CHECK(a1[0] == 0);

  // NaN wins the window.
  std::vector<float> with_nan = {1.0f, std::nanf(""), 5.0f, 2.0f};
  k::serial::maxpool2d<float>(with_nan, o1, a1, {1, 2, 2, 2, 2});
  CHECK(std::isnan(o1[0]));
  k::maxpool2d<float>(with_nan, o1, a1, {1, 2, 2, 2, 2});
  CHECK(std::isnan(o1[0]));
}

TEST_CASE("matmul matches the definition") {
  const std::size_t m = 5, kk = 7, n = 3;
  const auto a = noise(m * kk, 4), b = noise(kk * n, 5);
  std::vector<float> c(m * n);
  k::serial::matmul<float>(a, b, c, m, kk, n);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      float acc = 0;
      for (std::size_t p = 0; p < kk; ++p) acc += a[i * kk + p] * b[p * n + j];
      CHECK(c[i * n + j] == acc);
    }
}

TEST_CASE("conv2d gradients match the transposed oracle") {
  // grad_input of conv is the adjoint: <conv(x), d> == <x, grad_input(d)>.
  const k::ConvGeometry g{2, 7, 9, 3, 3, 2, 2, 1};
  std::vector<double> x(2 * 7 * 9), w(3 * 2 * 3 * 2), d(3 * g.out_height() * g.out_width());
  Rng rng(6);
  for (auto* v : {&x, &w, &d})
    for (auto& e : *v) e = rng.uniform(-1, 1);
  std::vector<double> y(d.size()), dx(x.size(), 0.0), dw(w.size(), 0.0);
  k::serial::conv2d<double>(x, w, y, g);
  k::serial::conv2d_grad_input<double>(d, w, dx, g);
  k::serial::conv2d_grad_kernels<double>(d, x, dw, g);
  double lhs = 0, rhs_x = 0, rhs_w = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += y[i] * d[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs_x += x[i] * dx[i];
  for (std::size_t i = 0; i < w.size(); ++i) rhs_w += w[i] * dw[i];
  // conv is bilinear in (x, w), so both pairings recover the same scalar.
  CHECK(lhs == doctest::Approx(rhs_x).epsilon(1e-12));
  CHECK(lhs == doctest::Approx(rhs_w).epsilon(1e-12));
}

TEST_CASE("bilinear sampling matches the oracle, including outside the map") {
  const std::size_t c = 2, h = 5, w = 6, pts = 40;
  std::vector<double> map(c * h * w), grid(pts * 2), out(c * pts);
  Rng rng(7);
  for (auto& v : map) v = rng.uniform(-1, 1);
  for (auto& v : grid) v = rng.uniform(-1.6, 1.6);
  k::serial::bilinear_sample<double>(map, grid, out, {c, h, w, pts});
  for (std::size_t ch = 0; ch < c; ++ch) {
    std::vector<double> plane(map.begin() + static_cast<long>(ch * h * w),
                              map.begin() + static_cast<long>((ch + 1) * h * w));
    for (std::size_t p = 0; p < pts; ++p) {
      const double u = (grid[2 * p] + 1) * (w - 1) / 2.0, v = (grid[2 * p + 1] + 1) * (h - 1) / 2.0;
      CHECK(out[ch * pts + p] == doctest::Approx(oracle::bilinear(plane, h, w, u, v)).epsilon(1e-12));
    }
  }
}

TEST_CASE("parallel kernels are bit-identical to the serial reference at any thread count") {
  for (int threads : {1, 3, 4}) {
    Threads t(threads);
    for (const auto& g : kConvCases) {
      const auto in = noise(g.in_channels * g.height * g.width, 11);
      const auto w = noise(g.out_channels * g.in_channels * g.kernel_h * g.kernel_w, 12);
      const auto d = noise(g.out_channels * g.out_height() * g.out_width(), 13);
      std::vector<float> a(d.size()), b(d.size());
      k::serial::conv2d<float>(in, w, a, g);
      k::conv2d<float>(in, w, b, g);
      CHECK(a == b);
      std::vector<float> gi_a(in.size(), 0.5f), gi_b(in.size(), 0.5f);
      k::serial::conv2d_grad_input<float>(d, w, gi_a, g);
      k::conv2d_grad_input<float>(d, w, gi_b, g);
      CHECK(gi_a == gi_b);
      std::vector<float> gk_a(w.size(), 0.25f), gk_b(w.size(), 0.25f);
      k::serial::conv2d_grad_kernels<float>(d, in, gk_a, g);
      k::conv2d_grad_kernels<float>(d, in, gk_b, g);
      CHECK(gk_a == gk_b);
    }
    for (std::size_t n : {1u, 64u}) {
      const std::size_t m = 200, kk = 130;
      const auto a = noise(m * kk, 20), b = noise(kk * n, 21), dc = noise(m * n, 22);
      std::vector<float> c1(m * n), c2(m * n);
      k::serial::matmul<float>(a, b, c1, m, kk, n);
      k::matmul<float>(a, b, c2, m, kk, n);
      CHECK(c1 == c2);
      std::vector<float> da1(a.size(), 1.0f), da2(a.size(), 1.0f);
      k::serial::matmul_grad_a<float>(dc, b, da1, m, kk, n);
      k::matmul_grad_a<float>(dc, b, da2, m, kk, n);
      CHECK(da1 == da2);
      std::vector<float> db1(b.size(), 1.0f), db2(b.size(), 1.0f);
      k::serial::matmul_grad_b<float>(a, dc, db1, m, kk, n);
      k::matmul_grad_b<float>(a, dc, db2, m, kk, n);
      CHECK(db1 == db2);
    }
    {
      const k::PoolGeometry g{32, 64, 64, 2, 2};
      const auto in = noise(32 * 64 * 64, 30);
      std::vector<float> o1(32 * 32 * 32), o2(o1.size());
      std::vector<std::uint32_t> a1(o1.size()), a2(o1.size());
      k::serial::maxpool2d<float>(in, o1, a1, g);
      k::maxpool2d<float>(in, o2, a2, g);
      CHECK(o1 == o2);
      CHECK(a1 == a2);
      const auto d = noise(o1.size(), 31);
      std::vector<float> g1(in.size(), 0.0f), g2(in.size(), 0.0f);
      k::serial::maxpool2d_grad<float>(d, a1, g1, g);
      k::maxpool2d_grad<float>(d, a2, g2, g);
      CHECK(g1 == g2);
    }
    {
      const k::SampleGeometry g{32, 8, 8, 4096};
      const auto map = noise(32 * 64, 40), grid = noise(4096 * 2, 41), d = noise(32 * 4096, 42);
      std::vector<float> o1(32 * 4096), o2(o1.size());
      k::serial::bilinear_sample<float>(map, grid, o1, g);
      k::bilinear_sample<float>(map, grid, o2, g);
      CHECK(o1 == o2);
      std::vector<float> dm1(map.size(), 0.0f), dm2(map.size(), 0.0f), dg1(grid.size(), 0.0f),
          dg2(grid.size(), 0.0f);
      k::serial::bilinear_sample_grad<float>(map, grid, d, dm1, dg1, g);
      k::bilinear_sample_grad<float>(map, grid, d, dm2, dg2, g);
      CHECK(dm1 == dm2);
      CHECK(dg1 == dg2);
    }
  }
}
