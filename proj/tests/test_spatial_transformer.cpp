#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "rma/random.hpp"
#include "rma/spatial_transformer.hpp"

using namespace rma;

namespace {

TensorD random_map(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  TensorD t(Shape{c, h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(-2, 2);
  return t;
}

}  // namespace

TEST_CASE("identity transform at the map size reproduces the map") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto h = 1 + rng.below(9), w = 1 + rng.below(9);
    const auto map = random_map(3, h, w, rng);
    const auto out = spatial_transform(map, TransformParams::identity(), h, w);
    for (std::size_t i = 0; i < map.size(); ++i) CHECK(std::abs(out[i] - map[i]) <= 1e-12);
  }
}

TEST_CASE("transform matrix has the restricted scale-translate form") {
  const auto m = build_matrix({0.5, 0.25, -0.1, 0.3});
  CHECK(m[0][0] == 0.5);
  CHECK(m[0][1] == 0.0);
  CHECK(m[0][2] == -0.1);
  CHECK(m[1][0] == 0.0);
  CHECK(m[1][1] == 0.25);
  CHECK(m[1][2] == 0.3);
}

TEST_CASE("sampling agrees with a bilinear oracle on random transforms") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const TransformParams p{rng.uniform(-1.2, 1.2), rng.uniform(-1.2, 1.2), rng.uniform(-0.8, 0.8),
                            rng.uniform(-0.8, 0.8)};
    const std::size_t h = 6, w = 5, oh = 3, ow = 4;
    const auto map = random_map(2, h, w, rng);
    const auto out = spatial_transform(map, p, oh, ow);
    for (std::size_t c = 0; c < 2; ++c) {
      std::vector<double> plane(map.storage().begin() + static_cast<long>(c * h * w),
                                map.storage().begin() + static_cast<long>((c + 1) * h * w));
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          const double xt = -1 + 2.0 * j / (ow - 1), yt = -1 + 2.0 * i / (oh - 1);
          const double xs = p.scale_x * xt + p.shift_x, ys = p.scale_y * yt + p.shift_y;
          const double u = (xs + 1) * (w - 1) / 2, v = (ys + 1) * (h - 1) / 2;
          CHECK(out.at(c, i, j) == doctest::Approx(oracle::bilinear(plane, h, w, u, v)).epsilon(1e-12));
        }
    }
  }
}

TEST_CASE("a half-size centred region samples the central pixels") {
  // 5x5 map, scale 0.5 on a 3x3 grid: source pixels 1, 2, 3 in each axis.
  TensorD map(Shape{1, 5, 5});
  for (std::size_t i = 0; i < 25; ++i) map[i] = static_cast<double>(i);
  const auto out = spatial_transform(map, {0.5, 0.5, 0.0, 0.0}, 3, 3);
  CHECK(out.at(0, 0, 0) == doctest::Approx(6.0));
  CHECK(out.at(0, 1, 1) == doctest::Approx(12.0));
  CHECK(out.at(0, 2, 2) == doctest::Approx(18.0));
}

TEST_CASE("samples far outside the map are zero") {
  TensorD map(Shape{1, 4, 4}, 1.0);
  const auto out = spatial_transform(map, {1.0, 1.0, 5.0, 0.0}, 4, 4);
  for (auto v : out.values()) CHECK(v == 0.0);
}

TEST_CASE("region boxes are centred on the shift and clipped to the image") {
  const auto full = region_box(TransformParams::identity(), 32, 32);
  CHECK(full.x0 == 0);
  CHECK(full.y0 == 0);
  CHECK(full.x1 == 32);
  CHECK(full.y1 == 32);
  const auto half = region_box({0.5, 0.25, 0.5, -0.5}, 32, 32);
  CHECK(half.x0 == doctest::Approx(16));
  CHECK(half.x1 == doctest::Approx(32));
  CHECK(half.y0 == doctest::Approx(4));
  CHECK(half.y1 == doctest::Approx(12));
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const TransformParams p{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const auto b = region_box(p, 40, 24);
    CHECK(b.x0 >= 0);
    CHECK(b.x1 <= 40);
    CHECK(b.y0 >= 0);
    CHECK(b.y1 <= 24);
    CHECK(b.x0 <= b.x1);
    CHECK(b.y0 <= b.y1);
  }
}

TEST_CASE("graph and value-level transforms agree") {
  Rng rng(2);
  const auto map = random_map(2, 4, 4, rng);
  const TransformParams p{0.7, 0.4, 0.1, -0.3};
  Graph<double> g;
  const auto v = spatial_transform(g.constant(map), g.constant(p.to_tensor<double>()), 3, 3);
  CHECK(v.value() == spatial_transform(map, p, 3, 3));
  CHECK(TransformParams::from_tensor(p.to_tensor<double>()) == p);
}
