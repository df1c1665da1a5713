#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <regex>
#include <vector>

#include "rma/visualize.hpp"

using namespace rma;

namespace {

EpisodeTrace identity_trace(std::size_t k) {
  EpisodeTrace t;
  t.transforms.assign(k + 1, TransformParams::identity());
  return t;
}

// Every opening tag is closed, in order.
bool balanced(const std::string& svg) {
  std::vector<std::string> stack;
  const std::regex tag(R"(<(/?)([a-zA-Z]+)[^>]*?(/?)>)");
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), tag); it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    if (m[3] == "/") continue;
    if (m[1] == "/") {
      if (stack.empty() || stack.back() != m[2]) return false;
      stack.pop_back();
    } else {
      stack.push_back(m[2]);
    }
  }
  return stack.empty();
}

}  // namespace

TEST_CASE("identity transforms cover the whole image") {
  const Tensor img(Shape{3, 8, 8}, 0.5f);
  const auto rows = region_rows("x", img, identity_trace(3));
  REQUIRE(rows.size() == 3);
  for (std::size_t k = 0; k < 3; ++k) {
    CHECK(rows[k].region == k + 1);
    CHECK(rows[k].box.x0 == doctest::Approx(0.0));
    CHECK(rows[k].box.y0 == doctest::Approx(0.0));
    CHECK(rows[k].box.x1 == doctest::Approx(8.0));
    CHECK(rows[k].box.y1 == doctest::Approx(8.0));
  }
}

TEST_CASE("boxes stay inside the image") {
  const Tensor img(Shape{3, 16, 16}, 0.1f);
  auto t = identity_trace(4);
  t.transforms[1] = {0.3, 0.3, 0.9, 0.9};
  t.transforms[2] = {2.0, 0.5, -1.5, 0.2};
  t.transforms[3] = {0.2, 0.2, 5.0, 5.0};
  t.transforms[4] = {std::nan(""), 0.2, 0.0, 0.0};
  for (const auto& r : region_rows("y", img, t)) {
    CHECK(r.box.x0 >= 0.0);
    CHECK(r.box.y0 >= 0.0);
    CHECK(r.box.x1 <= 16.0);
    CHECK(r.box.y1 <= 16.0);
    CHECK(r.box.x0 <= r.box.x1);
    CHECK(r.box.y0 <= r.box.y1);
  }
}

TEST_CASE("svg output is well formed and deterministic") {
  Tensor img(Shape{3, 4, 4});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(i % 7) / 7.0f;
  auto t = identity_trace(5);
  t.transforms[2] = {0.5, 0.5, 0.25, -0.25};
  const auto svg = render_svg(img, t, 4);
  CHECK(svg.rfind("<?xml", 0) == 0);
  CHECK(balanced(svg));
  CHECK(svg == render_svg(img, t, 4));
  std::size_t regions = 0;
  for (std::size_t p = svg.find("class=\"region\""); p != std::string::npos;
       p = svg.find("class=\"region\"", p + 1)) {
    ++regions;
  }
  CHECK(regions == 5);
  CHECK(svg.find("data-k=\"5\"") != std::string::npos);
  CHECK(svg.find(region_color(1)) != std::string::npos);
}

TEST_CASE("regions csv") {
  const Tensor img(Shape{3, 8, 8}, 0.5f);
  const auto csv = regions_csv(region_rows("a.ppm", img, identity_trace(2)));
  CHECK(csv.rfind("image,region,scale_x,scale_y,shift_x,shift_y,x0,y0,x1,y1\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.find("a.ppm,2,") != std::string::npos);
}
