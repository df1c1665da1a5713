#include <doctest.h>

#include <cmath>

#include "rma/errors.hpp"
#include "rma/tensor.hpp"

using namespace rma;

TEST_CASE("construction and row-major indexing") {
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.rank() == 2);
  CHECK(t.at(1, 0) == 4);
  CHECK(t.at(0, 2) == 3);

  Tensor c(Shape{2, 2, 3});
  c.at(1, 1, 2) = 7;
  CHECK(c[11] == 7);
}

TEST_CASE("shape helpers") {
  CHECK(shape_numel({2, 3, 4}) == 24);
  CHECK(shape_str({2, 3}) == "[2x3]");
}

TEST_CASE("invalid shapes are rejected") {
  CHECK_THROWS_AS(Tensor(Shape{2, 0}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1, 2, 3, 4}).reshaped({3}), DimensionError);
}

TEST_CASE("reshape keeps data, cast converts") {
  auto t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  auto r = t.reshaped({3, 2});
  CHECK(r.at(2, 1) == 6);
  auto d = t.cast<double>();
  CHECK(d.at(1, 2) == doctest::Approx(6.0));
  CHECK(d.shape() == t.shape());
}

TEST_CASE("finiteness and fill") {
  Tensor t(Shape{3});
  CHECK(t.all_finite());
  t[1] = std::nanf("");
  CHECK_FALSE(t.all_finite());
  t.fill(2.5f);
  CHECK(t == Tensor(Shape{3}, 2.5f));
}
