#include <doctest.h>

#include <cmath>

#include "rma/adam.hpp"
#include "rma/errors.hpp"

using namespace rma;

TEST_CASE("two Adam steps against a hand computation") {
  Tensor p(Shape{1}, 1.0f);
  Tensor g(Shape{1}, 0.5f);
  Tensor* params[] = {&p};
  const Tensor* grads[] = {&g};
  const Tensor* shapes[] = {&p};
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  auto state = AdamState::for_params(shapes, cfg);

  // m = 0.05, v = 2.5e-4; bias-corrected 0.5 and 0.25; step = 0.1 * 0.5 / 0.5.
  adam_step(params, grads, state);
  CHECK(p[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(state.step == 1);

  // m = 0.02, v = 3.1225e-4; corrected 0.02 / 0.19 and 3.1225e-4 / 1.999e-3.
  g[0] = -0.25f;
  adam_step(params, grads, state);
  const double m_hat = 0.02 / 0.19, v_hat = 3.1225e-4 / (1.0 - 0.999 * 0.999);
  CHECK(p[0] == doctest::Approx(0.9 - 0.1 * m_hat / (std::sqrt(v_hat) + 1e-8)).epsilon(1e-5));
  CHECK(state.first_moment[0][0] == doctest::Approx(0.02).epsilon(1e-6));
}

TEST_CASE("first step moves every parameter by about the learning rate") {
  Tensor p = Tensor::from({4}, {0, 1, -2, 3});
  Tensor g = Tensor::from({4}, {1e-3f, -7.0f, 0.2f, -1e-2f});
  Tensor* params[] = {&p};
  const Tensor* grads[] = {&g};
  const Tensor* shapes[] = {&p};
  auto state = AdamState::for_params(shapes, {});
  adam_step(params, grads, state);
  const float expect[] = {-1e-3f, 1.001f, -2.001f, 3.001f};
  for (std::size_t i = 0; i < 4; ++i) CHECK(p[i] == doctest::Approx(expect[i]).epsilon(1e-4));
}

TEST_CASE("mismatched parameter lists are rejected") {
  Tensor p(Shape{2}), g(Shape{3});
  Tensor* params[] = {&p};
  const Tensor* grads[] = {&g};
  const Tensor* shapes[] = {&p};
  auto state = AdamState::for_params(shapes, {});
  CHECK_THROWS_AS(adam_step(params, grads, state), ConfigError);
  CHECK_THROWS_AS(adam_step(params, std::span<const Tensor* const>{}, state), ConfigError);
}

TEST_CASE("model-level step covers every tensor") {
  ModelConfig cfg;
  auto model = init_model(cfg, 1);
  const auto before = model;
  auto grads = model.zeros_like();
  grads.visit([](const std::string&, Tensor& t) { t.fill(1.0f); });
  auto state = AdamState::for_model(model, {});
  adam_step(model, grads, state);
  std::vector<const Tensor*> a, b;
  model.visit([&](const std::string&, const Tensor& t) { a.push_back(&t); });
  before.visit([&](const std::string&, const Tensor& t) { b.push_back(&t); });
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i]->size(); ++j) {
      CHECK((*a[i])[j] == doctest::Approx((*b[i])[j] - 1e-3f).epsilon(1e-4));
    }
  }
}
