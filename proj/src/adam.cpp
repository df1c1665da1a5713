#include "rma/adam.hpp"

#include <cmath>
#include <string>

#include "rma/errors.hpp"

namespace rma {
namespace {

template <typename T, typename M>
std::vector<T*> pointers(M& model) {
  std::vector<T*> out;
  model.visit([&](const std::string&, T& t) { out.push_back(&t); });
  return out;
}

}  // namespace

AdamState AdamState::for_params(std::span<const Tensor* const> params, AdamConfig config) {
  AdamState s;
  s.config = config;
  for (const auto* p : params) {
    s.first_moment.emplace_back(p->shape());
    s.second_moment.emplace_back(p->shape());
  }
  return s;
}

AdamState AdamState::for_model(const Model<float>& model, AdamConfig config) {
  const auto params = pointers<const Tensor>(model);
  return for_params(params, config);
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw ConfigError("adam_step: " + std::to_string(params.size()) + " parameters, " +
                      std::to_string(grads.size()) + " gradients, " +
                      std::to_string(state.first_moment.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i]->shape() != grads[i]->shape() ||
        params[i]->shape() != state.first_moment[i].shape()) {
      throw ConfigError("adam_step: shape mismatch at parameter " + std::to_string(i) + ": " +
                        shape_str(params[i]->shape()) + " vs gradient " +
                        shape_str(grads[i]->shape()));
    }
  }
  ++state.step;
  const auto& c = state.config;
  const auto b1 = static_cast<float>(c.beta1);
  const auto b2 = static_cast<float>(c.beta2);
  const auto correction1 = static_cast<float>(1.0 - std::pow(c.beta1, static_cast<double>(state.step)));
  const auto correction2 = static_cast<float>(1.0 - std::pow(c.beta2, static_cast<double>(state.step)));
  const auto lr = static_cast<float>(c.learning_rate);
  const auto eps = static_cast<float>(c.epsilon);

  for (std::size_t i = 0; i < params.size(); ++i) {
    float* p = params[i]->data();
    const float* g = grads[i]->data();
    float* m = state.first_moment[i].data();
    float* v = state.second_moment[i].data();
    const auto n = static_cast<std::ptrdiff_t>(params[i]->size());
#pragma omp parallel for schedule(static) if (n > 1 << 15)
    for (std::ptrdiff_t j = 0; j < n; ++j) {
      m[j] = b1 * m[j] + (1.0f - b1) * g[j];
      v[j] = b2 * v[j] + (1.0f - b2) * g[j] * g[j];
      const float m_hat = m[j] / correction1;
      const float v_hat = v[j] / correction2;
      p[j] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

void adam_step(Model<float>& model, const Model<float>& grads, AdamState& state) {
  const auto p = pointers<Tensor>(model);
  const auto g = pointers<const Tensor>(grads);
  adam_step(p, g, state);
}

}  // namespace rma
