#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rma/model.hpp"
#include "rma/tensor.hpp"

namespace rma {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates, one pair per parameter tensor in visit order.
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  /// Zero moments shaped like `params`.
  static AdamState for_params(std::span<const Tensor* const> params, AdamConfig config);
  static AdamState for_model(const Model<float>& model, AdamConfig config);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               AdamState& state);

void adam_step(Model<float>& model, const Model<float>& grads, AdamState& state);

}  // namespace rma
