#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rma/autodiff.hpp"

namespace rma {

/// A differentiable function of several tensors, expressed as graph ops.
/// Its recorded backward is what grad_check verifies.
using DifferentiableFn =
    std::function<Var<double>(Graph<double>&, std::span<const Var<double>>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_element = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
  std::size_t checked = 0;
};

struct GradCheckOptions {
  double perturbation = 1e-4;
  /// Seeds the random output cotangent the outputs are projected onto.
  std::uint64_t seed = 0x5eed;
  /// Restrict the check to these inputs; empty means all.
  std::vector<std::size_t> only_inputs;
};

/// Compares the recorded backward of `fn` against central differences.
///
/// The output is projected onto a fixed random cotangent r, so the scalar
/// being differentiated is <r, fn(inputs)>. Relative error per entry is
/// |analytic - numeric| / max(|analytic|, |numeric|, 1e-8); the maximum is
/// returned.
GradCheckResult grad_check(const DifferentiableFn& fn, std::span<const TensorD> inputs,
                           const GradCheckOptions& options = {});

}  // namespace rma
