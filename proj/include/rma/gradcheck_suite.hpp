#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rma/grad_check.hpp"

namespace rma {

struct GradCheckItem {
  std::string name;
  GradCheckResult result;
  bool passed = false;
};

struct GradCheckSuiteOptions {
  double tolerance = 1e-4;
  double perturbation = 1e-4;
  /// Negates the backward pass of the named item (negative control).
  std::optional<std::string> inject_fault;
  /// Run only items whose name contains this substring.
  std::string filter;
};

std::vector<std::string> gradcheck_item_names();

/// Every differentiable building block of the model, in 64-bit arithmetic, at
/// fixed inputs chosen away from relu, max, hinge and bilinear kinks.
std::vector<GradCheckItem> run_gradcheck_suite(const GradCheckSuiteOptions& options = {});

}  // namespace rma
