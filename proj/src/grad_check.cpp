#include "rma/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rma {
namespace {

double project(const DifferentiableFn& fn, std::span<const TensorD> inputs, const TensorD& cot) {
  Graph<double> g;
  std::vector<Var<double>> vars;
  vars.reserve(inputs.size());
  for (const auto& t : inputs) vars.push_back(g.constant(t));
  const auto& y = fn(g, vars).value();
  double total = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) total += y[i] * cot[i];
  return total;
}

}  // namespace

GradCheckResult grad_check(const DifferentiableFn& fn, std::span<const TensorD> inputs,
                           const GradCheckOptions& options) {
  Graph<double> g;
  std::vector<Var<double>> vars;
  for (const auto& t : inputs) vars.push_back(g.leaf(t));
  const auto out = fn(g, vars);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  TensorD cot(out.shape());
  for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = unit(rng);
  g.backward(out, cot);

  GradCheckResult result;
  std::vector<TensorD> probe(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    if (!options.only_inputs.empty() &&
        std::find(options.only_inputs.begin(), options.only_inputs.end(), k) ==
            options.only_inputs.end()) {
      continue;
    }
    const auto& analytic = vars[k].grad();
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const double base = probe[k][i];
      probe[k][i] = base + options.perturbation;
      const double up = project(fn, probe, cot);
      probe[k][i] = base - options.perturbation;
      const double down = project(fn, probe, cot);
      probe[k][i] = base;

      const double numeric = (up - down) / (2.0 * options.perturbation);
      const double a = analytic[i];
      const double err =
          std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
      ++result.checked;
      if (err > result.max_rel_error) {
        result = {err, k, i, a, numeric, result.checked};
      }
    }
  }
  return result;
}

}  // namespace rma
