#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rma/autodiff.hpp"
#include "rma/spatial_transformer.hpp"

namespace rma {

/// Binary class-membership vector.
using LabelVector = std::vector<std::uint8_t>;

struct LossWeights {
  double alpha = 0.5;          // scale threshold
  double beta = 0.1;           // positive-scale threshold
  double lambda_anchor = 0.01;
  double lambda_positive = 0.1;
  double gamma = 0.1;          // weight of the localization loss in the total
  bool use_anchor = true;
  bool use_scale = true;
  bool use_positive = true;

  void validate() const;
};

struct Anchor {
  double x = 0.0;
  double y = 0.0;
};
using AnchorSet = std::vector<Anchor>;

/// y / ||y||_1. Throws InvalidSampleError for an all-zero vector.
std::vector<double> ground_truth_prob(const LabelVector& labels);

/// K-1 points spaced evenly on the radius sqrt(2)/2 circle, starting at 45 degrees
/// and going counter-clockwise.
AnchorSet make_anchors(std::size_t steps);

/// sum_c (softmax(fused)_c - y_c/||y||_1)^2 for one sample.
template <typename S>
Var<S> cls_loss(Var<S> fused, const LabelVector& labels);

/// Regions 2..K pulled toward anchors 1..K-1 (region k -> anchor k-1); region 1 is free.
/// `transforms` holds M_1 .. M_K.
template <typename S>
Var<S> anchor_loss(std::span<const Var<S>> transforms, const AnchorSet& anchors);

template <typename S>
Var<S> scale_loss(std::span<const Var<S>> transforms, double alpha);

template <typename S>
Var<S> positive_loss(std::span<const Var<S>> transforms, double beta);

/// l_S + lambda_1 l_A + lambda_2 l_P, with disabled terms dropped.
template <typename S>
Var<S> loc_loss(std::span<const Var<S>> transforms, const AnchorSet& anchors,
                const LossWeights& weights);

template <typename S>
Var<S> total_loss(Var<S> cls, Var<S> loc, const LossWeights& weights);

// Value-level versions for reporting and tests.
double cls_loss(std::span<const double> fused, const LabelVector& labels);
double anchor_loss(std::span<const TransformParams> transforms, const AnchorSet& anchors);
double scale_loss(std::span<const TransformParams> transforms, double alpha = 0.5);
double positive_loss(std::span<const TransformParams> transforms, double beta = 0.1);
double loc_loss(std::span<const TransformParams> transforms, const AnchorSet& anchors,
                const LossWeights& weights = {});
double total_loss(double cls, double loc, const LossWeights& weights = {});

}  // namespace rma
