#include "rma/objective.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "rma/errors.hpp"

namespace rma {

void LossWeights::validate() const {
  for (double v : {alpha, beta, lambda_anchor, lambda_positive, gamma}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("loss weights must be finite and >= 0");
  }
}

std::vector<double> ground_truth_prob(const LabelVector& labels) {
  double norm = 0.0;
  for (auto y : labels) norm += y ? 1.0 : 0.0;
  if (norm < 1.0) throw InvalidSampleError("label vector has no positive class");
  std::vector<double> p(labels.size());
  for (std::size_t c = 0; c < labels.size(); ++c) p[c] = labels[c] ? 1.0 / norm : 0.0;
  return p;
}

AnchorSet make_anchors(std::size_t steps) {
  if (steps < 2) {
    throw ConfigError("anchors need K >= 2 regions, got K=" + std::to_string(steps));
  }
  const std::size_t count = steps - 1;
  const double radius = std::numbers::sqrt2 / 2.0;
  AnchorSet anchors;
  for (std::size_t j = 0; j < count; ++j) {
    const double angle =
        std::numbers::pi / 4.0 + 2.0 * std::numbers::pi * static_cast<double>(j) /
                                     static_cast<double>(count);
    Anchor a{radius * std::cos(angle), radius * std::sin(angle)};
    // cos/sin leave ~1e-17 residue at multiples of 90 degrees.
    if (std::abs(a.x) < 1e-12) a.x = 0.0;
    if (std::abs(a.y) < 1e-12) a.y = 0.0;
    anchors.push_back(a);
  }
  return anchors;
}

template <typename S>
Var<S> cls_loss(Var<S> fused, const LabelVector& labels) {
  if (fused.value().size() != labels.size()) {
    throw DimensionError("cls_loss: " + std::to_string(fused.value().size()) + " scores vs " +
                         std::to_string(labels.size()) + " labels");
  }
  const auto target = ground_truth_prob(labels);
  BasicTensor<S> t(fused.shape());
  for (std::size_t c = 0; c < target.size(); ++c) t[c] = static_cast<S>(target[c]);
  return ops::squared_distance(ops::softmax(fused), t);
}

namespace {

template <typename S>
Var<S> zero_scalar(Graph<S>& g) {
  return g.constant(BasicTensor<S>(Shape{1}));
}

template <typename S>
Var<S> total(Graph<S>& g, const std::vector<Var<S>>& terms) {
  if (terms.empty()) return zero_scalar(g);
  return ops::add_n<S>(terms);
}

// Runs a graph-level loss on constant transforms and reads back the scalar.
template <typename F>
double evaluate(std::span<const TransformParams> transforms, F&& loss) {
  Graph<double> g;
  std::vector<Var<double>> vars;
  for (const auto& t : transforms) vars.push_back(g.constant(t.to_tensor<double>()));
  if (vars.empty()) return 0.0;
  return loss(std::span<const Var<double>>(vars)).value()[0];
}

}  // namespace

template <typename S>
Var<S> anchor_loss(std::span<const Var<S>> transforms, const AnchorSet& anchors) {
  const std::size_t expected = transforms.empty() ? 0 : transforms.size() - 1;
  if (anchors.size() != expected) {
    throw ConfigError("anchor_loss: " + std::to_string(transforms.size()) + " regions need " +
                      std::to_string(expected) + " anchors, got " +
                      std::to_string(anchors.size()));
  }
  if (transforms.empty()) throw ProtocolError("anchor_loss: no transforms");
  std::vector<Var<S>> terms;
  for (std::size_t k = 1; k < transforms.size(); ++k) {
    terms.push_back(ops::anchor_penalty(transforms[k], static_cast<S>(anchors[k - 1].x),
                                        static_cast<S>(anchors[k - 1].y)));
  }
  return total(*transforms.front().graph, terms);
}

template <typename S>
Var<S> scale_loss(std::span<const Var<S>> transforms, double alpha) {
  if (transforms.empty()) throw ProtocolError("scale_loss: no transforms");
  std::vector<Var<S>> terms;
  for (const auto& t : transforms) terms.push_back(ops::scale_penalty(t, static_cast<S>(alpha)));
  return total(*transforms.front().graph, terms);
}

template <typename S>
Var<S> positive_loss(std::span<const Var<S>> transforms, double beta) {
  if (transforms.empty()) throw ProtocolError("positive_loss: no transforms");
  std::vector<Var<S>> terms;
  for (const auto& t : transforms) terms.push_back(ops::positive_penalty(t, static_cast<S>(beta)));
  return total(*transforms.front().graph, terms);
}

template <typename S>
Var<S> loc_loss(std::span<const Var<S>> transforms, const AnchorSet& anchors,
                const LossWeights& weights) {
  if (transforms.empty()) throw ProtocolError("loc_loss: no transforms");
  auto& g = *transforms.front().graph;
  std::vector<Var<S>> terms;
  if (weights.use_scale) terms.push_back(scale_loss(transforms, weights.alpha));
  if (weights.use_anchor) {
    terms.push_back(ops::scale(anchor_loss(transforms, anchors), static_cast<S>(weights.lambda_anchor)));
  }
  if (weights.use_positive) {
    terms.push_back(ops::scale(positive_loss(transforms, weights.beta),
                               static_cast<S>(weights.lambda_positive)));
  }
  return total(g, terms);
}

template <typename S>
Var<S> total_loss(Var<S> cls, Var<S> loc, const LossWeights& weights) {
  return ops::add(cls, ops::scale(loc, static_cast<S>(weights.gamma)));
}

double cls_loss(std::span<const double> fused, const LabelVector& labels) {
  Graph<double> g;
  const auto s = g.constant(TensorD(Shape{fused.size()}, {fused.begin(), fused.end()}));
  return cls_loss(s, labels).value()[0];
}

double anchor_loss(std::span<const TransformParams> transforms, const AnchorSet& anchors) {
  if (transforms.empty() && anchors.empty()) return 0.0;
  return evaluate(transforms, [&](auto vars) { return anchor_loss<double>(vars, anchors); });
}

double scale_loss(std::span<const TransformParams> transforms, double alpha) {
  return evaluate(transforms, [&](auto vars) { return scale_loss<double>(vars, alpha); });
}

double positive_loss(std::span<const TransformParams> transforms, double beta) {
  return evaluate(transforms, [&](auto vars) { return positive_loss<double>(vars, beta); });
}

double loc_loss(std::span<const TransformParams> transforms, const AnchorSet& anchors,
                const LossWeights& weights) {
  return evaluate(transforms, [&](auto vars) { return loc_loss<double>(vars, anchors, weights); });
}

double total_loss(double cls, double loc, const LossWeights& weights) {
  return cls + weights.gamma * loc;
}

#define RMA_INSTANTIATE_OBJECTIVE(S)                                                         \
  template Var<S> cls_loss(Var<S>, const LabelVector&);                                     \
  template Var<S> anchor_loss(std::span<const Var<S>>, const AnchorSet&);                   \
  template Var<S> scale_loss(std::span<const Var<S>>, double);                              \
  template Var<S> positive_loss(std::span<const Var<S>>, double);                           \
  template Var<S> loc_loss(std::span<const Var<S>>, const AnchorSet&, const LossWeights&);  \
  template Var<S> total_loss(Var<S>, Var<S>, const LossWeights&);

RMA_INSTANTIATE_OBJECTIVE(float)
RMA_INSTANTIATE_OBJECTIVE(double)

}  // namespace rma
