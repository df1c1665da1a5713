#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rma/attention.hpp"
#include "rma/backbone.hpp"
#include "rma/objective.hpp"

namespace rma {

struct ModelConfig {
  BackboneArch backbone;
  AttentionArch attention;

  /// Checks internal consistency (encoder output channels feed the attention module).
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

/// Every trainable tensor of the network. Also used as the gradient container.
template <typename S>
struct Model {
  ModelConfig config;
  BackboneWeights<S> backbone;
  AttentionWeights<S> attention;

  template <typename F>
  void visit(F&& f) {
    backbone.visit([&](const std::string& n, BasicTensor<S>& t) { f("backbone." + n, t); });
    attention.visit([&](const std::string& n, BasicTensor<S>& t) { f("attention." + n, t); });
  }
  template <typename F>
  void visit(F&& f) const {
    backbone.visit([&](const std::string& n, const BasicTensor<S>& t) { f("backbone." + n, t); });
    attention.visit(
        [&](const std::string& n, const BasicTensor<S>& t) { f("attention." + n, t); });
  }

  std::size_t parameter_count() const;
  /// Same structure, every tensor zero.
  Model zeros_like() const;

  template <typename To>
  Model<To> cast() const;
};

Model<float> init_model(const ModelConfig& config, std::uint64_t seed);

template <typename S>
struct BoundModel {
  BackboneParams<Var<S>> backbone;
  AttentionParams<Var<S>> attention;
};

template <typename S>
BoundModel<S> bind(Graph<S>& g, const Model<S>& model, bool trainable);

/// Adds the gradients held by `bound` into `grads` (same structure as the model).
template <typename S>
void accumulate_gradients(const BoundModel<S>& bound, Model<S>& grads);

template <typename S>
struct SampleGraph {
  Var<S> features;
  EpisodeVars<S> episode;
  Var<S> cls;
  Var<S> loc;
  Var<S> total;
};

/// image -> features -> episode -> fused scores -> classification + localization loss.
template <typename S>
SampleGraph<S> build_sample_graph(Graph<S>& g, const BoundModel<S>& model,
                                  const ModelConfig& config, const BasicTensor<S>& image,
                                  const LabelVector& labels, const LossWeights& weights,
                                  const AnchorSet& anchors);

/// Anchors matching the configured episode length (empty for K = 1).
AnchorSet anchors_for(const ModelConfig& config);

/// Inference on one image.
EpisodeTrace predict(const Model<float>& model, const Tensor& image);

}  // namespace rma
