#include "rma/model.hpp"

#include "rma/errors.hpp"

namespace rma {

void ModelConfig::validate() const {
  if (backbone.channels.empty()) throw ConfigError("backbone needs at least one block");
  if (backbone.kernel == 0 || backbone.pool == 0) throw ConfigError("backbone kernel and pool must be positive");
  attention.validate();
  if (attention.feature_channels != backbone.feature_channels()) {
    throw ConfigError("attention expects " + std::to_string(attention.feature_channels) +
                      " feature channels but the backbone produces " +
                      std::to_string(backbone.feature_channels()));
  }
}

template <typename S>
std::size_t Model<S>::parameter_count() const {
  std::size_t n = 0;
  visit([&](const std::string&, const BasicTensor<S>& t) { n += t.size(); });
  return n;
}

template <typename S>
Model<S> Model<S>::zeros_like() const {
  Model out = *this;
  out.visit([](const std::string&, BasicTensor<S>& t) { t.fill(S(0)); });
  return out;
}

template <typename S>
template <typename To>
Model<To> Model<S>::cast() const {
  Model<To> out;
  out.config = config;
  for (const auto& k : backbone.kernels) out.backbone.kernels.push_back(k.template cast<To>());
  for (const auto& b : backbone.biases) out.backbone.biases.push_back(b.template cast<To>());
  std::vector<BasicTensor<To>> flat;
  attention.visit([&](const std::string&, const BasicTensor<S>& t) {
    flat.push_back(t.template cast<To>());
  });
  std::size_t i = 0;
  out.attention.visit([&](const std::string&, BasicTensor<To>& t) { t = std::move(flat[i++]); });
  return out;
}

Model<float> init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Model<float> m;
  m.config = config;
  m.backbone = init_backbone(config.backbone, rng);
  m.attention = init_attention(config.attention, rng);
  return m;
}

template <typename S>
BoundModel<S> bind(Graph<S>& g, const Model<S>& model, bool trainable) {
  BoundModel<S> out;
  for (std::size_t i = 0; i < model.backbone.kernels.size(); ++i) {
    out.backbone.kernels.push_back(trainable ? g.leaf(model.backbone.kernels[i])
                                             : g.constant(model.backbone.kernels[i]));
    out.backbone.biases.push_back(trainable ? g.leaf(model.backbone.biases[i])
                                            : g.constant(model.backbone.biases[i]));
  }
  out.attention = bind(g, model.attention, trainable);
  return out;
}

template <typename S>
void accumulate_gradients(const BoundModel<S>& bound, Model<S>& grads) {
  std::vector<const BasicTensor<S>*> sources;
  const auto collect = [&](const std::string&, const Var<S>& v) { sources.push_back(&v.grad()); };
  bound.backbone.visit(collect);
  bound.attention.visit(collect);
  std::size_t i = 0;
  grads.visit([&](const std::string& name, BasicTensor<S>& t) {
    const auto& src = *sources[i++];
    if (src.size() != t.size()) throw DimensionError("gradient shape mismatch for " + name);
    for (std::size_t j = 0; j < t.size(); ++j) t[j] += src[j];
  });
}

AnchorSet anchors_for(const ModelConfig& config) {
  return config.attention.steps >= 2 ? make_anchors(config.attention.steps) : AnchorSet{};
}

template <typename S>
SampleGraph<S> build_sample_graph(Graph<S>& g, const BoundModel<S>& model,
                                  const ModelConfig& config, const BasicTensor<S>& image,
                                  const LabelVector& labels, const LossWeights& weights,
                                  const AnchorSet& anchors) {
  SampleGraph<S> out;
  out.features = encode(g.constant(image), model.backbone, config.backbone);
  out.episode = run_episode(out.features, model.attention, config.attention);
  out.cls = cls_loss(out.episode.fused, labels);
  // M_1 .. M_K are the transforms of the scored regions.
  const std::span<const Var<S>> scored(out.episode.transforms.data() + 1, config.attention.steps);
  out.loc = loc_loss(scored, anchors, weights);
  out.total = total_loss(out.cls, out.loc, weights);
  return out;
}

EpisodeTrace predict(const Model<float>& model, const Tensor& image) {
  const auto features = encode(image, model.backbone, model.config.backbone);
  return run_episode(features, model.attention, model.config.attention);
}

template struct Model<float>;
template struct Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template BoundModel<float> bind(Graph<float>&, const Model<float>&, bool);
template BoundModel<double> bind(Graph<double>&, const Model<double>&, bool);
template void accumulate_gradients(const BoundModel<float>&, Model<float>&);
template void accumulate_gradients(const BoundModel<double>&, Model<double>&);
template SampleGraph<float> build_sample_graph(Graph<float>&, const BoundModel<float>&,
                                               const ModelConfig&, const Tensor&,
                                               const LabelVector&, const LossWeights&,
                                               const AnchorSet&);
template SampleGraph<double> build_sample_graph(Graph<double>&, const BoundModel<double>&,
                                                const ModelConfig&, const TensorD&,
                                                const LabelVector&, const LossWeights&,
                                                const AnchorSet&);

}  // namespace rma
