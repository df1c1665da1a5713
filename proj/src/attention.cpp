#include "rma/attention.hpp"

#include <cmath>
#include <string>

#include "rma/errors.hpp"

namespace rma {

void AttentionArch::validate() const {
  if (feature_channels == 0 || region_h == 0 || region_w == 0 || embed == 0 || hidden == 0 ||
      head == 0) {
    throw ConfigError("attention sizes must all be positive");
  }
  if (classes < 1) throw ConfigError("attention needs at least one class");
  if (steps < 1) throw ConfigError("episode length K must be >= 1, got " + std::to_string(steps));
}

namespace {

Tensor xavier(std::size_t rows, std::size_t cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Tensor t(Shape{rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform(-limit, limit));
  return t;
}

template <typename S>
void shape_weights(AttentionParams<BasicTensor<S>>& w, const AttentionArch& a) {
  const auto mat = [](std::size_t r, std::size_t c) { return BasicTensor<S>(Shape{r, c}); };
  w.embed_w = mat(a.embed, a.region_size());
  w.embed_b = mat(a.embed, 1);
  for (auto* gate : {&w.input_x, &w.forget_x, &w.output_x, &w.modulation_x}) {
    *gate = mat(a.hidden, a.embed);
  }
  for (auto* gate : {&w.input_h, &w.forget_h, &w.output_h, &w.modulation_h}) {
    *gate = mat(a.hidden, a.hidden);
  }
  for (auto* bias : {&w.input_b, &w.forget_b, &w.output_b, &w.modulation_b}) {
    *bias = mat(a.hidden, 1);
  }
  w.head_w = mat(a.head, a.hidden);
  w.head_b = mat(a.head, 1);
  w.score_w = mat(a.classes, a.head);
  w.score_b = mat(a.classes, 1);
  w.transform_w = mat(4, a.head);
  w.transform_b = mat(4, 1);
  w.transform_b[0] = S(1);
  w.transform_b[1] = S(1);
}

template <typename S>
Var<S> affine(Var<S> weight, Var<S> input, Var<S> bias) {
  return ops::add(ops::matmul(weight, input), bias);
}

template <typename S>
Var<S> gate(const LstmVars<S>& prev, Var<S> x, Var<S> wx, Var<S> wh, Var<S> b) {
  return ops::add(ops::add(ops::matmul(wx, x), ops::matmul(wh, prev.hidden)), b);
}

std::vector<double> column(const auto& t) {
  return std::vector<double>(t.values().begin(), t.values().end());
}

}  // namespace

AttentionWeights<float> init_attention(const AttentionArch& arch, Rng& rng) {
  arch.validate();
  AttentionWeights<float> w;
  shape_weights(w, arch);
  w.embed_w = xavier(arch.embed, arch.region_size(), rng);
  for (auto* gate : {&w.input_x, &w.forget_x, &w.output_x, &w.modulation_x}) {
    *gate = xavier(arch.hidden, arch.embed, rng);
  }
  for (auto* gate : {&w.input_h, &w.forget_h, &w.output_h, &w.modulation_h}) {
    *gate = xavier(arch.hidden, arch.hidden, rng);
  }
  w.head_w = xavier(arch.head, arch.hidden, rng);
  w.score_w = xavier(arch.classes, arch.head, rng);
  return w;
}

template <typename S>
AttentionWeights<S> zero_attention(const AttentionArch& arch) {
  AttentionWeights<S> w;
  shape_weights(w, arch);
  w.transform_b.fill(S(0));
  return w;
}

template <typename S>
AttentionParams<Var<S>> bind(Graph<S>& g, const AttentionWeights<S>& weights, bool trainable) {
  std::vector<Var<S>> vars;
  weights.visit([&](const std::string&, const BasicTensor<S>& t) {
    vars.push_back(trainable ? g.leaf(t) : g.constant(t));
  });
  AttentionParams<Var<S>> out;
  std::size_t i = 0;
  out.visit([&](const std::string&, Var<S>& v) { v = vars[i++]; });
  return out;
}

template <typename S>
LstmVars<S> zero_state(Graph<S>& g, const AttentionArch& arch) {
  return {g.constant(BasicTensor<S>(Shape{arch.hidden, 1})),
          g.constant(BasicTensor<S>(Shape{arch.hidden, 1}))};
}

template <typename S>
LstmVars<S> lstm_step(Var<S> region, const LstmVars<S>& prev, const AttentionParams<Var<S>>& w,
                      bool cell_tanh) {
  const std::size_t flat = region.value().size();
  if (w.embed_w.shape()[1] != flat) {
    throw ConfigError("lstm_step: region has " + std::to_string(flat) +
                      " values but the embedding expects " +
                      std::to_string(w.embed_w.shape()[1]));
  }
  if (prev.hidden.shape() != w.input_b.shape() || prev.cell.shape() != w.input_b.shape()) {
    throw ConfigError("lstm_step: state " + shape_str(prev.hidden.shape()) +
                      " does not match hidden size " + shape_str(w.input_b.shape()));
  }
  const auto x = ops::relu(affine(w.embed_w, ops::reshape(region, Shape{flat, 1}), w.embed_b));
  const auto input = ops::sigmoid(gate(prev, x, w.input_x, w.input_h, w.input_b));
  const auto forget = ops::sigmoid(gate(prev, x, w.forget_x, w.forget_h, w.forget_b));
  const auto output = ops::sigmoid(gate(prev, x, w.output_x, w.output_h, w.output_b));
  const auto modulation =
      ops::tanh(gate(prev, x, w.modulation_x, w.modulation_h, w.modulation_b));
  const auto cell = ops::add(ops::mul(forget, prev.cell), ops::mul(input, modulation));
  const auto hidden = ops::mul(output, cell_tanh ? ops::tanh(cell) : cell);
  return {hidden, cell};
}

template <typename S>
HeadVars<S> heads(Var<S> hidden, const AttentionParams<Var<S>>& w, bool emit_score) {
  const auto z = ops::relu(affine(w.head_w, hidden, w.head_b));
  HeadVars<S> out{std::nullopt, affine(w.transform_w, z, w.transform_b)};
  if (emit_score) out.score = affine(w.score_w, z, w.score_b);
  return out;
}

template <typename S>
Var<S> fuse_scores(std::span<const Var<S>> scores) {
  return ops::max_over(scores);
}

std::vector<double> fuse_scores(const std::vector<std::vector<double>>& scores) {
  if (scores.empty()) throw ProtocolError("fuse_scores: no region scores to fuse");
  std::vector<double> fused = scores.front();
  for (const auto& s : scores) {
    if (s.size() != fused.size()) throw ProtocolError("fuse_scores: score vectors differ in length");
    for (std::size_t c = 0; c < s.size(); ++c) fused[c] = std::max(fused[c], s[c]);
  }
  return fused;
}

template <typename S>
EpisodeVars<S> run_episode(Var<S> features, const AttentionParams<Var<S>>& w,
                           const AttentionArch& arch) {
  arch.validate();
  auto& g = *features.graph;
  EpisodeVars<S> ep;
  ep.transforms.push_back(g.constant(TransformParams::identity().to_tensor<S>().reshaped({4, 1})));
  auto state = zero_state(g, arch);
  for (std::size_t k = 0; k <= arch.steps; ++k) {
    const auto region =
        spatial_transform(features, ep.transforms[k], arch.region_h, arch.region_w);
    state = lstm_step(region, state, w, arch.cell_tanh);
    ep.states.push_back(state);
    auto out = heads(state.hidden, w, k != 0);
    if (out.score) ep.scores.push_back(*out.score);
    ep.transforms.push_back(out.transform);
  }
  ep.fused = fuse_scores<S>(ep.scores);
  return ep;
}

template <typename S>
EpisodeTrace to_trace(const EpisodeVars<S>& ep) {
  EpisodeTrace trace;
  for (std::size_t k = 0; k + 1 < ep.transforms.size(); ++k) {
    trace.transforms.push_back(TransformParams::from_tensor(ep.transforms[k].value()));
  }
  trace.discarded = TransformParams::from_tensor(ep.transforms.back().value());
  for (const auto& s : ep.scores) trace.scores.push_back(column(s.value()));
  for (const auto& st : ep.states) {
    trace.states.push_back({column(st.hidden.value()), column(st.cell.value())});
  }
  trace.fused = column(ep.fused.value());
  return trace;
}

template <typename S>
EpisodeTrace run_episode(const BasicTensor<S>& features, const AttentionWeights<S>& w,
                         const AttentionArch& arch) {
  Graph<S> g;
  const auto vars = bind(g, w, false);
  return to_trace(run_episode(g.constant(features), vars, arch));
}

#define RMA_INSTANTIATE_ATTENTION(S)                                                              \
  template AttentionWeights<S> zero_attention<S>(const AttentionArch&);                          \
  template AttentionParams<Var<S>> bind(Graph<S>&, const AttentionWeights<S>&, bool);            \
  template LstmVars<S> zero_state(Graph<S>&, const AttentionArch&);                              \
  template LstmVars<S> lstm_step(Var<S>, const LstmVars<S>&, const AttentionParams<Var<S>>&,     \
                                 bool);                                                          \
  template HeadVars<S> heads(Var<S>, const AttentionParams<Var<S>>&, bool);                      \
  template Var<S> fuse_scores(std::span<const Var<S>>);                                          \
  template EpisodeVars<S> run_episode(Var<S>, const AttentionParams<Var<S>>&,                    \
                                      const AttentionArch&);                                     \
  template EpisodeTrace to_trace(const EpisodeVars<S>&);                                         \
  template EpisodeTrace run_episode(const BasicTensor<S>&, const AttentionWeights<S>&,           \
                                    const AttentionArch&);

RMA_INSTANTIATE_ATTENTION(float)
RMA_INSTANTIATE_ATTENTION(double)

}  // namespace rma
