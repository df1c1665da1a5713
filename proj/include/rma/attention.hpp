#pragma once

// Recurrent attention episode.
//
// Iteration 0 samples the whole feature map (identity transform), updates the
// LSTM and only predicts the next transform. Iterations 1..K sample the region
// predicted by the previous iteration, emit a class-score vector and the next
// transform. The final transform is computed and discarded. Scores are fused by
// a per-class maximum over the K regions.

#include <cstddef>
#include <optional>
#include <vector>

#include "rma/autodiff.hpp"
#include "rma/random.hpp"
#include "rma/spatial_transformer.hpp"
#include "rma/tensor.hpp"

namespace rma {

struct AttentionArch {
  std::size_t feature_channels = 32;
  std::size_t region_h = 4;
  std::size_t region_w = 4;
  std::size_t embed = 64;
  std::size_t hidden = 64;
  std::size_t head = 64;
  std::size_t classes = 4;
  std::size_t steps = 5;
  /// h = o * tanh(c) instead of h = o * c.
  bool cell_tanh = false;

  std::size_t region_size() const { return feature_channels * region_h * region_w; }
  void validate() const;
  bool operator==(const AttentionArch&) const = default;
};

/// Column vectors are stored as [n x 1].
template <typename T>
struct AttentionParams {
  T embed_w, embed_b;
  T input_x, input_h, input_b;
  T forget_x, forget_h, forget_b;
  T output_x, output_h, output_b;
  T modulation_x, modulation_h, modulation_b;
  T head_w, head_b;
  T score_w, score_b;
  T transform_w, transform_b;

  template <typename Self, typename F>
  static void visit_impl(Self& self, F&& f) {
    f("embed.weight", self.embed_w);
    f("embed.bias", self.embed_b);
    f("lstm.input.wx", self.input_x);
    f("lstm.input.wh", self.input_h);
    f("lstm.input.bias", self.input_b);
    f("lstm.forget.wx", self.forget_x);
    f("lstm.forget.wh", self.forget_h);
    f("lstm.forget.bias", self.forget_b);
    f("lstm.output.wx", self.output_x);
    f("lstm.output.wh", self.output_h);
    f("lstm.output.bias", self.output_b);
    f("lstm.modulation.wx", self.modulation_x);
    f("lstm.modulation.wh", self.modulation_h);
    f("lstm.modulation.bias", self.modulation_b);
    f("head.weight", self.head_w);
    f("head.bias", self.head_b);
    f("score.weight", self.score_w);
    f("score.bias", self.score_b);
    f("transform.weight", self.transform_w);
    f("transform.bias", self.transform_b);
  }
  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }
};

template <typename S>
using AttentionWeights = AttentionParams<BasicTensor<S>>;

/// Xavier-uniform matrices, zero biases, except the transform head which starts
/// at zero weight and identity bias (1, 1, 0, 0).
AttentionWeights<float> init_attention(const AttentionArch& arch, Rng& rng);

template <typename S>
AttentionWeights<S> zero_attention(const AttentionArch& arch);

template <typename S>
struct LstmVars {
  Var<S> hidden;
  Var<S> cell;
};

template <typename S>
struct HeadVars {
  std::optional<Var<S>> score;
  Var<S> transform;
};

template <typename S>
LstmVars<S> zero_state(Graph<S>& g, const AttentionArch& arch);

/// One LSTM update from a sampled region [D x h_r x w_r] (flattened row-major).
template <typename S>
LstmVars<S> lstm_step(Var<S> region, const LstmVars<S>& prev, const AttentionParams<Var<S>>& w,
                      bool cell_tanh);

/// Score head (only when `emit_score`) and next-transform head.
template <typename S>
HeadVars<S> heads(Var<S> hidden, const AttentionParams<Var<S>>& w, bool emit_score);

template <typename S>
struct EpisodeVars {
  /// M_0 .. M_{K+1}; M_0 is the identity constant, M_{K+1} is unused.
  std::vector<Var<S>> transforms;
  /// s_1 .. s_K.
  std::vector<Var<S>> scores;
  /// State after each of the K+1 iterations.
  std::vector<LstmVars<S>> states;
  Var<S> fused;
};

template <typename S>
EpisodeVars<S> run_episode(Var<S> features, const AttentionParams<Var<S>>& w,
                           const AttentionArch& arch);

/// Per-class maximum over regions; ties go to the earliest region.
template <typename S>
Var<S> fuse_scores(std::span<const Var<S>> scores);

std::vector<double> fuse_scores(const std::vector<std::vector<double>>& scores);

struct LstmState {
  std::vector<double> hidden;
  std::vector<double> cell;
};

struct EpisodeTrace {
  /// Transforms used for sampling, M_0 (identity) .. M_K.
  std::vector<TransformParams> transforms;
  /// Produced by the last iteration and not used.
  TransformParams discarded;
  std::vector<std::vector<double>> scores;
  std::vector<LstmState> states;
  std::vector<double> fused;
};

template <typename S>
EpisodeTrace to_trace(const EpisodeVars<S>& episode);

/// Runs an episode on a throwaway graph.
template <typename S>
EpisodeTrace run_episode(const BasicTensor<S>& features, const AttentionWeights<S>& w,
                         const AttentionArch& arch);

/// Binds every tensor of `weights` as a leaf (or constant) of `g`.
template <typename S>
AttentionParams<Var<S>> bind(Graph<S>& g, const AttentionWeights<S>& weights, bool trainable);

}  // namespace rma
