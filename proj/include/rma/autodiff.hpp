#pragma once

// Reverse-mode differentiation over an explicitly recorded graph.
//
// A Graph records one forward pass. Nodes are appended in evaluation order, so
// reverse insertion order is a valid topological order for the backward sweep.
// Graphs are not thread-safe; use one per episode.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rma/tensor.hpp"

namespace rma {

template <typename Scalar>
class Graph;

template <typename Scalar>
struct Var {
  Graph<Scalar>* graph = nullptr;
  std::size_t id = 0;

  const BasicTensor<Scalar>& value() const;
  const BasicTensor<Scalar>& grad() const;
  const Shape& shape() const { return value().shape(); }
};

template <typename Scalar>
class Graph {
 public:
  using TensorT = BasicTensor<Scalar>;
  using VarT = Var<Scalar>;
  /// Reads the node's own gradient and accumulates into its parents.
  using BackwardFn = std::function<void(Graph&, std::size_t)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  /// Trainable input; receives a gradient after backward().
  VarT leaf(TensorT value);
  /// Input that never receives a gradient.
  VarT constant(TensorT value);

  VarT record(TensorT value, std::vector<std::size_t> parents, BackwardFn backward);

  const TensorT& value(std::size_t id) const { return nodes_[id].value; }
  /// Zero tensor of matching shape when no gradient reached the node.
  const TensorT& grad(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Gradient buffer of `id`, zero-initialized on first access.
  TensorT& grad_buffer(std::size_t id);

  /// Backward sweep from `output` seeded with the cotangent `seed`.
  void backward(VarT output, const TensorT& seed);
  /// Backward sweep from a single-element output, seeded with 1.
  void backward(VarT output);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    TensorT value;
    TensorT grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

template <typename Scalar>
const BasicTensor<Scalar>& Var<Scalar>::value() const {
  return graph->value(id);
}

template <typename Scalar>
const BasicTensor<Scalar>& Var<Scalar>::grad() const {
  return graph->grad(id);
}

namespace ops {

template <typename S> Var<S> matmul(Var<S> a, Var<S> b);
template <typename S> Var<S> add(Var<S> a, Var<S> b);
template <typename S> Var<S> sub(Var<S> a, Var<S> b);
template <typename S> Var<S> mul(Var<S> a, Var<S> b);
template <typename S> Var<S> scale(Var<S> a, S factor);
template <typename S> Var<S> relu(Var<S> a);
template <typename S> Var<S> sigmoid(Var<S> a);
template <typename S> Var<S> tanh(Var<S> a);
/// Softmax over all elements, max-subtracted.
template <typename S> Var<S> softmax(Var<S> a);
template <typename S> Var<S> reshape(Var<S> a, Shape shape);
/// Sum of all elements, as a one-element tensor.
template <typename S> Var<S> sum(Var<S> a);
/// Elementwise sum of same-shaped tensors.
template <typename S> Var<S> add_n(std::span<const Var<S>> terms);

/// Cross-correlation of [C_in x H x W] with [C_out x C_in x kH x kW], zero padding.
template <typename S> Var<S> conv2d(Var<S> input, Var<S> kernels, std::size_t stride, std::size_t padding);
/// Adds bias[c] to every element of channel c of a [C x H x W] tensor.
template <typename S> Var<S> channel_bias(Var<S> input, Var<S> bias);
/// Max over windows; backward routes to the first row-major argmax.
template <typename S> Var<S> maxpool2d(Var<S> input, std::size_t window, std::size_t stride);

/// Sampling grid [h x w x 2] from params (s_x, s_y, t_x, t_y), align-corners targets.
template <typename S> Var<S> affine_grid(Var<S> params, std::size_t height, std::size_t width);
/// Bilinear sampling of [D x H x W] at grid [h x w x 2] -> [D x h x w].
template <typename S> Var<S> bilinear_sample(Var<S> map, Var<S> grid);

/// Per-element maximum over same-shaped tensors; ties go to the earliest.
template <typename S> Var<S> max_over(std::span<const Var<S>> items);

/// sum((a - target)^2) against a constant target.
template <typename S> Var<S> squared_distance(Var<S> a, const BasicTensor<S>& target);
/// sum over s in {s_x, s_y} of max(|s| - alpha, 0)^2.
template <typename S> Var<S> scale_penalty(Var<S> params, S alpha);
/// sum over s in {s_x, s_y} of max(beta - s, 0).
template <typename S> Var<S> positive_penalty(Var<S> params, S beta);
/// 0.5 * ((t_x - cx)^2 + (t_y - cy)^2).
template <typename S> Var<S> anchor_penalty(Var<S> params, S cx, S cy);

/// Identity forward, negated backward. Fault injection for gradient-check tests.
template <typename S> Var<S> flip_grad(Var<S> a);

}  // namespace ops

extern template class Graph<float>;
extern template class Graph<double>;

}  // namespace rma
