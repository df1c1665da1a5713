#include "rma/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "rma/errors.hpp"
#include "rma/kernels.hpp"

namespace rma {

template <typename Scalar>
Var<Scalar> Graph<Scalar>::leaf(TensorT value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::constant(TensorT value) {
  nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
Var<Scalar> Graph<Scalar>::record(TensorT value, std::vector<std::size_t> parents,
                                  BackwardFn backward) {
  bool needs = false;
  for (auto p : parents) needs = needs || nodes_[p].requires_grad;
  nodes_.push_back(Node{std::move(value), {}, std::move(parents),
                        needs ? std::move(backward) : BackwardFn{}, needs});
  return {this, nodes_.size() - 1};
}

template <typename Scalar>
BasicTensor<Scalar>& Graph<Scalar>::grad_buffer(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.empty()) node.grad = TensorT(node.value.shape());
  return node.grad;
}

template <typename Scalar>
const BasicTensor<Scalar>& Graph<Scalar>::grad(std::size_t id) {
  return grad_buffer(id);
}

template <typename Scalar>
void Graph<Scalar>::backward(VarT output, const TensorT& seed) {
  if (seed.shape() != value(output.id).shape()) {
    throw DimensionError("backward seed " + shape_str(seed.shape()) + " does not match output " +
                         shape_str(value(output.id).shape()));
  }
  auto& g = grad_buffer(output.id);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] += seed[i];
  for (std::size_t id = output.id + 1; id-- > 0;) {
    auto& node = nodes_[id];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

template <typename Scalar>
void Graph<Scalar>::backward(VarT output) {
  if (value(output.id).size() != 1) {
    throw DimensionError("backward without seed needs a one-element output, got " +
                         shape_str(value(output.id).shape()));
  }
  backward(output, TensorT(value(output.id).shape(), Scalar(1)));
}

template class Graph<float>;
template class Graph<double>;

namespace ops {
namespace {

template <typename S>
void require_same(const Var<S>& a, const Var<S>& b, const char* op) {
  if (a.graph != b.graph) throw ProtocolError(std::string(op) + ": operands from different graphs");
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

// grad(parent)[i] += term(i), skipped when the parent needs no gradient.
template <typename S, typename F>
void accumulate(Graph<S>& g, std::size_t parent, F&& term) {
  if (!g.requires_grad(parent)) return;
  auto& buf = g.grad_buffer(parent);
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += term(i);
}

template <typename S>
Var<S> scalar_node(Var<S> input, S value, std::function<void(Graph<S>&, std::size_t, S)> back) {
  const auto in = input.id;
  return input.graph->record(BasicTensor<S>(Shape{1}, value), {in},
                             [in, back](Graph<S>& g, std::size_t self) {
                               back(g, in, g.grad(self)[0]);
                             });
}

template <typename S>
const BasicTensor<S>& params_of(const Var<S>& p, const char* op) {
  if (p.value().size() != 4) {
    throw DimensionError(std::string(op) + ": expected 4 transform parameters, got " +
                         shape_str(p.shape()));
  }
  return p.value();
}

}  // namespace

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.dim(1) != bv.dim(0)) {
    throw DimensionError("matmul: incompatible shapes " + shape_str(av.shape()) + " and " +
                         shape_str(bv.shape()));
  }
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  BasicTensor<S> c(Shape{m, n});
  kernels::matmul<S>(av.values(), bv.values(), c.values(), m, k, n);
  const auto ia = a.id, ib = b.id;
  return a.graph->record(std::move(c), {ia, ib}, [ia, ib, m, k, n](Graph<S>& g, std::size_t self) {
    const auto& dc = g.grad(self);
    if (g.requires_grad(ia)) {
      kernels::matmul_grad_a<S>(dc.values(), g.value(ib).values(), g.grad_buffer(ia).values(), m,
                                k, n);
    }
    if (g.requires_grad(ib)) {
      kernels::matmul_grad_b<S>(g.value(ia).values(), dc.values(), g.grad_buffer(ib).values(), m,
                                k, n);
    }
  });
}

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  require_same(a, b, "add");
  const auto& x = a.value();
  const auto& y = b.value();
  BasicTensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  const auto ia = a.id, ib = b.id;
  return a.graph->record(std::move(out), {ia, ib}, [ia, ib](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    accumulate(g, ia, [&](std::size_t i) { return d[i]; });
    accumulate(g, ib, [&](std::size_t i) { return d[i]; });
  });
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  require_same(a, b, "sub");
  const auto& x = a.value();
  const auto& y = b.value();
  BasicTensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  const auto ia = a.id, ib = b.id;
  return a.graph->record(std::move(out), {ia, ib}, [ia, ib](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    accumulate(g, ia, [&](std::size_t i) { return d[i]; });
    accumulate(g, ib, [&](std::size_t i) { return -d[i]; });
  });
}

template <typename S>
Var<S> mul(Var<S> a, Var<S> b) {
  require_same(a, b, "mul");
  const auto& x = a.value();
  const auto& y = b.value();
  BasicTensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  const auto ia = a.id, ib = b.id;
  return a.graph->record(std::move(out), {ia, ib}, [ia, ib](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    const auto& x = g.value(ia);
    const auto& y = g.value(ib);
    accumulate(g, ia, [&](std::size_t i) { return d[i] * y[i]; });
    accumulate(g, ib, [&](std::size_t i) { return d[i] * x[i]; });
  });
}

template <typename S>
Var<S> scale(Var<S> a, S factor) {
  const auto& x = a.value();
  BasicTensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  const auto ia = a.id;
  return a.graph->record(std::move(out), {ia}, [ia, factor](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    accumulate(g, ia, [&](std::size_t i) { return d[i] * factor; });
  });
}

template <typename S>
Var<S> relu(Var<S> a) {
  const auto& x = a.value();
  BasicTensor<S> out(x.shape());
  // NaN passes through so that divergence stays visible downstream.
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] < S(0) ? S(0) : x[i];
  const auto ia = a.id;
  return a.graph->record(std::move(out), {ia}, [ia](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    const auto& x = g.value(ia);
    accumulate(g, ia, [&](std::size_t i) { return x[i] > S(0) ? d[i] : S(0); });
  });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  const auto& x = a.value();
  BasicTensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = S(1) / (S(1) + std::exp(-x[i]));
  const auto ia = a.id;
  return a.graph->record(std::move(out), {ia}, [ia](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    const auto& y = g.value(self);
    accumulate(g, ia, [&](std::size_t i) { return d[i] * y[i] * (S(1) - y[i]); });
  });
}

template <typename S>
Var<S> tanh(Var<S> a) {
  const auto& x = a.value();
  BasicTensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(x[i]);
  const auto ia = a.id;
  return a.graph->record(std::move(out), {ia}, [ia](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    const auto& y = g.value(self);
    accumulate(g, ia, [&](std::size_t i) { return d[i] * (S(1) - y[i] * y[i]); });
  });
}

template <typename S>
Var<S> softmax(Var<S> a) {
  const auto& x = a.value();
  BasicTensor<S> out(x.shape());
  const S top = *std::max_element(x.storage().begin(), x.storage().end());
  S total = S(0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    out[i] = std::exp(x[i] - top);
    total += out[i];
  }
  for (std::size_t i = 0; i < x.size(); ++i) out[i] /= total;
  const auto ia = a.id;
  return a.graph->record(std::move(out), {ia}, [ia](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    const auto& y = g.value(self);
    S dot = S(0);
    for (std::size_t i = 0; i < y.size(); ++i) dot += d[i] * y[i];
    accumulate(g, ia, [&](std::size_t i) { return y[i] * (d[i] - dot); });
  });
}

template <typename S>
Var<S> reshape(Var<S> a, Shape shape) {
  auto out = a.value().reshaped(std::move(shape));
  const auto ia = a.id;
  return a.graph->record(std::move(out), {ia}, [ia](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    accumulate(g, ia, [&](std::size_t i) { return d[i]; });
  });
}

template <typename S>
Var<S> sum(Var<S> a) {
  S total = S(0);
  for (auto v : a.value().values()) total += v;
  return scalar_node<S>(a, total, [](Graph<S>& g, std::size_t in, S d) {
    accumulate(g, in, [&](std::size_t) { return d; });
  });
}

template <typename S>
Var<S> add_n(std::span<const Var<S>> terms) {
  if (terms.empty()) throw ProtocolError("add_n: no terms");
  for (const auto& t : terms) require_same(terms.front(), t, "add_n");
  BasicTensor<S> out(terms.front().shape());
  std::vector<std::size_t> ids;
  for (const auto& t : terms) {
    const auto& v = t.value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += v[i];
    ids.push_back(t.id);
  }
  return terms.front().graph->record(std::move(out), ids, [ids](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    for (auto id : ids) accumulate(g, id, [&](std::size_t i) { return d[i]; });
  });
}

template <typename S>
Var<S> conv2d(Var<S> input, Var<S> kernels, std::size_t stride, std::size_t padding) {
  const auto& x = input.value();
  const auto& k = kernels.value();
  if (x.rank() != 3 || k.rank() != 4 || k.dim(1) != x.dim(0)) {
    throw DimensionError("conv2d: input " + shape_str(x.shape()) + " incompatible with kernels " +
                         shape_str(k.shape()));
  }
  if (stride == 0) throw DimensionError("conv2d: stride must be positive");
  if (k.dim(2) > x.dim(1) + 2 * padding || k.dim(3) > x.dim(2) + 2 * padding) {
    throw DimensionError("conv2d: kernel " + shape_str(k.shape()) + " larger than padded input " +
                         shape_str(x.shape()));
  }
  const kernels::ConvGeometry geo{x.dim(0), x.dim(1), x.dim(2), k.dim(0), k.dim(2), k.dim(3),
                                  stride,   padding};
  BasicTensor<S> out(Shape{geo.out_channels, geo.out_height(), geo.out_width()});
  kernels::conv2d<S>(x.values(), k.values(), out.values(), geo);
  const auto ix = input.id, ik = kernels.id;
  return input.graph->record(std::move(out), {ix, ik}, [ix, ik, geo](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    if (g.requires_grad(ix)) {
      kernels::conv2d_grad_input<S>(d.values(), g.value(ik).values(), g.grad_buffer(ix).values(),
                                    geo);
    }
    if (g.requires_grad(ik)) {
      kernels::conv2d_grad_kernels<S>(d.values(), g.value(ix).values(),
                                      g.grad_buffer(ik).values(), geo);
    }
  });
}

template <typename S>
Var<S> channel_bias(Var<S> input, Var<S> bias) {
  const auto& x = input.value();
  const auto& b = bias.value();
  if (x.rank() != 3 || b.size() != x.dim(0)) {
    throw DimensionError("channel_bias: input " + shape_str(x.shape()) + " vs bias " +
                         shape_str(b.shape()));
  }
  const std::size_t plane = x.dim(1) * x.dim(2);
  BasicTensor<S> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + b[i / plane];
  const auto ix = input.id, ib = bias.id;
  return input.graph->record(std::move(out), {ix, ib}, [ix, ib, plane](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    accumulate(g, ix, [&](std::size_t i) { return d[i]; });
    if (g.requires_grad(ib)) {
      auto& db = g.grad_buffer(ib);
      for (std::size_t c = 0; c < db.size(); ++c) {
        S acc = S(0);
        for (std::size_t i = 0; i < plane; ++i) acc += d[c * plane + i];
        db[c] += acc;
      }
    }
  });
}

template <typename S>
Var<S> maxpool2d(Var<S> input, std::size_t window, std::size_t stride) {
  const auto& x = input.value();
  if (x.rank() != 3 || window == 0 || stride == 0 || window > x.dim(1) || window > x.dim(2)) {
    throw DimensionError("maxpool2d: window " + std::to_string(window) + " exceeds input " +
                         shape_str(x.shape()));
  }
  const kernels::PoolGeometry geo{x.dim(0), x.dim(1), x.dim(2), window, stride};
  BasicTensor<S> out(Shape{geo.channels, geo.out_height(), geo.out_width()});
  std::vector<std::uint32_t> argmax(out.size());
  kernels::maxpool2d<S>(x.values(), out.values(), argmax, geo);
  const auto ix = input.id;
  return input.graph->record(std::move(out), {ix},
                             [ix, geo, argmax = std::move(argmax)](Graph<S>& g, std::size_t self) {
                               if (!g.requires_grad(ix)) return;
                               kernels::maxpool2d_grad<S>(g.grad(self).values(), argmax,
                                                          g.grad_buffer(ix).values(), geo);
                             });
}

template <typename S>
Var<S> affine_grid(Var<S> params, std::size_t height, std::size_t width) {
  const auto& p = params_of(params, "affine_grid");
  if (height == 0 || width == 0) throw DimensionError("affine_grid: grid size must be positive");
  BasicTensor<S> grid(Shape{height, width, 2});
  const auto target = [](std::size_t i, std::size_t n) {
    return n == 1 ? S(0) : S(-1) + S(2) * static_cast<S>(i) / static_cast<S>(n - 1);
  };
  for (std::size_t i = 0; i < height; ++i) {
    for (std::size_t j = 0; j < width; ++j) {
      grid.at(i, j, 0) = p[0] * target(j, width) + p[2];
      grid.at(i, j, 1) = p[1] * target(i, height) + p[3];
    }
  }
  const auto ip = params.id;
  return params.graph->record(
      std::move(grid), {ip}, [ip, height, width, target](Graph<S>& g, std::size_t self) {
        if (!g.requires_grad(ip)) return;
        const auto& d = g.grad(self);
        auto& dp = g.grad_buffer(ip);
        for (std::size_t i = 0; i < height; ++i) {
          for (std::size_t j = 0; j < width; ++j) {
            const S dx = d.at(i, j, 0), dy = d.at(i, j, 1);
            dp[0] += dx * target(j, width);
            dp[1] += dy * target(i, height);
            dp[2] += dx;
            dp[3] += dy;
          }
        }
      });
}

template <typename S>
Var<S> bilinear_sample(Var<S> map, Var<S> grid) {
  const auto& f = map.value();
  const auto& gr = grid.value();
  if (f.rank() != 3 || gr.rank() != 3 || gr.dim(2) != 2) {
    throw DimensionError("bilinear_sample: map " + shape_str(f.shape()) + " / grid " +
                         shape_str(gr.shape()));
  }
  const kernels::SampleGeometry geo{f.dim(0), f.dim(1), f.dim(2), gr.dim(0) * gr.dim(1)};
  BasicTensor<S> out(Shape{f.dim(0), gr.dim(0), gr.dim(1)});
  kernels::bilinear_sample<S>(f.values(), gr.values(), out.values(), geo);
  const auto im = map.id, ig = grid.id;
  return map.graph->record(std::move(out), {im, ig}, [im, ig, geo](Graph<S>& g, std::size_t self) {
    std::span<S> dmap, dgrid;
    if (g.requires_grad(im)) dmap = g.grad_buffer(im).values();
    if (g.requires_grad(ig)) dgrid = g.grad_buffer(ig).values();
    kernels::bilinear_sample_grad<S>(g.value(im).values(), g.value(ig).values(),
                                     g.grad(self).values(), dmap, dgrid, geo);
  });
}

template <typename S>
Var<S> max_over(std::span<const Var<S>> items) {
  if (items.empty()) throw ProtocolError("max_over: no items to pool");
  for (const auto& t : items) require_same(items.front(), t, "max_over");
  BasicTensor<S> out = items.front().value();
  std::vector<std::size_t> winner(out.size(), 0);
  std::vector<std::size_t> ids;
  for (std::size_t k = 0; k < items.size(); ++k) {
    const auto& v = items[k].value();
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        winner[i] = k;
      }
    }
    ids.push_back(items[k].id);
  }
  return items.front().graph->record(
      std::move(out), ids, [ids, winner = std::move(winner)](Graph<S>& g, std::size_t self) {
        const auto& d = g.grad(self);
        for (std::size_t i = 0; i < d.size(); ++i) {
          const auto id = ids[winner[i]];
          if (g.requires_grad(id)) g.grad_buffer(id)[i] += d[i];
        }
      });
}

template <typename S>
Var<S> squared_distance(Var<S> a, const BasicTensor<S>& target) {
  const auto& x = a.value();
  if (x.size() != target.size()) {
    throw DimensionError("squared_distance: " + shape_str(x.shape()) + " vs target " +
                         shape_str(target.shape()));
  }
  S total = S(0);
  for (std::size_t i = 0; i < x.size(); ++i) total += (x[i] - target[i]) * (x[i] - target[i]);
  return scalar_node<S>(a, total, [target](Graph<S>& g, std::size_t in, S d) {
    const auto& x = g.value(in);
    accumulate(g, in, [&](std::size_t i) { return d * S(2) * (x[i] - target[i]); });
  });
}

template <typename S>
Var<S> scale_penalty(Var<S> params, S alpha) {
  const auto& p = params_of(params, "scale_penalty");
  S total = S(0);
  for (std::size_t i = 0; i < 2; ++i) {
    const S excess = std::max(std::abs(p[i]) - alpha, S(0));
    total += excess * excess;
  }
  return scalar_node<S>(params, total, [alpha](Graph<S>& g, std::size_t in, S d) {
    if (!g.requires_grad(in)) return;
    const auto& p = g.value(in);
    auto& dp = g.grad_buffer(in);
    for (std::size_t i = 0; i < 2; ++i) {
      const S excess = std::abs(p[i]) - alpha;
      if (excess > S(0)) dp[i] += d * S(2) * excess * (p[i] > S(0) ? S(1) : S(-1));
    }
  });
}

template <typename S>
Var<S> positive_penalty(Var<S> params, S beta) {
  const auto& p = params_of(params, "positive_penalty");
  const S total = std::max(beta - p[0], S(0)) + std::max(beta - p[1], S(0));
  return scalar_node<S>(params, total, [beta](Graph<S>& g, std::size_t in, S d) {
    if (!g.requires_grad(in)) return;
    const auto& p = g.value(in);
    auto& dp = g.grad_buffer(in);
    for (std::size_t i = 0; i < 2; ++i) {
      if (beta - p[i] > S(0)) dp[i] -= d;
    }
  });
}

template <typename S>
Var<S> anchor_penalty(Var<S> params, S cx, S cy) {
  const auto& p = params_of(params, "anchor_penalty");
  const S total = S(0.5) * ((p[2] - cx) * (p[2] - cx) + (p[3] - cy) * (p[3] - cy));
  return scalar_node<S>(params, total, [cx, cy](Graph<S>& g, std::size_t in, S d) {
    if (!g.requires_grad(in)) return;
    const auto& p = g.value(in);
    auto& dp = g.grad_buffer(in);
    dp[2] += d * (p[2] - cx);
    dp[3] += d * (p[3] - cy);
  });
}

template <typename S>
Var<S> flip_grad(Var<S> a) {
  auto out = a.value();
  const auto ia = a.id;
  return a.graph->record(std::move(out), {ia}, [ia](Graph<S>& g, std::size_t self) {
    const auto& d = g.grad(self);
    accumulate(g, ia, [&](std::size_t i) { return -d[i]; });
  });
}

#define RMA_INSTANTIATE_OPS(S)                                                        \
  template Var<S> matmul(Var<S>, Var<S>);                                            \
  template Var<S> add(Var<S>, Var<S>);                                               \
  template Var<S> sub(Var<S>, Var<S>);                                               \
  template Var<S> mul(Var<S>, Var<S>);                                               \
  template Var<S> scale(Var<S>, S);                                                  \
  template Var<S> relu(Var<S>);                                                      \
  template Var<S> sigmoid(Var<S>);                                                   \
  template Var<S> tanh(Var<S>);                                                      \
  template Var<S> softmax(Var<S>);                                                   \
  template Var<S> reshape(Var<S>, Shape);                                            \
  template Var<S> sum(Var<S>);                                                       \
  template Var<S> add_n(std::span<const Var<S>>);                                    \
  template Var<S> conv2d(Var<S>, Var<S>, std::size_t, std::size_t);                  \
  template Var<S> channel_bias(Var<S>, Var<S>);                                      \
  template Var<S> maxpool2d(Var<S>, std::size_t, std::size_t);                       \
  template Var<S> affine_grid(Var<S>, std::size_t, std::size_t);                     \
  template Var<S> bilinear_sample(Var<S>, Var<S>);                                   \
  template Var<S> max_over(std::span<const Var<S>>);                                 \
  template Var<S> squared_distance(Var<S>, const BasicTensor<S>&);                   \
  template Var<S> scale_penalty(Var<S>, S);                                          \
  template Var<S> positive_penalty(Var<S>, S);                                       \
  template Var<S> anchor_penalty(Var<S>, S, S);                                      \
  template Var<S> flip_grad(Var<S>);

RMA_INSTANTIATE_OPS(float)
RMA_INSTANTIATE_OPS(double)

}  // namespace ops
}  // namespace rma
