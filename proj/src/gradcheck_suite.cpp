#include "rma/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "rma/attention.hpp"
#include "rma/backbone.hpp"
#include "rma/objective.hpp"
#include "rma/random.hpp"
#include "rma/spatial_transformer.hpp"

namespace rma {
namespace {

using V = Var<double>;
using Inputs = std::span<const V>;

struct Case {
  std::string name;
  DifferentiableFn fn;
  std::vector<TensorD> inputs;
  std::vector<std::size_t> only_inputs;
};

TensorD random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  TensorD t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

// Magnitudes in [0.1, 1] with random sign: clear of the relu kink.
TensorD off_zero(Shape shape, Rng& rng) {
  TensorD t(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double m = rng.uniform(0.1, 1.0);
    t[i] = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

// A shuffled ramp: all values distinct with gaps of 1/n, so no window ties.
TensorD distinct(Shape shape, Rng& rng) {
  TensorD t(std::move(shape));
  const std::size_t n = t.size();
  for (std::size_t i = 0; i < n; ++i) t[i] = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n);
  for (std::size_t i = n; i > 1; --i) std::swap(t[i - 1], t[rng.below(i)]);
  return t;
}

// Normalized sample coordinates whose pixel position has fractional part in
// [0.1, 0.9], including points partly outside the map.
TensorD sample_grid(std::size_t h, std::size_t w, std::size_t map_h, std::size_t map_w, Rng& rng) {
  TensorD grid(Shape{h, w, 2});
  const auto coord = [&](std::size_t extent) {
    const double cell = static_cast<double>(rng.below(extent + 1)) - 1.0;
    const double u = cell + rng.uniform(0.1, 0.9);
    return 2.0 * u / static_cast<double>(extent - 1) - 1.0;
  };
  for (std::size_t i = 0; i < h * w; ++i) {
    grid[2 * i] = coord(map_w);
    grid[2 * i + 1] = coord(map_h);
  }
  return grid;
}

TensorD params4(double sx, double sy, double tx, double ty) {
  return TensorD(Shape{4, 1}, {sx, sy, tx, ty});
}

AttentionArch tiny_arch(std::size_t steps) {
  AttentionArch a;
  a.feature_channels = 2;
  a.region_h = 2;
  a.region_w = 2;
  a.embed = 3;
  a.hidden = 3;
  a.head = 3;
  a.classes = 2;
  a.steps = steps;
  return a;
}

AttentionWeights<double> tiny_weights(const AttentionArch& arch, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<TensorD> init;
  init_attention(arch, rng).visit(
      [&](const std::string&, const Tensor& t) { init.push_back(t.cast<double>()); });
  auto w = zero_attention<double>(arch);
  std::size_t i = 0;
  w.visit([&](const std::string&, TensorD& t) { t = init[i++]; });
  w.visit([&](const std::string& name, TensorD& t) {
    if (name.ends_with("bias")) t = random_tensor(t.shape(), rng, -0.3, 0.3);
  });
  // Small transform weights around a non-identity bias keep every sampling
  // coordinate off the pixel lattice.
  w.transform_w = random_tensor(w.transform_w.shape(), rng, -0.05, 0.05);
  w.transform_b = params4(0.6, 0.7, 0.1, -0.2);
  return w;
}

// Random encoders have thousands of relu and max-pool units; some always sit
// within the perturbation of a kink. This point has none: kernels are positive
// with a dominant centre tap and biases are positive, so every relu is in its
// linear part, and the image makes each pooling window's winner clear.
BackboneWeights<double> kink_free_backbone(const BackboneArch& arch, Rng& rng) {
  auto w = zero_backbone<double>(arch);
  for (std::size_t b = 0; b < w.kernels.size(); ++b) {
    auto& k = w.kernels[b];
    const std::size_t kh = k.dim(2), kw = k.dim(3);
    const double fan = static_cast<double>(k.dim(1));
    for (std::size_t i = 0; i < k.size(); ++i) {
      const std::size_t tap = i % (kh * kw);
      const bool centre = tap == (kh / 2) * kw + kw / 2;
      // Off-centre taps past the first block would leave pixels whose only
      // path to the output is a product of several small weights, with
      // gradients below the finite-difference noise floor.
      const double off = b == 0 ? rng.uniform(0.01, 0.015) : 0.0;
      k[i] = (centre ? rng.uniform(0.5, 1.0) : off) / fan;
    }
  }
  for (auto& b : w.biases) b = random_tensor(b.shape(), rng, 0.05, 0.1);
  return w;
}

// Pixel (y, x) is brighter the more pooling levels it survives: the level is
// the number of trailing zero bits shared by y and x, capped at 3.
TensorD layered_image(std::size_t side, Rng& rng) {
  TensorD img(Shape{3, side, side});
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < side; ++y) {
      for (std::size_t x = 0; x < side; ++x) {
        std::size_t level = 0;
        while (level < 3 && (y >> level) % 2 == 0 && (x >> level) % 2 == 0) ++level;
        img.at(c, y, x) = 0.05 + 0.3 * static_cast<double>(level) + rng.uniform(0.0, 0.005);
      }
    }
  }
  return img;
}

std::vector<TensorD> flatten(const AttentionWeights<double>& w) {
  std::vector<TensorD> out;
  w.visit([&](const std::string&, const TensorD& t) { out.push_back(t); });
  return out;
}

AttentionParams<V> unflatten(Inputs vars, std::size_t first) {
  AttentionParams<V> p;
  p.visit([&](const std::string&, V& v) { v = vars[first++]; });
  return p;
}

std::size_t attention_tensor_count() {
  std::size_t n = 0;
  AttentionParams<int>{}.visit([&](const std::string&, int&) { ++n; });
  return n;
}

std::vector<Case> build_cases() {
  std::vector<Case> cases;
  Rng rng(20240601);
  const auto add = [&](std::string name, DifferentiableFn fn, std::vector<TensorD> inputs,
                       std::vector<std::size_t> only = {}) {
    cases.push_back({std::move(name), std::move(fn), std::move(inputs), std::move(only)});
  };

  add("matmul", [](Graph<double>&, Inputs v) { return ops::matmul(v[0], v[1]); },
      {random_tensor({3, 4}, rng), random_tensor({4, 2}, rng)});
  add("add_sub",
      [](Graph<double>&, Inputs v) { return ops::sub(ops::add(v[0], v[1]), ops::scale(v[0], 0.3)); },
      {random_tensor({3, 2}, rng), random_tensor({3, 2}, rng)});
  add("mul", [](Graph<double>&, Inputs v) { return ops::mul(v[0], v[1]); },
      {random_tensor({5}, rng), random_tensor({5}, rng)});
  add("relu", [](Graph<double>&, Inputs v) { return ops::relu(v[0]); }, {off_zero({8}, rng)});
  add("sigmoid", [](Graph<double>&, Inputs v) { return ops::sigmoid(v[0]); },
      {random_tensor({6}, rng, -3, 3)});
  add("tanh", [](Graph<double>&, Inputs v) { return ops::tanh(v[0]); },
      {random_tensor({6}, rng, -2, 2)});
  add("softmax", [](Graph<double>&, Inputs v) { return ops::softmax(v[0]); },
      {random_tensor({5, 1}, rng, -2, 2)});
  add("sum_reshape_add_n",
      [](Graph<double>&, Inputs v) {
        const V terms[] = {ops::reshape(v[0], {6}), v[1], v[1]};
        return ops::sum(ops::add_n<double>(terms));
      },
      {random_tensor({2, 3}, rng), random_tensor({6}, rng)});
  add("conv2d",
      [](Graph<double>&, Inputs v) { return ops::conv2d(v[0], v[1], 1, 1); },
      {random_tensor({2, 5, 5}, rng), random_tensor({3, 2, 3, 3}, rng)});
  add("conv2d_strided",
      [](Graph<double>&, Inputs v) { return ops::conv2d(v[0], v[1], 2, 0); },
      {random_tensor({2, 6, 7}, rng), random_tensor({2, 2, 2, 3}, rng)});
  add("channel_bias", [](Graph<double>&, Inputs v) { return ops::channel_bias(v[0], v[1]); },
      {random_tensor({3, 2, 2}, rng), random_tensor({3}, rng)});
  add("maxpool2d", [](Graph<double>&, Inputs v) { return ops::maxpool2d(v[0], 2, 2); },
      {distinct({2, 6, 4}, rng)});
  add("maxpool2d_overlap", [](Graph<double>&, Inputs v) { return ops::maxpool2d(v[0], 3, 1); },
      {distinct({1, 5, 5}, rng)});
  add("affine_grid", [](Graph<double>&, Inputs v) { return ops::affine_grid(v[0], 3, 4); },
      {params4(0.7, -0.4, 0.2, 0.3)});
  add("bilinear_sample",
      [](Graph<double>&, Inputs v) { return ops::bilinear_sample(v[0], v[1]); },
      {random_tensor({2, 4, 5}, rng), sample_grid(3, 3, 4, 5, rng)});
  add("max_over",
      [](Graph<double>&, Inputs v) {
        const V items[] = {v[0], v[1], v[2]};
        return ops::max_over<double>(items);
      },
      [&] {
        auto d = distinct({3, 4}, rng);
        std::vector<TensorD> parts;
        for (std::size_t k = 0; k < 3; ++k) {
          TensorD t(Shape{4});
          for (std::size_t i = 0; i < 4; ++i) t[i] = d.at(k, i);
          parts.push_back(t);
        }
        return parts;
      }());

  // 5x5 map sampled on a 3x3 grid: pixel coordinates (1.16, 2.26, 3.36) x (0.28, 1.58, 2.88).
  const auto st = [](Graph<double>&, Inputs v) { return spatial_transform(v[0], v[1], 3, 3); };
  add("spatial_transform_features", st,
      {random_tensor({2, 5, 5}, rng), params4(0.55, 0.65, 0.13, -0.21)}, {0});
  add("spatial_transform_params", st,
      {random_tensor({2, 5, 5}, rng), params4(0.55, 0.65, 0.13, -0.21)}, {1});

  {
    const auto arch = tiny_arch(2);
    const auto weights = flatten(tiny_weights(arch, 11));
    const std::size_t nw = attention_tensor_count();
    for (bool cell_tanh : {false, true}) {
      std::vector<TensorD> in = weights;
      in.push_back(random_tensor({2, 2, 2}, rng));
      in.push_back(random_tensor({3, 1}, rng, -0.5, 0.5));
      in.push_back(random_tensor({3, 1}, rng, -0.5, 0.5));
      add(cell_tanh ? "lstm_step_tanh" : "lstm_step",
          [nw, cell_tanh](Graph<double>&, Inputs v) {
            const auto w = unflatten(v, 0);
            const auto s = lstm_step<double>(v[nw], {v[nw + 1], v[nw + 2]}, w, cell_tanh);
            const V parts[] = {ops::reshape(s.hidden, {3}), ops::reshape(s.cell, {3})};
            return ops::add_n<double>(parts);
          },
          in);
    }
    std::vector<TensorD> in = weights;
    in.push_back(random_tensor({3, 1}, rng));
    add("heads",
        [nw](Graph<double>&, Inputs v) {
          const auto out = heads<double>(v[nw], unflatten(v, 0), true);
          return ops::add(ops::reshape(ops::sum(*out.score), {1}),
                          ops::reshape(ops::sum(ops::mul(out.transform, out.transform)), {1}));
        },
        in);
  }

  // Hinges active for some entries and inactive for others, all >= 0.05 from a kink.
  std::vector<TensorD> transforms{params4(0.8, -0.7, 0.2, 0.1), params4(0.3, 0.9, -0.4, 0.5),
                                  params4(-0.6, 0.03, 0.3, -0.2)};
  const auto anchors = make_anchors(3);
  add("cls_loss",
      [](Graph<double>&, Inputs v) { return cls_loss<double>(v[0], LabelVector{1, 0, 1, 0}); },
      {random_tensor({4, 1}, rng, -2, 2)});
  add("scale_loss", [](Graph<double>&, Inputs v) { return scale_loss<double>(v, 0.5); },
      transforms);
  add("positive_loss", [](Graph<double>&, Inputs v) { return positive_loss<double>(v, 0.1); },
      transforms);
  add("anchor_loss",
      [anchors](Graph<double>&, Inputs v) { return anchor_loss<double>(v, anchors); }, transforms);
  add("loc_loss",
      [anchors](Graph<double>&, Inputs v) { return loc_loss<double>(v, anchors, LossWeights{}); },
      transforms);
  add("total_loss",
      [](Graph<double>&, Inputs v) { return total_loss<double>(v[0], v[1], LossWeights{}); },
      {random_tensor({1}, rng), random_tensor({1}, rng)});

  {
    const BackboneArch arch;
    Rng wr(7);
    const auto w = kink_free_backbone(arch, wr);
    add("backbone_image",
        [arch, w](Graph<double>& g, Inputs v) {
          BackboneParams<V> p;
          for (const auto& k : w.kernels) p.kernels.push_back(g.constant(k));
          for (const auto& b : w.biases) p.biases.push_back(g.constant(b));
          return encode(v[0], p, arch);
        },
        {layered_image(16, rng)});
  }
  {
    BackboneArch arch;
    arch.channels = {2, 3, 4};
    Rng wr(8);
    const auto w = kink_free_backbone(arch, wr);
    std::vector<TensorD> in{layered_image(16, rng)};
    std::vector<std::size_t> only;
    for (std::size_t i = 0; i < w.kernels.size(); ++i) {
      only.push_back(in.size());
      in.push_back(w.kernels[i]);
      only.push_back(in.size());
      in.push_back(w.biases[i]);
    }
    add("backbone_weights",
        [arch](Graph<double>&, Inputs v) {
          BackboneParams<V> p;
          for (std::size_t i = 1; i < v.size(); i += 2) {
            p.kernels.push_back(v[i]);
            p.biases.push_back(v[i + 1]);
          }
          return encode(v[0], p, arch);
        },
        in, only);
  }
  {
    const auto arch = tiny_arch(2);
    auto in = flatten(tiny_weights(arch, 12));
    const std::size_t nw = in.size();
    in.push_back(random_tensor({2, 4, 4}, rng));
    const auto anchors2 = make_anchors(2);
    add("episode_k2",
        [arch, nw, anchors2](Graph<double>&, Inputs v) {
          const auto ep = run_episode<double>(v[nw], unflatten(v, 0), arch);
          const std::span<const V> regions(ep.transforms.data() + 1, arch.steps);
          const auto cls = cls_loss<double>(ep.fused, LabelVector{0, 1});
          return total_loss<double>(cls, loc_loss<double>(regions, anchors2, LossWeights{}),
                                    LossWeights{});
        },
        in);
  }
  return cases;
}

DifferentiableFn with_fault(DifferentiableFn fn) {
  return [fn = std::move(fn)](Graph<double>& g, Inputs v) { return ops::flip_grad(fn(g, v)); };
}

}  // namespace

std::vector<std::string> gradcheck_item_names() {
  std::vector<std::string> names;
  for (const auto& c : build_cases()) names.push_back(c.name);
  return names;
}

std::vector<GradCheckItem> run_gradcheck_suite(const GradCheckSuiteOptions& options) {
  std::vector<GradCheckItem> items;
  for (auto& c : build_cases()) {
    if (!options.filter.empty() && c.name.find(options.filter) == std::string::npos) continue;
    GradCheckOptions o;
    o.perturbation = options.perturbation;
    o.only_inputs = c.only_inputs;
    const auto fn = options.inject_fault == c.name ? with_fault(c.fn) : c.fn;
    GradCheckItem item{c.name, grad_check(fn, c.inputs, o), false};
    item.passed = item.result.checked > 0 && item.result.max_rel_error <= options.tolerance;
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace rma
