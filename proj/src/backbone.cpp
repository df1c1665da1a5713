#include "rma/backbone.hpp"

#include <cmath>
#include <sstream>

#include "rma/errors.hpp"

namespace rma {

std::size_t BackboneArch::downsample() const {
  std::size_t factor = 1;
  for (std::size_t i = 0; i < channels.size(); ++i) factor *= pool;
  return factor;
}

void BackboneArch::validate_input(std::size_t height, std::size_t width) const {
  const std::size_t f = downsample();
  const std::size_t smallest = std::max<std::size_t>(16, f);
  if (height < smallest || width < smallest || height % f != 0 || width % f != 0) {
    std::ostringstream os;
    os << "image size " << height << "x" << width << " cannot be encoded: sides must be multiples of "
       << f << " and at least " << smallest << " (valid sizes: ";
    std::size_t first = (smallest + f - 1) / f * f;
    for (std::size_t i = 0; i < 4; ++i) os << first + i * f << ", ";
    os << "...)";
    throw ConfigError(os.str());
  }
}

BackboneWeights<float> init_backbone(const BackboneArch& arch, Rng& rng) {
  BackboneWeights<float> w;
  std::size_t in = arch.in_channels;
  const std::size_t area = arch.kernel * arch.kernel;
  for (auto out : arch.channels) {
    const double limit = std::sqrt(6.0 / static_cast<double>((in + out) * area));
    Tensor k(Shape{out, in, arch.kernel, arch.kernel});
    for (std::size_t i = 0; i < k.size(); ++i) k[i] = static_cast<float>(rng.uniform(-limit, limit));
    w.kernels.push_back(std::move(k));
    w.biases.emplace_back(Shape{out});
    in = out;
  }
  return w;
}

template <typename S>
BackboneWeights<S> zero_backbone(const BackboneArch& arch) {
  BackboneWeights<S> w;
  std::size_t in = arch.in_channels;
  for (auto out : arch.channels) {
    w.kernels.emplace_back(Shape{out, in, arch.kernel, arch.kernel});
    w.biases.emplace_back(Shape{out});
    in = out;
  }
  return w;
}

template <typename S>
Var<S> encode(Var<S> image, const BackboneParams<Var<S>>& weights, const BackboneArch& arch) {
  const auto& shape = image.shape();
  if (shape.size() != 3 || shape[0] != arch.in_channels) {
    throw DimensionError("encode: expected a " + std::to_string(arch.in_channels) +
                         "-channel image, got " + shape_str(shape));
  }
  arch.validate_input(shape[1], shape[2]);
  auto x = image;
  for (std::size_t i = 0; i < arch.channels.size(); ++i) {
    x = ops::conv2d(x, weights.kernels[i], 1, arch.kernel / 2);
    x = ops::channel_bias(x, weights.biases[i]);
    x = ops::relu(x);
    x = ops::maxpool2d(x, arch.pool, arch.pool);
  }
  return x;
}

template <typename S>
BasicTensor<S> encode(const BasicTensor<S>& image, const BackboneWeights<S>& weights,
                      const BackboneArch& arch) {
  Graph<S> g;
  BackboneParams<Var<S>> vars;
  for (const auto& k : weights.kernels) vars.kernels.push_back(g.constant(k));
  for (const auto& b : weights.biases) vars.biases.push_back(g.constant(b));
  return encode(g.constant(image), vars, arch).value();
}

template BackboneWeights<float> zero_backbone<float>(const BackboneArch&);
template BackboneWeights<double> zero_backbone<double>(const BackboneArch&);
template Var<float> encode(Var<float>, const BackboneParams<Var<float>>&, const BackboneArch&);
template Var<double> encode(Var<double>, const BackboneParams<Var<double>>&, const BackboneArch&);
template Tensor encode(const Tensor&, const BackboneWeights<float>&, const BackboneArch&);
template TensorD encode(const TensorD&, const BackboneWeights<double>&, const BackboneArch&);

}  // namespace rma
