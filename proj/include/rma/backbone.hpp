#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "rma/autodiff.hpp"
#include "rma/random.hpp"
#include "rma/tensor.hpp"

namespace rma {

/// Conv encoder layout: one block per entry of `channels`, each block is
/// conv(kernel x kernel, stride 1, same padding) -> relu -> maxpool(pool).
struct BackboneArch {
  std::size_t in_channels = 3;
  std::vector<std::size_t> channels{16, 32, 32};
  std::size_t kernel = 3;
  std::size_t pool = 2;

  std::size_t feature_channels() const { return channels.back(); }
  std::size_t downsample() const;
  /// Throws ConfigError naming valid sizes when an image of this size cannot be encoded.
  void validate_input(std::size_t height, std::size_t width) const;
  std::size_t feature_size(std::size_t image_size) const { return image_size / downsample(); }
  bool operator==(const BackboneArch&) const = default;
};

template <typename T>
struct BackboneParams {
  std::vector<T> kernels;
  std::vector<T> biases;

  template <typename F>
  void visit(F&& f) {
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      f("conv" + std::to_string(i) + ".weight", kernels[i]);
      f("conv" + std::to_string(i) + ".bias", biases[i]);
    }
  }
  template <typename F>
  void visit(F&& f) const {
    for (std::size_t i = 0; i < kernels.size(); ++i) {
      f("conv" + std::to_string(i) + ".weight", kernels[i]);
      f("conv" + std::to_string(i) + ".bias", biases[i]);
    }
  }
};

template <typename S>
using BackboneWeights = BackboneParams<BasicTensor<S>>;

/// Xavier-uniform kernels, zero biases.
BackboneWeights<float> init_backbone(const BackboneArch& arch, Rng& rng);

/// Zero-filled weights of the right shapes.
template <typename S>
BackboneWeights<S> zero_backbone(const BackboneArch& arch);

/// image [C x H x W] -> feature map [D x H/8 x W/8] under the default layout.
template <typename S>
Var<S> encode(Var<S> image, const BackboneParams<Var<S>>& weights, const BackboneArch& arch);

/// Convenience: runs encode on a throwaway graph.
template <typename S>
BasicTensor<S> encode(const BasicTensor<S>& image, const BackboneWeights<S>& weights,
                      const BackboneArch& arch);

}  // namespace rma
