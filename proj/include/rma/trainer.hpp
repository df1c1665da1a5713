#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "rma/adam.hpp"
#include "rma/dataset.hpp"
#include "rma/model.hpp"
#include "rma/objective.hpp"

namespace rma {

struct TrainConfig {
  ModelConfig model;
  LossWeights loss;
  AdamConfig adam;
  std::size_t batch_size = 16;
  std::size_t epochs = 40;
  /// The learning rate is divided by 10 once this many epochs have run; 0 disables.
  std::size_t lr_decay_epoch = 30;
  std::uint64_t seed = 1;

  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double total_loss = 0.0;
  double cls_loss = 0.0;
  double loc_loss = 0.0;
};

struct TrainResult {
  Model<float> model;
  AdamState optimizer;
  std::vector<EpochLog> log;
};

struct TrainOptions {
  /// When set: checkpoint.rma and train_log.csv are (re)written after every epoch.
  std::optional<std::filesystem::path> out_dir;
  std::function<void(const EpochLog&)> on_epoch;
};

/// Per-sample losses and gradient for one image, at the current weights.
struct SampleStep {
  double total = 0.0, cls = 0.0, loc = 0.0;
};
SampleStep sample_gradient(const Model<float>& model, const SyntheticSample& sample,
                           const LossWeights& weights, const AnchorSet& anchors,
                           Model<float>& grads);

/// Adam over shuffled mini-batches. Per-sample gradients may be computed in
/// parallel; they are summed in batch order, so results do not depend on the
/// thread count.
TrainResult train(const std::vector<SyntheticSample>& data, const TrainConfig& config,
                  const TrainOptions& options = {});

/// Rejects samples that cannot be trained on, naming the first bad index.
void validate_training_set(const std::vector<SyntheticSample>& data, const ModelConfig& model);

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log);

}  // namespace rma
