#include "rma/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "rma/checkpoint.hpp"
#include "rma/errors.hpp"
#include "rma/random.hpp"

namespace rma {

void TrainConfig::validate() const {
  model.validate();
  loss.validate();
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (!(adam.learning_rate >= 0.0) || !std::isfinite(adam.learning_rate)) {
    throw ConfigError("learning rate must be finite and >= 0");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0)) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (!(adam.epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
}

void validate_training_set(const std::vector<SyntheticSample>& data, const ModelConfig& model) {
  if (data.empty()) throw LoadError("training set is empty");
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& s = data[i];
    const auto where = "sample " + std::to_string(i) + " (" + s.filename + ")";
    if (s.labels.size() != model.attention.classes) {
      throw LoadError(where + " has " + std::to_string(s.labels.size()) +
                      " classes, model expects " + std::to_string(model.attention.classes));
    }
    if (std::accumulate(s.labels.begin(), s.labels.end(), 0u) == 0) {
      throw LoadError(where + " has no positive label");
    }
    if (s.image.rank() != 3 || s.image.dim(0) != model.backbone.in_channels) {
      throw LoadError(where + " has image shape " + shape_str(s.image.shape()));
    }
    if (!s.image.all_finite()) throw LoadError(where + " has non-finite pixels");
    try {
      model.backbone.validate_input(s.image.dim(1), s.image.dim(2));
    } catch (const ConfigError& e) {
      throw LoadError(where + ": " + e.what());
    }
  }
}

SampleStep sample_gradient(const Model<float>& model, const SyntheticSample& sample,
                           const LossWeights& weights, const AnchorSet& anchors,
                           Model<float>& grads) {
  Graph<float> g;
  const auto bound = bind(g, model, true);
  const auto sg =
      build_sample_graph(g, bound, model.config, sample.image, sample.labels, weights, anchors);
  g.backward(sg.total);
  accumulate_gradients(bound, grads);
  return {sg.total.value()[0], sg.cls.value()[0], sg.loc.value()[0]};
}

void write_train_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw Error("cannot write " + path.string());
  f << "epoch,total_loss,cls_loss,loc_loss\n";
  char line[160];
  for (const auto& e : log) {
    std::snprintf(line, sizeof line, "%zu,%.9g,%.9g,%.9g\n", e.epoch, e.total_loss, e.cls_loss,
                  e.loc_loss);
    f << line;
  }
}

TrainResult train(const std::vector<SyntheticSample>& data, const TrainConfig& config,
                  const TrainOptions& options) {
  config.validate();
  validate_training_set(data, config.model);

  TrainResult result;
  result.model = init_model(config.model, config.seed);
  result.optimizer = AdamState::for_model(result.model, config.adam);
  const auto anchors = anchors_for(config.model);

  Rng shuffle_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  const std::size_t slots = std::min(config.batch_size, data.size());
  std::vector<Model<float>> slot_grads(slots, result.model.zeros_like());
  std::vector<SampleStep> slot_loss(slots);
  auto batch_grad = result.model.zeros_like();

  if (options.out_dir) std::filesystem::create_directories(*options.out_dir);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    result.optimizer.config.learning_rate =
        config.adam.learning_rate *
        (config.lr_decay_epoch != 0 && epoch > config.lr_decay_epoch ? 0.1 : 1.0);
    for (std::size_t i = data.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);
    }

    EpochLog log{epoch, 0.0, 0.0, 0.0};
    for (std::size_t start = 0; start < data.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, data.size() - start);
      const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic, 1)
      for (std::ptrdiff_t b = 0; b < n; ++b) {
        auto& grads = slot_grads[static_cast<std::size_t>(b)];
        grads.visit([](const std::string&, Tensor& t) { t.fill(0.0f); });
        slot_loss[static_cast<std::size_t>(b)] =
            sample_gradient(result.model, data[order[start + static_cast<std::size_t>(b)]],
                            config.loss, anchors, grads);
      }

      bool finite = true;
      for (std::size_t b = 0; b < count; ++b) finite = finite && std::isfinite(slot_loss[b].total);
      if (!finite) {
        std::ostringstream os;
        os << "non-finite loss in epoch " << epoch << ", batch starting at position " << start
           << ":";
        for (std::size_t b = 0; b < count; ++b) {
          const auto idx = order[start + b];
          os << "\n  sample " << idx << " (" << data[idx].filename << "): total="
             << slot_loss[b].total << " cls=" << slot_loss[b].cls << " loc=" << slot_loss[b].loc;
        }
        throw DivergenceError(os.str());
      }

      // Fixed-order reduction.
      const float inv = 1.0f / static_cast<float>(count);
      std::vector<Tensor*> dst;
      batch_grad.visit([&](const std::string&, Tensor& t) { dst.push_back(&t); });
      for (std::size_t b = 0; b < count; ++b) {
        std::size_t i = 0;
        slot_grads[b].visit([&](const std::string&, const Tensor& t) {
          Tensor& d = *dst[i++];
          if (b == 0) {
            for (std::size_t j = 0; j < t.size(); ++j) d[j] = t[j];
          } else {
            for (std::size_t j = 0; j < t.size(); ++j) d[j] += t[j];
          }
        });
      }
      for (auto* t : dst) {
        for (auto& v : t->values()) v *= inv;
      }
      adam_step(result.model, batch_grad, result.optimizer);

      for (std::size_t b = 0; b < count; ++b) {
        log.total_loss += slot_loss[b].total;
        log.cls_loss += slot_loss[b].cls;
        log.loc_loss += slot_loss[b].loc;
      }
    }
    const auto n = static_cast<double>(data.size());
    log.total_loss /= n;
    log.cls_loss /= n;
    log.loc_loss /= n;
    result.log.push_back(log);

    if (options.out_dir) {
      save_checkpoint(result.model, &result.optimizer, *options.out_dir / "checkpoint.rma");
      write_train_log(*options.out_dir / "train_log.csv", result.log);
    }
    if (options.on_epoch) options.on_epoch(log);
  }
  return result;
}

}  // namespace rma
