#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "rma/dataset.hpp"
#include "rma/model.hpp"
#include "rma/objective.hpp"

namespace rma {

/// Sorted 0-based class indices.
using LabelSet = std::vector<std::size_t>;

/// Top-k classes by probability (lower index wins ties), then those below
/// `threshold` are dropped. May be empty.
LabelSet assign_labels(std::span<const double> probs, std::size_t k, double threshold);

struct Prediction {
  std::vector<double> scores;
  std::vector<double> probs;
  LabelSet assigned;
  LabelVector truth;
};

/// Overall and per-class precision / recall / F1. Any 0/0 ratio counts as 0.
struct AggregateMetrics {
  double op = 0, orc = 0, of1 = 0;
  double cp = 0, cr = 0, cf1 = 0;
};

AggregateMetrics aggregate_metrics(std::span<const Prediction> predictions);

/// All-points AP of one class: images ranked by descending score (lower index
/// first on ties), mean of precision at each positive. nullopt when there are
/// no positives.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> positives);

/// Expected AP of a uniformly random ranking of `total` images with `positives` positives.
double expected_random_ap(std::size_t positives, std::size_t total);

/// mAP a predictor with no information would score on average, from the label
/// marginals of `truth` (classes without positives are skipped, as in mAP).
double random_baseline_map(std::span<const LabelVector> truth);

struct MetricsReport {
  AggregateMetrics aggregate;
  std::vector<std::optional<double>> ap;
  double map = 0.0;
  /// Classes with no positive image, excluded from mAP.
  std::vector<std::size_t> excluded;
  std::size_t views = 1;
};

MetricsReport compute_report(std::span<const Prediction> predictions);

enum class CropAnchor { center, top_left, top_right, bottom_left, bottom_right };

struct View {
  CropAnchor anchor = CropAnchor::center;
  bool flip = false;
};

/// Centre and four corners, each with and without a horizontal flip.
std::vector<View> ten_views();

/// Crop of a [D x H x W] map; the centre crop offset rounds down.
Tensor crop_features(const Tensor& features, const View& view, std::size_t crop_h,
                     std::size_t crop_w);

/// Per-view episodes on cropped feature maps; scores fused within each view,
/// softmax probabilities averaged across views. `crop` = 0 means the full map.
std::vector<double> multi_view_probs(const Model<float>& model, const Tensor& image,
                                     std::span<const View> views, std::size_t crop = 0);

struct EvalOptions {
  std::size_t top_k = 3;
  double threshold = 0.5;
  /// Empty means plain single-view evaluation on the full feature map.
  std::vector<View> views;
  std::size_t crop = 0;
};

std::vector<Prediction> predict_dataset(const Model<float>& model,
                                        const std::vector<SyntheticSample>& samples,
                                        const EvalOptions& options);

MetricsReport evaluate(const Model<float>& model, const std::vector<SyntheticSample>& samples,
                       const EvalOptions& options);

/// "metric,value" rows followed by "ap_<class>,value" rows.
void write_report_csv(std::ostream& os, const MetricsReport& report);
void print_report(std::ostream& os, const MetricsReport& report);

std::vector<double> softmax(std::span<const double> scores);

}  // namespace rma
