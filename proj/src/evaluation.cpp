#include "rma/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <numeric>

#include "rma/errors.hpp"

namespace rma {

std::vector<double> softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  if (p.empty()) return p;
  const double top = *std::max_element(p.begin(), p.end());
  double total = 0.0;
  for (auto& v : p) total += (v = std::exp(v - top));
  for (auto& v : p) v /= total;
  return p;
}

LabelSet assign_labels(std::span<const double> probs, std::size_t k, double threshold) {
  if (k == 0) throw ConfigError("assign_labels: k must be >= 1");
  std::vector<std::size_t> order(probs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return probs[a] > probs[b]; });
  LabelSet out;
  for (std::size_t i = 0; i < std::min(k, order.size()); ++i) {
    if (probs[order[i]] >= threshold) out.push_back(order[i]);
  }
  std::sort(out.begin(), out.end());
  return out;
}

AggregateMetrics aggregate_metrics(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw ProtocolError("aggregate_metrics: no predictions");
  const std::size_t classes = predictions.front().truth.size();
  std::vector<double> correct(classes, 0.0), predicted(classes, 0.0), actual(classes, 0.0);
  for (const auto& p : predictions) {
    if (p.truth.size() != classes) throw ProtocolError("aggregate_metrics: class counts differ");
    for (auto c : p.assigned) {
      if (c >= classes) throw ProtocolError("aggregate_metrics: assigned label out of range");
      predicted[c] += 1.0;
      if (p.truth[c]) correct[c] += 1.0;
    }
    for (std::size_t c = 0; c < classes; ++c) actual[c] += p.truth[c] ? 1.0 : 0.0;
  }
  const auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  const auto f1 = [&](double p, double r) { return ratio(2.0 * p * r, p + r); };

  AggregateMetrics m;
  const double nc = std::accumulate(correct.begin(), correct.end(), 0.0);
  m.op = ratio(nc, std::accumulate(predicted.begin(), predicted.end(), 0.0));
  m.orc = ratio(nc, std::accumulate(actual.begin(), actual.end(), 0.0));
  m.of1 = f1(m.op, m.orc);
  for (std::size_t c = 0; c < classes; ++c) {
    m.cp += ratio(correct[c], predicted[c]);
    m.cr += ratio(correct[c], actual[c]);
  }
  m.cp /= static_cast<double>(classes);
  m.cr /= static_cast<double>(classes);
  m.cf1 = f1(m.cp, m.cr);
  return m;
}

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> positives) {
  if (scores.size() != positives.size()) {
    throw DimensionError("average_precision: score and label counts differ");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (!positives[order[r]]) continue;
    hits += 1.0;
    sum += hits / static_cast<double>(r + 1);
  }
  if (hits == 0.0) return std::nullopt;
  return sum / hits;
}

double expected_random_ap(std::size_t positives, std::size_t total) {
  if (positives == 0 || positives > total) {
    throw ProtocolError("expected_random_ap: need 1 <= positives <= total");
  }
  if (total == 1) return 1.0;
  // A positive at rank r has on average (r-1)(P-1)/(N-1) other positives above it.
  const double n = static_cast<double>(total), p = static_cast<double>(positives);
  double sum = 0.0;
  for (std::size_t r = 1; r <= total; ++r) {
    const double rank = static_cast<double>(r);
    sum += (1.0 + (rank - 1.0) * (p - 1.0) / (n - 1.0)) / rank;
  }
  return sum / n;
}

double random_baseline_map(std::span<const LabelVector> truth) {
  if (truth.empty()) throw ProtocolError("random_baseline_map: no images");
  const std::size_t classes = truth.front().size();
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t pos = 0;
    for (const auto& y : truth) pos += y[c] ? 1 : 0;
    if (pos == 0) continue;
    total += expected_random_ap(pos, truth.size());
    ++counted;
  }
  return counted ? total / static_cast<double>(counted) : 0.0;
}

MetricsReport compute_report(std::span<const Prediction> predictions) {
  MetricsReport r;
  r.aggregate = aggregate_metrics(predictions);
  const std::size_t classes = predictions.front().truth.size();
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> scores;
    std::vector<std::uint8_t> pos;
    for (const auto& p : predictions) {
      scores.push_back(p.probs.at(c));
      pos.push_back(p.truth[c]);
    }
    auto ap = average_precision(scores, pos);
    r.ap.push_back(ap);
    if (ap) {
      total += *ap;
      ++counted;
    } else {
      r.excluded.push_back(c);
    }
  }
  r.map = counted ? total / static_cast<double>(counted) : 0.0;
  return r;
}

std::vector<View> ten_views() {
  std::vector<View> views;
  for (bool flip : {false, true}) {
    for (auto a : {CropAnchor::center, CropAnchor::top_left, CropAnchor::top_right,
                   CropAnchor::bottom_left, CropAnchor::bottom_right}) {
      views.push_back({a, flip});
    }
  }
  return views;
}

Tensor crop_features(const Tensor& features, const View& view, std::size_t crop_h,
                     std::size_t crop_w) {
  if (features.rank() != 3) throw DimensionError("crop_features: expected [D x H x W]");
  const std::size_t d = features.dim(0), h = features.dim(1), w = features.dim(2);
  if (crop_h == 0 || crop_w == 0 || crop_h > h || crop_w > w) {
    throw ConfigError("crop " + std::to_string(crop_h) + "x" + std::to_string(crop_w) +
                      " does not fit the " + std::to_string(h) + "x" + std::to_string(w) +
                      " feature map");
  }
  std::size_t y0 = 0, x0 = 0;
  switch (view.anchor) {
    case CropAnchor::center: y0 = (h - crop_h) / 2; x0 = (w - crop_w) / 2; break;
    case CropAnchor::top_left: break;
    case CropAnchor::top_right: x0 = w - crop_w; break;
    case CropAnchor::bottom_left: y0 = h - crop_h; break;
    case CropAnchor::bottom_right: y0 = h - crop_h; x0 = w - crop_w; break;
  }
  Tensor out(Shape{d, crop_h, crop_w});
  for (std::size_t c = 0; c < d; ++c) {
    for (std::size_t y = 0; y < crop_h; ++y) {
      for (std::size_t x = 0; x < crop_w; ++x) {
        const std::size_t sx = view.flip ? crop_w - 1 - x : x;
        out.at(c, y, x) = features.at(c, y0 + y, x0 + sx);
      }
    }
  }
  return out;
}

std::vector<double> multi_view_probs(const Model<float>& model, const Tensor& image,
                                     std::span<const View> views, std::size_t crop) {
  if (views.empty()) throw ConfigError("multi_view_probs: no views");
  const auto features = encode(image, model.backbone, model.config.backbone);
  const std::size_t ch = crop ? crop : features.dim(1);
  const std::size_t cw = crop ? crop : features.dim(2);
  std::vector<double> mean(model.config.attention.classes, 0.0);
  for (const auto& v : views) {
    const auto trace = run_episode(crop_features(features, v, ch, cw), model.attention,
                                   model.config.attention);
    const auto p = softmax(trace.fused);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += p[c];
  }
  for (auto& v : mean) v /= static_cast<double>(views.size());
  return mean;
}

std::vector<Prediction> predict_dataset(const Model<float>& model,
                                        const std::vector<SyntheticSample>& samples,
                                        const EvalOptions& options) {
  std::vector<Prediction> out(samples.size());
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    auto& p = out[static_cast<std::size_t>(i)];
    if (options.views.empty()) {
      p.scores = predict(model, s.image).fused;
      p.probs = softmax(p.scores);
    } else {
      p.probs = multi_view_probs(model, s.image, options.views, options.crop);
      p.scores = p.probs;
    }
    p.assigned = assign_labels(p.probs, options.top_k, options.threshold);
    p.truth = s.labels;
  }
  return out;
}

MetricsReport evaluate(const Model<float>& model, const std::vector<SyntheticSample>& samples,
                       const EvalOptions& options) {
  if (samples.empty()) throw ProtocolError("evaluate: no samples");
  for (const auto& s : samples) {
    if (s.labels.size() != model.config.attention.classes) {
      throw ConfigError("dataset has " + std::to_string(s.labels.size()) +
                        " classes but the checkpoint was trained for " +
                        std::to_string(model.config.attention.classes));
    }
    model.config.backbone.validate_input(s.image.dim(1), s.image.dim(2));
  }
  const auto preds = predict_dataset(model, samples, options);
  auto report = compute_report(preds);
  report.views = options.views.empty() ? 1 : options.views.size();
  return report;
}

void write_report_csv(std::ostream& os, const MetricsReport& r) {
  char buf[64];
  const auto row = [&](const std::string& name, double v) {
    std::snprintf(buf, sizeof buf, "%.9g", v);
    os << name << ',' << buf << '\n';
  };
  os << "metric,value\n";
  row("OP", r.aggregate.op);
  row("OR", r.aggregate.orc);
  row("OF1", r.aggregate.of1);
  row("CP", r.aggregate.cp);
  row("CR", r.aggregate.cr);
  row("CF1", r.aggregate.cf1);
  row("mAP", r.map);
  row("views", static_cast<double>(r.views));
  for (std::size_t c = 0; c < r.ap.size(); ++c) {
    if (r.ap[c]) {
      row("ap_" + std::to_string(c), *r.ap[c]);
    } else {
      os << "ap_" << c << ",nan\n";
    }
  }
}

void print_report(std::ostream& os, const MetricsReport& r) {
  const auto flags = os.flags();
  os << std::fixed << std::setprecision(4);
  os << "views: " << r.views << "\n";
  os << "  OP  " << r.aggregate.op << "   OR  " << r.aggregate.orc << "   OF1 " << r.aggregate.of1
     << "\n";
  os << "  CP  " << r.aggregate.cp << "   CR  " << r.aggregate.cr << "   CF1 " << r.aggregate.cf1
     << "\n";
  os << "  mAP " << r.map << "\n";
  for (std::size_t c = 0; c < r.ap.size(); ++c) {
    os << "  AP[" << c << " " << shape_name(c) << "] ";
    if (r.ap[c]) {
      os << *r.ap[c] << "\n";
    } else {
      os << "n/a (no positive images, excluded from mAP)\n";
    }
  }
  os.flags(flags);
}

}  // namespace rma
