#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "oracles.hpp"
#include "rma/errors.hpp"
#include "rma/evaluation.hpp"
#include "rma/random.hpp"

using namespace rma;

namespace {

Prediction make_prediction(const std::vector<int>& truth, const std::vector<int>& assigned) {
  Prediction p;
  for (int t : truth) p.truth.push_back(static_cast<std::uint8_t>(t));
  for (std::size_t c = 0; c < assigned.size(); ++c) {
    if (assigned[c]) p.assigned.push_back(c);
  }
  p.scores.assign(truth.size(), 0.0);
  p.probs.assign(truth.size(), 1.0 / static_cast<double>(truth.size()));
  return p;
}

}  // namespace

TEST_CASE("worked two-class example") {
  const std::vector<Prediction> preds = {make_prediction({1, 0}, {1, 0}),
                                         make_prediction({0, 1}, {1, 0})};
  const auto m = aggregate_metrics(preds);
  CHECK(m.op == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.orc == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.of1 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.cp == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(m.cr == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.cf1 == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("aggregate metrics match brute-force counting on random instances") {
  Rng rng(101);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t classes = 1 + rng.below(8), n = 1 + rng.below(20);
    std::vector<std::vector<int>> truth(n, std::vector<int>(classes)), pred = truth;
    std::vector<Prediction> preds;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        truth[i][c] = rng.uniform() < 0.4;
        pred[i][c] = rng.uniform() < 0.35;
      }
      preds.push_back(make_prediction(truth[i], pred[i]));
    }
    const auto want = oracle::metrics(truth, pred, classes);
    const auto got = aggregate_metrics(preds);
    CHECK(std::abs(got.op - want.op) <= 1e-9);
    CHECK(std::abs(got.orc - want.orc) <= 1e-9);
    CHECK(std::abs(got.of1 - want.of1) <= 1e-9);
    CHECK(std::abs(got.cp - want.cp) <= 1e-9);
    CHECK(std::abs(got.cr - want.cr) <= 1e-9);
    CHECK(std::abs(got.cf1 - want.cf1) <= 1e-9);
    for (double v : {got.op, got.orc, got.of1, got.cp, got.cr, got.cf1}) {
      CHECK((v >= 0.0 && v <= 1.0));
    }
    if (got.op + got.orc > 0) {
      CHECK(got.of1 >= std::min(got.op, got.orc) - 1e-12);
      CHECK(got.of1 <= std::max(got.op, got.orc) + 1e-12);
    }
    if (got.cp + got.cr > 0) {
      CHECK(got.cf1 >= std::min(got.cp, got.cr) - 1e-12);
      CHECK(got.cf1 <= std::max(got.cp, got.cr) + 1e-12);
    }
  }
}

TEST_CASE("empty prediction sets are a protocol error") {
  CHECK_THROWS_AS(aggregate_metrics({}), ProtocolError);
  CHECK_THROWS_AS(compute_report({}), ProtocolError);
}

TEST_CASE("average precision matches the rank oracle, ties included") {
  Rng rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    std::vector<double> scores(n);
    std::vector<int> pos(n);
    std::vector<std::uint8_t> pos8(n);
    for (std::size_t i = 0; i < n; ++i) {
      // Coarse scores so that ties are common.
      scores[i] = static_cast<double>(rng.below(5)) * 0.25;
      pos[i] = rng.uniform() < 0.4;
      pos8[i] = static_cast<std::uint8_t>(pos[i]);
    }
    const auto ap = average_precision(scores, pos8);
    if (std::count(pos.begin(), pos.end(), 1) == 0) {
      CHECK_FALSE(ap.has_value());
      continue;
    }
    REQUIRE(ap.has_value());
    CHECK(std::abs(*ap - oracle::average_precision(scores, pos)) <= 1e-9);
    CHECK((*ap > 0.0 && *ap <= 1.0));

    // A strictly increasing transform of the scores leaves AP unchanged.
    std::vector<double> warped(n);
    std::transform(scores.begin(), scores.end(), warped.begin(),
                   [](double s) { return std::exp(3.0 * s) - 2.0; });
    CHECK(*average_precision(warped, pos8) == doctest::Approx(*ap).epsilon(1e-12));
  }
}

TEST_CASE("perfect and reversed rankings") {
  const std::vector<double> s = {0.9, 0.8, 0.3, 0.1};
  const std::vector<std::uint8_t> top = {1, 1, 0, 0}, bottom = {0, 0, 1, 1};
  CHECK(*average_precision(s, top) == 1.0);
  CHECK(*average_precision(s, bottom) == doctest::Approx((1.0 / 3 + 2.0 / 4) / 2));
}

TEST_CASE("expected random AP matches exhaustive enumeration") {
  for (std::size_t total = 1; total <= 10; ++total) {
    for (std::size_t positives = 1; positives <= total; ++positives) {
      CHECK(expected_random_ap(positives, total) ==
            doctest::Approx(oracle::random_ap_exhaustive(positives, total)).epsilon(1e-12));
    }
  }
}

TEST_CASE("random baseline mAP skips classes without positives") {
  const std::vector<LabelVector> truth = {{1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 0}};
  const double want = expected_random_ap(2, 4);
  CHECK(random_baseline_map(truth) == doctest::Approx(want));
}

TEST_CASE("label assignment keeps a subset of the top-k above the threshold") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t c = 2 + rng.below(7);
    std::vector<double> scores(c);
    for (auto& s : scores) s = rng.uniform(-3, 3);
    const auto probs = softmax(scores);
    CHECK(std::accumulate(probs.begin(), probs.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    const std::size_t k = 1 + rng.below(c);
    const double thr = rng.uniform(0, 0.6);
    const auto got = assign_labels(probs, k, thr);
    CHECK(got.size() <= k);
    CHECK(std::is_sorted(got.begin(), got.end()));
    for (auto l : got) {
      CHECK(probs[l] >= thr);
      const auto better = std::count_if(probs.begin(), probs.end(),
                                        [&](double p) { return p > probs[l]; });
      CHECK(static_cast<std::size_t>(better) < k);
    }
  }
  const std::vector<double> p = {0.2, 0.5, 0.3};
  CHECK(assign_labels(p, 3, 0.25) == LabelSet{1, 2});
  CHECK(assign_labels(p, 1, 0.0) == LabelSet{1});
  CHECK(assign_labels(p, 3, 0.6).empty());
  const std::vector<double> tie = {0.4, 0.4, 0.2};
  CHECK(assign_labels(tie, 1, 0.0) == LabelSet{0});
}

TEST_CASE("report lists excluded classes and averages the rest") {
  std::vector<Prediction> preds;
  const std::vector<std::vector<int>> truth = {{1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
  const std::vector<std::vector<double>> probs = {{0.8, 0.1, 0.1}, {0.1, 0.7, 0.2}, {0.3, 0.6, 0.1}};
  for (std::size_t i = 0; i < 3; ++i) {
    auto p = make_prediction(truth[i], {1, 0, 0});
    p.probs = probs[i];
    preds.push_back(p);
  }
  const auto r = compute_report(preds);
  CHECK(r.excluded == std::vector<std::size_t>{2});
  REQUIRE(r.ap.size() == 3);
  CHECK_FALSE(r.ap[2].has_value());
  CHECK(*r.ap[0] == doctest::Approx(1.0));
  CHECK(*r.ap[1] == doctest::Approx(1.0));
  CHECK(r.map == doctest::Approx(1.0));

  std::ostringstream csv;
  write_report_csv(csv, r);
  const auto text = csv.str();
  CHECK(text.rfind("metric,value\n", 0) == 0);
  CHECK(text.find("mAP,") != std::string::npos);
  CHECK(text.find("ap_2,nan") != std::string::npos);
}

TEST_CASE("ten views are distinct") {
  const auto v = ten_views();
  REQUIRE(v.size() == 10);
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      CHECK_FALSE((v[i].anchor == v[j].anchor && v[i].flip == v[j].flip));
    }
  }
}

TEST_CASE("crops and flips index the map as expected") {
  Tensor f(Shape{2, 4, 5});
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(i);
  const auto tl = crop_features(f, {CropAnchor::top_left, false}, 3, 3);
  CHECK(tl.shape() == Shape{2, 3, 3});
  CHECK(tl.at(1, 2, 2) == f.at(1, 2, 2));
  const auto br = crop_features(f, {CropAnchor::bottom_right, true}, 3, 3);
  // Flipped: column 0 of the crop is the rightmost column of the map.
  CHECK(br.at(0, 0, 0) == f.at(0, 1, 4));
  CHECK(br.at(0, 2, 2) == f.at(0, 3, 2));
  const auto c = crop_features(f, {CropAnchor::center, false}, 3, 3);
  CHECK(c.at(0, 0, 0) == f.at(0, 0, 1));
  CHECK_THROWS_AS(crop_features(f, {}, 5, 5), ConfigError);
}

TEST_CASE("multi-view probabilities") {
  ModelConfig cfg;
  const auto model = init_model(cfg, 9);
  Rng rng(10);
  Tensor img(Shape{3, 32, 32});
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.uniform());

  const std::vector<View> centre = {View{}};
  const auto single = multi_view_probs(model, img, centre);
  const auto plain = softmax(predict(model, img).fused);
  REQUIRE(single.size() == plain.size());
  for (std::size_t c = 0; c < plain.size(); ++c) CHECK(single[c] == doctest::Approx(plain[c]));

  const auto views = ten_views();
  const auto ten = multi_view_probs(model, img, views, 3);
  CHECK(std::accumulate(ten.begin(), ten.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-6));

  // The mean over views equals the mean of the single-view results.
  std::vector<double> mean(ten.size(), 0.0);
  for (const auto& v : views) {
    const std::vector<View> one = {v};
    const auto p = multi_view_probs(model, img, one, 3);
    for (std::size_t c = 0; c < p.size(); ++c) mean[c] += p[c] / 10.0;
  }
  for (std::size_t c = 0; c < ten.size(); ++c) CHECK(ten[c] == doctest::Approx(mean[c]));

  CHECK_THROWS_AS(multi_view_probs(model, img, views, 5), ConfigError);
}

TEST_CASE("evaluate rejects incompatible data") {
  const auto model = init_model({}, 1);
  SyntheticSample s;
  s.image = Tensor(Shape{3, 32, 32}, 0.5f);
  s.labels = {1, 0, 0};
  const std::vector<SyntheticSample> wrong_classes = {s};
  CHECK_THROWS_AS(evaluate(model, wrong_classes, {}), Error);
  s.labels = {1, 0, 0, 0};
  s.image = Tensor(Shape{3, 20, 20}, 0.5f);
  const std::vector<SyntheticSample> wrong_size = {s};
  CHECK_THROWS_AS(evaluate(model, wrong_size, {}), Error);
}
