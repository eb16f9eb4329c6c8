#include <doctest.h>

#include <cmath>

#include "pukit/losses.hpp"
#include "pukit/metrics.hpp"
#include "pukit/rng.hpp"

using namespace pukit;

namespace {

// Independent oracles: exhaustive pair counting and an explicit confusion
// matrix.
double auc_oracle(std::span<const double> s, std::span<const int> y) {
  double num = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != -1) continue;
      ++pairs;
      if (s[i] > s[j]) num += 1.0;
      else if (s[i] == s[j]) num += 0.5;
    }
  return num / static_cast<double>(pairs);
}

double f1_oracle(std::span<const int> pred, std::span<const int> truth) {
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    tp += pred[i] == 1 && truth[i] == 1;
    fp += pred[i] == 1 && truth[i] == -1;
    fn += pred[i] == -1 && truth[i] == 1;
  }
  if (tp == 0) return 0.0;
  return 2.0 * tp / (2.0 * tp + fp + fn);
}

}  // namespace

TEST_CASE("accuracy basics") {
  std::vector<int> t = {1, -1, 1, -1};
  CHECK(accuracy(t, t) == 1.0);
  std::vector<int> w = {-1, 1, -1, 1};
  CHECK(accuracy(w, t) == 0.0);
  std::vector<int> p = {1, -1, 1, 1};
  CHECK(accuracy(p, t) == 0.75);

  // constant-negative predictor on a 60/40 negative-heavy split
  std::vector<int> truth(10, -1);
  for (int i = 0; i < 4; ++i) truth[i] = 1;
  std::vector<int> allneg(10, -1);
  CHECK(accuracy(allneg, truth) == 0.6);
  CHECK(f1_score(allneg, truth) == 0.0);
}

TEST_CASE("f1 basics") {
  std::vector<int> t = {1, 1, -1, -1};
  CHECK(f1_score(t, t) == 1.0);
  // TP=2, FP=1, FN=1
  std::vector<int> truth = {1, 1, 1, -1, -1};
  std::vector<int> pred = {1, 1, -1, 1, -1};
  CHECK(f1_score(pred, truth) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("auc basics") {
  std::vector<double> s1 = {0.9, 0.8, 0.2, 0.1};
  std::vector<int> y1 = {1, 1, -1, -1};
  CHECK(auc(s1, y1) == 1.0);

  std::vector<double> s2 = {0.5, 0.5, 0.5, 0.5};
  CHECK(auc(s2, y1) == 0.5);

  std::vector<double> s3 = {0.9, 0.5, 0.1};
  std::vector<int> y3 = {1, -1, 1};
  CHECK(auc(s3, y3) == 0.5);

  std::vector<int> single = {1, 1, 1};
  CHECK_THROWS_AS(auc(s3, single), Error);
}

TEST_CASE("auc and f1 match brute-force oracles exactly on 200 instances") {
  Rng rng(41);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t n = 2 + rng.below(49);
    std::vector<double> s(n);
    std::vector<int> y(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      // ties likely: quantized scores
      s[i] = std::floor(rng.uniform(0, 6)) / 3.0;
      y[i] = rng.uniform01() < 0.5 ? 1 : -1;
      pred[i] = rng.uniform01() < 0.5 ? 1 : -1;
    }
    y[0] = 1;
    y[n - 1] = -1;
    CHECK(auc(s, y) == auc_oracle(s, y));
    CHECK(f1_score(pred, y) == f1_oracle(pred, y));
  }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
  Rng rng(43);
  std::vector<double> s(60);
  std::vector<int> y(60);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.normal();
    y[i] = rng.uniform01() < 0.4 ? 1 : -1;
  }
  y[0] = 1;
  y[1] = -1;
  std::vector<double> t(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) t[i] = std::exp(2.0 * s[i]) + 3.0;
  CHECK(auc(s, y) == auc(t, y));
}

TEST_CASE("evaluate_model on the all-zero classifier") {
  Rng rng(4);
  LabeledDataset src = gaussian_mixture(200, 3, Ratio{2, 3}, 4.0, 12);
  SplitSpec spec;
  spec.positive_class_ids = {1};
  spec.target_pn_ratio = {2, 3};
  spec.label_frequency = 0.5;
  spec.seed = 5;
  PUDataset test = scar_label_split(src, spec);

  Mlp enc = Mlp::init({3, 3}, rng);
  LinearClassifier zero;
  zero.in = 3;
  zero.two_logit = false;
  zero.w = {0, 0, 0};
  zero.b = {0};
  MetricsRecord rec = evaluate_model(enc, zero, test);
  double neg_share = 0.0;
  for (int y : *test.y_true) neg_share += y == -1 ? 1.0 : 0.0;
  neg_share /= static_cast<double>(test.n);
  CHECK(rec.accuracy == doctest::Approx(neg_share).epsilon(1e-15));
  CHECK(rec.f1 == 0.0);
  CHECK(rec.n_test == test.n);

  PUDataset no_y = test;
  no_y.y_true.reset();
  no_y.pi_true = 0.0;
  CHECK_THROWS_AS(evaluate_model(enc, zero, no_y), Error);
}

TEST_CASE("lemma 1: equal-logit anchor point and 1000 random draws") {
  // u = v: sigmoid risk is exactly 0.5, softmax risk is log 2
  std::vector<double> collapsed = {0.0, 0.0};
  std::vector<int> y = {1, -1};
  CHECK(balance_pn_sigmoid_risk(collapsed, y, 0.5) == 0.5);
  std::vector<double> logits = {1.0, 1.0, -2.0, -2.0};
  CHECK(softmax_risk(logits, y, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(0.5 <= std::log(2.0));

  CheckReport rep = lemma1_numeric_check(1000, 8, 2024);
  CHECK(rep.trials == 1000);
  CHECK(rep.violations == 0);
  CHECK(rep.max_slack <= 1e-12);
}

TEST_CASE("pointwise kernel 1-p <= -log p on the grid") {
  CheckReport rep = pointwise_kernel_check();
  CHECK(rep.trials == 99);
  CHECK(rep.violations == 0);
}

TEST_CASE("sigmoid/softmax equivalence over 1000 draws") {
  EquivalenceReport rep = equivalence_check(1000, 7);
  CHECK(rep.trials == 1000);
  CHECK(rep.max_abs_diff <= 1e-12);
}

TEST_CASE("gradient check suite smoke run") {
  auto reports = gradient_check_suite(25, 99);
  CHECK(reports.size() == 5);
  for (const auto& r : reports) {
    CAPTURE(r.loss);
    CAPTURE(r.max_rel_err);
    CHECK(r.cases == 25);
    CHECK(r.failures == 0);
  }
  // the clamped losses must see both branches
  for (const auto& r : reports) {
    if (r.loss == "nnpu" || r.loss == "imbnnpu" || r.loss == "debiased-contrastive") {
      CHECK(r.clamp_floor_cases > 0);
      CHECK(r.clamp_value_cases > 0);
    }
  }
}
