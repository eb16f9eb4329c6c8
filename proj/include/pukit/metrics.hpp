#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pukit/data.hpp"
#include "pukit/models.hpp"

namespace pukit {

struct MetricsRecord {
  double accuracy = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  std::size_t n_test = 0;
  double threshold = 0.0;
};

// Labels are +1/-1 throughout.
double accuracy(std::span<const int> pred, std::span<const int> truth);

// 2TP / (2TP + FP + FN); 0 when there are no true positives predicted.
double f1_score(std::span<const int> pred, std::span<const int> truth);

// Probability that a random positive outranks a random negative, ties at
// half weight (rank / Mann-Whitney formulation). Needs both classes.
double auc(std::span<const double> scores, std::span<const int> truth);

// Scores the test set through encoder + classifier; hard labels by
// sign(score - threshold) with ties to negative.
MetricsRecord evaluate_model(const Mlp& encoder, const LinearClassifier& clf,
                             const PUDataset& test, double threshold = 0.0);

// --- executable theory checks ---

struct CheckReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double max_slack = 0.0;  // worst observed lhs - rhs (<= tolerance when clean)
};

// Random (W, batch, labels, pi') draws: collapsed sigmoid risk must not
// exceed the two-logit softmax risk beyond 1e-12.
CheckReport lemma1_numeric_check(std::size_t trials, std::size_t dims,
                                 std::uint64_t seed);

// Pointwise kernel of the same lemma: 1 - p <= -log p on a grid
// p = 0.01, ..., 0.99.
CheckReport pointwise_kernel_check();

struct EquivalenceReport {
  std::size_t trials = 0;
  double max_abs_diff = 0.0;
};

// |sigmoid((u-v)'x + b_u-b_v) - softmax_pos(Wx + b)| over random draws.
EquivalenceReport equivalence_check(std::size_t trials, std::uint64_t seed);

// --- gradient oracle suite ---

struct GradCheckReport {
  std::string loss;
  std::size_t cases = 0;
  std::size_t failures = 0;
  double max_rel_err = 0.0;
  std::size_t clamp_floor_cases = 0;   // clamp took the constant branch
  std::size_t clamp_value_cases = 0;   // clamp passed the value through
};

// Central finite differences (h = 1e-4) against backward() for every
// differentiable loss, steering inputs so both branches of each clamp are
// exercised; draws near a kink are resampled.
std::vector<GradCheckReport> gradient_check_suite(std::size_t cases_per_loss,
                                                  std::uint64_t seed);

}  // namespace pukit
