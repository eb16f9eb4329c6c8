#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pukit/tensor.hpp"

namespace pukit {

// Temperature / prior-correction settings of the contrastive objective.
struct ContrastiveConfig {
  double tau = 0.5;        // temperature
  double tau_plus = 0.1;   // positive-class prior correction
  std::size_t views = 2;   // M, augmented views per sample
  void validate() const;
};

struct PULossConfig {
  double pi = 0.0;         // class prior p(y=1 | s=0)
  double pi_prime = 0.5;   // target share of the positive term
  void validate() const;
};

// The three partial empirical risks every PU loss is assembled from.
struct RiskComponents {
  double l_pos_as_pos = 0.0;  // mean sigmoid loss of labeled positives toward +1
  double l_unl_as_neg = 0.0;  // mean sigmoid loss of unlabeled toward -1
  double l_pos_as_neg = 0.0;  // mean sigmoid loss of labeled positives toward -1
  std::size_t n_pos = 0;
  std::size_t n_unl = 0;
};

// sigmoid surrogate: 1 / (1 + exp(target * score)), decreasing in
// target*score. target must be +1 or -1.
double sigmoid_loss(double score, int target);

// Partial risks of a PU batch; s flags are 1 = labeled positive,
// 0 = unlabeled. Both kinds must be present.
RiskComponents risk_components(std::span<const double> scores,
                               std::span<const std::uint8_t> s);

// pi * l+_1 + max{0, l-_0 - pi * l+_0}
double nnpu_loss(const RiskComponents& rc, const PULossConfig& cfg);

// pi' * l+_1 + (1-pi')/(1-pi) * max{0, l-_0 - pi * l+_0}
double imbnnpu_loss(const RiskComponents& rc, const PULossConfig& cfg);

// -(w_pos*y*log p + (1-y)*log(1-p)) averaged over the batch; probabilities
// are clipped into [1e-12, 1-1e-12] first. y flags are 0/1.
double weighted_bce_loss(std::span<const double> probs,
                         std::span<const std::uint8_t> y, double w_pos);

// exp(cos(z_a, z_b) / tau) on unit vectors; rejects inputs whose norm
// deviates from 1 by more than 1e-6.
double pair_similarity(std::span<const double> z_a, std::span<const double> z_b,
                       double tau);

// All M*N projections of a minibatch, row (i,k) stored at i*m + k.
struct ViewBatch {
  std::size_t n = 0;    // samples
  std::size_t m = 0;    // views per sample
  std::size_t dim = 0;  // projection width
  std::vector<double> z;

  std::span<const double> view(std::size_t i, std::size_t k) const;
  void validate() const;  // shape and unit-norm checks
};

// Clamped negative-term estimate d_u for the anchor view (i,k):
// max{ exp(-1/tau), (mean cross-sample sim - tau_plus * mean sibling sim)
//      / (1 - tau_plus) }.
double debiased_negative_estimate(const ViewBatch& batch, std::size_t i,
                                  std::size_t k, const ContrastiveConfig& cfg);

// -log( pos_sim / (pos_sim + n_neg * d_u) )
double debiased_pair_loss(double pos_sim, double d_u, std::size_t n_neg,
                          const ContrastiveConfig& cfg);

// Average of debiased_pair_loss over all ordered same-sample view pairs,
// with d_u anchored at the first view of each pair. tau_plus = 0 gives the
// biased (NT-Xent style) estimator.
double batch_contrastive_objective(const ViewBatch& batch,
                                   const ContrastiveConfig& cfg);

// Independent biased estimator (no prior correction), used to pin down
// the tau_plus = 0 reduction.
double biased_contrastive_objective(const ViewBatch& batch, double tau);

// pi' * mean_{y=+1} sigmoid_loss(z, +1) + (1-pi') * mean_{y=-1}
// sigmoid_loss(z, -1). Labels are +1/-1, both classes required.
double balance_pn_sigmoid_risk(std::span<const double> scores,
                               std::span<const int> y, double pi_prime);

// Class-prior-weighted mean of -log softmax(true class); logit_pairs is
// row-major n x 2, weights match balance_pn_sigmoid_risk.
double softmax_risk(std::span<const double> logit_pairs, std::span<const int> y,
                    double pi_prime);

// --- differentiable graph builders (same formulas on tape tensors) ---

// PU risk of a score vector under s flags; imbalanced selects the
// pi_prime reweighting, otherwise plain nnPU.
Tensor pu_risk_graph(Tape& tape, const Tensor& scores,
                     std::span<const std::uint8_t> s, const PULossConfig& cfg,
                     bool imbalanced);

// Weighted BCE of sigmoid(scores) against 0/1 targets.
Tensor wbce_graph(Tape& tape, const Tensor& scores,
                  std::span<const std::uint8_t> y, double w_pos);

// Batch contrastive objective over unit-norm projections z ((n*m) x dim,
// row i*m+k). Built from Gram-matrix primitives; matches the scalar path.
Tensor contrastive_objective_graph(Tape& tape, const Tensor& z, std::size_t n,
                                   std::size_t m, const ContrastiveConfig& cfg);

}  // namespace pukit
