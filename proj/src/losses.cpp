#include "pukit/losses.hpp"

#include <cmath>
#include <string>

namespace pukit {

namespace {

using detail::pairwise_dot;
using detail::pairwise_sum;
using detail::stable_sigmoid;

constexpr double kProbEps = 1e-12;
constexpr double kUnitNormTol = 1e-6;

double mean_of(const std::vector<double>& v) {
  return pairwise_sum(v) / static_cast<double>(v.size());
}

double clip_prob(double p) {
  if (p < kProbEps) return kProbEps;
  if (p > 1.0 - kProbEps) return 1.0 - kProbEps;
  return p;
}

void check_unit(std::span<const double> z, const char* who) {
  double n2 = pairwise_dot(z, z);
  if (std::abs(std::sqrt(n2) - 1.0) > kUnitNormTol)
    fail(ErrorKind::Contract, std::string(who) + ": input is not unit-norm");
}

}  // namespace

void ContrastiveConfig::validate() const {
  if (!(tau > 0.0)) fail(ErrorKind::Config, "contrastive config: tau must be positive");
  if (!(tau_plus >= 0.0 && tau_plus < 1.0))
    fail(ErrorKind::Config, "contrastive config: tau_plus must lie in [0, 1)");
  if (views < 2) fail(ErrorKind::Config, "contrastive config: need at least 2 views");
}

void PULossConfig::validate() const {
  if (!(pi > 0.0 && pi < 1.0))
    fail(ErrorKind::Config, "pu loss config: pi must lie in (0, 1)");
  if (!(pi_prime > 0.0 && pi_prime < 1.0))
    fail(ErrorKind::Config, "pu loss config: pi_prime must lie in (0, 1)");
}

double sigmoid_loss(double score, int target) {
  if (target != 1 && target != -1)
    fail(ErrorKind::Contract, "sigmoid_loss: target must be +1 or -1");
  // 1/(1 + exp(t*s)) == sigmoid(-t*s)
  return stable_sigmoid(-static_cast<double>(target) * score);
}

RiskComponents risk_components(std::span<const double> scores,
                               std::span<const std::uint8_t> s) {
  if (scores.size() != s.size())
    fail(ErrorKind::Shape, "risk_components: scores and labels differ in length");
  std::vector<double> pos_to_pos, pos_to_neg, unl_to_neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (s[i] == 1) {
      pos_to_pos.push_back(sigmoid_loss(scores[i], +1));
      pos_to_neg.push_back(sigmoid_loss(scores[i], -1));
    } else if (s[i] == 0) {
      unl_to_neg.push_back(sigmoid_loss(scores[i], -1));
    } else {
      fail(ErrorKind::Contract, "risk_components: s flags must be 0 or 1");
    }
  }
  if (pos_to_pos.empty() || unl_to_neg.empty())
    fail(ErrorKind::Composition,
         "risk_components: batch needs at least one labeled positive and one "
         "unlabeled sample");
  RiskComponents rc;
  rc.n_pos = pos_to_pos.size();
  rc.n_unl = unl_to_neg.size();
  rc.l_pos_as_pos = mean_of(pos_to_pos);
  rc.l_pos_as_neg = mean_of(pos_to_neg);
  rc.l_unl_as_neg = mean_of(unl_to_neg);
  return rc;
}

double nnpu_loss(const RiskComponents& rc, const PULossConfig& cfg) {
  cfg.validate();
  double corrected = rc.l_unl_as_neg - cfg.pi * rc.l_pos_as_neg;
  if (corrected < 0.0) corrected = 0.0;
  return cfg.pi * rc.l_pos_as_pos + corrected;
}

double imbnnpu_loss(const RiskComponents& rc, const PULossConfig& cfg) {
  cfg.validate();
  double corrected = rc.l_unl_as_neg - cfg.pi * rc.l_pos_as_neg;
  if (corrected < 0.0) corrected = 0.0;
  return cfg.pi_prime * rc.l_pos_as_pos +
         (1.0 - cfg.pi_prime) / (1.0 - cfg.pi) * corrected;
}

double weighted_bce_loss(std::span<const double> probs,
                         std::span<const std::uint8_t> y, double w_pos) {
  if (probs.size() != y.size())
    fail(ErrorKind::Shape, "weighted_bce_loss: probs and labels differ in length");
  if (probs.empty()) fail(ErrorKind::Contract, "weighted_bce_loss: empty batch");
  if (!(w_pos > 0.0)) fail(ErrorKind::Config, "weighted_bce_loss: w_pos must be positive");
  std::vector<double> terms(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    double p = clip_prob(probs[i]);
    terms[i] = y[i] ? -w_pos * std::log(p) : -std::log(1.0 - p);
  }
  return mean_of(terms);
}

double pair_similarity(std::span<const double> z_a, std::span<const double> z_b,
                       double tau) {
  if (!(tau > 0.0)) fail(ErrorKind::Contract, "pair_similarity: tau must be positive");
  if (z_a.size() != z_b.size())
    fail(ErrorKind::Shape, "pair_similarity: vectors differ in length");
  check_unit(z_a, "pair_similarity");
  check_unit(z_b, "pair_similarity");
  double sim = std::exp(pairwise_dot(z_a, z_b) / tau);
  if (!std::isfinite(sim))
    fail(ErrorKind::Numeric, "pair_similarity: temperature too small, similarity overflowed");
  return sim;
}

std::span<const double> ViewBatch::view(std::size_t i, std::size_t k) const {
  return std::span<const double>(z).subspan((i * m + k) * dim, dim);
}

void ViewBatch::validate() const {
  if (n == 0 || m < 2 || dim == 0)
    fail(ErrorKind::Contract, "view batch: need n >= 1, m >= 2, dim >= 1");
  if (z.size() != n * m * dim)
    fail(ErrorKind::Shape, "view batch: storage does not match n*m*dim");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < m; ++k) check_unit(view(i, k), "view batch");
}

double debiased_negative_estimate(const ViewBatch& batch, std::size_t i,
                                  std::size_t k, const ContrastiveConfig& cfg) {
  cfg.validate();
  batch.validate();
  if (batch.n < 2)
    fail(ErrorKind::Composition, "debiased_negative_estimate: no negatives available");
  if (i >= batch.n || k >= batch.m)
    fail(ErrorKind::Contract, "debiased_negative_estimate: anchor out of range");
  auto anchor = batch.view(i, k);
  std::vector<double> cross, sib;
  cross.reserve(batch.m * (batch.n - 1));
  sib.reserve(batch.m - 1);
  for (std::size_t j = 0; j < batch.n; ++j)
    for (std::size_t l = 0; l < batch.m; ++l) {
      if (j == i) {
        if (l != k) sib.push_back(std::exp(pairwise_dot(anchor, batch.view(j, l)) / cfg.tau));
      } else {
        cross.push_back(std::exp(pairwise_dot(anchor, batch.view(j, l)) / cfg.tau));
      }
    }
  double estimate = mean_of(cross) - cfg.tau_plus * mean_of(sib);
  double floor = std::exp(-1.0 / cfg.tau);
  double corrected = estimate / (1.0 - cfg.tau_plus);
  return corrected > floor ? corrected : floor;
}

double debiased_pair_loss(double pos_sim, double d_u, std::size_t n_neg,
                          const ContrastiveConfig& cfg) {
  cfg.validate();
  if (!(pos_sim > 0.0))
    fail(ErrorKind::Contract, "debiased_pair_loss: positive-pair similarity must be > 0");
  if (d_u < std::exp(-1.0 / cfg.tau) * (1.0 - 1e-9))
    fail(ErrorKind::Contract, "debiased_pair_loss: d_u undercuts its floor");
  return std::log1p(static_cast<double>(n_neg) * d_u / pos_sim);
}

double batch_contrastive_objective(const ViewBatch& batch,
                                   const ContrastiveConfig& cfg) {
  cfg.validate();
  batch.validate();
  if (batch.n < 2)
    fail(ErrorKind::Composition, "batch_contrastive_objective: need at least 2 samples");
  const std::size_t n_neg = batch.m * (batch.n - 1);
  std::vector<double> terms;
  terms.reserve(batch.n * batch.m * (batch.m - 1));
  for (std::size_t i = 0; i < batch.n; ++i)
    for (std::size_t k = 0; k < batch.m; ++k) {
      double d_u = debiased_negative_estimate(batch, i, k, cfg);
      for (std::size_t l = 0; l < batch.m; ++l) {
        if (l == k) continue;
        double pos = std::exp(pairwise_dot(batch.view(i, k), batch.view(i, l)) / cfg.tau);
        terms.push_back(debiased_pair_loss(pos, d_u, n_neg, cfg));
      }
    }
  return mean_of(terms);
}

double biased_contrastive_objective(const ViewBatch& batch, double tau) {
  batch.validate();
  if (batch.n < 2)
    fail(ErrorKind::Composition, "biased_contrastive_objective: need at least 2 samples");
  const double nn = static_cast<double>(batch.m * (batch.n - 1));
  std::vector<double> terms;
  for (std::size_t i = 0; i < batch.n; ++i)
    for (std::size_t k = 0; k < batch.m; ++k) {
      std::vector<double> cross;
      for (std::size_t j = 0; j < batch.n; ++j) {
        if (j == i) continue;
        for (std::size_t l = 0; l < batch.m; ++l)
          cross.push_back(std::exp(pairwise_dot(batch.view(i, k), batch.view(j, l)) / tau));
      }
      double d = mean_of(cross);
      for (std::size_t l = 0; l < batch.m; ++l) {
        if (l == k) continue;
        double pos = std::exp(pairwise_dot(batch.view(i, k), batch.view(i, l)) / tau);
        terms.push_back(std::log(pos + nn * d) - std::log(pos));
      }
    }
  return mean_of(terms);
}

double balance_pn_sigmoid_risk(std::span<const double> scores,
                               std::span<const int> y, double pi_prime) {
  if (scores.size() != y.size())
    fail(ErrorKind::Shape, "balance_pn_sigmoid_risk: scores and labels differ in length");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (y[i] == 1) pos.push_back(sigmoid_loss(scores[i], +1));
    else if (y[i] == -1) neg.push_back(sigmoid_loss(scores[i], -1));
    else fail(ErrorKind::Contract, "balance_pn_sigmoid_risk: labels must be +1 or -1");
  }
  if (pos.empty() || neg.empty())
    fail(ErrorKind::Composition, "balance_pn_sigmoid_risk: both classes required");
  return pi_prime * mean_of(pos) + (1.0 - pi_prime) * mean_of(neg);
}

double softmax_risk(std::span<const double> logit_pairs, std::span<const int> y,
                    double pi_prime) {
  if (logit_pairs.size() != 2 * y.size())
    fail(ErrorKind::Shape, "softmax_risk: expected two logits per sample");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < y.size(); ++i) {
    double a = logit_pairs[2 * i], b = logit_pairs[2 * i + 1];
    double m = a > b ? a : b;
    double ea = std::exp(a - m), eb = std::exp(b - m);
    double p_pos = ea / (ea + eb);
    if (y[i] == 1) pos.push_back(-std::log(clip_prob(p_pos)));
    else if (y[i] == -1) neg.push_back(-std::log(clip_prob(1.0 - p_pos)));
    else fail(ErrorKind::Contract, "softmax_risk: labels must be +1 or -1");
  }
  if (pos.empty() || neg.empty())
    fail(ErrorKind::Composition, "softmax_risk: both classes required");
  return pi_prime * mean_of(pos) + (1.0 - pi_prime) * mean_of(neg);
}

Tensor pu_risk_graph(Tape& tape, const Tensor& scores,
                     std::span<const std::uint8_t> s, const PULossConfig& cfg,
                     bool imbalanced) {
  cfg.validate();
  if (scores.rank() != 1 || scores.size() != s.size())
    fail(ErrorKind::Shape, "pu_risk_graph: scores must be a vector matching the labels");
  std::size_t n = s.size();
  std::vector<double> pos_mask(n, 0.0), unl_mask(n, 0.0);
  std::size_t n_pos = 0, n_unl = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (s[i] == 1) { pos_mask[i] = 1.0; ++n_pos; }
    else { unl_mask[i] = 1.0; ++n_unl; }
  }
  if (n_pos == 0 || n_unl == 0)
    fail(ErrorKind::Composition,
         "pu_risk_graph: batch needs at least one labeled positive and one "
         "unlabeled sample");
  Tensor mp({n}, std::move(pos_mask));
  Tensor mu({n}, std::move(unl_mask));
  Tensor to_pos = sigmoid(tape, neg(tape, scores));  // loss toward target +1
  Tensor to_neg = sigmoid(tape, scores);             // loss toward target -1
  Tensor l_p1 = mul(tape, dot(tape, to_pos, mp), Tensor::scalar(1.0 / n_pos));
  Tensor l_p0 = mul(tape, dot(tape, to_neg, mp), Tensor::scalar(1.0 / n_pos));
  Tensor l_u0 = mul(tape, dot(tape, to_neg, mu), Tensor::scalar(1.0 / n_unl));
  Tensor corrected =
      max_with(tape, sub(tape, l_u0, mul(tape, l_p0, Tensor::scalar(cfg.pi))), 0.0);
  if (imbalanced) {
    double w = (1.0 - cfg.pi_prime) / (1.0 - cfg.pi);
    return add(tape, mul(tape, l_p1, Tensor::scalar(cfg.pi_prime)),
               mul(tape, corrected, Tensor::scalar(w)));
  }
  return add(tape, mul(tape, l_p1, Tensor::scalar(cfg.pi)), corrected);
}

Tensor wbce_graph(Tape& tape, const Tensor& scores,
                  std::span<const std::uint8_t> y, double w_pos) {
  if (scores.rank() != 1 || scores.size() != y.size())
    fail(ErrorKind::Shape, "wbce_graph: scores must be a vector matching the labels");
  if (!(w_pos > 0.0)) fail(ErrorKind::Config, "wbce_graph: w_pos must be positive");
  std::size_t n = y.size();
  std::vector<double> wy(n), my(n);
  for (std::size_t i = 0; i < n; ++i) {
    wy[i] = y[i] ? w_pos : 0.0;
    my[i] = y[i] ? 0.0 : 1.0;
  }
  Tensor p = sigmoid(tape, scores);
  // clip into [eps, 1-eps]: max then min (as negated max)
  Tensor lo = max_with(tape, p, kProbEps);
  Tensor pc = neg(tape, max_with(tape, neg(tape, lo), -(1.0 - kProbEps)));
  Tensor q = sub(tape, Tensor::ones({n}), pc);
  Tensor ll = add(tape, mul(tape, Tensor({n}, std::move(wy)), log(tape, pc)),
                  mul(tape, Tensor({n}, std::move(my)), log(tape, q)));
  return neg(tape, mean(tape, ll));
}

Tensor contrastive_objective_graph(Tape& tape, const Tensor& z, std::size_t n,
                                   std::size_t m, const ContrastiveConfig& cfg) {
  cfg.validate();
  if (n < 2)
    fail(ErrorKind::Composition, "contrastive objective: need at least 2 samples");
  if (m < 2) fail(ErrorKind::Contract, "contrastive objective: need at least 2 views");
  if (z.rank() != 2 || z.shape()[0] != n * m)
    fail(ErrorKind::Shape, "contrastive objective: projections must be (n*m) x dim");
  const std::size_t rows = n * m;
  {
    auto v = z.values();
    const std::size_t dim = z.shape()[1];
    for (std::size_t r = 0; r < rows; ++r) {
      double n2 = detail::pairwise_dot(v.subspan(r * dim, dim), v.subspan(r * dim, dim));
      if (std::abs(std::sqrt(n2) - 1.0) > kUnitNormTol)
        fail(ErrorKind::Contract, "contrastive objective: projections must be unit-norm");
    }
  }

  const double floor = std::exp(-1.0 / cfg.tau);
  const double n_neg = static_cast<double>(m * (n - 1));

  Tensor sims = matmul(tape, z, z, /*transpose_b=*/true);        // (rows x rows)
  Tensor e = exp(tape, mul(tape, sims, Tensor::full({rows, rows}, 1.0 / cfg.tau)));

  // 0/1 masks over view pairs; constants, so they never join the tape.
  std::vector<double> cross_mask(rows * rows, 0.0), sib_mask(rows * rows, 0.0);
  for (std::size_t a = 0; a < rows; ++a)
    for (std::size_t b = 0; b < rows; ++b) {
      if (a == b) continue;
      if (a / m == b / m) sib_mask[a * rows + b] = 1.0;
      else cross_mask[a * rows + b] = 1.0;
    }
  Tensor ones_v = Tensor::ones({rows});
  Tensor cross_sum = matmul(tape, mul(tape, e, Tensor({rows, rows}, std::move(cross_mask))), ones_v);
  Tensor sib_sum = matmul(tape, mul(tape, e, Tensor({rows, rows}, std::move(sib_mask))), ones_v);
  Tensor cross_mean = mul(tape, cross_sum, Tensor::full({rows}, 1.0 / n_neg));
  Tensor sib_mean = mul(tape, sib_sum, Tensor::full({rows}, 1.0 / static_cast<double>(m - 1)));
  Tensor estimate = sub(tape, cross_mean, mul(tape, sib_mean, Tensor::full({rows}, cfg.tau_plus)));
  Tensor d_u = max_with(
      tape, mul(tape, estimate, Tensor::full({rows}, 1.0 / (1.0 - cfg.tau_plus))), floor);
  Tensor denom_part = mul(tape, d_u, Tensor::full({rows}, n_neg));

  // One loss vector per sibling offset; each anchor row extracts exactly
  // one positive-pair similarity through a masked row sum.
  Tensor total;
  for (std::size_t off = 1; off < m; ++off) {
    std::vector<double> off_mask(rows * rows, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < m; ++k) {
        std::size_t a = i * m + k;
        std::size_t b = i * m + (k + off) % m;
        off_mask[a * rows + b] = 1.0;
      }
    Tensor pos = matmul(tape, mul(tape, e, Tensor({rows, rows}, std::move(off_mask))), ones_v);
    Tensor losses = sub(tape, log(tape, add(tape, pos, denom_part)), log(tape, pos));
    Tensor part = sum(tape, losses);
    total = total.defined() ? add(tape, total, part) : part;
  }
  double n_terms = static_cast<double>(rows * (m - 1));
  return mul(tape, total, Tensor::scalar(1.0 / n_terms));
}

}  // namespace pukit
