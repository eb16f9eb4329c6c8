#include "pukit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pukit/losses.hpp"

namespace pukit {

double accuracy(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size())
    fail(ErrorKind::Shape, "accuracy: prediction and truth lengths differ");
  if (pred.empty()) fail(ErrorKind::Contract, "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i)
    if (pred[i] == truth[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

double f1_score(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size())
    fail(ErrorKind::Shape, "f1_score: prediction and truth lengths differ");
  if (pred.empty()) fail(ErrorKind::Contract, "f1_score: empty input");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == 1 && truth[i] == 1) ++tp;
    else if (pred[i] == 1 && truth[i] != 1) ++fp;
    else if (pred[i] != 1 && truth[i] == 1) ++fn;
  }
  if (tp == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) /
         static_cast<double>(2 * tp + fp + fn);
}

double auc(std::span<const double> scores, std::span<const int> truth) {
  if (scores.size() != truth.size())
    fail(ErrorKind::Shape, "auc: score and truth lengths differ");
  const std::size_t n = scores.size();
  std::size_t n_pos = 0;
  for (int y : truth) {
    if (y != 1 && y != -1) fail(ErrorKind::Contract, "auc: labels must be +1 or -1");
    if (y == 1) ++n_pos;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    fail(ErrorKind::Composition, "auc: both classes required");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Midranks: tied scores share the average of their rank range.
  std::vector<double> rank(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double mid = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = mid;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (std::size_t k = 0; k < n; ++k)
    if (truth[k] == 1) rank_sum_pos += rank[k];
  double u = rank_sum_pos -
             static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsRecord evaluate_model(const Mlp& encoder, const LinearClassifier& clf,
                             const PUDataset& test, double threshold) {
  if (!test.y_true)
    fail(ErrorKind::Label, "evaluate_model: test data carries no true labels");
  if (test.d != encoder.input_dim())
    fail(ErrorKind::Shape, "evaluate_model: feature width does not match the encoder");
  Tape tape;
  Tensor x({test.n, test.d}, test.features);
  Tensor h = encoder.forward(tape, x);
  std::vector<double> hv(h.values().begin(), h.values().end());
  std::vector<double> scores = clf.decision_scores(hv, test.n);

  std::vector<int> pred(test.n);
  for (std::size_t r = 0; r < test.n; ++r)
    pred[r] = scores[r] > threshold ? 1 : -1;  // ties go negative

  MetricsRecord rec;
  rec.n_test = test.n;
  rec.threshold = threshold;
  rec.accuracy = accuracy(pred, *test.y_true);
  rec.f1 = f1_score(pred, *test.y_true);
  rec.auc = auc(scores, *test.y_true);
  return rec;
}

CheckReport lemma1_numeric_check(std::size_t trials, std::size_t dims,
                                 std::uint64_t seed) {
  if (trials < 1) fail(ErrorKind::Contract, "lemma1_numeric_check: trials must be >= 1");
  if (dims < 1) fail(ErrorKind::Contract, "lemma1_numeric_check: dims must be >= 1");
  Rng rng(seed);
  CheckReport rep;
  rep.trials = trials;
  rep.max_slack = -1e300;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t n = 2 + static_cast<std::size_t>(rng.below(15));
    std::vector<double> x(n * dims);
    for (double& v : x) v = rng.normal();
    std::vector<int> y(n);
    for (int& v : y) v = rng.uniform01() < 0.5 ? 1 : -1;
    // force both classes
    if (std::count(y.begin(), y.end(), 1) == 0) y[rng.below(n)] = 1;
    if (std::count(y.begin(), y.end(), -1) == 0) {
      std::size_t flip = rng.below(n);
      for (std::size_t k = 0; k < n; ++k)
        if (y[(flip + k) % n] == 1 && std::count(y.begin(), y.end(), 1) > 1) {
          y[(flip + k) % n] = -1;
          break;
        }
      if (std::count(y.begin(), y.end(), -1) == 0) y[flip] = -1;
    }
    LinearClassifier two;
    two.in = dims;
    two.two_logit = true;
    two.w.resize(2 * dims);
    for (double& v : two.w) v = rng.normal();
    two.b = {rng.normal(), rng.normal()};
    double pi_prime = rng.uniform(0.05, 0.95);

    std::vector<double> collapsed = two.decision_scores(x, n);
    std::vector<double> logits(2 * n);
    for (std::size_t r = 0; r < n; ++r) {
      auto row = std::span<const double>(x).subspan(r * dims, dims);
      logits[2 * r] = detail::pairwise_dot(row, std::span<const double>(two.w).subspan(0, dims)) + two.b[0];
      logits[2 * r + 1] =
          detail::pairwise_dot(row, std::span<const double>(two.w).subspan(dims, dims)) + two.b[1];
    }
    double lhs = balance_pn_sigmoid_risk(collapsed, y, pi_prime);
    double rhs = softmax_risk(logits, y, pi_prime);
    double slack = lhs - rhs;
    rep.max_slack = std::max(rep.max_slack, slack);
    if (slack > 1e-12) ++rep.violations;
  }
  return rep;
}

CheckReport pointwise_kernel_check() {
  CheckReport rep;
  rep.max_slack = -1e300;
  for (int i = 1; i <= 99; ++i) {
    double p = static_cast<double>(i) / 100.0;
    double slack = (1.0 - p) - (-std::log(p));
    rep.max_slack = std::max(rep.max_slack, slack);
    ++rep.trials;
    if (slack > 1e-12) ++rep.violations;
  }
  return rep;
}

EquivalenceReport equivalence_check(std::size_t trials, std::uint64_t seed) {
  if (trials < 1) fail(ErrorKind::Contract, "equivalence_check: trials must be >= 1");
  Rng rng(seed);
  EquivalenceReport rep;
  rep.trials = trials;
  for (std::size_t t = 0; t < trials; ++t) {
    std::size_t d = 1 + static_cast<std::size_t>(rng.below(16));
    double scale = std::pow(10.0, rng.uniform(-1.0, 1.0));
    std::vector<double> u(d), v(d), x(d);
    for (double& val : u) val = rng.normal();
    for (double& val : v) val = rng.normal();
    for (double& val : x) val = scale * rng.normal();
    double bu = rng.normal(), bv = rng.normal();

    double du = detail::pairwise_dot(u, x) + bu;
    double dv = detail::pairwise_dot(v, x) + bv;
    std::vector<double> wdiff(d);
    for (std::size_t i = 0; i < d; ++i) wdiff[i] = u[i] - v[i];
    double collapsed = detail::pairwise_dot(wdiff, x) + (bu - bv);
    double sig = detail::stable_sigmoid(collapsed);
    double m = std::max(du, dv);
    double softmax_pos = std::exp(du - m) / (std::exp(du - m) + std::exp(dv - m));
    rep.max_abs_diff = std::max(rep.max_abs_diff, std::abs(sig - softmax_pos));
  }
  return rep;
}

namespace {

struct GradScenario {
  Tensor x0;
  std::function<Tensor(Tape&, const Tensor&)> build;  // scalar loss
  int clamp_branch = -1;  // -1 none, 0 floor taken, 1 value taken
};

double scenario_value(const GradScenario& sc, const Tensor& x) {
  Tape tape;
  return sc.build(tape, x).item();
}

Tensor scenario_gradient(const GradScenario& sc) {
  Tape tape;
  Tensor x(sc.x0.shape(), std::vector<double>(sc.x0.values().begin(), sc.x0.values().end()),
           /*requires_grad=*/true);
  Tensor loss = sc.build(tape, x);
  return tape.backward(loss).grad(x);
}

std::vector<double> randn(Rng& rng, std::size_t n, double mu = 0.0, double sigma = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = mu + sigma * rng.normal();
  return v;
}

std::vector<std::uint8_t> random_pu_flags(Rng& rng, std::size_t n) {
  std::vector<std::uint8_t> s(n, 0);
  for (auto& f : s) f = rng.uniform01() < 0.4 ? 1 : 0;
  // both kinds present
  if (std::count(s.begin(), s.end(), std::uint8_t{1}) == 0) s[rng.below(n)] = 1;
  if (std::count(s.begin(), s.end(), std::uint8_t{0}) == 0) s[rng.below(n)] = 0;
  return s;
}

// Scores steered toward one clamp branch of the nnPU correction; returns
// the branch actually realized (0 floor, 1 value), resampling near ties.
GradScenario make_pu_scenario(Rng& rng, bool imbalanced, bool through_model) {
  for (;;) {
    std::size_t n = 3 + static_cast<std::size_t>(rng.below(6));
    auto s = random_pu_flags(rng, n);
    PULossConfig cfg;
    cfg.pi = rng.uniform(0.05, 0.6);
    cfg.pi_prime = rng.uniform(0.1, 0.9);
    bool aim_floor = rng.uniform01() < 0.5;

    std::vector<double> scores(n);
    for (std::size_t i = 0; i < n; ++i) {
      double mu = 0.0;
      if (aim_floor) mu = s[i] ? 4.0 : -4.0;  // tiny l-_0, big l+_0
      scores[i] = mu + rng.normal();
    }

    // branch realized at the center point
    RiskComponents rc = risk_components(scores, s);
    double term = rc.l_unl_as_neg - cfg.pi * rc.l_pos_as_neg;
    if (std::abs(term) < 1e-3) continue;  // too close to the kink
    int branch = term < 0.0 ? 0 : 1;

    GradScenario sc;
    sc.clamp_branch = branch;
    if (through_model) {
      std::size_t d = 2 + static_cast<std::size_t>(rng.below(4));
      // fit X so that X w0 reproduces the steered scores along w0
      std::vector<double> x(n * d);
      std::vector<double> w0 = randn(rng, d);
      double nrm2 = detail::pairwise_dot(w0, w0);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j)
          x[i * d + j] = w0[j] * scores[i] / nrm2 + 0.05 * rng.normal();
      Tensor X({n, d}, std::move(x));
      sc.x0 = Tensor({d}, w0);
      sc.build = [X, s, cfg, imbalanced](Tape& tape, const Tensor& w) {
        Tensor sc_scores = matmul(tape, X, w);
        return pu_risk_graph(tape, sc_scores, s, cfg, imbalanced);
      };
      // re-check the branch at the actual center
      Tape probe;
      Tensor probe_scores = matmul(probe, X, sc.x0);
      RiskComponents rc2 = risk_components(
          std::vector<double>(probe_scores.values().begin(), probe_scores.values().end()), s);
      double term2 = rc2.l_unl_as_neg - cfg.pi * rc2.l_pos_as_neg;
      if (std::abs(term2) < 1e-3) continue;
      sc.clamp_branch = term2 < 0.0 ? 0 : 1;
    } else {
      sc.x0 = Tensor({n}, scores);
      sc.build = [s, cfg, imbalanced](Tape& tape, const Tensor& z) {
        return pu_risk_graph(tape, z, s, cfg, imbalanced);
      };
    }
    return sc;
  }
}

GradScenario make_sigmoid_scenario(Rng& rng) {
  std::size_t n = 2 + static_cast<std::size_t>(rng.below(7));
  std::size_t d = 1 + static_cast<std::size_t>(rng.below(6));
  Tensor X({n, d}, randn(rng, n * d));
  std::vector<double> tgt(n);
  for (double& t : tgt) t = rng.uniform01() < 0.5 ? 1.0 : -1.0;
  Tensor T({n}, tgt);
  GradScenario sc;
  sc.x0 = Tensor({d}, randn(rng, d));
  sc.build = [X, T](Tape& tape, const Tensor& w) {
    Tensor scores = matmul(tape, X, w);
    Tensor losses = sigmoid(tape, neg(tape, mul(tape, scores, T)));
    return mean(tape, losses);
  };
  return sc;
}

GradScenario make_wbce_scenario(Rng& rng) {
  std::size_t n = 2 + static_cast<std::size_t>(rng.below(7));
  std::vector<std::uint8_t> y(n);
  for (auto& v : y) v = rng.uniform01() < 0.5 ? 1 : 0;
  double w_pos = rng.uniform01() < 0.5 ? 1.0 : rng.uniform(1.0, 20.0);
  bool saturate = rng.uniform01() < 0.3;  // drive some probs into the clip
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i)
    scores[i] = saturate && i == 0 ? (rng.uniform01() < 0.5 ? 40.0 : -40.0)
                                   : rng.normal();
  GradScenario sc;
  sc.clamp_branch = saturate ? 0 : 1;
  sc.x0 = Tensor({n}, scores);
  sc.build = [y, w_pos](Tape& tape, const Tensor& z) {
    return wbce_graph(tape, z, y, w_pos);
  };
  return sc;
}

GradScenario make_contrastive_scenario(Rng& rng) {
  for (;;) {
    std::size_t n = 2 + static_cast<std::size_t>(rng.below(3));
    std::size_t m = 2;
    std::size_t d = 2 + static_cast<std::size_t>(rng.below(3));
    ContrastiveConfig cfg;
    cfg.tau = rng.uniform(0.3, 1.0);
    cfg.views = m;
    bool aim_floor = rng.uniform01() < 0.5;
    cfg.tau_plus = aim_floor ? rng.uniform(0.2, 0.5)
                             : (rng.uniform01() < 0.3 ? 0.0 : rng.uniform(0.0, 0.3));

    std::vector<double> x(n * m * d);
    if (aim_floor) {
      // two antipodal clusters: cross sims near the similarity minimum,
      // sibling sims near the maximum, so the floor engages
      std::vector<double> dir = randn(rng, d);
      double nrm = std::sqrt(detail::pairwise_dot(dir, dir));
      for (double& v : dir) v /= nrm;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < m; ++k)
          for (std::size_t j = 0; j < d; ++j)
            x[(i * m + k) * d + j] = (i % 2 == 0 ? 1.0 : -1.0) * dir[j] + 0.05 * rng.normal();
    } else {
      for (double& v : x) v = rng.normal();
    }

    // kink guard on every anchor via the scalar path
    ViewBatch vb;
    vb.n = n; vb.m = m; vb.dim = d;
    vb.z = x;
    bool ok = true;
    double floor = std::exp(-1.0 / cfg.tau);
    for (std::size_t r = 0; r < n * m && ok; ++r) {
      auto row = std::span<double>(vb.z).subspan(r * d, d);
      double nrm = std::sqrt(detail::pairwise_dot(row, row));
      if (nrm < 1e-6) { ok = false; break; }
      for (double& v : row) v /= nrm;
    }
    if (!ok) continue;
    int branch = -1;
    for (std::size_t i = 0; i < n && ok; ++i)
      for (std::size_t k = 0; k < m && ok; ++k) {
        // recompute the pre-clamp estimate
        std::vector<double> cross, sib;
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t l = 0; l < m; ++l) {
            if (j == i && l == k) continue;
            double cs = detail::pairwise_dot(vb.view(i, k), vb.view(j, l));
            double sim = std::exp(cs / cfg.tau);
            if (j == i) sib.push_back(sim);
            else cross.push_back(sim);
          }
        double est = detail::pairwise_sum(cross) / static_cast<double>(cross.size()) -
                     cfg.tau_plus * detail::pairwise_sum(sib) / static_cast<double>(sib.size());
        double corrected = est / (1.0 - cfg.tau_plus);
        if (std::abs(corrected - floor) < 1e-4 * std::max(1.0, floor)) { ok = false; break; }
        int b = corrected < floor ? 0 : 1;
        if (branch == -1) branch = b;
        // mixed batches count as value-branch coverage
        if (b == 1) branch = 1;
      }
    if (!ok) continue;

    GradScenario sc;
    sc.clamp_branch = branch;
    sc.x0 = Tensor({n * m, d}, std::move(x));
    sc.build = [n, m, cfg](Tape& tape, const Tensor& raw) {
      Tensor z = l2_normalize(tape, raw, 1);
      return contrastive_objective_graph(tape, z, n, m, cfg);
    };
    return sc;
  }
}

}  // namespace

std::vector<GradCheckReport> gradient_check_suite(std::size_t cases_per_loss,
                                                  std::uint64_t seed) {
  if (cases_per_loss < 1)
    fail(ErrorKind::Contract, "gradient_check_suite: need at least one case");
  const double h = 1e-4;
  const double tol = 1e-4;
  Rng rng(seed);

  struct LossDef {
    const char* name;
    std::function<GradScenario(Rng&)> make;
  };
  std::vector<LossDef> defs = {
      {"sigmoid", [](Rng& r) { return make_sigmoid_scenario(r); }},
      {"nnpu",
       [](Rng& r) { return make_pu_scenario(r, false, r.uniform01() < 0.5); }},
      {"imbnnpu",
       [](Rng& r) { return make_pu_scenario(r, true, r.uniform01() < 0.5); }},
      {"wbce", [](Rng& r) { return make_wbce_scenario(r); }},
      {"debiased-contrastive", [](Rng& r) { return make_contrastive_scenario(r); }},
  };

  std::vector<GradCheckReport> reports;
  for (const auto& def : defs) {
    GradCheckReport rep;
    rep.loss = def.name;
    Rng loss_rng = rng.child(reports.size());
    for (std::size_t c = 0; c < cases_per_loss; ++c) {
      GradScenario sc = def.make(loss_rng);
      Tensor analytic = scenario_gradient(sc);
      Tensor numeric = finite_difference_gradient(
          [&sc](const Tensor& x) { return scenario_value(sc, x); }, sc.x0, h);
      bool failed = false;
      for (std::size_t i = 0; i < analytic.size(); ++i) {
        double a = analytic.at(i), nm = numeric.at(i);
        double rel = std::abs(a - nm) / std::max(std::abs(nm), 1e-3);
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        if (rel >= tol) failed = true;
      }
      if (failed) ++rep.failures;
      if (sc.clamp_branch == 0) ++rep.clamp_floor_cases;
      if (sc.clamp_branch == 1) ++rep.clamp_value_cases;
      ++rep.cases;
    }
    reports.push_back(std::move(rep));
  }
  return reports;
}

}  // namespace pukit
