#include "pukit/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pukit {

namespace {

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return detail::pairwise_sum(v) / static_cast<double>(v.size());
}

}  // namespace

Adam::Adam(AdamConfig cfg, const std::vector<std::vector<double>*>& params)
    : cfg_(cfg) {
  if (!(cfg_.lr >= 0.0)) fail(ErrorKind::Config, "adam: negative learning rate");
  for (const auto* p : params) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step(const std::vector<std::vector<double>*>& params,
                const std::vector<std::vector<double>>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    fail(ErrorKind::Contract, "adam: parameter list changed shape");
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto& p = *params[k];
    const auto& g = grads[k];
    if (p.size() != m_[k].size() || g.size() != m_[k].size())
      fail(ErrorKind::Contract, "adam: gradient shape mismatch in slot " + std::to_string(k));
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (!std::isfinite(g[i]))
        fail(ErrorKind::Training,
             "adam: non-finite gradient in parameter slot " + std::to_string(k));
      m_[k][i] = cfg_.beta1 * m_[k][i] + (1.0 - cfg_.beta1) * g[i];
      v_[k][i] = cfg_.beta2 * v_[k][i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      double mhat = m_[k][i] / bc1;
      double vhat = v_[k][i] / bc2;
      p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

void PretrainConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::Config, "pretrain: epochs must be >= 1");
  if (batch_size < 2) fail(ErrorKind::Config, "pretrain: batch size must be >= 2");
  contrastive.validate();
  if (encoder_sizes.size() < 2)
    fail(ErrorKind::Config, "pretrain: encoder needs input and output sizes");
  if (proj_dim < 2) fail(ErrorKind::Config, "pretrain: proj_dim must be >= 2");
}

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::imbnnpu: return "imbnnpu";
    case LossKind::nnpu: return "nnpu";
    case LossKind::wbce: return "wbce";
    case LossKind::bce: return "bce";
  }
  return "?";
}

LossKind parse_loss_kind(const std::string& name) {
  if (name == "imbnnpu") return LossKind::imbnnpu;
  if (name == "nnpu") return LossKind::nnpu;
  if (name == "wbce") return LossKind::wbce;
  if (name == "bce") return LossKind::bce;
  fail(ErrorKind::Config, "unknown loss kind '" + name + "'");
}

void ClassifierConfig::validate() const {
  if (epochs < 1) fail(ErrorKind::Config, "classifier: epochs must be >= 1");
  if (batch_size < 1) fail(ErrorKind::Config, "classifier: batch size must be >= 1");
}

PretrainResult pretrain(const PUDataset& data, const PretrainConfig& cfg) {
  cfg.validate();
  if (data.n < cfg.batch_size || data.n < 2)
    fail(ErrorKind::Config, "pretrain: dataset smaller than one batch");
  if (cfg.encoder_sizes.front() != data.d)
    fail(ErrorKind::Shape, "pretrain: encoder input width does not match the data");
  cfg.augment.validate(data.d);

  Rng rng(cfg.seed);
  Rng enc_rng = rng.child(0);
  Rng proj_rng = rng.child(1);
  Rng order_rng = rng.child(2);
  Rng aug_rng = rng.child(3);

  Mlp encoder = Mlp::init(cfg.encoder_sizes, enc_rng);
  std::size_t repr = encoder.output_dim();
  std::size_t hidden = cfg.projector_hidden ? cfg.projector_hidden : repr;
  Projector projector = Projector::init(repr, hidden, cfg.proj_dim, proj_rng);

  std::vector<std::vector<double>*> param_refs = encoder.param_refs();
  for (auto* p : projector.param_refs()) param_refs.push_back(p);
  Adam opt(cfg.adam, param_refs);

  const std::size_t m = cfg.contrastive.views;
  PretrainResult result;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> batch_losses;
    auto order = order_rng.permutation(data.n);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::size_t bs = std::min(cfg.batch_size, order.size() - start);
      if (bs < 2) break;  // a single sample has no negatives

      // M augmented views per sample, rows grouped per sample
      std::vector<double> xv(bs * m * data.d);
      for (std::size_t b = 0; b < bs; ++b) {
        auto views = augment_views(data.row(order[start + b]), cfg.augment, m, aug_rng);
        for (std::size_t k = 0; k < m; ++k)
          std::copy(views[k].begin(), views[k].end(),
                    xv.begin() + (b * m + k) * data.d);
      }

      try {
        Tape tape;
        std::vector<Tensor> params;
        Tensor x({bs * m, data.d}, std::move(xv));
        Tensor h = encoder.forward(tape, x, /*trainable=*/true, &params);
        Tensor z = projector.forward(tape, h, /*trainable=*/true, &params);
        Tensor objective = contrastive_objective_graph(tape, z, bs, m, cfg.contrastive);
        batch_losses.push_back(objective.item());

        GradMap grads = tape.backward(objective);
        std::vector<std::vector<double>> gvals;
        gvals.reserve(params.size());
        for (const Tensor& p : params) {
          Tensor g = grads.grad(p);
          gvals.emplace_back(g.values().begin(), g.values().end());
        }
        opt.step(param_refs, gvals);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Numeric)
          fail(ErrorKind::Training, "pretrain: non-finite loss at epoch " +
                                        std::to_string(epoch) + " (" + e.what() + ")");
        throw;
      }
    }
    result.epoch_loss.push_back(mean_of(batch_losses));
  }
  result.encoder = std::move(encoder);
  result.projector = std::move(projector);
  return result;
}

namespace {

struct ResolvedLabels {
  std::vector<std::uint8_t> target01;  // loss targets for bce/wbce
  double w_pos = 1.0;
  PULossConfig pu;  // resolved pi for the PU kinds
};

ResolvedLabels resolve_labels(const PUDataset& train, const ClassifierConfig& cfg) {
  ResolvedLabels r;
  r.pu = cfg.pu;
  if (cfg.loss == LossKind::imbnnpu || cfg.loss == LossKind::nnpu) {
    if (cfg.labels != LabelSource::pu_flags)
      fail(ErrorKind::Config, "pu losses train on the PU flags, not true labels");
    if (r.pu.pi <= 0.0) r.pu.pi = train.pi_true;
    if (!(r.pu.pi > 0.0 && r.pu.pi < 1.0))
      fail(ErrorKind::Config,
           "classifier: class prior pi must lie in (0,1); give one explicitly "
           "when the data provides none");
    return r;
  }
  // bce / wbce
  if (!train.y_true)
    fail(ErrorKind::Label, std::string(loss_kind_name(cfg.loss)) +
                               " baseline needs true labels in the training data");
  r.target01.resize(train.n);
  if (cfg.labels == LabelSource::pu_flags) {
    // unlabeled rows are treated as negatives; s is the pseudo-label
    for (std::size_t i = 0; i < train.n; ++i) r.target01[i] = train.s[i];
  } else {
    for (std::size_t i = 0; i < train.n; ++i)
      r.target01[i] = (*train.y_true)[i] == 1 ? 1 : 0;
  }
  std::size_t n_pos = 0;
  for (auto v : r.target01) n_pos += v;
  if (n_pos == 0 || n_pos == train.n)
    fail(ErrorKind::Composition, "bce baseline: labels contain a single class");
  if (cfg.loss == LossKind::wbce)
    r.w_pos = static_cast<double>(train.n - n_pos) / static_cast<double>(n_pos);
  return r;
}

MetricsRecord metrics_from_scores(const std::vector<double>& scores,
                                  const std::vector<int>& y, double threshold) {
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    pred[i] = scores[i] > threshold ? 1 : -1;
  MetricsRecord rec;
  rec.n_test = scores.size();
  rec.threshold = threshold;
  rec.accuracy = accuracy(pred, y);
  rec.f1 = f1_score(pred, y);
  rec.auc = auc(scores, y);
  return rec;
}

bool batch_needs_resample(const PUDataset& data, const ClassifierConfig& cfg,
                          std::span<const std::size_t> idx) {
  if (cfg.loss != LossKind::imbnnpu && cfg.loss != LossKind::nnpu) return false;
  bool has_pos = false, has_unl = false;
  for (std::size_t i : idx) {
    if (data.s[i] == 1) has_pos = true;
    else has_unl = true;
  }
  return !(has_pos && has_unl);
}

Tensor batch_loss_graph(Tape& tape, const Tensor& scores, const PUDataset& data,
                        const ResolvedLabels& labels, const ClassifierConfig& cfg,
                        std::span<const std::size_t> idx) {
  if (cfg.loss == LossKind::imbnnpu || cfg.loss == LossKind::nnpu) {
    std::vector<std::uint8_t> sb(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) sb[b] = data.s[idx[b]];
    return pu_risk_graph(tape, scores, sb, labels.pu, cfg.loss == LossKind::imbnnpu);
  }
  std::vector<std::uint8_t> yb(idx.size());
  for (std::size_t b = 0; b < idx.size(); ++b) yb[b] = labels.target01[idx[b]];
  return wbce_graph(tape, scores, yb, labels.w_pos);
}

std::vector<double> gather_rows(std::span<const double> src, std::size_t width,
                                std::span<const std::size_t> idx) {
  std::vector<double> out(idx.size() * width);
  for (std::size_t b = 0; b < idx.size(); ++b)
    std::copy(src.begin() + idx[b] * width, src.begin() + (idx[b] + 1) * width,
              out.begin() + b * width);
  return out;
}

// Shared epoch driver for the frozen-probe and from-scratch paths.
template <typename ScoreFn, typename UpdateFn, typename EvalFn>
TrainTrace run_classifier_epochs(const PUDataset& train, const ClassifierConfig& cfg,
                                 const ResolvedLabels& labels, const PUDataset* test,
                                 Rng& order_rng, Rng& resample_rng, ScoreFn&& score_batch,
                                 UpdateFn&& apply_update, EvalFn&& eval_test) {
  TrainTrace trace;
  std::size_t bs_cfg = std::min(cfg.batch_size, train.n);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::vector<double> batch_losses;
    auto order = order_rng.permutation(train.n);
    for (std::size_t start = 0; start < order.size(); start += bs_cfg) {
      std::size_t bs = std::min(bs_cfg, order.size() - start);
      if (bs < 2 && train.n >= 2) break;
      std::vector<std::size_t> idx(order.begin() + start, order.begin() + start + bs);
      if (batch_needs_resample(train, cfg, idx))
        idx = sample_minibatch(train, bs, resample_rng, /*require_both_kinds=*/true);

      try {
        Tape tape;
        std::vector<Tensor> params;
        Tensor scores = score_batch(tape, idx, params);
        Tensor loss = batch_loss_graph(tape, scores, train, labels, cfg, idx);
        batch_losses.push_back(loss.item());
        GradMap grads = tape.backward(loss);
        std::vector<std::vector<double>> gvals;
        gvals.reserve(params.size());
        for (const Tensor& p : params) {
          Tensor g = grads.grad(p);
          gvals.emplace_back(g.values().begin(), g.values().end());
        }
        apply_update(gvals);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::Numeric)
          fail(ErrorKind::Training, "classifier training: non-finite loss at epoch " +
                                        std::to_string(epoch) + " (" + e.what() + ")");
        throw;
      }
    }
    trace.epoch_loss.push_back(mean_of(batch_losses));
    if (test) trace.epoch_metrics.push_back(eval_test());
  }
  return trace;
}

std::vector<double> eager_representations(const Mlp& encoder, const PUDataset& data) {
  Tape tape;
  Tensor x({data.n, data.d}, data.features);
  Tensor h = encoder.forward(tape, x);
  return std::vector<double>(h.values().begin(), h.values().end());
}

}  // namespace

ClassifierResult train_classifier(const Mlp& encoder, const PUDataset& train,
                                  const ClassifierConfig& cfg, const PUDataset* test) {
  cfg.validate();
  train.validate();
  if (train.d != encoder.input_dim())
    fail(ErrorKind::Shape, "train_classifier: feature width does not match the encoder");
  ResolvedLabels labels = resolve_labels(train, cfg);

  Rng rng(cfg.seed);
  Rng init_rng = rng.child(0);
  Rng order_rng = rng.child(2);
  Rng resample_rng = rng.child(3);

  std::size_t repr = encoder.output_dim();
  LinearClassifier clf = LinearClassifier::init(repr, /*two_logit=*/false, init_rng);
  Adam opt(cfg.adam, clf.param_refs());

  // frozen encoder, no augmentation: representations are computed once
  std::vector<double> h_train = eager_representations(encoder, train);
  std::vector<double> h_test;
  if (test) {
    if (!test->y_true)
      fail(ErrorKind::Label, "train_classifier: test data carries no true labels");
    h_test = eager_representations(encoder, *test);
  }

  auto score_batch = [&](Tape& tape, std::span<const std::size_t> idx,
                         std::vector<Tensor>& params) {
    Tensor hb({idx.size(), repr}, gather_rows(h_train, repr, idx));
    return clf.score(tape, hb, /*trainable=*/true, &params);
  };
  auto apply_update = [&](const std::vector<std::vector<double>>& gvals) {
    opt.step(clf.param_refs(), gvals);
  };
  auto eval_test = [&]() {
    return metrics_from_scores(clf.decision_scores(h_test, test->n), *test->y_true, 0.0);
  };

  ClassifierResult result;
  result.trace = run_classifier_epochs(train, cfg, labels, test, order_rng,
                                       resample_rng, score_batch, apply_update, eval_test);
  result.clf = std::move(clf);
  return result;
}

ScratchResult train_scratch(const PUDataset& train,
                            const std::vector<std::size_t>& encoder_sizes,
                            const ClassifierConfig& cfg, const PUDataset* test) {
  cfg.validate();
  train.validate();
  if (encoder_sizes.size() < 2 || encoder_sizes.front() != train.d)
    fail(ErrorKind::Config, "train_scratch: encoder sizes must start at the feature width");
  ResolvedLabels labels = resolve_labels(train, cfg);

  Rng rng(cfg.seed);
  Rng enc_rng = rng.child(0);
  Rng init_rng = rng.child(1);
  Rng order_rng = rng.child(2);
  Rng resample_rng = rng.child(3);

  Mlp encoder = Mlp::init(encoder_sizes, enc_rng);
  LinearClassifier clf =
      LinearClassifier::init(encoder.output_dim(), /*two_logit=*/false, init_rng);

  std::vector<std::vector<double>*> refs = encoder.param_refs();
  for (auto* p : clf.param_refs()) refs.push_back(p);
  Adam opt(cfg.adam, refs);

  if (test && !test->y_true)
    fail(ErrorKind::Label, "train_scratch: test data carries no true labels");

  auto score_batch = [&](Tape& tape, std::span<const std::size_t> idx,
                         std::vector<Tensor>& params) {
    Tensor xb({idx.size(), train.d}, gather_rows(train.features, train.d, idx));
    Tensor h = encoder.forward(tape, xb, /*trainable=*/true, &params);
    return clf.score(tape, h, /*trainable=*/true, &params);
  };
  auto apply_update = [&](const std::vector<std::vector<double>>& gvals) {
    std::vector<std::vector<double>*> cur = encoder.param_refs();
    for (auto* p : clf.param_refs()) cur.push_back(p);
    opt.step(cur, gvals);
  };
  auto eval_test = [&]() {
    std::vector<double> ht = eager_representations(encoder, *test);
    return metrics_from_scores(clf.decision_scores(ht, test->n), *test->y_true, 0.0);
  };

  ScratchResult result;
  result.trace = run_classifier_epochs(train, cfg, labels, test, order_rng,
                                       resample_rng, score_batch, apply_update, eval_test);
  result.encoder = std::move(encoder);
  result.clf = std::move(clf);
  return result;
}

double wbce_positive_weight(const PUDataset& data, LabelSource source) {
  std::size_t n_pos = 0;
  if (source == LabelSource::pu_flags) {
    n_pos = data.count_labeled();
  } else {
    if (!data.y_true)
      fail(ErrorKind::Label, "wbce weight: data carries no true labels");
    for (int y : *data.y_true) n_pos += y == 1 ? 1 : 0;
  }
  if (n_pos == 0 || n_pos == data.n)
    fail(ErrorKind::Composition, "wbce weight: labels contain a single class");
  return static_cast<double>(data.n - n_pos) / static_cast<double>(n_pos);
}

ClassifierResult train_supervised_baseline(const Mlp& encoder, const PUDataset& train,
                                           ClassifierConfig cfg, const PUDataset* test) {
  if (cfg.loss != LossKind::wbce && cfg.loss != LossKind::bce)
    fail(ErrorKind::Config, "supervised baseline: loss must be wbce or bce");
  cfg.labels = LabelSource::true_labels;
  return train_classifier(encoder, train, cfg, test);
}

ScratchResult train_supervised_baseline_scratch(
    const PUDataset& train, const std::vector<std::size_t>& encoder_sizes,
    ClassifierConfig cfg, const PUDataset* test) {
  if (cfg.loss != LossKind::wbce && cfg.loss != LossKind::bce)
    fail(ErrorKind::Config, "supervised baseline: loss must be wbce or bce");
  cfg.labels = LabelSource::true_labels;
  return train_scratch(train, encoder_sizes, cfg, test);
}

void PriorSweepConfig::validate(double base_pi) const {
  if (factors.empty()) fail(ErrorKind::Config, "prior sweep: no distortion factors");
  for (double b : factors) {
    if (!(b > 0.0)) fail(ErrorKind::Config, "prior sweep: factors must be positive");
    if (!(b * base_pi < 1.0))
      fail(ErrorKind::Config, "prior sweep: distorted prior must stay below 1");
  }
}

std::vector<SweepRow> prior_sweep(const Mlp& encoder, const PUDataset& train,
                                  const PUDataset& test, const PriorSweepConfig& cfg) {
  double base_pi = cfg.classifier.pu.pi > 0.0 ? cfg.classifier.pu.pi : train.pi_true;
  if (!(base_pi > 0.0 && base_pi < 1.0))
    fail(ErrorKind::Config, "prior sweep: base prior pi must lie in (0,1)");
  cfg.validate(base_pi);
  if (cfg.classifier.loss != LossKind::imbnnpu && cfg.classifier.loss != LossKind::nnpu)
    fail(ErrorKind::Config, "prior sweep: only the PU losses take a prior");

  std::vector<SweepRow> rows;
  for (double b : cfg.factors) {
    ClassifierConfig run_cfg = cfg.classifier;
    run_cfg.pu.pi = b * base_pi;
    ClassifierResult res = train_classifier(encoder, train, run_cfg, &test);
    for (std::size_t e = 0; e < res.trace.epoch_loss.size(); ++e) {
      SweepRow row;
      row.b_dis = b;
      row.epoch = e;
      row.loss = res.trace.epoch_loss[e];
      row.metrics = res.trace.epoch_metrics[e];
      rows.push_back(row);
    }
  }
  return rows;
}

}  // namespace pukit
