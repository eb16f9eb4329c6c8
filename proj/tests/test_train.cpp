#include <doctest.h>

#include <cmath>

#include "pukit/train.hpp"

using namespace pukit;

namespace {

PUDataset small_pu(std::uint64_t seed, std::size_t n = 220, double sep = 6.0) {
  LabeledDataset src = gaussian_mixture(n, 4, Ratio{1, 10}, sep, seed);
  SplitSpec spec;
  spec.positive_class_ids = {1};
  spec.target_pn_ratio = {1, 10};
  spec.label_frequency = 0.5;
  spec.seed = seed + 1;
  return scar_label_split(src, spec);
}

PretrainConfig small_pretrain_cfg(std::size_t d, std::uint64_t seed) {
  PretrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 32;
  cfg.encoder_sizes = {d, 8, 4};
  cfg.proj_dim = 3;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  std::vector<double> p = {1.0, -2.0, 3.0};
  std::vector<std::vector<double>*> refs = {&p};
  Adam opt({}, refs);
  std::vector<std::vector<double>> g = {{0.0, 0.0, 0.0}};
  opt.step(refs, g);
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
  std::vector<double> p = {0.0, 0.0};
  std::vector<std::vector<double>*> refs = {&p};
  AdamConfig cfg;
  cfg.lr = 3e-4;
  Adam opt(cfg, refs);
  std::vector<std::vector<double>> g = {{1.0, 1.0}};
  opt.step(refs, g);
  for (double v : p) CHECK(v == doctest::Approx(-3e-4).epsilon(1e-7));
}

TEST_CASE("adam rejects non-finite gradients") {
  std::vector<double> p = {0.0};
  std::vector<std::vector<double>*> refs = {&p};
  Adam opt({}, refs);
  std::vector<std::vector<double>> g = {{std::nan("")}};
  try {
    opt.step(refs, g);
    FAIL("expected training error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Training);
  }
}

TEST_CASE("pretraining is deterministic and never reads the PU flags") {
  PUDataset data = small_pu(10);
  PretrainConfig cfg = small_pretrain_cfg(data.d, 42);

  PretrainResult a = pretrain(data, cfg);
  PretrainResult b = pretrain(data, cfg);
  CHECK(checkpoint_digest(make_checkpoint(a.encoder, {})) ==
        checkpoint_digest(make_checkpoint(b.encoder, {})));
  CHECK(a.epoch_loss == b.epoch_loss);

  PUDataset scrambled = data;
  for (auto& f : scrambled.s) f = 0;
  scrambled.y_true.reset();
  scrambled.pi_true = 0.0;
  PretrainResult c = pretrain(scrambled, cfg);
  CHECK(checkpoint_digest(make_checkpoint(a.encoder, {})) ==
        checkpoint_digest(make_checkpoint(c.encoder, {})));
}

TEST_CASE("pretraining with lr=0 keeps the seeded initialization") {
  PUDataset data = small_pu(12);
  PretrainConfig cfg = small_pretrain_cfg(data.d, 5);
  cfg.adam.lr = 0.0;
  cfg.epochs = 1;
  PretrainResult r = pretrain(data, cfg);

  Rng enc_rng = Rng(cfg.seed).child(0);
  Mlp expected = Mlp::init(cfg.encoder_sizes, enc_rng);
  CHECK(checkpoint_digest(make_checkpoint(r.encoder, {})) ==
        checkpoint_digest(make_checkpoint(expected, {})));
}

TEST_CASE("pretraining loss trends down over 20 epochs in most seeds") {
  // directional: downhill overall, minibatch upticks stay small
  int good_seeds = 0;
  for (std::uint64_t seed = 100; seed < 105; ++seed) {
    PUDataset data = small_pu(seed, 440, 8.0);
    PretrainConfig cfg;
    cfg.epochs = 20;
    cfg.batch_size = 64;
    cfg.encoder_sizes = {data.d, 16, 8};
    cfg.proj_dim = 4;
    cfg.seed = seed + 2;
    AugmentationPolicy aug;
    aug.transforms.push_back({1.0, GaussianNoise{1.0}});
    aug.transforms.push_back({1.0, GlobalScale{0.9, 1.1}});
    cfg.augment = aug;
    PretrainResult r = pretrain(data, cfg);
    bool downhill = r.epoch_loss.back() < r.epoch_loss.front();
    for (std::size_t e = 1; e < r.epoch_loss.size(); ++e)
      downhill = downhill && r.epoch_loss[e] <= r.epoch_loss[e - 1] * 1.02;
    good_seeds += downhill;
  }
  CHECK(good_seeds >= 4);
}

TEST_CASE("pretraining rejects datasets smaller than one batch") {
  PUDataset data = small_pu(40);
  PretrainConfig cfg = small_pretrain_cfg(data.d, 2);
  cfg.batch_size = data.n + 1;
  CHECK_THROWS_AS(pretrain(data, cfg), Error);
  cfg.batch_size = 32;
  cfg.encoder_sizes = {data.d + 1, 8, 4};  // width mismatch
  CHECK_THROWS_AS(pretrain(data, cfg), Error);
}

TEST_CASE("classifier training freezes the encoder and learns") {
  PUDataset data = small_pu(21);
  PretrainConfig pcfg = small_pretrain_cfg(data.d, 3);
  PretrainResult pre = pretrain(data, pcfg);

  std::string before = checkpoint_digest(make_checkpoint(pre.encoder, {}));
  ClassifierConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 64;
  cfg.seed = 9;
  cfg.adam.lr = 3e-3;
  ClassifierResult res = train_classifier(pre.encoder, data, cfg);
  std::string after = checkpoint_digest(make_checkpoint(pre.encoder, {}));
  CHECK(before == after);
  CHECK(res.trace.epoch_loss.back() < res.trace.epoch_loss.front());
  CHECK(res.trace.epoch_loss.back() >= 0.0);  // non-negative by construction
}

TEST_CASE("classifier training with lr=0 keeps the loss flat") {
  PUDataset data = small_pu(22);
  Rng rng(1);
  Mlp enc = Mlp::init({data.d, 4}, rng);
  ClassifierConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = data.n;  // full-batch: identical losses across epochs
  cfg.adam.lr = 0.0;
  cfg.seed = 4;
  ClassifierResult res = train_classifier(enc, data, cfg);
  CHECK(res.trace.epoch_loss[0] == doctest::Approx(res.trace.epoch_loss[2]).epsilon(1e-15));
}

TEST_CASE("pu losses require a usable prior") {
  PUDataset data = small_pu(23);
  data.y_true.reset();     // strips ground truth
  data.pi_true = 0.0;      // and any derivable prior
  Rng rng(2);
  Mlp enc = Mlp::init({data.d, 4}, rng);
  ClassifierConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 1;
  CHECK_THROWS_AS(train_classifier(enc, data, cfg), Error);
  cfg.pu.pi = 0.09;  // explicit prior fixes it
  ClassifierResult res = train_classifier(enc, data, cfg);
  CHECK(res.trace.epoch_loss.size() == 1);
}

TEST_CASE("bce/wbce baselines demand ground truth and use s as pseudo-label") {
  PUDataset data = small_pu(24);
  Rng rng(3);
  Mlp enc = Mlp::init({data.d, 4}, rng);
  ClassifierConfig cfg;
  cfg.epochs = 2;
  cfg.loss = LossKind::wbce;
  cfg.seed = 2;

  PUDataset no_y = data;
  no_y.y_true.reset();
  no_y.pi_true = 0.0;
  try {
    train_classifier(enc, no_y, cfg);
    FAIL("expected label error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Label);
  }

  ClassifierResult res = train_classifier(enc, data, cfg);
  CHECK(res.trace.epoch_loss.size() == 2);

  // pseudo-label weight: unlabeled count over labeled count
  double expect = static_cast<double>(data.count_unlabeled()) /
                  static_cast<double>(data.count_labeled());
  CHECK(wbce_positive_weight(data, LabelSource::pu_flags) ==
        doctest::Approx(expect).epsilon(1e-15));
}

TEST_CASE("supervised baseline weight comes from the true labels") {
  PUDataset data = small_pu(25);
  // 1:10 data: w_pos = 10 on the true labels
  CHECK(wbce_positive_weight(data, LabelSource::true_labels) ==
        doctest::Approx(10.0).epsilon(1e-12));

  Rng rng(4);
  Mlp enc = Mlp::init({data.d, 4}, rng);
  ClassifierConfig cfg;
  cfg.epochs = 2;
  cfg.loss = LossKind::wbce;
  cfg.seed = 11;
  ClassifierResult res = train_supervised_baseline(enc, data, cfg);
  CHECK(res.trace.epoch_loss.size() == 2);

  cfg.loss = LossKind::imbnnpu;
  CHECK_THROWS_AS(train_supervised_baseline(enc, data, cfg), Error);
}

TEST_CASE("balanced data makes wbce equal plain bce") {
  LabeledDataset src = gaussian_mixture(120, 3, Ratio{1, 1}, 5.0, 31);
  SplitSpec spec;
  spec.positive_class_ids = {1};
  spec.target_pn_ratio = {1, 1};
  spec.label_frequency = 0.5;
  spec.seed = 32;
  PUDataset data = scar_label_split(src, spec);
  CHECK(wbce_positive_weight(data, LabelSource::true_labels) == 1.0);

  Rng rng(5);
  Mlp enc = Mlp::init({data.d, 4}, rng);
  ClassifierConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 6;
  cfg.loss = LossKind::wbce;
  ClassifierResult w = train_supervised_baseline(enc, data, cfg);
  cfg.loss = LossKind::bce;
  ClassifierResult b = train_supervised_baseline(enc, data, cfg);
  for (std::size_t e = 0; e < w.trace.epoch_loss.size(); ++e)
    CHECK(w.trace.epoch_loss[e] == doctest::Approx(b.trace.epoch_loss[e]).epsilon(1e-15));
}

TEST_CASE("scratch training reaches both encoder and classifier") {
  PUDataset data = small_pu(26);
  ClassifierConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 64;
  cfg.seed = 8;
  cfg.adam.lr = 3e-3;
  ScratchResult res = train_scratch(data, {data.d, 8, 4}, cfg);
  Rng enc_rng = Rng(cfg.seed).child(0);
  Mlp init_enc = Mlp::init({data.d, 8, 4}, enc_rng);
  CHECK(checkpoint_digest(make_checkpoint(res.encoder, {})) !=
        checkpoint_digest(make_checkpoint(init_enc, {})));
  CHECK(res.trace.epoch_loss.back() < res.trace.epoch_loss.front());
}

TEST_CASE("prior sweep shape and b_dis = 1 equivalence") {
  PUDataset train = small_pu(27);
  PUDataset test = small_pu(28);

  PretrainConfig pcfg = small_pretrain_cfg(train.d, 13);
  PretrainResult pre = pretrain(train, pcfg);

  PriorSweepConfig sweep;
  sweep.factors = {0.5, 1.0, 2.0};
  sweep.classifier.epochs = 4;
  sweep.classifier.batch_size = 64;
  sweep.classifier.seed = 14;
  auto rows = prior_sweep(pre.encoder, train, test, sweep);
  CHECK(rows.size() == 3 * 4);
  CHECK(rows[0].b_dis == 0.5);
  CHECK(rows[4].b_dis == 1.0);
  CHECK(rows[4].epoch == 0);

  ClassifierConfig plain = sweep.classifier;
  plain.pu.pi = train.pi_true;
  ClassifierResult direct = train_classifier(pre.encoder, train, plain, &test);
  for (std::size_t e = 0; e < 4; ++e) {
    CHECK(rows[4 + e].loss == doctest::Approx(direct.trace.epoch_loss[e]).epsilon(1e-15));
    CHECK(rows[4 + e].metrics.auc ==
          doctest::Approx(direct.trace.epoch_metrics[e].auc).epsilon(1e-15));
  }

  PriorSweepConfig bad;
  bad.factors = {25.0};  // distorted prior crosses 1
  bad.classifier = sweep.classifier;
  CHECK_THROWS_AS(prior_sweep(pre.encoder, train, test, bad), Error);
}

TEST_CASE("b_dis = 10 on the table-shaped prior lands at 0.74") {
  double pi = 2400.0 / 32400.0;
  CHECK(10.0 * pi == doctest::Approx(0.7407407).epsilon(1e-6));
}
