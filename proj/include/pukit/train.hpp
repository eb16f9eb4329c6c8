#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pukit/data.hpp"
#include "pukit/losses.hpp"
#include "pukit/metrics.hpp"
#include "pukit/models.hpp"

namespace pukit {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a fixed list of parameter arrays.
class Adam {
 public:
  Adam(AdamConfig cfg, const std::vector<std::vector<double>*>& params);

  // grads[i] pairs with the params[i] given at construction.
  void step(const std::vector<std::vector<double>*>& params,
            const std::vector<std::vector<double>>& grads);

  std::size_t steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

struct PretrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 128;
  ContrastiveConfig contrastive;
  AugmentationPolicy augment = AugmentationPolicy::vector_default();
  std::vector<std::size_t> encoder_sizes;  // leading entry must equal d
  std::size_t projector_hidden = 0;        // 0: same as repr_dim
  std::size_t proj_dim = 16;
  AdamConfig adam;
  std::uint64_t seed = 0;
  void validate() const;
};

struct PretrainResult {
  Mlp encoder;
  Projector projector;
  std::vector<double> epoch_loss;  // mean batch objective per epoch
};

// Step 1: minimize the batch contrastive objective over minibatches of
// augmented views. PU flags are never read.
PretrainResult pretrain(const PUDataset& data, const PretrainConfig& cfg);

enum class LossKind { imbnnpu, nnpu, wbce, bce };
const char* loss_kind_name(LossKind k);
LossKind parse_loss_kind(const std::string& name);

// Which column supervises the classifier: the PU flag s (unlabeled treated
// as negative for BCE/wBCE) or the true labels (supervised baselines).
enum class LabelSource { pu_flags, true_labels };

struct ClassifierConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 128;
  PULossConfig pu;  // pi <= 0 means: take pi_true from the training data
  LossKind loss = LossKind::imbnnpu;
  LabelSource labels = LabelSource::pu_flags;
  AdamConfig adam;
  std::uint64_t seed = 0;
  void validate() const;
};

struct TrainTrace {
  std::vector<double> epoch_loss;
  std::vector<MetricsRecord> epoch_metrics;  // filled when test data given
};

struct ClassifierResult {
  LinearClassifier clf;
  TrainTrace trace;
};

// Step 2: single-logit probe on frozen representations. The encoder is
// never touched; representations are computed once, without augmentation.
ClassifierResult train_classifier(const Mlp& encoder, const PUDataset& train,
                                  const ClassifierConfig& cfg,
                                  const PUDataset* test = nullptr);

struct ScratchResult {
  Mlp encoder;
  LinearClassifier clf;
  TrainTrace trace;
};

// Joint encoder + classifier training from random initialization (the
// no-pretraining baseline; also hosts the from-scratch wBCE baseline).
ScratchResult train_scratch(const PUDataset& train,
                            const std::vector<std::size_t>& encoder_sizes,
                            const ClassifierConfig& cfg,
                            const PUDataset* test = nullptr);

// Negative:positive count ratio under the given label source; the weight
// wBCE assigns to positive samples.
double wbce_positive_weight(const PUDataset& data, LabelSource source);

// Supervised wBCE baseline on the true labels; with an encoder it probes
// frozen representations, without one it trains end-to-end from scratch.
// w_pos is the negative:positive count ratio of the chosen labels.
ClassifierResult train_supervised_baseline(const Mlp& encoder,
                                           const PUDataset& train,
                                           ClassifierConfig cfg,
                                           const PUDataset* test = nullptr);
ScratchResult train_supervised_baseline_scratch(
    const PUDataset& train, const std::vector<std::size_t>& encoder_sizes,
    ClassifierConfig cfg, const PUDataset* test = nullptr);

struct PriorSweepConfig {
  std::vector<double> factors;  // b_dis values
  ClassifierConfig classifier;
  void validate(double base_pi) const;
};

struct SweepRow {
  double b_dis = 1.0;
  std::size_t epoch = 0;
  double loss = 0.0;
  MetricsRecord metrics;
};

// One probe per distortion factor with pi replaced by b_dis * pi; rows in
// factor-major, epoch-minor order.
std::vector<SweepRow> prior_sweep(const Mlp& encoder, const PUDataset& train,
                                  const PUDataset& test,
                                  const PriorSweepConfig& cfg);

}  // namespace pukit
