#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pukit/rng.hpp"
#include "pukit/tensor.hpp"

namespace pukit {

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> w;  // row-major in x out
  std::vector<double> b;  // out
};

// Multilayer perceptron: relu on hidden layers, identity on the output.
// Stands in for the full-scale backbone; width is a config knob.
struct Mlp {
  std::vector<std::size_t> layer_sizes;  // d, h1, ..., out
  std::vector<DenseLayer> layers;

  static Mlp init(std::vector<std::size_t> sizes, Rng& rng);

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }

  // x_batch is (n x d). With trainable=true the parameter tensors carry
  // requires_grad and are appended to `params` in update order.
  Tensor forward(Tape& tape, const Tensor& x_batch, bool trainable = false,
                 std::vector<Tensor>* params = nullptr) const;

  // Raw parameter storage in the same order forward() materializes it.
  std::vector<std::vector<double>*> param_refs();
  std::string architecture() const;  // e.g. "mlp(16-64-32)"
};

// Two-hidden-layer projection head; output rows are L2-normalized.
struct Projector {
  Mlp net;

  static Projector init(std::size_t repr_dim, std::size_t hidden,
                        std::size_t proj_dim, Rng& rng);
  std::size_t proj_dim() const { return net.output_dim(); }
  Tensor forward(Tape& tape, const Tensor& h_batch, bool trainable = false,
                 std::vector<Tensor>* params = nullptr) const;
  std::vector<std::vector<double>*> param_refs() { return net.param_refs(); }
  std::string architecture() const;
};

// Affine scorer on representations; either a single logit or a logit pair.
struct LinearClassifier {
  std::size_t in = 0;
  bool two_logit = false;
  std::vector<double> w;  // in, or 2 x in row-major
  std::vector<double> b;  // 1 or 2

  static LinearClassifier init(std::size_t in, bool two_logit, Rng& rng);

  // (n) logits for single, (n x 2) for two-logit. No activation.
  Tensor score(Tape& tape, const Tensor& h_batch, bool trainable = false,
               std::vector<Tensor>* params = nullptr) const;
  // Eager single-logit scores for evaluation; two-logit classifiers score
  // through their collapsed form.
  std::vector<double> decision_scores(std::span<const double> h, std::size_t n) const;
  std::vector<std::vector<double>*> param_refs();
};

// (u - v, b_u - b_v): sigmoid of the collapsed score equals the softmax
// positive-class probability of the original pair, for every input.
LinearClassifier collapse_two_logit(const LinearClassifier& clf);

enum class ComponentKind { encoder, projector, classifier };
const char* component_kind_name(ComponentKind k);

struct Provenance {
  std::uint64_t seed = 0;
  std::size_t epochs = 0;
  std::string loss;
  std::string config_digest;
  std::string architecture;
  std::string rng_algorithm;
  std::string tool_version;
};

// Serialized parameters plus provenance. Weights are stored as hexadecimal
// IEEE-754 bit patterns, so save/load round-trips are bit-exact.
struct Checkpoint {
  int version = 1;
  ComponentKind kind = ComponentKind::encoder;
  std::vector<std::size_t> layer_sizes;  // encoder / projector
  bool two_logit = false;                // classifier
  std::vector<std::pair<Shape, std::vector<double>>> params;
  Provenance provenance;
};

Checkpoint make_checkpoint(const Mlp& encoder, Provenance prov);
Checkpoint make_checkpoint(const Projector& projector, Provenance prov);
Checkpoint make_checkpoint(const LinearClassifier& clf, Provenance prov);

Mlp encoder_from(const Checkpoint& ckpt);
Projector projector_from(const Checkpoint& ckpt);
LinearClassifier classifier_from(const Checkpoint& ckpt);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Stable content digest (FNV-1a 64) of a checkpoint or an arbitrary file;
// used for freeze contracts and determinism checks.
std::string checkpoint_digest(const Checkpoint& ckpt);
std::string file_digest(const std::filesystem::path& path);
std::string bytes_digest(std::string_view bytes);

}  // namespace pukit
