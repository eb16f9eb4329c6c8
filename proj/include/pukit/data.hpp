#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pukit/rng.hpp"

namespace pukit {

// Fully labeled multiclass source, before PU binarization.
struct LabeledDataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;  // row-major n x d
  std::vector<int> class_ids;
  std::string name;

  std::span<const double> row(std::size_t i) const;
};

// PU view of a dataset: s = 1 labeled positive, s = 0 unlabeled. y_true
// (+1/-1) is carried for synthetic and benchmark data so evaluation and
// supervised baselines stay possible.
struct PUDataset {
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> features;
  std::vector<std::uint8_t> s;
  std::optional<std::vector<int>> y_true;
  double pi_true = 0.0;  // share of positives among the unlabeled rows
  double c = 1.0;        // label frequency used at synthesis

  std::span<const double> row(std::size_t i) const;
  std::size_t count_labeled() const;
  std::size_t count_unlabeled() const;
  void validate() const;
};

// P:N target expressed as num:den, e.g. 1:10.
struct Ratio {
  std::uint64_t num = 1;
  std::uint64_t den = 1;
  static Ratio parse(const std::string& text);
  std::string str() const;
};

struct SplitSpec {
  std::vector<int> positive_class_ids;
  Ratio target_pn_ratio;
  double label_frequency = 0.2;  // c
  std::uint64_t seed = 0;
};

// SCAR split: downsample positives to the target P:N ratio, label exactly
// round(c * n_pos_kept) of the kept positives, shuffle, record pi_true.
PUDataset scar_label_split(const LabeledDataset& src, const SplitSpec& spec);

// Two Gaussian clusters at +/-(separation/2) e1 with unit covariance;
// class 1 is positive, class 0 negative, sizes per pn_ratio.
LabeledDataset gaussian_mixture(std::size_t n, std::size_t d, Ratio pn_ratio,
                                double class_separation, std::uint64_t seed);

// --- CSV persistence (header f0..f{d-1} then s [,y] or class) ---

// Locale-independent shortest-exact decimal (17 significant digits).
std::string csv_double(double v);

enum class DatasetFormat { labeled, pu };

void save_dataset(const LabeledDataset& data, const std::filesystem::path& path);
void save_dataset(const PUDataset& data, const std::filesystem::path& path);
LabeledDataset load_labeled_csv(const std::filesystem::path& path);
PUDataset load_pu_csv(const std::filesystem::path& path);
std::variant<LabeledDataset, PUDataset> load_dataset(const std::filesystem::path& path,
                                                     DatasetFormat format);

// --- stochastic augmentation views ---

struct GaussianNoise { double sigma = 0.1; };
struct CoordinateMask { double rate = 0.1; };
struct GlobalScale { double lo = 0.9, hi = 1.1; };
// Raster transforms interpret a row as a width x height grayscale image.
struct CropResize { double min_scale = 0.6, max_scale = 1.0; };
struct HorizontalFlip {};
struct BrightnessContrast { double max_brightness = 0.2, max_contrast = 0.2; };

using TransformOp = std::variant<GaussianNoise, CoordinateMask, GlobalScale,
                                 CropResize, HorizontalFlip, BrightnessContrast>;

struct Transform {
  double probability = 1.0;
  TransformOp op;
};

struct AugmentationPolicy {
  std::vector<Transform> transforms;
  std::size_t raster_width = 0;   // required by the raster transforms
  std::size_t raster_height = 0;

  void validate(std::size_t d) const;
  bool needs_raster() const;
  static AugmentationPolicy vector_default();
};

// m independent stochastic transforms of x, deterministic under rng state.
std::vector<std::vector<double>> augment_views(std::span<const double> x,
                                               const AugmentationPolicy& policy,
                                               std::size_t m, Rng& rng);

// Uniform sample without replacement; with require_both_kinds it redraws
// until the batch holds at least one labeled positive and one unlabeled
// row (risk_components needs both).
std::vector<std::size_t> sample_minibatch(const PUDataset& data,
                                          std::size_t batch_size, Rng& rng,
                                          bool require_both_kinds);

}  // namespace pukit
