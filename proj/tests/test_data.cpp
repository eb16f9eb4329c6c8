#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <algorithm>
#include <set>

#include "pukit/data.hpp"
#include "pukit/metrics.hpp"

using namespace pukit;

namespace {

std::filesystem::path tmp_file(const char* name) {
  auto p = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_CASE("scar split reproduces the 600 / 2,400 / 30,000 construction") {
  // 20,000 P vs 30,000 N source, then downsample P to 1:10 and label c=0.2
  LabeledDataset src = gaussian_mixture(50000, 3, Ratio{2, 3}, 4.0, 99);
  std::size_t pos = 0;
  for (int cid : src.class_ids) pos += cid == 1 ? 1 : 0;
  CHECK(pos == 20000);

  SplitSpec spec;
  spec.positive_class_ids = {1};
  spec.target_pn_ratio = {1, 10};
  spec.label_frequency = 0.2;
  spec.seed = 7;
  PUDataset pu = scar_label_split(src, spec);

  CHECK(pu.n == 33000);
  CHECK(pu.count_labeled() == 600);
  std::size_t unl_pos = 0, unl_neg = 0;
  for (std::size_t i = 0; i < pu.n; ++i) {
    if (pu.s[i] == 0) {
      if ((*pu.y_true)[i] == 1) ++unl_pos;
      else ++unl_neg;
    }
  }
  CHECK(unl_pos == 2400);
  CHECK(unl_neg == 30000);
  CHECK(pu.pi_true == doctest::Approx(2400.0 / 32400.0).epsilon(1e-15));
  CHECK(pu.c == 0.2);
}

TEST_CASE("scar split on the 1:9 shaped source") {
  LabeledDataset src = gaussian_mixture(50000, 3, Ratio{1, 9}, 4.0, 3);
  SplitSpec spec;
  spec.positive_class_ids = {1};
  spec.target_pn_ratio = {1, 9};
  spec.label_frequency = 0.2;
  spec.seed = 11;
  PUDataset pu = scar_label_split(src, spec);
  CHECK(pu.n == 50000);
  CHECK(pu.count_labeled() == 1000);
  CHECK(pu.count_unlabeled() == 49000);
}

TEST_CASE("scar split edge cases") {
  LabeledDataset src = gaussian_mixture(110, 2, Ratio{1, 10}, 4.0, 5);
  SplitSpec spec;
  spec.positive_class_ids = {1};
  spec.target_pn_ratio = {1, 10};
  spec.label_frequency = 1.0;
  spec.seed = 1;
  PUDataset pu = scar_label_split(src, spec);
  CHECK(pu.pi_true == 0.0);  // c=1: every kept positive is labeled
  CHECK(pu.count_labeled() == 10);

  spec.label_frequency = 0.0;
  try {
    scar_label_split(src, spec);
    FAIL("expected degenerate error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
    CHECK(std::string(e.what()).find("no labeled positives") != std::string::npos);
  }

  spec.label_frequency = 0.2;
  spec.target_pn_ratio = {2, 1};  // needs 200 positives, only 10 exist
  try {
    scar_label_split(src, spec);
    FAIL("expected config error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Config);
  }

  spec.target_pn_ratio = {1, 10};
  spec.positive_class_ids = {0, 1};  // not a strict subset
  CHECK_THROWS_AS(scar_label_split(src, spec), Error);
}

TEST_CASE("gaussian mixture counts, determinism, separability") {
  LabeledDataset a = gaussian_mixture(1100, 4, Ratio{1, 10}, 4.0, 21);
  std::size_t pos = 0;
  for (int cid : a.class_ids) pos += cid == 1 ? 1 : 0;
  CHECK(pos == 100);
  CHECK(a.n == 1100);

  LabeledDataset b = gaussian_mixture(1100, 4, Ratio{1, 10}, 4.0, 21);
  CHECK(a.features == b.features);
  CHECK(a.class_ids == b.class_ids);

  // separation 8 in 2-d: the first coordinate is near Bayes-optimal
  LabeledDataset s = gaussian_mixture(4000, 2, Ratio{1, 1}, 8.0, 33);
  std::vector<double> score(s.n);
  std::vector<int> y(s.n);
  for (std::size_t i = 0; i < s.n; ++i) {
    score[i] = s.features[i * 2];
    y[i] = s.class_ids[i] == 1 ? 1 : -1;
  }
  CHECK(auc(score, y) > 0.99);

  CHECK_THROWS_AS(gaussian_mixture(5, 2, Ratio{1, 1000}, 4.0, 1), Error);
}

TEST_CASE("pu csv round trip is exact") {
  PUDataset d;
  d.n = 3;
  d.d = 2;
  d.features = {0.1, -2.5e-17, 3.14159265358979312, 1e300, -7.0, 0.0};
  d.s = {1, 0, 0};
  d.y_true = std::vector<int>{1, -1, 1};
  d.pi_true = 0.5;
  d.c = 0.5;  // the empirical rate: 1 labeled of 2 true positives
  auto path = tmp_file("pukit_roundtrip.csv");
  save_dataset(d, path);
  PUDataset back = load_pu_csv(path);
  CHECK(back.n == 3);
  CHECK(back.d == 2);
  CHECK(back.features == d.features);
  CHECK(back.s == d.s);
  CHECK(*back.y_true == *d.y_true);
  CHECK(back.pi_true == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(back.c == doctest::Approx(d.c).epsilon(1e-15));
  std::filesystem::remove(path);
}

TEST_CASE("pu csv without y column loads with empty ground truth") {
  PUDataset d;
  d.n = 2;
  d.d = 1;
  d.features = {1.5, -0.25};
  d.s = {1, 0};
  d.c = 0.5;
  d.pi_true = 0.0;
  auto path = tmp_file("pukit_noy.csv");
  save_dataset(d, path);
  PUDataset back = load_pu_csv(path);
  CHECK(!back.y_true.has_value());
  CHECK(back.features == d.features);
  std::filesystem::remove(path);
}

TEST_CASE("csv schema and parse errors") {
  auto path = tmp_file("pukit_bad.csv");
  {
    std::ofstream f(path);
    f << "f0,f1,klass\n1.0,2.0,1\n";
  }
  try {
    load_pu_csv(path);
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Schema);
  }
  {
    std::ofstream f(path);
    f << "f0,s\nnot_a_number,1\n";
  }
  try {
    load_pu_csv(path);
    FAIL("expected parse error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Parse);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  {
    std::ofstream f(path);
    f << "f0,s\n1.0,7\n";
  }
  try {
    load_pu_csv(path);
    FAIL("expected schema error for s outside 0/1");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Schema);
  }
  std::filesystem::remove(path);
}

TEST_CASE("labeled csv round trip") {
  LabeledDataset d = gaussian_mixture(20, 3, Ratio{1, 1}, 2.0, 8);
  auto path = tmp_file("pukit_labeled.csv");
  save_dataset(d, path);
  LabeledDataset back = load_labeled_csv(path);
  CHECK(back.features == d.features);
  CHECK(back.class_ids == d.class_ids);
  auto v = load_dataset(path, DatasetFormat::labeled);
  CHECK(std::holds_alternative<LabeledDataset>(v));
  std::filesystem::remove(path);
}

TEST_CASE("identity augmentation policy copies the input") {
  AugmentationPolicy p;
  p.transforms.push_back({0.0, GaussianNoise{0.0}});
  p.transforms.push_back({0.0, CoordinateMask{0.5}});
  std::vector<double> x = {1, 2, 3, 4};
  Rng rng(5);
  auto views = augment_views(x, p, 3, rng);
  CHECK(views.size() == 3);
  for (const auto& v : views) CHECK(v == x);
}

TEST_CASE("augmentation is reproducible under the rng seed") {
  auto p = AugmentationPolicy::vector_default();
  std::vector<double> x = {0.5, -1.5, 2.0, 0.0, 3.0};
  Rng r1(42), r2(42);
  auto a = augment_views(x, p, 2, r1);
  auto b = augment_views(x, p, 2, r2);
  CHECK(a == b);
}

TEST_CASE("masking rate 0.5 zeroes about half the coordinates") {
  AugmentationPolicy p;
  p.transforms.push_back({1.0, CoordinateMask{0.5}});
  std::vector<double> x(8, 1.0);
  Rng rng(77);
  double zeroed = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto views = augment_views(x, p, 2, rng);
    for (double v : views[0]) zeroed += v == 0.0 ? 1.0 : 0.0;
  }
  CHECK(zeroed / draws == doctest::Approx(4.0).epsilon(0.02));
}

TEST_CASE("raster transforms: flip is an involution, full crop is identity") {
  AugmentationPolicy p;
  p.raster_width = 2;
  p.raster_height = 2;
  p.transforms.push_back({1.0, HorizontalFlip{}});
  std::vector<double> img = {1, 2, 3, 4};
  Rng rng(1);
  auto once = augment_views(img, p, 2, rng)[0];
  CHECK(once == std::vector<double>{2, 1, 4, 3});
  auto twice = augment_views(once, p, 2, rng)[0];
  CHECK(twice == img);

  AugmentationPolicy q;
  q.raster_width = 2;
  q.raster_height = 2;
  q.transforms.push_back({1.0, CropResize{1.0, 1.0}});
  auto same = augment_views(img, q, 2, rng)[0];
  CHECK(same == img);
}

TEST_CASE("crop-resize output stays within the input range") {
  AugmentationPolicy p;
  p.raster_width = 6;
  p.raster_height = 6;
  p.transforms.push_back({1.0, CropResize{0.4, 0.9}});
  Rng rng(91);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> img(36);
    for (double& v : img) v = rng.uniform(-3.0, 3.0);
    double lo = *std::min_element(img.begin(), img.end());
    double hi = *std::max_element(img.begin(), img.end());
    for (const auto& view : augment_views(img, p, 2, rng))
      for (double v : view) {
        CHECK(v >= lo - 1e-12);  // bilinear samples are convex combinations
        CHECK(v <= hi + 1e-12);
      }
  }
}

TEST_CASE("augment_views needs at least two views") {
  auto p = AugmentationPolicy::vector_default();
  std::vector<double> x = {1.0, 2.0};
  Rng rng(1);
  CHECK_THROWS_AS(augment_views(x, p, 1, rng), Error);
}

TEST_CASE("minibatch sampling basics") {
  LabeledDataset src = gaussian_mixture(40, 2, Ratio{1, 3}, 3.0, 2);
  SplitSpec spec;
  spec.positive_class_ids = {1};
  spec.target_pn_ratio = {1, 3};
  spec.label_frequency = 0.5;
  spec.seed = 9;
  PUDataset pu = scar_label_split(src, spec);

  Rng r1(4), r2(4);
  auto full = sample_minibatch(pu, pu.n, r1, false);
  std::set<std::size_t> uniq(full.begin(), full.end());
  CHECK(uniq.size() == pu.n);
  auto again = sample_minibatch(pu, pu.n, r2, false);
  CHECK(full == again);

  PUDataset all_pos = pu;
  std::fill(all_pos.s.begin(), all_pos.s.end(), std::uint8_t{1});
  all_pos.y_true.reset();
  all_pos.pi_true = 0.0;
  Rng r3(1);
  CHECK_THROWS_AS(sample_minibatch(all_pos, 4, r3, true), Error);
}

TEST_CASE("require_both_kinds resamples until both label kinds appear") {
  PUDataset pu;
  pu.n = 10;
  pu.d = 1;
  pu.features.assign(10, 0.0);
  pu.s.assign(10, 0);
  pu.s[3] = 1;  // a single labeled positive: most raw draws miss it
  Rng rng(55);
  for (int rep = 0; rep < 500; ++rep) {
    auto idx = sample_minibatch(pu, 3, rng, true);
    bool has_pos = false, has_unl = false;
    for (auto i : idx) (pu.s[i] == 1 ? has_pos : has_unl) = true;
    CHECK(has_pos);
    CHECK(has_unl);
  }
}

TEST_CASE("minibatch positives per batch match the hypergeometric mean") {
  // 600 labeled in 33,000 rows, batch 128: expect 128*600/33000 = 2.327
  PUDataset pu;
  pu.n = 33000;
  pu.d = 1;
  pu.features.assign(pu.n, 0.0);
  pu.s.assign(pu.n, 0);
  for (std::size_t i = 0; i < 600; ++i) pu.s[i] = 1;
  Rng rng(123);
  double total = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    auto idx = rng.sample_without_replacement(pu.n, 128);
    for (auto j : idx) total += pu.s[j];
  }
  CHECK(total / draws == doctest::Approx(128.0 * 600.0 / 33000.0).epsilon(0.03));
}
