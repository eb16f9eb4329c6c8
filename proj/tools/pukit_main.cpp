// pukit: PU learning experiments from the command line.
//
// Subcommands: synth, pretrain, train, eval, sweep, check. Every run is a
// pure function of (config file, flag overrides, seed); each output
// directory receives a manifest that records the resolved configuration
// and its digest.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "pukit/data.hpp"
#include "pukit/losses.hpp"
#include "pukit/metrics.hpp"
#include "pukit/models.hpp"
#include "pukit/rng.hpp"
#include "pukit/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pukit;

namespace {

constexpr const char* kToolVersion = "0.1.0";

constexpr std::uint64_t kStreamSynthTrainSplit = 0;
constexpr std::uint64_t kStreamSynthTestSplit = 1;
constexpr std::uint64_t kStreamSynthTrainGen = 2;
constexpr std::uint64_t kStreamSynthTestGen = 3;
constexpr std::uint64_t kStreamPretrain = 10;
constexpr std::uint64_t kStreamClassifier = 11;

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  long long ms() const {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
  }
};

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot open config file: " + path);
  try {
    json j;
    in >> j;
    if (!j.is_object()) fail(ErrorKind::Config, "config root must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    fail(ErrorKind::Parse, std::string("config: ") + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

std::uint64_t resolve_seed(const json& cfg, std::optional<std::uint64_t> flag_seed) {
  if (flag_seed) return *flag_seed;
  return get_or<std::uint64_t>(cfg, "seed", 0);
}

fs::path resolve_out(const json& cfg, const std::string& flag_out) {
  std::string out = flag_out.empty() ? get_or<std::string>(cfg, "out", ".") : flag_out;
  fs::path dir(out);
  fs::create_directories(dir);
  return dir;
}

std::string run_id_for(const std::string& command, const std::string& digest) {
  return command + "-" + digest.substr(0, 8);
}

void write_manifest(const fs::path& out_dir, const std::string& command,
                    const json& resolved, const json& artifacts, const json& extra,
                    long long elapsed_ms) {
  json m;
  m["tool_version"] = kToolVersion;
  m["command"] = command;
  m["rng_algorithm"] = Rng::kAlgorithm;
  m["resolved_config"] = resolved;
  m["config_digest"] = bytes_digest(resolved.dump());
  m["artifacts"] = artifacts;
  if (!extra.is_null()) m["details"] = extra;
  m["timings_ms"] = {{"total", elapsed_ms}};
  std::ofstream f(out_dir / "manifest.json", std::ios::binary);
  f << m.dump(2) << '\n';
}

// --- config section parsers ---

SplitSpec split_from(const json& j, std::uint64_t seed) {
  SplitSpec s;
  s.positive_class_ids = get_or<std::vector<int>>(j, "positive_class_ids", {1});
  s.target_pn_ratio = Ratio::parse(get_or<std::string>(j, "ratio", "1:10"));
  s.label_frequency = get_or<double>(j, "c", 0.2);
  s.seed = seed;
  return s;
}

LabeledDataset generate_from(const json& j, std::uint64_t seed) {
  std::string kind = get_or<std::string>(j, "kind", "gaussian-mixture");
  if (kind != "gaussian-mixture")
    fail(ErrorKind::Config, "unknown generator kind '" + kind + "'");
  return gaussian_mixture(get_or<std::uint64_t>(j, "n", 5500),
                          get_or<std::uint64_t>(j, "d", 16),
                          Ratio::parse(get_or<std::string>(j, "ratio", "1:10")),
                          get_or<double>(j, "separation", 8.0), seed);
}

AugmentationPolicy augment_from(const json& j) {
  if (j.is_null() || j.empty()) return AugmentationPolicy::vector_default();
  AugmentationPolicy p;
  p.raster_width = get_or<std::uint64_t>(j, "raster_width", 0);
  p.raster_height = get_or<std::uint64_t>(j, "raster_height", 0);
  double sigma = get_or<double>(j, "noise_sigma", 0.0);
  if (sigma > 0.0)
    p.transforms.push_back({get_or<double>(j, "noise_probability", 1.0), GaussianNoise{sigma}});
  double rate = get_or<double>(j, "mask_rate", 0.0);
  if (rate > 0.0)
    p.transforms.push_back({get_or<double>(j, "mask_probability", 1.0), CoordinateMask{rate}});
  if (j.contains("scale_min") || j.contains("scale_max")) {
    GlobalScale gs{get_or<double>(j, "scale_min", 0.9), get_or<double>(j, "scale_max", 1.1)};
    p.transforms.push_back({get_or<double>(j, "scale_probability", 1.0), gs});
  }
  if (get_or<bool>(j, "crop", false))
    p.transforms.push_back({get_or<double>(j, "crop_probability", 1.0),
                            CropResize{get_or<double>(j, "crop_min_scale", 0.6),
                                       get_or<double>(j, "crop_max_scale", 1.0)}});
  if (get_or<bool>(j, "flip", false))
    p.transforms.push_back({get_or<double>(j, "flip_probability", 0.5), HorizontalFlip{}});
  if (get_or<bool>(j, "jitter", false))
    p.transforms.push_back({get_or<double>(j, "jitter_probability", 0.8),
                            BrightnessContrast{get_or<double>(j, "jitter_brightness", 0.2),
                                               get_or<double>(j, "jitter_contrast", 0.2)}});
  if (p.transforms.empty()) return AugmentationPolicy::vector_default();
  return p;
}

PretrainConfig pretrain_from(const json& j, std::size_t d, std::uint64_t seed) {
  PretrainConfig cfg;
  cfg.epochs = get_or<std::uint64_t>(j, "epochs", 50);
  cfg.batch_size = get_or<std::uint64_t>(j, "batch_size", 128);
  cfg.contrastive.tau = get_or<double>(j, "tau", 0.5);
  cfg.contrastive.tau_plus = get_or<double>(j, "tau_plus", 0.1);
  cfg.contrastive.views = get_or<std::uint64_t>(j, "views", 2);
  cfg.encoder_sizes =
      get_or<std::vector<std::size_t>>(j, "encoder", {d, 256, 128});
  cfg.projector_hidden = get_or<std::uint64_t>(j, "projector_hidden", 0);
  cfg.proj_dim = get_or<std::uint64_t>(j, "proj_dim", 16);
  cfg.adam.lr = get_or<double>(j, "lr", 3e-4);
  cfg.augment = augment_from(j.contains("augment") ? j.at("augment") : json());
  cfg.seed = child_seed(seed, kStreamPretrain);
  return cfg;
}

ClassifierConfig classifier_from_json(const json& j, std::uint64_t seed) {
  ClassifierConfig cfg;
  cfg.epochs = get_or<std::uint64_t>(j, "epochs", 100);
  cfg.batch_size = get_or<std::uint64_t>(j, "batch_size", 128);
  cfg.loss = parse_loss_kind(get_or<std::string>(j, "loss", "imbnnpu"));
  cfg.pu.pi = get_or<double>(j, "pi", 0.0);  // 0: take pi_true from the data
  cfg.pu.pi_prime = get_or<double>(j, "pi_prime", 0.5);
  std::string labels = get_or<std::string>(j, "labels", "pu");
  if (labels == "pu") cfg.labels = LabelSource::pu_flags;
  else if (labels == "true") cfg.labels = LabelSource::true_labels;
  else fail(ErrorKind::Config, "labels must be 'pu' or 'true'");
  cfg.adam.lr = get_or<double>(j, "lr", 3e-4);
  cfg.seed = child_seed(seed, kStreamClassifier);
  return cfg;
}

// --- CSV emission (one shared schema: run_id,b_dis,epoch,loss,acc,f1,auc) ---

void write_trace_header(std::ofstream& f) {
  f << "run_id,b_dis,epoch,loss,accuracy,f1,auc\n";
}

void write_trace_row(std::ofstream& f, const std::string& run_id,
                     std::optional<double> b_dis, std::optional<std::size_t> epoch,
                     std::optional<double> loss, const MetricsRecord* rec) {
  f << run_id << ',';
  if (b_dis) f << csv_double(*b_dis);
  f << ',';
  if (epoch) f << *epoch;
  f << ',';
  if (loss) f << csv_double(*loss);
  f << ',';
  if (rec) f << csv_double(rec->accuracy);
  f << ',';
  if (rec) f << csv_double(rec->f1);
  f << ',';
  if (rec) f << csv_double(rec->auc);
  f << '\n';
}

Provenance make_provenance(std::uint64_t seed, std::size_t epochs,
                           const std::string& loss, const std::string& digest,
                           const std::string& architecture) {
  Provenance p;
  p.seed = seed;
  p.epochs = epochs;
  p.loss = loss;
  p.config_digest = digest;
  p.architecture = architecture;
  p.rng_algorithm = Rng::kAlgorithm;
  p.tool_version = kToolVersion;
  return p;
}

// --- subcommands ---

int cmd_synth(const json& resolved, const fs::path& out_dir) {
  Timer timer;
  if (!resolved.contains("data"))
    fail(ErrorKind::Config, "synth: config needs a 'data' section");
  const json& data = resolved.at("data");
  std::uint64_t seed = resolved.at("seed").get<std::uint64_t>();

  if (!data.contains("train"))
    fail(ErrorKind::Config, "synth: data section needs a 'train' entry");
  LabeledDataset train_src =
      generate_from(data.at("train").at("generator"), child_seed(seed, kStreamSynthTrainGen));
  PUDataset train = scar_label_split(
      train_src, split_from(data.at("train").at("split"), child_seed(seed, kStreamSynthTrainSplit)));
  save_dataset(train, out_dir / "train.csv");

  json details;
  details["train"] = {{"rows", train.n},
                      {"labeled_positives", train.count_labeled()},
                      {"unlabeled", train.count_unlabeled()},
                      {"pi_true", train.pi_true},
                      {"c", train.c}};
  json artifacts;
  artifacts["train"] = (out_dir / "train.csv").string();

  if (data.contains("test")) {
    LabeledDataset test_src =
        generate_from(data.at("test").at("generator"), child_seed(seed, kStreamSynthTestGen));
    PUDataset test = scar_label_split(
        test_src, split_from(data.at("test").at("split"), child_seed(seed, kStreamSynthTestSplit)));
    save_dataset(test, out_dir / "test.csv");
    artifacts["test"] = (out_dir / "test.csv").string();
    details["test"] = {{"rows", test.n},
                       {"labeled_positives", test.count_labeled()},
                       {"pi_true", test.pi_true}};
  }

  write_manifest(out_dir, "synth", resolved, artifacts, details, timer.ms());
  std::cout << "synth: wrote " << train.n << " train rows ("
            << train.count_labeled() << " labeled positives, pi_true="
            << train.pi_true << ")\n";
  return 0;
}

int cmd_pretrain(const json& resolved, const fs::path& out_dir,
                 const std::string& data_path) {
  Timer timer;
  PUDataset data = load_pu_csv(data_path);
  std::uint64_t seed = resolved.at("seed").get<std::uint64_t>();
  PretrainConfig cfg = pretrain_from(
      resolved.contains("pretrain") ? resolved.at("pretrain") : json::object(), data.d,
      seed);
  if (cfg.encoder_sizes.front() != data.d)
    cfg.encoder_sizes.front() = data.d;

  std::string digest = bytes_digest(resolved.dump());
  std::string run_id = run_id_for("pretrain", digest);

  PretrainResult res = pretrain(data, cfg);

  Provenance enc_prov = make_provenance(cfg.seed, cfg.epochs, "debiased-contrastive",
                                        digest, res.encoder.architecture());
  save_checkpoint(make_checkpoint(res.encoder, enc_prov), out_dir / "encoder.json");
  Provenance proj_prov = make_provenance(cfg.seed, cfg.epochs, "debiased-contrastive",
                                         digest, res.projector.architecture());
  save_checkpoint(make_checkpoint(res.projector, proj_prov), out_dir / "projector.json");

  std::ofstream trace(out_dir / "pretrain_trace.csv", std::ios::binary);
  write_trace_header(trace);
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e)
    write_trace_row(trace, run_id, std::nullopt, e, res.epoch_loss[e], nullptr);

  json artifacts = {{"encoder", (out_dir / "encoder.json").string()},
                    {"projector", (out_dir / "projector.json").string()},
                    {"trace", (out_dir / "pretrain_trace.csv").string()}};
  write_manifest(out_dir, "pretrain", resolved, artifacts, json(), timer.ms());
  std::cout << "pretrain: " << cfg.epochs << " epochs, final objective "
            << res.epoch_loss.back() << "\n";
  return 0;
}

int cmd_train(const json& resolved, const fs::path& out_dir,
              const std::string& data_path, const std::string& encoder_path,
              bool scratch, const std::string& test_path) {
  Timer timer;
  PUDataset data = load_pu_csv(data_path);
  std::optional<PUDataset> test;
  if (!test_path.empty()) test = load_pu_csv(test_path);
  std::uint64_t seed = resolved.at("seed").get<std::uint64_t>();
  ClassifierConfig cfg = classifier_from_json(
      resolved.contains("classifier") ? resolved.at("classifier") : json::object(), seed);

  std::string digest = bytes_digest(resolved.dump());
  std::string run_id = run_id_for("train", digest);

  bool supervised = cfg.labels == LabelSource::true_labels;
  TrainTrace trace;
  LinearClassifier clf;
  std::string encoder_arch;

  if (scratch) {
    const json& pj = resolved.contains("pretrain") ? resolved.at("pretrain") : json::object();
    auto sizes = get_or<std::vector<std::size_t>>(pj, "encoder", {data.d, 256, 128});
    sizes.front() = data.d;
    ScratchResult res =
        supervised
            ? train_supervised_baseline_scratch(data, sizes, cfg, test ? &*test : nullptr)
            : train_scratch(data, sizes, cfg, test ? &*test : nullptr);
    encoder_arch = res.encoder.architecture();
    Provenance prov = make_provenance(cfg.seed, cfg.epochs, loss_kind_name(cfg.loss),
                                      digest, encoder_arch);
    save_checkpoint(make_checkpoint(res.encoder, prov), out_dir / "encoder.json");
    clf = std::move(res.clf);
    trace = std::move(res.trace);
  } else {
    if (encoder_path.empty())
      fail(ErrorKind::Config, "train: pass --encoder PATH or --scratch");
    Mlp encoder = encoder_from(load_checkpoint(encoder_path));
    encoder_arch = encoder.architecture();
    ClassifierResult res =
        supervised
            ? train_supervised_baseline(encoder, data, cfg, test ? &*test : nullptr)
            : train_classifier(encoder, data, cfg, test ? &*test : nullptr);
    clf = std::move(res.clf);
    trace = std::move(res.trace);
  }

  Provenance prov = make_provenance(cfg.seed, cfg.epochs, loss_kind_name(cfg.loss),
                                    digest, "linear(" + std::to_string(clf.in) + ")");
  save_checkpoint(make_checkpoint(clf, prov), out_dir / "classifier.json");

  std::ofstream tracef(out_dir / "train_trace.csv", std::ios::binary);
  write_trace_header(tracef);
  for (std::size_t e = 0; e < trace.epoch_loss.size(); ++e)
    write_trace_row(tracef, run_id, std::nullopt, e, trace.epoch_loss[e],
                    e < trace.epoch_metrics.size() ? &trace.epoch_metrics[e] : nullptr);

  json artifacts = {{"classifier", (out_dir / "classifier.json").string()},
                    {"trace", (out_dir / "train_trace.csv").string()}};
  if (scratch) artifacts["encoder"] = (out_dir / "encoder.json").string();
  json details = {{"loss", loss_kind_name(cfg.loss)},
                  {"encoder_architecture", encoder_arch},
                  {"final_loss", trace.epoch_loss.back()}};
  write_manifest(out_dir, "train", resolved, artifacts, details, timer.ms());
  std::cout << "train: " << loss_kind_name(cfg.loss) << ", final loss "
            << trace.epoch_loss.back() << "\n";
  return 0;
}

int cmd_eval(const json& resolved, const fs::path& out_dir,
             const std::string& encoder_path, const std::string& classifier_path,
             const std::string& test_path, double threshold) {
  Timer timer;
  Mlp encoder = encoder_from(load_checkpoint(encoder_path));
  LinearClassifier clf = classifier_from(load_checkpoint(classifier_path));
  PUDataset test = load_pu_csv(test_path);
  MetricsRecord rec = evaluate_model(encoder, clf, test, threshold);

  std::string digest = bytes_digest(resolved.dump());
  std::string run_id = run_id_for("eval", digest);
  std::ofstream f(out_dir / "metrics.csv", std::ios::binary);
  write_trace_header(f);
  write_trace_row(f, run_id, std::nullopt, std::nullopt, std::nullopt, &rec);

  json artifacts = {{"metrics", (out_dir / "metrics.csv").string()}};
  json details = {{"accuracy", rec.accuracy}, {"f1", rec.f1},     {"auc", rec.auc},
                  {"n_test", rec.n_test},     {"threshold", rec.threshold}};
  write_manifest(out_dir, "eval", resolved, artifacts, details, timer.ms());
  std::cout << "eval: accuracy " << rec.accuracy << ", f1 " << rec.f1 << ", auc "
            << rec.auc << "\n";
  return 0;
}

int cmd_sweep(const json& resolved, const fs::path& out_dir,
              const std::string& data_path, const std::string& test_path,
              const std::string& encoder_path) {
  Timer timer;
  PUDataset train = load_pu_csv(data_path);
  PUDataset test = load_pu_csv(test_path);
  Mlp encoder = encoder_from(load_checkpoint(encoder_path));
  std::uint64_t seed = resolved.at("seed").get<std::uint64_t>();

  PriorSweepConfig sweep;
  const json& sj = resolved.contains("sweep") ? resolved.at("sweep") : json::object();
  sweep.factors = get_or<std::vector<double>>(sj, "factors", {0.1, 0.5, 1.0, 2.0});
  sweep.classifier = classifier_from_json(
      resolved.contains("classifier") ? resolved.at("classifier") : json::object(), seed);

  auto rows = prior_sweep(encoder, train, test, sweep);

  std::string digest = bytes_digest(resolved.dump());
  std::string run_id = run_id_for("sweep", digest);
  std::ofstream f(out_dir / "sweep.csv", std::ios::binary);
  write_trace_header(f);
  for (const auto& row : rows)
    write_trace_row(f, run_id, row.b_dis, row.epoch, row.loss, &row.metrics);

  json artifacts = {{"sweep", (out_dir / "sweep.csv").string()}};
  json details = {{"factors", sweep.factors}, {"rows", rows.size()}};
  write_manifest(out_dir, "sweep", resolved, artifacts, details, timer.ms());
  std::cout << "sweep: " << rows.size() << " rows over " << sweep.factors.size()
            << " factors\n";
  return 0;
}

int cmd_check(const std::string& suite, std::uint64_t seed) {
  bool ok = true;
  if (suite == "theory") {
    CheckReport lemma = lemma1_numeric_check(1000, 8, seed);
    std::cout << "lemma1 sigmoid<=softmax: trials " << lemma.trials << ", violations: "
              << lemma.violations << ", max slack " << lemma.max_slack << "\n";
    ok = ok && lemma.violations == 0;

    CheckReport kernel = pointwise_kernel_check();
    std::cout << "pointwise 1-p<=-log p: trials " << kernel.trials << ", violations: "
              << kernel.violations << "\n";
    ok = ok && kernel.violations == 0;

    EquivalenceReport eq = equivalence_check(1000, seed + 1);
    std::cout << "sigmoid/softmax identity: trials " << eq.trials << ", max |diff| "
              << eq.max_abs_diff << "\n";
    ok = ok && eq.max_abs_diff <= 1e-12;

    // reduction identities
    Rng rng(seed + 2);
    std::size_t red_viol = 0;
    for (int i = 0; i < 1000; ++i) {
      RiskComponents rc;
      rc.l_pos_as_pos = rng.uniform01();
      rc.l_pos_as_neg = 1.0 - rc.l_pos_as_pos;
      rc.l_unl_as_neg = rng.uniform01();
      rc.n_pos = rc.n_unl = 1;
      PULossConfig cfg;
      cfg.pi = rng.uniform(0.01, 0.99);
      cfg.pi_prime = cfg.pi;
      if (std::abs(imbnnpu_loss(rc, cfg) - nnpu_loss(rc, cfg)) > 1e-12) ++red_viol;
    }
    std::cout << "imbnnpu(pi'=pi)==nnpu: trials 1000, violations: " << red_viol << "\n";
    ok = ok && red_viol == 0;

    std::size_t obj_viol = 0, floor_viol = 0;
    for (int rep = 0; rep < 200; ++rep) {
      std::size_t n = 2 + rng.below(7);
      ViewBatch vb;
      vb.n = n; vb.m = 2; vb.dim = 3;
      vb.z.resize(n * 2 * 3);
      for (std::size_t r = 0; r < n * 2; ++r) {
        double norm2 = 0;
        for (int j = 0; j < 3; ++j) {
          double v = rng.normal();
          vb.z[r * 3 + j] = v;
          norm2 += v * v;
        }
        for (int j = 0; j < 3; ++j) vb.z[r * 3 + j] /= std::sqrt(norm2);
      }
      ContrastiveConfig ccfg;
      ccfg.tau = rng.uniform(0.3, 1.0);
      ccfg.tau_plus = 0.0;
      if (std::abs(batch_contrastive_objective(vb, ccfg) -
                   biased_contrastive_objective(vb, ccfg.tau)) > 1e-12)
        ++obj_viol;
      ccfg.tau_plus = rng.uniform(0.0, 0.8);
      double floor = std::exp(-1.0 / ccfg.tau);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < 2; ++k)
          if (debiased_negative_estimate(vb, i, k, ccfg) < floor) ++floor_viol;
    }
    std::cout << "biased reduction (tau+=0): violations: " << obj_viol << "\n";
    std::cout << "d_u floor: violations: " << floor_viol << "\n";
    ok = ok && obj_viol == 0 && floor_viol == 0;
  } else if (suite == "gradients") {
    auto reports = gradient_check_suite(100, seed);
    for (const auto& r : reports) {
      std::cout << r.loss << ": cases " << r.cases << ", failures " << r.failures
                << ", max rel err " << r.max_rel_err << ", branches "
                << r.clamp_floor_cases << "/" << r.clamp_value_cases << "\n";
      ok = ok && r.failures == 0;
    }
  } else {
    fail(ErrorKind::Config, "check: unknown suite '" + suite + "' (theory|gradients)");
  }
  std::cout << (ok ? "all checks passed\n" : "CHECK FAILURES\n");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PU learning toolkit: debiased contrastive pretraining + "
               "imbalanced nnPU probes"};
  app.require_subcommand(1);

  std::string config_path, out_flag, data_path, test_path, encoder_path,
      classifier_path, loss_flag, labels_flag, suite = "theory";
  std::optional<std::uint64_t> seed_flag;
  std::optional<double> tau_plus_flag, pi_flag;
  bool scratch = false;
  double threshold = 0.0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON configuration file");
    sub->add_option("--seed", seed_flag, "top-level seed (overrides config)");
    sub->add_option("--out", out_flag, "output directory (overrides config)");
  };

  CLI::App* synth = app.add_subcommand("synth", "synthesize PU train/test datasets");
  add_common(synth);

  CLI::App* pre = app.add_subcommand("pretrain", "contrastive pretraining (step 1)");
  add_common(pre);
  pre->add_option("--data", data_path, "training csv")->required();
  pre->add_option("--tau-plus", tau_plus_flag, "prior correction override");

  CLI::App* train = app.add_subcommand("train", "classifier training (step 2)");
  add_common(train);
  train->add_option("--data", data_path, "training csv")->required();
  train->add_option("--test", test_path, "test csv for per-epoch metrics");
  train->add_option("--encoder", encoder_path, "frozen encoder checkpoint");
  train->add_flag("--scratch", scratch, "train encoder+classifier jointly");
  train->add_option("--loss", loss_flag, "imbnnpu|nnpu|wbce|bce");
  train->add_option("--labels", labels_flag, "pu|true (bce/wbce label source)");
  train->add_option("--pi", pi_flag, "class prior override");

  CLI::App* evalc = app.add_subcommand("eval", "evaluate a model on a labeled test set");
  add_common(evalc);
  evalc->add_option("--encoder", encoder_path, "encoder checkpoint")->required();
  evalc->add_option("--classifier", classifier_path, "classifier checkpoint")->required();
  evalc->add_option("--test", test_path, "test csv")->required();
  evalc->add_option("--threshold", threshold, "decision threshold on the logit");

  CLI::App* sweep = app.add_subcommand("sweep", "prior misspecification sweep");
  add_common(sweep);
  sweep->add_option("--data", data_path, "training csv")->required();
  sweep->add_option("--test", test_path, "test csv")->required();
  sweep->add_option("--encoder", encoder_path, "frozen encoder checkpoint")->required();

  CLI::App* check = app.add_subcommand("check", "run the verification suites");
  add_common(check);
  check->add_option("--suite", suite, "theory|gradients");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    json resolved = load_config(config_path);
    resolved["seed"] = resolve_seed(resolved, seed_flag);

    // flag overrides become part of the resolved (and digested) config
    if (tau_plus_flag) resolved["pretrain"]["tau_plus"] = *tau_plus_flag;
    if (!loss_flag.empty()) resolved["classifier"]["loss"] = loss_flag;
    if (!labels_flag.empty()) resolved["classifier"]["labels"] = labels_flag;
    if (pi_flag) resolved["classifier"]["pi"] = *pi_flag;

    if (check->parsed()) return cmd_check(suite, resolved["seed"].get<std::uint64_t>());

    fs::path out_dir = resolve_out(resolved, out_flag);
    if (synth->parsed()) return cmd_synth(resolved, out_dir);
    if (pre->parsed()) return cmd_pretrain(resolved, out_dir, data_path);
    if (train->parsed())
      return cmd_train(resolved, out_dir, data_path, encoder_path, scratch, test_path);
    if (evalc->parsed())
      return cmd_eval(resolved, out_dir, encoder_path, classifier_path, test_path, threshold);
    if (sweep->parsed()) return cmd_sweep(resolved, out_dir, data_path, test_path, encoder_path);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
}
