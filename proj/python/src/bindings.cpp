#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "pukit/data.hpp"
#include "pukit/losses.hpp"
#include "pukit/metrics.hpp"
#include "pukit/models.hpp"
#include "pukit/train.hpp"

namespace py = pybind11;
using namespace pukit;

namespace {

std::vector<std::uint8_t> to_flags(const std::vector<int>& v) {
  std::vector<std::uint8_t> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] != 0 && v[i] != 1)
      throw py::value_error("flags must be 0 or 1");
    out[i] = static_cast<std::uint8_t>(v[i]);
  }
  return out;
}

ViewBatch make_view_batch(const std::vector<std::vector<double>>& rows,
                          std::size_t n, std::size_t m) {
  if (rows.empty() || rows.size() != n * m)
    throw py::value_error("expected n*m projection rows");
  ViewBatch vb;
  vb.n = n;
  vb.m = m;
  vb.dim = rows[0].size();
  vb.z.reserve(rows.size() * vb.dim);
  for (const auto& r : rows) {
    if (r.size() != vb.dim) throw py::value_error("ragged projection rows");
    vb.z.insert(vb.z.end(), r.begin(), r.end());
  }
  return vb;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "PU learning toolkit: losses, metrics, synthesis, and the "
            "two-step training pipeline";
  m.attr("__version__") = "0.1.0";
  m.attr("RNG_ALGORITHM") = Rng::kAlgorithm;

  py::register_exception<Error>(m, "PukitError");

  // --- configs and records ---
  py::class_<ContrastiveConfig>(m, "ContrastiveConfig")
      .def(py::init([](double tau, double tau_plus, std::size_t views) {
             ContrastiveConfig c{tau, tau_plus, views};
             c.validate();
             return c;
           }),
           py::arg("tau") = 0.5, py::arg("tau_plus") = 0.1, py::arg("views") = 2)
      .def_readwrite("tau", &ContrastiveConfig::tau)
      .def_readwrite("tau_plus", &ContrastiveConfig::tau_plus)
      .def_readwrite("views", &ContrastiveConfig::views);

  py::class_<PULossConfig>(m, "PULossConfig")
      .def(py::init([](double pi, double pi_prime) {
             PULossConfig c{pi, pi_prime};
             c.validate();
             return c;
           }),
           py::arg("pi"), py::arg("pi_prime") = 0.5)
      .def_readwrite("pi", &PULossConfig::pi)
      .def_readwrite("pi_prime", &PULossConfig::pi_prime);

  py::class_<RiskComponents>(m, "RiskComponents")
      .def(py::init<>())
      .def_readwrite("l_pos_as_pos", &RiskComponents::l_pos_as_pos)
      .def_readwrite("l_unl_as_neg", &RiskComponents::l_unl_as_neg)
      .def_readwrite("l_pos_as_neg", &RiskComponents::l_pos_as_neg)
      .def_readwrite("n_pos", &RiskComponents::n_pos)
      .def_readwrite("n_unl", &RiskComponents::n_unl);

  py::class_<MetricsRecord>(m, "MetricsRecord")
      .def_readonly("accuracy", &MetricsRecord::accuracy)
      .def_readonly("f1", &MetricsRecord::f1)
      .def_readonly("auc", &MetricsRecord::auc)
      .def_readonly("n_test", &MetricsRecord::n_test)
      .def_readonly("threshold", &MetricsRecord::threshold)
      .def("__repr__", [](const MetricsRecord& r) {
        return "MetricsRecord(accuracy=" + std::to_string(r.accuracy) +
               ", f1=" + std::to_string(r.f1) + ", auc=" + std::to_string(r.auc) + ")";
      });

  // --- losses ---
  m.def("sigmoid_loss", &sigmoid_loss, py::arg("score"), py::arg("target"));
  m.def(
      "risk_components",
      [](const std::vector<double>& scores, const std::vector<int>& s) {
        return risk_components(scores, to_flags(s));
      },
      py::arg("scores"), py::arg("s"));
  m.def("nnpu_loss", &nnpu_loss, py::arg("rc"), py::arg("cfg"));
  m.def("imbnnpu_loss", &imbnnpu_loss, py::arg("rc"), py::arg("cfg"));
  m.def(
      "weighted_bce_loss",
      [](const std::vector<double>& probs, const std::vector<int>& y, double w_pos) {
        return weighted_bce_loss(probs, to_flags(y), w_pos);
      },
      py::arg("probs"), py::arg("y"), py::arg("w_pos"));
  m.def(
      "pair_similarity",
      [](const std::vector<double>& a, const std::vector<double>& b, double tau) {
        return pair_similarity(a, b, tau);
      },
      py::arg("z_a"), py::arg("z_b"), py::arg("tau"));
  m.def(
      "debiased_negative_estimate",
      [](const std::vector<std::vector<double>>& rows, std::size_t n, std::size_t m_,
         std::size_t i, std::size_t k, const ContrastiveConfig& cfg) {
        return debiased_negative_estimate(make_view_batch(rows, n, m_), i, k, cfg);
      },
      py::arg("projections"), py::arg("n"), py::arg("m"), py::arg("i"), py::arg("k"),
      py::arg("cfg"));
  m.def("debiased_pair_loss", &debiased_pair_loss, py::arg("pos_sim"), py::arg("d_u"),
        py::arg("n_neg"), py::arg("cfg"));
  m.def(
      "batch_contrastive_objective",
      [](const std::vector<std::vector<double>>& rows, std::size_t n, std::size_t m_,
         const ContrastiveConfig& cfg) {
        return batch_contrastive_objective(make_view_batch(rows, n, m_), cfg);
      },
      py::arg("projections"), py::arg("n"), py::arg("m"), py::arg("cfg"));
  m.def(
      "balance_pn_sigmoid_risk",
      [](const std::vector<double>& scores, const std::vector<int>& y, double pi_prime) {
        return balance_pn_sigmoid_risk(scores, y, pi_prime);
      },
      py::arg("scores"), py::arg("y"), py::arg("pi_prime") = 0.5);
  m.def(
      "softmax_risk",
      [](const std::vector<double>& logit_pairs, const std::vector<int>& y,
         double pi_prime) { return softmax_risk(logit_pairs, y, pi_prime); },
      py::arg("logit_pairs"), py::arg("y"), py::arg("pi_prime") = 0.5);

  // --- metrics ---
  m.def(
      "accuracy",
      [](const std::vector<int>& p, const std::vector<int>& t) { return accuracy(p, t); },
      py::arg("pred"), py::arg("truth"));
  m.def(
      "f1_score",
      [](const std::vector<int>& p, const std::vector<int>& t) { return f1_score(p, t); },
      py::arg("pred"), py::arg("truth"));
  m.def(
      "auc",
      [](const std::vector<double>& s, const std::vector<int>& t) { return auc(s, t); },
      py::arg("scores"), py::arg("truth"));

  // --- theory checks ---
  m.def(
      "lemma1_numeric_check",
      [](std::size_t trials, std::size_t dims, std::uint64_t seed) {
        CheckReport r = lemma1_numeric_check(trials, dims, seed);
        return py::dict(py::arg("trials") = r.trials, py::arg("violations") = r.violations,
                        py::arg("max_slack") = r.max_slack);
      },
      py::arg("trials") = 1000, py::arg("dims") = 8, py::arg("seed") = 0);
  m.def(
      "equivalence_check",
      [](std::size_t trials, std::uint64_t seed) {
        EquivalenceReport r = equivalence_check(trials, seed);
        return py::dict(py::arg("trials") = r.trials,
                        py::arg("max_abs_diff") = r.max_abs_diff);
      },
      py::arg("trials") = 1000, py::arg("seed") = 0);
  m.def(
      "gradient_check_suite",
      [](std::size_t cases, std::uint64_t seed) {
        py::list out;
        for (const auto& r : gradient_check_suite(cases, seed))
          out.append(py::dict(py::arg("loss") = r.loss, py::arg("cases") = r.cases,
                              py::arg("failures") = r.failures,
                              py::arg("max_rel_err") = r.max_rel_err));
        return out;
      },
      py::arg("cases") = 25, py::arg("seed") = 0);

  // --- data ---
  py::class_<LabeledDataset>(m, "LabeledDataset")
      .def_readonly("n", &LabeledDataset::n)
      .def_readonly("d", &LabeledDataset::d)
      .def_readonly("features", &LabeledDataset::features)
      .def_readonly("class_ids", &LabeledDataset::class_ids)
      .def_readonly("name", &LabeledDataset::name);

  py::class_<PUDataset>(m, "PUDataset")
      .def_readonly("n", &PUDataset::n)
      .def_readonly("d", &PUDataset::d)
      .def_readonly("features", &PUDataset::features)
      .def_property_readonly(
          "s",
          [](const PUDataset& d) { return std::vector<int>(d.s.begin(), d.s.end()); })
      .def_property_readonly("y_true",
                             [](const PUDataset& d) -> py::object {
                               if (!d.y_true) return py::none();
                               return py::cast(*d.y_true);
                             })
      .def_readonly("pi_true", &PUDataset::pi_true)
      .def_readonly("c", &PUDataset::c)
      .def("count_labeled", &PUDataset::count_labeled)
      .def("count_unlabeled", &PUDataset::count_unlabeled);

  m.def(
      "gaussian_mixture",
      [](std::size_t n, std::size_t d, const std::string& ratio, double separation,
         std::uint64_t seed) {
        return gaussian_mixture(n, d, Ratio::parse(ratio), separation, seed);
      },
      py::arg("n"), py::arg("d"), py::arg("ratio") = "1:10",
      py::arg("separation") = 8.0, py::arg("seed") = 0);
  m.def(
      "scar_label_split",
      [](const LabeledDataset& src, const std::vector<int>& positive_class_ids,
         const std::string& ratio, double c, std::uint64_t seed) {
        SplitSpec spec;
        spec.positive_class_ids = positive_class_ids;
        spec.target_pn_ratio = Ratio::parse(ratio);
        spec.label_frequency = c;
        spec.seed = seed;
        return scar_label_split(src, spec);
      },
      py::arg("src"), py::arg("positive_class_ids"), py::arg("ratio"),
      py::arg("c") = 0.2, py::arg("seed") = 0);
  m.def("save_pu_csv",
        [](const PUDataset& d, const std::filesystem::path& p) { save_dataset(d, p); },
        py::arg("data"), py::arg("path"));
  m.def("load_pu_csv", &load_pu_csv, py::arg("path"));

  // --- models and training ---
  py::class_<Mlp>(m, "Encoder")
      .def_property_readonly("layer_sizes",
                             [](const Mlp& e) { return e.layer_sizes; })
      .def("architecture", &Mlp::architecture);
  py::class_<Projector>(m, "Projector")
      .def("architecture", &Projector::architecture);
  py::class_<LinearClassifier>(m, "LinearClassifier")
      .def_readonly("two_logit", &LinearClassifier::two_logit)
      .def_readonly("w", &LinearClassifier::w)
      .def_readonly("b", &LinearClassifier::b);
  m.def("collapse_two_logit", &collapse_two_logit, py::arg("clf"));

  m.def(
      "save_encoder",
      [](const Mlp& e, const std::filesystem::path& p) {
        Provenance prov;
        prov.rng_algorithm = Rng::kAlgorithm;
        prov.architecture = e.architecture();
        prov.tool_version = "0.1.0";
        save_checkpoint(make_checkpoint(e, prov), p);
      },
      py::arg("encoder"), py::arg("path"));
  m.def("load_encoder",
        [](const std::filesystem::path& p) { return encoder_from(load_checkpoint(p)); },
        py::arg("path"));

  m.def(
      "pretrain",
      [](const PUDataset& data, std::size_t epochs, std::size_t batch_size,
         const ContrastiveConfig& contrastive, const std::vector<std::size_t>& encoder,
         std::size_t proj_dim, double lr, double noise_sigma, std::uint64_t seed) {
        PretrainConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.contrastive = contrastive;
        cfg.encoder_sizes = encoder.empty()
                                ? std::vector<std::size_t>{data.d, 64, 32}
                                : encoder;
        cfg.proj_dim = proj_dim;
        cfg.adam.lr = lr;
        AugmentationPolicy aug;
        aug.transforms.push_back({1.0, GaussianNoise{noise_sigma}});
        cfg.augment = aug;
        cfg.seed = seed;
        PretrainResult r = pretrain(data, cfg);
        return py::make_tuple(std::move(r.encoder), std::move(r.projector),
                              r.epoch_loss);
      },
      py::arg("data"), py::arg("epochs") = 10, py::arg("batch_size") = 128,
      py::arg("contrastive") = ContrastiveConfig{}, py::arg("encoder") = std::vector<std::size_t>{},
      py::arg("proj_dim") = 16, py::arg("lr") = 3e-4, py::arg("noise_sigma") = 0.5,
      py::arg("seed") = 0);

  m.def(
      "train_classifier",
      [](const Mlp& encoder, const PUDataset& train, std::size_t epochs,
         std::size_t batch_size, const std::string& loss, double pi, double pi_prime,
         const std::string& labels, double lr, std::uint64_t seed) {
        ClassifierConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.loss = parse_loss_kind(loss);
        cfg.pu.pi = pi;
        cfg.pu.pi_prime = pi_prime;
        cfg.labels = labels == "true" ? LabelSource::true_labels : LabelSource::pu_flags;
        cfg.adam.lr = lr;
        cfg.seed = seed;
        ClassifierResult r = train_classifier(encoder, train, cfg);
        return py::make_tuple(std::move(r.clf), r.trace.epoch_loss);
      },
      py::arg("encoder"), py::arg("train"), py::arg("epochs") = 60,
      py::arg("batch_size") = 128, py::arg("loss") = "imbnnpu", py::arg("pi") = 0.0,
      py::arg("pi_prime") = 0.5, py::arg("labels") = "pu", py::arg("lr") = 3e-3,
      py::arg("seed") = 0);

  m.def(
      "train_scratch",
      [](const PUDataset& train, const std::vector<std::size_t>& encoder_sizes,
         std::size_t epochs, std::size_t batch_size, const std::string& loss, double pi,
         double pi_prime, const std::string& labels, double lr, std::uint64_t seed) {
        ClassifierConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.loss = parse_loss_kind(loss);
        cfg.pu.pi = pi;
        cfg.pu.pi_prime = pi_prime;
        cfg.labels = labels == "true" ? LabelSource::true_labels : LabelSource::pu_flags;
        cfg.adam.lr = lr;
        cfg.seed = seed;
        ScratchResult r = train_scratch(train, encoder_sizes, cfg);
        return py::make_tuple(std::move(r.encoder), std::move(r.clf),
                              r.trace.epoch_loss);
      },
      py::arg("train"), py::arg("encoder_sizes"), py::arg("epochs") = 60,
      py::arg("batch_size") = 128, py::arg("loss") = "imbnnpu", py::arg("pi") = 0.0,
      py::arg("pi_prime") = 0.5, py::arg("labels") = "pu", py::arg("lr") = 3e-4,
      py::arg("seed") = 0);

  m.def(
      "train_supervised_baseline",
      [](const Mlp& encoder, const PUDataset& train, std::size_t epochs,
         std::size_t batch_size, bool weighted, double lr, std::uint64_t seed) {
        ClassifierConfig cfg;
        cfg.epochs = epochs;
        cfg.batch_size = batch_size;
        cfg.loss = weighted ? LossKind::wbce : LossKind::bce;
        cfg.adam.lr = lr;
        cfg.seed = seed;
        ClassifierResult r = train_supervised_baseline(encoder, train, cfg);
        return py::make_tuple(std::move(r.clf), r.trace.epoch_loss);
      },
      py::arg("encoder"), py::arg("train"), py::arg("epochs") = 60,
      py::arg("batch_size") = 128, py::arg("weighted") = true, py::arg("lr") = 3e-3,
      py::arg("seed") = 0);

  m.def(
      "prior_sweep",
      [](const Mlp& encoder, const PUDataset& train, const PUDataset& test,
         const std::vector<double>& factors, std::size_t epochs, std::size_t batch_size,
         double lr, std::uint64_t seed) {
        PriorSweepConfig cfg;
        cfg.factors = factors;
        cfg.classifier.epochs = epochs;
        cfg.classifier.batch_size = batch_size;
        cfg.classifier.adam.lr = lr;
        cfg.classifier.seed = seed;
        py::list out;
        for (const auto& row : prior_sweep(encoder, train, test, cfg))
          out.append(py::dict(py::arg("b_dis") = row.b_dis, py::arg("epoch") = row.epoch,
                              py::arg("loss") = row.loss,
                              py::arg("accuracy") = row.metrics.accuracy,
                              py::arg("f1") = row.metrics.f1,
                              py::arg("auc") = row.metrics.auc));
        return out;
      },
      py::arg("encoder"), py::arg("train"), py::arg("test"), py::arg("factors"),
      py::arg("epochs") = 40, py::arg("batch_size") = 128, py::arg("lr") = 3e-3,
      py::arg("seed") = 0);

  m.def("wbce_positive_weight",
        [](const PUDataset& data, const std::string& labels) {
          return wbce_positive_weight(
              data, labels == "true" ? LabelSource::true_labels : LabelSource::pu_flags);
        },
        py::arg("data"), py::arg("labels") = "pu");

  m.def("evaluate_model", &evaluate_model, py::arg("encoder"), py::arg("classifier"),
        py::arg("test"), py::arg("threshold") = 0.0);
}
