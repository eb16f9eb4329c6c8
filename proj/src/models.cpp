#include "pukit/models.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "pukit/errors.hpp"

namespace pukit {

using nlohmann::json;

namespace {

std::string hex_doubles(std::span<const double> v) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(v.size() * 16);
  for (double d : v) {
    auto bits = std::bit_cast<std::uint64_t>(d);
    for (int shift = 60; shift >= 0; shift -= 4)
      out.push_back(digits[(bits >> shift) & 0xF]);
  }
  return out;
}

std::vector<double> unhex_doubles(const std::string& hex, std::size_t count) {
  if (hex.size() != count * 16)
    fail(ErrorKind::Integrity, "checkpoint: weight payload length mismatch");
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    for (std::size_t j = 0; j < 16; ++j) {
      char ch = hex[i * 16 + j];
      std::uint64_t nib = 0;
      if (ch >= '0' && ch <= '9') nib = static_cast<std::uint64_t>(ch - '0');
      else if (ch >= 'a' && ch <= 'f') nib = static_cast<std::uint64_t>(ch - 'a' + 10);
      else fail(ErrorKind::Integrity, "checkpoint: invalid hex digit in weights");
      bits = (bits << 4) | nib;
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

double glorot_limit(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

// Affine layer on the tape: X W + 1 b, bias broadcast through a ones
// column so everything stays within the primitive set.
Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& b_row) {
  std::size_t n = x.shape()[0];
  Tensor xw = matmul(tape, x, w);
  Tensor bias = matmul(tape, Tensor::ones({n, 1}), b_row);
  return add(tape, xw, bias);
}

}  // namespace

Mlp Mlp::init(std::vector<std::size_t> sizes, Rng& rng) {
  if (sizes.size() < 2)
    fail(ErrorKind::Config, "mlp: need at least input and output sizes");
  for (std::size_t s : sizes)
    if (s == 0) fail(ErrorKind::Config, "mlp: zero layer width");
  Mlp m;
  m.layer_sizes = std::move(sizes);
  for (std::size_t i = 0; i + 1 < m.layer_sizes.size(); ++i) {
    DenseLayer layer;
    layer.in = m.layer_sizes[i];
    layer.out = m.layer_sizes[i + 1];
    layer.w.resize(layer.in * layer.out);
    // biases start slightly positive: dead relu rows (and with them exact
    // zero vectors reaching the projector normalization) become a
    // measure-zero event instead of a 2^-width one
    layer.b.assign(layer.out, 0.1);
    double lim = glorot_limit(layer.in, layer.out);
    for (double& v : layer.w) v = rng.uniform(-lim, lim);
    m.layers.push_back(std::move(layer));
  }
  return m;
}

Tensor Mlp::forward(Tape& tape, const Tensor& x_batch, bool trainable,
                    std::vector<Tensor>* params) const {
  if (x_batch.rank() != 2 || x_batch.shape()[1] != input_dim())
    fail(ErrorKind::Shape, "mlp: input width " +
                               std::to_string(x_batch.rank() == 2 ? x_batch.shape()[1] : 0) +
                               " does not match first layer " + std::to_string(input_dim()));
  Tensor h = x_batch;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const DenseLayer& l = layers[i];
    Tensor w({l.in, l.out}, l.w, trainable);
    Tensor b({1, l.out}, l.b, trainable);
    if (params && trainable) {
      params->push_back(w);
      params->push_back(b);
    }
    h = affine(tape, h, w, b);
    if (i + 1 < layers.size()) h = relu(tape, h);
  }
  return h;
}

std::vector<std::vector<double>*> Mlp::param_refs() {
  std::vector<std::vector<double>*> refs;
  for (DenseLayer& l : layers) {
    refs.push_back(&l.w);
    refs.push_back(&l.b);
  }
  return refs;
}

std::string Mlp::architecture() const {
  std::ostringstream os;
  os << "mlp(";
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    if (i) os << '-';
    os << layer_sizes[i];
  }
  os << ')';
  return os.str();
}

Projector Projector::init(std::size_t repr_dim, std::size_t hidden,
                          std::size_t proj_dim, Rng& rng) {
  if (proj_dim < 2) fail(ErrorKind::Config, "projector: proj_dim must be >= 2");
  Projector p;
  p.net = Mlp::init({repr_dim, hidden, proj_dim}, rng);
  return p;
}

Tensor Projector::forward(Tape& tape, const Tensor& h_batch, bool trainable,
                          std::vector<Tensor>* params) const {
  Tensor z = net.forward(tape, h_batch, trainable, params);
  return l2_normalize(tape, z, 1);
}

std::string Projector::architecture() const {
  return "proj-" + net.architecture() + "+l2";
}

LinearClassifier LinearClassifier::init(std::size_t in, bool two_logit, Rng& rng) {
  if (in == 0) fail(ErrorKind::Config, "classifier: zero input width");
  LinearClassifier c;
  c.in = in;
  c.two_logit = two_logit;
  std::size_t rows = two_logit ? 2 : 1;
  c.w.resize(rows * in);
  c.b.assign(rows, 0.0);
  double lim = glorot_limit(in, rows);
  for (double& v : c.w) v = rng.uniform(-lim, lim);
  return c;
}

Tensor LinearClassifier::score(Tape& tape, const Tensor& h_batch, bool trainable,
                               std::vector<Tensor>* params) const {
  if (h_batch.rank() != 2 || h_batch.shape()[1] != in)
    fail(ErrorKind::Shape, "classifier: representation width mismatch");
  std::size_t n = h_batch.shape()[0];
  if (two_logit) {
    Tensor wt({2, in}, w, trainable);
    Tensor bt({1, 2}, b, trainable);
    if (params && trainable) {
      params->push_back(wt);
      params->push_back(bt);
    }
    Tensor logits = matmul(tape, h_batch, wt, /*transpose_b=*/true);
    return add(tape, logits, matmul(tape, Tensor::ones({n, 1}), bt));
  }
  Tensor wt({in}, w, trainable);
  Tensor bt({1}, b, trainable);
  if (params && trainable) {
    params->push_back(wt);
    params->push_back(bt);
  }
  Tensor scores = matmul(tape, h_batch, wt);
  return add(tape, scores, matmul(tape, Tensor::ones({n, 1}), bt));
}

std::vector<double> LinearClassifier::decision_scores(std::span<const double> h,
                                                      std::size_t n) const {
  if (h.size() != n * in)
    fail(ErrorKind::Shape, "classifier: representation width mismatch");
  const LinearClassifier* single = this;
  LinearClassifier collapsed;
  if (two_logit) {
    collapsed = collapse_two_logit(*this);
    single = &collapsed;
  }
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i)
    scores[i] = detail::pairwise_dot(h.subspan(i * in, in), single->w) + single->b[0];
  return scores;
}

std::vector<std::vector<double>*> LinearClassifier::param_refs() {
  return {&w, &b};
}

LinearClassifier collapse_two_logit(const LinearClassifier& clf) {
  if (!clf.two_logit)
    fail(ErrorKind::Contract, "collapse_two_logit: classifier is already single-logit");
  LinearClassifier out;
  out.in = clf.in;
  out.two_logit = false;
  out.w.resize(clf.in);
  for (std::size_t i = 0; i < clf.in; ++i)
    out.w[i] = clf.w[i] - clf.w[clf.in + i];
  out.b = {clf.b[0] - clf.b[1]};
  return out;
}

const char* component_kind_name(ComponentKind k) {
  switch (k) {
    case ComponentKind::encoder: return "encoder";
    case ComponentKind::projector: return "projector";
    case ComponentKind::classifier: return "classifier";
  }
  return "?";
}

namespace {

ComponentKind parse_kind(const std::string& name) {
  if (name == "encoder") return ComponentKind::encoder;
  if (name == "projector") return ComponentKind::projector;
  if (name == "classifier") return ComponentKind::classifier;
  fail(ErrorKind::Integrity, "checkpoint: unknown component kind '" + name + "'");
}

Checkpoint from_mlp(const Mlp& m, ComponentKind kind, Provenance prov) {
  Checkpoint c;
  c.kind = kind;
  c.layer_sizes = m.layer_sizes;
  for (const DenseLayer& l : m.layers) {
    c.params.emplace_back(Shape{l.in, l.out}, l.w);
    c.params.emplace_back(Shape{l.out}, l.b);
  }
  c.provenance = std::move(prov);
  return c;
}

Mlp mlp_from(const Checkpoint& ckpt) {
  Mlp m;
  m.layer_sizes = ckpt.layer_sizes;
  if (m.layer_sizes.size() < 2 || ckpt.params.size() != 2 * (m.layer_sizes.size() - 1))
    fail(ErrorKind::Integrity, "checkpoint: layer/parameter structure mismatch");
  for (std::size_t i = 0; i + 1 < m.layer_sizes.size(); ++i) {
    DenseLayer l;
    l.in = m.layer_sizes[i];
    l.out = m.layer_sizes[i + 1];
    const auto& [ws, wv] = ckpt.params[2 * i];
    const auto& [bs, bv] = ckpt.params[2 * i + 1];
    if (ws != Shape{l.in, l.out} || bs != Shape{l.out})
      fail(ErrorKind::Integrity, "checkpoint: parameter shapes do not match layers");
    l.w = wv;
    l.b = bv;
    m.layers.push_back(std::move(l));
  }
  return m;
}

}  // namespace

Checkpoint make_checkpoint(const Mlp& encoder, Provenance prov) {
  return from_mlp(encoder, ComponentKind::encoder, std::move(prov));
}

Checkpoint make_checkpoint(const Projector& projector, Provenance prov) {
  return from_mlp(projector.net, ComponentKind::projector, std::move(prov));
}

Checkpoint make_checkpoint(const LinearClassifier& clf, Provenance prov) {
  Checkpoint c;
  c.kind = ComponentKind::classifier;
  c.two_logit = clf.two_logit;
  std::size_t rows = clf.two_logit ? 2 : 1;
  c.params.emplace_back(Shape{rows, clf.in}, clf.w);
  c.params.emplace_back(Shape{rows}, clf.b);
  c.provenance = std::move(prov);
  return c;
}

Mlp encoder_from(const Checkpoint& ckpt) {
  if (ckpt.kind != ComponentKind::encoder)
    fail(ErrorKind::Kind, std::string("checkpoint holds a ") +
                              component_kind_name(ckpt.kind) + ", expected an encoder");
  return mlp_from(ckpt);
}

Projector projector_from(const Checkpoint& ckpt) {
  if (ckpt.kind != ComponentKind::projector)
    fail(ErrorKind::Kind, std::string("checkpoint holds a ") +
                              component_kind_name(ckpt.kind) + ", expected a projector");
  Projector p;
  p.net = mlp_from(ckpt);
  return p;
}

LinearClassifier classifier_from(const Checkpoint& ckpt) {
  if (ckpt.kind != ComponentKind::classifier)
    fail(ErrorKind::Kind, std::string("checkpoint holds a ") +
                              component_kind_name(ckpt.kind) + ", expected a classifier");
  if (ckpt.params.size() != 2)
    fail(ErrorKind::Integrity, "checkpoint: classifier must hold weight and bias");
  LinearClassifier c;
  c.two_logit = ckpt.two_logit;
  std::size_t rows = c.two_logit ? 2 : 1;
  const auto& [ws, wv] = ckpt.params[0];
  const auto& [bs, bv] = ckpt.params[1];
  if (ws.size() != 2 || ws[0] != rows || bs != Shape{rows})
    fail(ErrorKind::Integrity, "checkpoint: classifier parameter shapes invalid");
  c.in = ws[1];
  c.w = wv;
  c.b = bv;
  return c;
}

namespace {

json checkpoint_to_json(const Checkpoint& c) {
  json j;
  j["version"] = c.version;
  j["kind"] = component_kind_name(c.kind);
  if (c.kind == ComponentKind::classifier) j["two_logit"] = c.two_logit;
  else j["layer_sizes"] = c.layer_sizes;
  json params = json::array();
  for (const auto& [shape, values] : c.params) {
    json p;
    p["shape"] = shape;
    p["hex"] = hex_doubles(values);
    params.push_back(std::move(p));
  }
  j["params"] = std::move(params);
  j["provenance"] = {
      {"seed", c.provenance.seed},
      {"epochs", c.provenance.epochs},
      {"loss", c.provenance.loss},
      {"config_digest", c.provenance.config_digest},
      {"architecture", c.provenance.architecture},
      {"rng_algorithm", c.provenance.rng_algorithm},
      {"tool_version", c.provenance.tool_version},
  };
  return j;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Config, "cannot write checkpoint: " + path.string());
  out << checkpoint_to_json(ckpt).dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "cannot open checkpoint: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception&) {
    fail(ErrorKind::Integrity, "checkpoint: truncated or malformed file: " + path.string());
  }
  try {
    Checkpoint c;
    c.version = j.at("version").get<int>();
    if (c.version != 1)
      fail(ErrorKind::Version, "checkpoint: unsupported version " +
                                   std::to_string(c.version) + " in " + path.string());
    c.kind = parse_kind(j.at("kind").get<std::string>());
    if (c.kind == ComponentKind::classifier)
      c.two_logit = j.at("two_logit").get<bool>();
    else
      c.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    for (const auto& p : j.at("params")) {
      Shape shape = p.at("shape").get<Shape>();
      auto values = unhex_doubles(p.at("hex").get<std::string>(), numel(shape));
      c.params.emplace_back(std::move(shape), std::move(values));
    }
    const auto& prov = j.at("provenance");
    c.provenance.seed = prov.at("seed").get<std::uint64_t>();
    c.provenance.epochs = prov.at("epochs").get<std::size_t>();
    c.provenance.loss = prov.at("loss").get<std::string>();
    c.provenance.config_digest = prov.at("config_digest").get<std::string>();
    c.provenance.architecture = prov.at("architecture").get<std::string>();
    c.provenance.rng_algorithm = prov.at("rng_algorithm").get<std::string>();
    c.provenance.tool_version = prov.at("tool_version").get<std::string>();
    return c;
  } catch (const json::exception&) {
    fail(ErrorKind::Integrity, "checkpoint: missing or invalid fields in " + path.string());
  }
}

std::string bytes_digest(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  static const char* digits = "0123456789abcdef";
  for (int i = 0; i < 16; ++i) buf[i] = digits[(h >> (60 - 4 * i)) & 0xF];
  buf[16] = '\0';
  return std::string(buf);
}

std::string checkpoint_digest(const Checkpoint& ckpt) {
  return bytes_digest(checkpoint_to_json(ckpt).dump());
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::Config, "cannot open file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return bytes_digest(ss.str());
}

}  // namespace pukit
