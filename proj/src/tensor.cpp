#include "pukit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace pukit {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ',';
    os << s[i];
  }
  os << ']';
  return os.str();
}

namespace detail {

namespace {
constexpr std::size_t kLinearBlock = 8;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= kLinearBlock) {
    double acc = 0.0;
    for (double x : v) acc += x;
    return acc;
  }
  std::size_t half = v.size() / 2;
  return pairwise_sum(v.subspan(0, half)) + pairwise_sum(v.subspan(half));
}

double pairwise_dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() <= kLinearBlock) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
  }
  std::size_t half = a.size() / 2;
  return pairwise_dot(a.subspan(0, half), b.subspan(0, half)) +
         pairwise_dot(a.subspan(half), b.subspan(half));
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace detail

namespace {

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) {
    if (d == 0) fail(ErrorKind::Shape, "tensor: zero dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::shared_ptr<detail::Node> make_node(Shape shape, std::vector<double> data,
                                        bool requires_grad) {
  auto n = std::make_shared<detail::Node>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return n;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape_numel(shape) != data.size())
    fail(ErrorKind::Shape, "tensor: shape " + shape_str(shape) + " does not match " +
                               std::to_string(data.size()) + " values");
  node_ = make_node(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor({1}, {v}, requires_grad);
}

Tensor Tensor::zeros(const Shape& s, bool requires_grad) {
  return Tensor(s, std::vector<double>(shape_numel(s), 0.0), requires_grad);
}

Tensor Tensor::full(const Shape& s, double v, bool requires_grad) {
  return Tensor(s, std::vector<double>(shape_numel(s), v), requires_grad);
}

Tensor Tensor::ones(const Shape& s) { return full(s, 1.0, false); }

const Shape& Tensor::shape() const {
  if (!node_) fail(ErrorKind::Contract, "tensor: use of an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const { return shape_numel(shape()); }

std::span<const double> Tensor::values() const {
  if (!node_) fail(ErrorKind::Contract, "tensor: use of an undefined tensor");
  return node_->data;
}

double Tensor::at(std::size_t flat_index) const {
  auto v = values();
  if (flat_index >= v.size())
    fail(ErrorKind::Contract, "tensor: index out of range");
  return v[flat_index];
}

double Tensor::item() const {
  if (size() != 1) fail(ErrorKind::Contract, "tensor: item() requires a scalar");
  return values()[0];
}

bool Tensor::requires_grad() const {
  if (!node_) fail(ErrorKind::Contract, "tensor: use of an undefined tensor");
  return node_->requires_grad;
}

Tensor GradMap::grad(const Tensor& param) const {
  if (!param.requires_grad())
    fail(ErrorKind::Contract, "backward: gradient queried for a tensor without requires_grad");
  auto it = grads_.find(param.node_.get());
  if (it == grads_.end()) return Tensor::zeros(param.shape());
  return Tensor(param.shape(), it->second);
}

bool GradMap::has(const Tensor& param) const {
  return grads_.count(param.node_.get()) > 0;
}

const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::Add: return "add";
    case OpKind::Sub: return "subtract";
    case OpKind::Mul: return "multiply";
    case OpKind::MatMul: return "matmul";
    case OpKind::Dot: return "dot";
    case OpKind::Neg: return "negate";
    case OpKind::Exp: return "exp";
    case OpKind::Log: return "log";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Relu: return "relu";
    case OpKind::Sum: return "sum";
    case OpKind::Mean: return "mean";
    case OpKind::MaxConst: return "max_with";
    case OpKind::L2Normalize: return "l2_normalize";
  }
  return "?";
}

namespace {

using detail::Node;
using detail::pairwise_dot;
using detail::pairwise_sum;
using detail::stable_sigmoid;

constexpr double kNormUnitSlack = 1e-12;
constexpr double kNormFloor = 1e-12;

// Shared forward kernel, used both at op construction and by replay().
void compute_record(OpKind kind, const std::vector<std::shared_ptr<Node>>& in,
                    Node& out, double c0, bool transpose_b,
                    std::vector<double>& aux) {
  switch (kind) {
    case OpKind::Add: {
      const auto& a = in[0]->data; const auto& b = in[1]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a[i] + b[i];
      break;
    }
    case OpKind::Sub: {
      const auto& a = in[0]->data; const auto& b = in[1]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a[i] - b[i];
      break;
    }
    case OpKind::Mul: {
      const auto& a = in[0]->data; const auto& b = in[1]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a[i] * b[i];
      break;
    }
    case OpKind::MatMul: {
      const Node& A = *in[0];
      const Node& B = *in[1];
      std::span<const double> a = A.data;
      std::span<const double> b = B.data;
      if (A.shape.size() == 2 && B.shape.size() == 2) {
        std::size_t n = A.shape[0], k = A.shape[1];
        if (transpose_b) {
          std::size_t m = B.shape[0];
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j)
              out.data[i * m + j] =
                  pairwise_dot(a.subspan(i * k, k), b.subspan(j * k, k));
        } else {
          std::size_t m = B.shape[1];
          std::vector<double> col(k);
          for (std::size_t j = 0; j < m; ++j) {
            for (std::size_t l = 0; l < k; ++l) col[l] = b[l * m + j];
            for (std::size_t i = 0; i < n; ++i)
              out.data[i * m + j] = pairwise_dot(a.subspan(i * k, k), col);
          }
        }
      } else if (A.shape.size() == 2 && B.shape.size() == 1) {
        std::size_t n = A.shape[0], k = A.shape[1];
        for (std::size_t i = 0; i < n; ++i)
          out.data[i] = pairwise_dot(a.subspan(i * k, k), b);
      } else {  // (k) x (k,m)
        std::size_t k = A.shape[0], m = B.shape[1];
        std::vector<double> col(k);
        for (std::size_t j = 0; j < m; ++j) {
          for (std::size_t l = 0; l < k; ++l) col[l] = b[l * m + j];
          out.data[j] = pairwise_dot(a, col);
        }
      }
      break;
    }
    case OpKind::Dot:
      out.data[0] = pairwise_dot(in[0]->data, in[1]->data);
      break;
    case OpKind::Neg: {
      const auto& a = in[0]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = -a[i];
      break;
    }
    case OpKind::Exp: {
      const auto& a = in[0]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = std::exp(a[i]);
      break;
    }
    case OpKind::Log: {
      const auto& a = in[0]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = std::log(a[i]);
      break;
    }
    case OpKind::Sigmoid: {
      const auto& a = in[0]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = stable_sigmoid(a[i]);
      break;
    }
    case OpKind::Relu: {
      const auto& a = in[0]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a[i] > 0.0 ? a[i] : 0.0;
      break;
    }
    case OpKind::Sum:
      out.data[0] = pairwise_sum(in[0]->data);
      break;
    case OpKind::Mean:
      out.data[0] = pairwise_sum(in[0]->data) / static_cast<double>(in[0]->data.size());
      break;
    case OpKind::MaxConst: {
      const auto& a = in[0]->data;
      for (std::size_t i = 0; i < a.size(); ++i) out.data[i] = a[i] > c0 ? a[i] : c0;
      break;
    }
    case OpKind::L2Normalize: {
      const Node& A = *in[0];
      std::size_t width = A.shape.back();
      std::size_t rows = A.data.size() / width;
      aux.assign(rows, 0.0);
      std::span<const double> a = A.data;
      for (std::size_t r = 0; r < rows; ++r) {
        auto row = a.subspan(r * width, width);
        double norm = std::sqrt(pairwise_dot(row, row));
        if (norm < kNormFloor)
          fail(ErrorKind::Degenerate,
               "l2_normalize: slice " + std::to_string(r) + " has near-zero norm");
        aux[r] = norm;
        if (std::abs(norm - 1.0) <= kNormUnitSlack) {
          // Already unit: pass through unchanged so the op is idempotent.
          std::copy(row.begin(), row.end(), out.data.begin() + r * width);
        } else {
          for (std::size_t i = 0; i < width; ++i)
            out.data[r * width + i] = row[i] / norm;
        }
      }
      break;
    }
  }
}

}  // namespace

namespace detail {

// Implementation-side bridge: lets the primitive free functions build
// records and wrap nodes without widening the public surface.
struct TensorAccess {
  using Record = Tape::Record;
  static const std::shared_ptr<Node>& node(const Tensor& t) { return t.node_; }
  static Tensor wrap(std::shared_ptr<Node> n) { return Tensor(std::move(n)); }
  static std::vector<Record>& records(Tape& t) { return t.records_; }
};

}  // namespace detail

namespace {

using Access = detail::TensorAccess;
using Record = Access::Record;

// Validates, computes, finite-checks and (when gradients are in play)
// records.
Tensor record_op(Tape& tape, Record r) {
  compute_record(r.kind, r.inputs, *r.output, r.c0, r.transpose_b, r.aux);
  for (double v : r.output->data)
    if (!std::isfinite(v))
      fail(ErrorKind::Numeric,
           std::string(op_name(r.kind)) + ": non-finite value in output");
  bool needs_grad = false;
  for (const auto& in : r.inputs) needs_grad = needs_grad || in->requires_grad;
  r.output->requires_grad = needs_grad;
  Tensor out = Access::wrap(r.output);
  if (needs_grad) Access::records(tape).push_back(std::move(r));
  return out;
}

std::shared_ptr<Node> out_node(Shape shape) {
  auto numel = shape_numel(shape);
  return make_node(std::move(shape), std::vector<double>(numel, 0.0), false);
}

Record elementwise_record(OpKind kind, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    fail(ErrorKind::Shape, std::string(op_name(kind)) + ": shape mismatch " +
                               shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  Record r;
  r.kind = kind;
  r.inputs = {Access::node(a), Access::node(b)};
  r.output = out_node(a.shape());
  return r;
}

Record unary_record(OpKind kind, const Tensor& a, Shape out_shape) {
  if (!a.defined())
    fail(ErrorKind::Contract, std::string(op_name(kind)) + ": undefined operand");
  Record r;
  r.kind = kind;
  r.inputs = {Access::node(a)};
  r.output = out_node(std::move(out_shape));
  return r;
}

}  // namespace

Tensor add(Tape& t, const Tensor& a, const Tensor& b) {
  return record_op(t, elementwise_record(OpKind::Add, a, b));
}

Tensor sub(Tape& t, const Tensor& a, const Tensor& b) {
  return record_op(t, elementwise_record(OpKind::Sub, a, b));
}

Tensor mul(Tape& t, const Tensor& a, const Tensor& b) {
  return record_op(t, elementwise_record(OpKind::Mul, a, b));
}

Tensor matmul(Tape& t, const Tensor& a, const Tensor& b, bool transpose_b) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  Shape out;
  if (sa.size() == 2 && sb.size() == 2) {
    if (transpose_b) {
      if (sa[1] != sb[1])
        fail(ErrorKind::Shape, "matmul: inner dimensions of " + shape_str(sa) +
                                   " and transposed " + shape_str(sb) + " do not match");
      out = {sa[0], sb[0]};
    } else {
      if (sa[1] != sb[0])
        fail(ErrorKind::Shape, "matmul: inner dimensions of " + shape_str(sa) +
                                   " and " + shape_str(sb) + " do not match");
      out = {sa[0], sb[1]};
    }
  } else if (sa.size() == 2 && sb.size() == 1 && !transpose_b) {
    if (sa[1] != sb[0])
      fail(ErrorKind::Shape, "matmul: matrix " + shape_str(sa) +
                                 " cannot act on vector " + shape_str(sb));
    out = {sa[0]};
  } else if (sa.size() == 1 && sb.size() == 2 && !transpose_b) {
    if (sa[0] != sb[0])
      fail(ErrorKind::Shape, "matmul: vector " + shape_str(sa) +
                                 " cannot act on matrix " + shape_str(sb));
    out = {sb[1]};
  } else {
    fail(ErrorKind::Shape, "matmul: unsupported operand ranks " + shape_str(sa) +
                               " x " + shape_str(sb));
  }
  Record r;
  r.kind = OpKind::MatMul;
  r.inputs = {Access::node(a), Access::node(b)};
  r.output = out_node(out);
  r.transpose_b = transpose_b;
  return record_op(t, std::move(r));
}

Tensor dot(Tape& t, const Tensor& a, const Tensor& b) {
  if (a.rank() != 1 || b.rank() != 1 || a.size() != b.size())
    fail(ErrorKind::Shape, "dot: needs two equal-length vectors, got " +
                               shape_str(a.shape()) + " and " + shape_str(b.shape()));
  Record r;
  r.kind = OpKind::Dot;
  r.inputs = {Access::node(a), Access::node(b)};
  r.output = out_node({1});
  return record_op(t, std::move(r));
}

Tensor neg(Tape& t, const Tensor& a) {
  return record_op(t, unary_record(OpKind::Neg, a, a.shape()));
}

Tensor exp(Tape& t, const Tensor& a) {
  return record_op(t, unary_record(OpKind::Exp, a, a.shape()));
}

Tensor log(Tape& t, const Tensor& a) {
  return record_op(t, unary_record(OpKind::Log, a, a.shape()));
}

Tensor sigmoid(Tape& t, const Tensor& a) {
  return record_op(t, unary_record(OpKind::Sigmoid, a, a.shape()));
}

Tensor relu(Tape& t, const Tensor& a) {
  return record_op(t, unary_record(OpKind::Relu, a, a.shape()));
}

Tensor sum(Tape& t, const Tensor& a) {
  return record_op(t, unary_record(OpKind::Sum, a, {1}));
}

Tensor mean(Tape& t, const Tensor& a) {
  return record_op(t, unary_record(OpKind::Mean, a, {1}));
}

Tensor max_with(Tape& t, const Tensor& a, double c) {
  auto r = unary_record(OpKind::MaxConst, a, a.shape());
  r.c0 = c;
  return record_op(t, std::move(r));
}

Tensor l2_normalize(Tape& t, const Tensor& a, int axis) {
  if (a.rank() < 1 || a.rank() > 2)
    fail(ErrorKind::Shape, "l2_normalize: rank must be 1 or 2, got " + shape_str(a.shape()));
  if (axis != static_cast<int>(a.rank()) - 1)
    fail(ErrorKind::Contract, "l2_normalize: only the trailing axis is supported");
  return record_op(t, unary_record(OpKind::L2Normalize, a, a.shape()));
}

void Tape::replay() {
  for (Record& r : records_)
    compute_record(r.kind, r.inputs, *r.output, r.c0, r.transpose_b, r.aux);
}

GradMap Tape::backward(const Tensor& root) const {
  if (!root.defined() || root.size() != 1)
    fail(ErrorKind::Contract, "backward: root must be a scalar tensor");
  const Node* root_node = root.node_.get();
  bool produced = false;
  for (const Record& r : records_)
    if (r.output.get() == root_node) { produced = true; break; }
  if (!produced)
    fail(ErrorKind::Provenance, "backward: root was not produced by this tape");

  GradMap out;
  auto& grads = out.grads_;
  auto grad_of = [&](const std::shared_ptr<Node>& n) -> std::vector<double>& {
    auto [it, fresh] = grads.try_emplace(n.get());
    if (fresh) {
      it->second.assign(n->data.size(), 0.0);
      out.keepalive_.push_back(n);
    }
    return it->second;
  };
  grad_of(root.node_)[0] = 1.0;

  for (auto rit = records_.rbegin(); rit != records_.rend(); ++rit) {
    const Record& r = *rit;
    auto git = grads.find(r.output.get());
    if (git == grads.end()) continue;
    const std::vector<double>& g = git->second;
    const auto& in = r.inputs;
    switch (r.kind) {
      case OpKind::Add: {
        if (in[0]->requires_grad) {
          auto& ga = grad_of(in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (in[1]->requires_grad) {
          auto& gb = grad_of(in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
        }
        break;
      }
      case OpKind::Sub: {
        if (in[0]->requires_grad) {
          auto& ga = grad_of(in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (in[1]->requires_grad) {
          auto& gb = grad_of(in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
        break;
      }
      case OpKind::Mul: {
        if (in[0]->requires_grad) {
          auto& ga = grad_of(in[0]);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * in[1]->data[i];
        }
        if (in[1]->requires_grad) {
          auto& gb = grad_of(in[1]);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * in[0]->data[i];
        }
        break;
      }
      case OpKind::MatMul: {
        const Node& A = *in[0];
        const Node& B = *in[1];
        if (A.shape.size() == 2 && B.shape.size() == 2) {
          std::size_t n = A.shape[0], k = A.shape[1];
          if (r.transpose_b) {
            std::size_t m = B.shape[0];  // C = A B^T
            if (A.requires_grad) {
              auto& ga = grad_of(in[0]);
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                  double gij = g[i * m + j];
                  for (std::size_t l = 0; l < k; ++l)
                    ga[i * k + l] += gij * B.data[j * k + l];
                }
            }
            if (B.requires_grad) {
              auto& gb = grad_of(in[1]);
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                  double gij = g[i * m + j];
                  for (std::size_t l = 0; l < k; ++l)
                    gb[j * k + l] += gij * A.data[i * k + l];
                }
            }
          } else {
            std::size_t m = B.shape[1];  // C = A B
            if (A.requires_grad) {
              auto& ga = grad_of(in[0]);
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                  double gij = g[i * m + j];
                  for (std::size_t l = 0; l < k; ++l)
                    ga[i * k + l] += gij * B.data[l * m + j];
                }
            }
            if (B.requires_grad) {
              auto& gb = grad_of(in[1]);
              for (std::size_t i = 0; i < n; ++i)
                for (std::size_t j = 0; j < m; ++j) {
                  double gij = g[i * m + j];
                  for (std::size_t l = 0; l < k; ++l)
                    gb[l * m + j] += gij * A.data[i * k + l];
                }
            }
          }
        } else if (A.shape.size() == 2) {  // (n,k) x (k)
          std::size_t n = A.shape[0], k = A.shape[1];
          if (A.requires_grad) {
            auto& ga = grad_of(in[0]);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t l = 0; l < k; ++l)
                ga[i * k + l] += g[i] * B.data[l];
          }
          if (B.requires_grad) {
            auto& gb = grad_of(in[1]);
            for (std::size_t i = 0; i < n; ++i)
              for (std::size_t l = 0; l < k; ++l)
                gb[l] += g[i] * A.data[i * k + l];
          }
        } else {  // (k) x (k,m)
          std::size_t k = A.shape[0], m = B.shape[1];
          if (A.requires_grad) {
            auto& ga = grad_of(in[0]);
            for (std::size_t l = 0; l < k; ++l)
              for (std::size_t j = 0; j < m; ++j)
                ga[l] += g[j] * B.data[l * m + j];
          }
          if (B.requires_grad) {
            auto& gb = grad_of(in[1]);
            for (std::size_t l = 0; l < k; ++l)
              for (std::size_t j = 0; j < m; ++j)
                gb[l * m + j] += g[j] * A.data[l];
          }
        }
        break;
      }
      case OpKind::Dot: {
        double g0 = g[0];
        if (in[0]->requires_grad) {
          auto& ga = grad_of(in[0]);
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g0 * in[1]->data[i];
        }
        if (in[1]->requires_grad) {
          auto& gb = grad_of(in[1]);
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g0 * in[0]->data[i];
        }
        break;
      }
      case OpKind::Neg: {
        auto& ga = grad_of(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] -= g[i];
        break;
      }
      case OpKind::Exp: {
        auto& ga = grad_of(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * r.output->data[i];
        break;
      }
      case OpKind::Log: {
        auto& ga = grad_of(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / in[0]->data[i];
        break;
      }
      case OpKind::Sigmoid: {
        auto& ga = grad_of(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
          double s = r.output->data[i];
          ga[i] += g[i] * s * (1.0 - s);
        }
        break;
      }
      case OpKind::Relu: {
        auto& ga = grad_of(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (in[0]->data[i] > 0.0) ga[i] += g[i];
        break;
      }
      case OpKind::Sum: {
        auto& ga = grad_of(in[0]);
        for (double& v : ga) v += g[0];
        break;
      }
      case OpKind::Mean: {
        auto& ga = grad_of(in[0]);
        double s = g[0] / static_cast<double>(ga.size());
        for (double& v : ga) v += s;
        break;
      }
      case OpKind::MaxConst: {
        auto& ga = grad_of(in[0]);
        for (std::size_t i = 0; i < g.size(); ++i)
          if (in[0]->data[i] > r.c0) ga[i] += g[i];
        break;
      }
      case OpKind::L2Normalize: {
        auto& ga = grad_of(in[0]);
        std::size_t width = in[0]->shape.back();
        std::size_t rows = in[0]->data.size() / width;
        for (std::size_t rr = 0; rr < rows; ++rr) {
          double norm = r.aux[rr];
          const double* z = r.output->data.data() + rr * width;
          const double* gr = g.data() + rr * width;
          double zg = 0.0;
          for (std::size_t i = 0; i < width; ++i) zg += z[i] * gr[i];
          for (std::size_t i = 0; i < width; ++i)
            ga[rr * width + i] += (gr[i] - z[i] * zg) / norm;
        }
        break;
      }
    }
  }

  // Intermediate grads are dropped; callers only see requires_grad leaves
  // (and intermediates they explicitly kept handles to).
  return out;
}

Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h) {
  if (!(h > 0.0)) fail(ErrorKind::Contract, "finite_difference_gradient: h must be positive");
  std::vector<double> base(x.values().begin(), x.values().end());
  std::vector<double> g(base.size(), 0.0);
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> up = base, dn = base;
    up[i] += h;
    dn[i] -= h;
    double fu = f(Tensor(x.shape(), up));
    double fd = f(Tensor(x.shape(), dn));
    if (!std::isfinite(fu) || !std::isfinite(fd))
      fail(ErrorKind::Numeric,
           "finite_difference_gradient: non-finite evaluation at coordinate " +
               std::to_string(i));
    g[i] = (fu - fd) / (2.0 * h);
  }
  return Tensor(x.shape(), std::move(g));
}

}  // namespace pukit
