#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "pukit/errors.hpp"

namespace pukit {

using Shape = std::vector<std::size_t>;

std::string shape_str(const Shape& s);

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
};

struct TensorAccess;  // implementation-side bridge into Tensor/Tape internals

// Tree (pairwise) reduction; fixed association order, so sums reproduce
// bit-for-bit regardless of how a batch was assembled.
double pairwise_sum(std::span<const double> v);
double pairwise_dot(std::span<const double> a, std::span<const double> b);

// Overflow-safe logistic function, shared by the sigmoid primitive and
// the scalar loss surface.
double stable_sigmoid(double x);

}  // namespace detail

// Dense 64-bit real tensor. Value-semantic handle to an immutable node;
// copies share storage. Mutation only happens through Tape::replay, which
// rewrites op outputs in place.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(const Shape& s, bool requires_grad = false);
  static Tensor full(const Shape& s, double v, bool requires_grad = false);
  static Tensor ones(const Shape& s);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  std::span<const double> values() const;
  double at(std::size_t flat_index) const;
  double item() const;  // requires size() == 1
  bool requires_grad() const;

  // Node identity; stable for the lifetime of the tensor.
  const void* node_id() const { return node_.get(); }

 private:
  friend class Tape;
  friend class GradMap;
  friend struct detail::TensorAccess;
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  std::shared_ptr<detail::Node> node_;
};

// Gradient of a scalar root with respect to every requires_grad tensor it
// depends on. Parameters the root does not depend on read back as zeros.
class GradMap {
 public:
  Tensor grad(const Tensor& param) const;
  bool has(const Tensor& param) const;

 private:
  friend class Tape;
  std::unordered_map<const detail::Node*, std::vector<double>> grads_;
  std::vector<std::shared_ptr<detail::Node>> keepalive_;
};

enum class OpKind : std::uint8_t {
  Add, Sub, Mul, MatMul, Dot, Neg, Exp, Log, Sigmoid, Relu,
  Sum, Mean, MaxConst, L2Normalize,
};

const char* op_name(OpKind k);

// Record of the primitive operations applied during a forward pass, in
// topological order. Owned by exactly one training loop; not thread safe.
class Tape {
 public:
  std::size_t size() const { return records_.size(); }

  // Recomputes every recorded output in order, in place. The result is
  // bit-identical to the original forward pass.
  void replay();

  // Reverse-mode sweep from a scalar root produced by this tape.
  GradMap backward(const Tensor& root) const;

 private:
  struct Record {
    OpKind kind;
    std::vector<std::shared_ptr<detail::Node>> inputs;
    std::shared_ptr<detail::Node> output;
    double c0 = 0.0;        // constant operand (max_with floor)
    bool transpose_b = false;
    std::vector<double> aux;  // per-slice norms for L2Normalize
  };

  friend struct detail::TensorAccess;
  std::vector<Record> records_;
};

// Primitives. Each validates shapes, computes the value, verifies the
// output is finite, and appends to the tape when any operand requires
// gradients. Elementwise ops demand exactly matching shapes.
Tensor add(Tape& t, const Tensor& a, const Tensor& b);
Tensor sub(Tape& t, const Tensor& a, const Tensor& b);
Tensor mul(Tape& t, const Tensor& a, const Tensor& b);
// Matrix product; supports (n,k)x(k,m), (n,k)x(k), (k)x(k,m), and with
// transpose_b the (n,k)x(m,k) -> (n,m) form.
Tensor matmul(Tape& t, const Tensor& a, const Tensor& b,
              bool transpose_b = false);
Tensor dot(Tape& t, const Tensor& a, const Tensor& b);
Tensor neg(Tape& t, const Tensor& a);
Tensor exp(Tape& t, const Tensor& a);
Tensor log(Tape& t, const Tensor& a);
Tensor sigmoid(Tape& t, const Tensor& a);
Tensor relu(Tape& t, const Tensor& a);
Tensor sum(Tape& t, const Tensor& a);   // all elements -> scalar
Tensor mean(Tape& t, const Tensor& a);  // all elements -> scalar
// Elementwise max(x, c). Gradient 1 where x > c strictly, 0 otherwise;
// exact ties take the constant branch so clamped risk terms stop
// gradient flow.
Tensor max_with(Tape& t, const Tensor& a, double c);
// Unit-normalize along the trailing axis (vectors, or the rows of a
// matrix). Slices whose norm is already within 1e-12 of one pass through
// unchanged, which makes the op exactly idempotent. Slices with norm
// below 1e-12 raise a degenerate-input error.
Tensor l2_normalize(Tape& t, const Tensor& a, int axis);

// Central finite differences (f(x+h e_i) - f(x-h e_i)) / 2h, the
// independent oracle for backward().
Tensor finite_difference_gradient(const std::function<double(const Tensor&)>& f,
                                  const Tensor& x, double h);

}  // namespace pukit
