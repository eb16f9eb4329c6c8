#include <doctest.h>

#include <bit>
#include <cmath>

#include "pukit/rng.hpp"
#include "pukit/tensor.hpp"

using namespace pukit;

namespace {

bool bits_equal(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i]))
      return false;
  return true;
}

}  // namespace

TEST_CASE("matmul by the identity returns the vector") {
  Tape t;
  Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  Tensor v({3}, {2.5, -1.0, 7.0});
  Tensor r = matmul(t, eye, v);
  CHECK(r.shape() == Shape{3});
  CHECK(r.at(0) == 2.5);
  CHECK(r.at(1) == -1.0);
  CHECK(r.at(2) == 7.0);
}

TEST_CASE("relu and sigmoid basics") {
  Tape t;
  Tensor x({3}, {-1.0, 0.0, 2.0});
  Tensor r = relu(t, x);
  CHECK(r.at(0) == 0.0);
  CHECK(r.at(1) == 0.0);
  CHECK(r.at(2) == 2.0);
  CHECK(sigmoid(t, Tensor::scalar(0.0)).item() == 0.5);
}

TEST_CASE("shape mismatch names the primitive and shapes") {
  Tape t;
  Tensor a({2, 3}, std::vector<double>(6, 1.0));
  Tensor b({3}, {1, 2, 3});
  try {
    add(t, a, b);
    FAIL("expected a shape error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Shape);
    CHECK(std::string(e.what()).find("add") != std::string::npos);
    CHECK(std::string(e.what()).find("[2,3]") != std::string::npos);
  }
}

TEST_CASE("backward of sum of squares") {
  Tape t;
  Tensor x({3}, {1, 2, 3}, /*requires_grad=*/true);
  Tensor loss = sum(t, mul(t, x, x));
  GradMap g = t.backward(loss);
  Tensor gx = g.grad(x);
  CHECK(gx.at(0) == doctest::Approx(2.0));
  CHECK(gx.at(1) == doctest::Approx(4.0));
  CHECK(gx.at(2) == doctest::Approx(6.0));
}

TEST_CASE("backward of sigmoid(w.x) at w=0 is x/4") {
  Tape t;
  Tensor w({3}, {0, 0, 0}, true);
  Tensor x({3}, {0.5, -2.0, 3.0});
  Tensor loss = sigmoid(t, dot(t, w, x));
  Tensor g = t.backward(loss).grad(w);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(g.at(i) == doctest::Approx(0.25 * x.at(i)).epsilon(1e-12));
}

TEST_CASE("parameters the root ignores get zero gradients") {
  Tape t;
  Tensor p({2}, {1.0, 2.0}, true);
  Tensor q({2}, {3.0, 4.0}, true);
  Tensor loss = sum(t, mul(t, p, p));
  GradMap g = t.backward(loss);
  Tensor gq = g.grad(q);
  CHECK(gq.at(0) == 0.0);
  CHECK(gq.at(1) == 0.0);
}

TEST_CASE("backward rejects non-scalar and detached roots") {
  Tape t;
  Tensor x({2}, {1, 2}, true);
  Tensor v = mul(t, x, x);
  CHECK_THROWS_AS(t.backward(v), Error);   // non-scalar
  Tensor detached = Tensor::scalar(1.0, true);
  try {
    t.backward(detached);
    FAIL("expected provenance error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Provenance);
  }
}

TEST_CASE("finite differences: quadratic and constant") {
  auto square = [](const Tensor& x) { return x.item() * x.item(); };
  Tensor g = finite_difference_gradient(square, Tensor::scalar(3.0), 1e-4);
  CHECK(g.item() == doctest::Approx(6.0).epsilon(1e-7));

  auto constant = [](const Tensor&) { return 4.2; };
  Tensor gz = finite_difference_gradient(constant, Tensor({3}, {1, 2, 3}), 1e-4);
  for (std::size_t i = 0; i < 3; ++i) CHECK(gz.at(i) == 0.0);
}

TEST_CASE("l2_normalize: 3-4-5 triangle, idempotence, degenerate input") {
  Tape t;
  Tensor v({2}, {3.0, 4.0});
  Tensor z = l2_normalize(t, v, 0);
  CHECK(z.at(0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(z.at(1) == doctest::Approx(0.8).epsilon(1e-15));

  // exact idempotence on random draws
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    std::size_t d = 1 + rng.below(8);
    std::vector<double> raw(d);
    for (double& x : raw) x = rng.normal() * std::pow(10.0, rng.uniform(-2, 2));
    Tensor a({d}, raw);
    Tensor once = l2_normalize(t, a, 0);
    Tensor twice = l2_normalize(t, once, 0);
    CHECK(bits_equal(once.values(), twice.values()));
  }

  try {
    l2_normalize(t, Tensor({2}, {0.0, 0.0}), 0);
    FAIL("expected degenerate error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Degenerate);
  }
}

TEST_CASE("fixed tape replay is bit-identical") {
  Rng rng(5);
  Tape t;
  std::vector<double> xv(12), wv(12);
  for (double& v : xv) v = rng.normal();
  for (double& v : wv) v = rng.normal();
  Tensor x({3, 4}, xv);
  Tensor w({4, 3}, wv, true);
  Tensor h = relu(t, matmul(t, x, w));
  Tensor z = l2_normalize(t, h, 1);
  Tensor loss = mean(t, sigmoid(t, z));
  std::vector<double> first(loss.values().begin(), loss.values().end());
  std::vector<double> firstz(z.values().begin(), z.values().end());
  t.replay();
  CHECK(bits_equal(loss.values(), first));
  CHECK(bits_equal(z.values(), firstz));
}

TEST_CASE("max_with gradient: strict branch passes, ties stop") {
  Tape t;
  Tensor x({3}, {2.0, 1.0, 0.5}, true);  // 1.0 ties the constant exactly
  Tensor y = max_with(t, x, 1.0);
  CHECK(y.at(0) == 2.0);
  CHECK(y.at(1) == 1.0);
  CHECK(y.at(2) == 1.0);
  Tensor g = t.backward(sum(t, y)).grad(x);
  CHECK(g.at(0) == 1.0);
  CHECK(g.at(1) == 0.0);  // exact tie takes the constant branch
  CHECK(g.at(2) == 0.0);
}

TEST_CASE("ops record onto the tape only when gradients are in play") {
  Tape t;
  Tensor a({2}, {1, 2});
  Tensor b({2}, {3, 4});
  add(t, a, b);
  sigmoid(t, a);
  CHECK(t.size() == 0);  // constants compute eagerly

  Tensor p({2}, {1, 2}, /*requires_grad=*/true);
  Tensor c = mul(t, p, b);
  CHECK(t.size() == 1);
  CHECK(c.requires_grad());
  sum(t, c);
  CHECK(t.size() == 2);
}

TEST_CASE("composite expression matches finite differences") {
  Rng rng(23);
  for (int rep = 0; rep < 20; ++rep) {
    std::size_t n = 2 + rng.below(3), d = 2 + rng.below(3);
    std::vector<double> xv(n * d), wv(d * d);
    for (double& v : xv) v = rng.normal();
    for (double& v : wv) v = rng.normal();
    Tensor X({n, d}, xv);

    auto f = [&](const Tensor& w) {
      Tape tape;
      Tensor h = relu(tape, matmul(tape, X, w));
      Tensor z = l2_normalize(tape, add(tape, h, Tensor::full({n, d}, 0.3)), 1);
      Tensor s = exp(tape, mul(tape, z, Tensor::full({n, d}, 0.7)));
      Tensor lg = log(tape, max_with(tape, s, 0.4));
      return mean(tape, sub(tape, lg, neg(tape, sigmoid(tape, z)))).item();
    };
    Tensor w0({d, d}, wv, true);
    Tape tape;
    Tensor h = relu(tape, matmul(tape, X, w0));
    Tensor z = l2_normalize(tape, add(tape, h, Tensor::full({n, d}, 0.3)), 1);
    Tensor s = exp(tape, mul(tape, z, Tensor::full({n, d}, 0.7)));
    Tensor lg = log(tape, max_with(tape, s, 0.4));
    Tensor loss = mean(tape, sub(tape, lg, neg(tape, sigmoid(tape, z))));
    Tensor ga = tape.backward(loss).grad(w0);
    Tensor gn = finite_difference_gradient(f, Tensor({d, d}, wv), 1e-5);
    for (std::size_t i = 0; i < ga.size(); ++i)
      CHECK(std::abs(ga.at(i) - gn.at(i)) < 1e-5 * std::max(1.0, std::abs(gn.at(i))));
  }
}
