#include "pukit/rng.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "pukit/errors.hpp"

namespace pukit {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t child_seed(std::uint64_t parent, std::uint64_t stream) {
  return splitmix64(parent + 0x9E3779B97F4A7C15ull * (stream + 1));
}

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

std::uint64_t Rng::next_u64() { return engine_(); }

double Rng::uniform01() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
  if (have_spare_) {
    have_spare_ = false;
    return spare_;
  }
  // u1 in (0, 1] so the log is finite.
  double u1 = 1.0 - uniform01();
  double u2 = uniform01();
  double r = std::sqrt(-2.0 * std::log(u1));
  double a = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(a);
  have_spare_ = true;
  return r * std::cos(a);
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) fail(ErrorKind::Contract, "rng: below(0) is undefined");
  if (n == 1) return 0;
  const std::uint64_t mask = std::bit_ceil(n) - 1;
  for (;;) {
    std::uint64_t r = next_u64() & mask;
    if (r < n) return r;
  }
}

Rng Rng::child(std::uint64_t stream) const {
  return Rng(child_seed(seed_, stream));
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n,
                                                         std::size_t k) {
  if (k > n)
    fail(ErrorKind::Contract, "rng: cannot sample more indices than exist");
  std::vector<std::size_t> out;
  out.reserve(k);
  std::vector<bool> taken(n, false);
  for (std::size_t j = n - k; j < n; ++j) {
    std::size_t t = static_cast<std::size_t>(below(j + 1));
    if (taken[t]) t = j;
    taken[t] = true;
    out.push_back(t);
  }
  shuffle(out);
  return out;
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
  return sample_without_replacement(n, n);
}

}  // namespace pukit
