#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace pukit {

// Seed mixer used for deriving independent child streams. Public so that
// run manifests can document exactly how a top-level seed fans out.
std::uint64_t splitmix64(std::uint64_t x);

// child_seed(parent, k) seeds the k-th derived stream of `parent`.
std::uint64_t child_seed(std::uint64_t parent, std::uint64_t stream);

// Deterministic random source used everywhere randomness is needed.
// mt19937_64 seeded through splitmix64, with hand-rolled draws so the
// streams do not depend on the standard library's unspecified
// distribution algorithms. Box-Muller pairs are cached, so the normal
// stream is a function of call order only.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "splitmix64/mt19937_64/box-muller";

  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();

  double uniform01();                     // [0, 1) with 53-bit resolution
  double uniform(double lo, double hi);
  double normal();                        // standard normal
  std::uint64_t below(std::uint64_t n);   // uniform in [0, n), unbiased

  // Independent derived stream; workers must use children, never share.
  Rng child(std::uint64_t stream) const;

  // k distinct indices from [0, n), uniformly ordered (Floyd + shuffle).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);
  std::vector<std::size_t> permutation(std::size_t n);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace pukit
