#pragma once

#include <array>
#include <cstdint>

namespace cpmdid {

// Derives a child seed from a base seed and a stream index. Used to give
// every bootstrap or simulation replicate its own decorrelated stream so
// results do not depend on scheduling or thread count. The derivation is
// part of the reproducibility contract and must not change: SplitMix64
// applied to base ^ (golden_gamma * (index + 1)).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index);

// xoshiro256++ generator with inverse-CDF samplers on top. All sampling in
// the project goes through this class; nothing uses <random> distributions,
// whose output is implementation defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  static Rng stream(std::uint64_t seed, std::uint64_t index) {
    return Rng(derive_seed(seed, index));
  }

  std::uint64_t next();

  // Uniform draw in the open interval (0,1); safe to feed to quantile
  // functions.
  double uniform();

  // Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  double normal();
  double logistic();

 private:
  std::array<std::uint64_t, 4> s_;
};

}  // namespace cpmdid
