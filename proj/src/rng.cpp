#include "cpmdid/rng.hpp"

#include <stdexcept>

#include "cpmdid/links.hpp"

namespace cpmdid {

namespace {

constexpr std::uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ull;

std::uint64_t split_mix(std::uint64_t& state) {
  std::uint64_t z = (state += kGoldenGamma);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
  return (x << k) | (x >> (64 - k));
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  std::uint64_t state = base ^ (kGoldenGamma * (index + 1));
  return split_mix(state);
}

Rng::Rng(std::uint64_t seed) {
  // Expand the seed through SplitMix64 as recommended for xoshiro state.
  std::uint64_t state = seed;
  for (auto& word : s_) word = split_mix(state);
}

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

double Rng::uniform() {
  // 53 significant bits, shifted off the origin so 0 is never returned.
  return (double(next() >> 11) + 0.5) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below requires n > 0");
  // Lemire multiply-shift; bias is below 1/2^64 per draw, far below anything
  // observable at the replicate counts used here.
  return std::uint64_t((static_cast<unsigned __int128>(next()) * n) >> 64);
}

double Rng::normal() { return link(Link::probit, uniform()); }

double Rng::logistic() { return link(Link::logit, uniform()); }

}  // namespace cpmdid
