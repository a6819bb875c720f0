#include "fmcpe/random.hpp"

#include <bit>
#include <cmath>
#include <stdexcept>

namespace fmcpe {

namespace {

constexpr uint64_t kGoldenGamma = 0x9e3779b97f4a7c15ull;

// Stafford mix13 finalizer.
uint64_t mix64(uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Gamma values must be odd; reject weak bit patterns as in SplittableRandom.
uint64_t mix_gamma(uint64_t z) {
  z = (z ^ (z >> 33)) * 0xff51afd7ed558ccdull;
  z = (z ^ (z >> 33)) * 0xc4ceb9fe1a85ec53ull;
  z = (z ^ (z >> 33)) | 1ull;
  if (std::popcount(z ^ (z >> 1)) < 24) {
    z ^= 0xaaaaaaaaaaaaaaaaull;
  }
  return z;
}

uint64_t fnv1a(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

RandomSource::RandomSource(uint64_t seed)
    : state_(mix64(seed + kGoldenGamma)),
      gamma_(mix_gamma(seed + 2 * kGoldenGamma)),
      seed_(seed) {}

RandomSource::RandomSource(uint64_t state, uint64_t gamma, uint64_t seed)
    : state_(state), gamma_(gamma), seed_(seed) {}

uint64_t RandomSource::next_u64() {
  state_ += gamma_;
  return mix64(state_);
}

double RandomSource::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomSource::uniform(double lo, double hi) {
  return lo + (hi - lo) * uniform();
}

double RandomSource::normal() {
  // Box-Muller, cosine branch only. u1 shifted into (0, 1] so log stays finite.
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  return r * std::cos(2.0 * 3.14159265358979323846 * u2);
}

std::vector<double> RandomSource::normal_vec(int n) {
  std::vector<double> out(static_cast<size_t>(n));
  for (auto& v : out) v = normal();
  return out;
}

uint64_t RandomSource::next_below(uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("next_below: bound must be positive");
  uint64_t threshold = (0 - bound) % bound;
  for (;;) {
    uint64_t v = next_u64();
    if (v >= threshold) return v % bound;
  }
}

RandomSource RandomSource::split() {
  uint64_t s = next_u64();
  uint64_t g = next_u64();
  return RandomSource(mix64(s), mix_gamma(g), seed_);
}

RandomSource RandomSource::derive(uint64_t key) const {
  uint64_t s = mix64(state_ ^ mix64(key + kGoldenGamma));
  uint64_t g = mix_gamma(state_ + mix64(key ^ gamma_));
  return RandomSource(s, g, seed_);
}

RandomSource RandomSource::derive(std::string_view name) const {
  return derive(fnv1a(name));
}

void shuffle_indices(std::vector<int>& items, RandomSource& rng) {
  for (size_t i = items.size(); i > 1; --i) {
    size_t j = rng.next_below(i);
    std::swap(items[i - 1], items[j]);
  }
}

std::vector<int> random_permutation(int n, RandomSource& rng) {
  std::vector<int> perm(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) perm[static_cast<size_t>(i)] = i;
  shuffle_indices(perm, rng);
  return perm;
}

}  // namespace fmcpe
