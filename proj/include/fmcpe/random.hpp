#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace fmcpe {

// Counter-based splittable random source (SplitMix-style state/gamma pair,
// after Steele, Lea & Flood). Identical seeds give identical draw sequences
// on every platform for the same build. Child sources created by split() or
// derive() run with distinct odd gamma increments, so their streams live on
// different cycles and do not collide.
//
// A RandomSource is single-owner: hand out children, never share one
// instance across threads.
class RandomSource {
 public:
  explicit RandomSource(uint64_t seed);

  uint64_t next_u64();
  double uniform();                     // [0, 1), 53-bit resolution
  double uniform(double lo, double hi);
  double normal();                      // standard normal (Box-Muller)
  std::vector<double> normal_vec(int n);
  uint64_t next_below(uint64_t bound);  // unbiased draw in [0, bound)

  // Stateful split: advances this source and returns an independent child.
  RandomSource split();

  // Pure derivation of a named child stream; does not advance this source.
  // derive(k) on equal sources with equal keys yields equal children.
  RandomSource derive(uint64_t key) const;
  RandomSource derive(std::string_view name) const;

  uint64_t seed() const { return seed_; }

 private:
  RandomSource(uint64_t state, uint64_t gamma, uint64_t seed);

  uint64_t state_;
  uint64_t gamma_;
  uint64_t seed_;
};

// Deterministic Fisher-Yates shuffle driven by rng.
void shuffle_indices(std::vector<int>& items, RandomSource& rng);
std::vector<int> random_permutation(int n, RandomSource& rng);

}  // namespace fmcpe
