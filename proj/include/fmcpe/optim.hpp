#pragma once

#include <cstdint>

#include "fmcpe/matrix.hpp"

namespace fmcpe {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. step() mutates the parameter vector in place.
// Non-finite gradients abort the run (std::runtime_error): silently zeroing
// them would hide divergence.
class AdamState {
 public:
  AdamState() = default;
  AdamState(int dim, AdamConfig cfg);

  void step(Vec& params, const Vec& grads);
  int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return cfg_; }
  void set_learning_rate(double lr) { cfg_.lr = lr; }

 private:
  AdamConfig cfg_;
  Vec m_;
  Vec v_;
  int64_t t_ = 0;
};

struct GradClipConfig {
  double max_norm = 1.0;
};

// Returns grads unchanged when the global L2 norm is within max_norm, else
// rescales to exactly max_norm. Direction is preserved.
Vec clip_global_norm(const Vec& grads, const GradClipConfig& cfg);

}  // namespace fmcpe
