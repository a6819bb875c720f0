#pragma once

#include <vector>

#include "fmcpe/matrix.hpp"
#include "fmcpe/random.hpp"

namespace fmcpe {

// Gradients of an Mlp's parameters, shaped like the network; accumulated
// across batches with +=, then flattened in the same order as Mlp::flatten.
struct MlpGrad {
  std::vector<DenseMatrix> w;
  std::vector<Vec> b;

  void scale(double s);
  Vec flatten() const;
};

// Per-layer activations recorded in a forward pass, consumed by backward.
// acts[0] is the input batch; acts[l+1] the output of layer l.
struct MlpCache {
  std::vector<DenseMatrix> acts;
};

// Fully-connected network: affine layers with tanh between them, affine
// output. Batched forward/backward do one matrix product per layer with a
// fixed summation order, so results are bit-deterministic.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> widths);  // zero parameters
  static Mlp xavier_init(std::vector<int> widths, RandomSource& rng);

  const std::vector<int>& widths() const { return widths_; }
  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int layer_count() const { return static_cast<int>(w_.size()); }

  DenseMatrix& weight(int l) { return w_[static_cast<size_t>(l)]; }
  const DenseMatrix& weight(int l) const { return w_[static_cast<size_t>(l)]; }
  Vec& bias(int l) { return b_[static_cast<size_t>(l)]; }
  const Vec& bias(int l) const { return b_[static_cast<size_t>(l)]; }

  int param_count() const;
  Vec flatten() const;
  void unflatten(const Vec& params);

  Vec forward(const Vec& input) const;
  DenseMatrix forward_batch(const DenseMatrix& input) const;
  DenseMatrix forward_batch(const DenseMatrix& input, MlpCache& cache) const;

  // Reverse-mode gradients of <output, out_grad> summed over batch rows.
  // Accumulates parameter gradients into grad and returns input gradients.
  DenseMatrix backward_batch(const MlpCache& cache, const DenseMatrix& out_grad,
                             MlpGrad& grad) const;
  // Single-sample convenience wrapper.
  std::pair<MlpGrad, Vec> backward(const Vec& input, const Vec& out_grad) const;

  MlpGrad zero_grad() const;

 private:
  std::vector<int> widths_;
  std::vector<DenseMatrix> w_;  // layer l: (widths[l+1] x widths[l])
  std::vector<Vec> b_;
};

// Sinusoidal time features: (sin 2*pi*f_k t, cos 2*pi*f_k t) per frequency,
// frequencies on a geometric ladder f_k = base * 2^k. Inputs outside [0, 1]
// are clamped; clamp events are counted for the run log.
class TimeEmbedding {
 public:
  TimeEmbedding() = default;
  explicit TimeEmbedding(int num_frequencies, double base_frequency = 1.0);

  int dim() const { return 2 * k_; }
  int num_frequencies() const { return k_; }
  double base_frequency() const { return base_; }

  Vec embed(double t) const;

  static long clamp_events();
  static void reset_clamp_events();

 private:
  int k_ = 0;
  double base_ = 1.0;
};

}  // namespace fmcpe
