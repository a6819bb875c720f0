#pragma once

#include <string>
#include <vector>

#include "fmcpe/dataset.hpp"
#include "fmcpe/matrix.hpp"
#include "fmcpe/mlp.hpp"
#include "fmcpe/random.hpp"
#include "fmcpe/transforms.hpp"

namespace fmcpe {

// Which density head sits on top of the observation conditioner.
enum class DensityHead {
  kDiagonalGaussian,  // mean + per-dim log-std read from one trunk output
  kAffineCoupling,    // stack of conditional affine coupling layers
};

struct DensityModelConfig {
  DensityHead head = DensityHead::kDiagonalGaussian;
  std::vector<int> hidden{128, 128};  // conditioner hidden widths
  // Affine-coupling head only:
  int context_dim = 64;
  int coupling_layers = 4;
  std::vector<int> coupling_hidden{64, 64};
  // Log-stds are soft-clamped from above at this value; the lower side stays
  // unbounded so the density can sharpen freely.
  double log_std_cap = 8.0;
  // Coupling log-scales are soft-clamped symmetrically at +/- this value.
  double scale_cap = 3.0;
};

// One conditional affine coupling layer. The pass-through coordinates and the
// context vector feed a small network that emits log-scale and shift for the
// transformed coordinates.
struct CouplingLayer {
  std::vector<int> masked;    // pass-through coordinate indices
  std::vector<int> unmasked;  // transformed coordinate indices
  Mlp net;                    // [masked + context] -> [2 * unmasked]
};

// Conditional density model p(theta | obs) trained by maximum likelihood on
// pairs. Internally everything lives in transformed "model" coordinates
// (z-scored observations; logit-then-z-scored parameters when the prior is a
// box); the public sample/log_prob API works in original coordinates.
class ConditionalDensityModel {
 public:
  ConditionalDensityModel() = default;
  ConditionalDensityModel(DensityModelConfig config, TransformPack transforms, int theta_dim,
                          int obs_dim, RandomSource& init_rng);

  int theta_dim() const { return theta_dim_; }
  int obs_dim() const { return obs_dim_; }
  const DensityModelConfig& config() const { return config_; }
  const TransformPack& transforms() const { return transforms_; }

  // Whole-model parameter vector: trunk first, then coupling nets in order.
  int param_count() const;
  Vec parameters() const;
  void set_parameters(const Vec& params);

  // --- Model-coordinate operations (used in training and by the flows) ---

  // Per-row negative log-likelihood of theta rows given obs rows.
  Vec nll_rows(const DenseMatrix& theta_m, const DenseMatrix& obs_m) const;
  double mean_nll(const DenseMatrix& theta_m, const DenseMatrix& obs_m) const;
  // Mean NLL plus its gradient w.r.t. the flat parameter vector.
  double mean_nll_backward(const DenseMatrix& theta_m, const DenseMatrix& obs_m, Vec& grad) const;

  // Normalizing / generative directions of the head, row-wise. For the
  // Gaussian head these are (theta - mean) / std and its inverse; for the
  // coupling head, the full stack. They are exact inverses of each other.
  DenseMatrix theta_to_base(const DenseMatrix& theta_m, const DenseMatrix& obs_m) const;
  DenseMatrix base_to_theta(const DenseMatrix& z, const DenseMatrix& obs_m) const;

  // One draw per row of obs_m.
  DenseMatrix sample_rows_model(const DenseMatrix& obs_m, RandomSource& rng) const;
  // n draws for a single model-space observation.
  DenseMatrix sample_model(const Vec& obs_m, int n, RandomSource& rng) const;
  double log_prob_model(const Vec& theta_m, const Vec& obs_m) const;

  // --- Original-coordinate API ---
  std::vector<Vec> sample(const Vec& obs_raw, int n, RandomSource& rng) const;
  double log_prob(const Vec& theta_raw, const Vec& obs_raw) const;

  // Direct access for tests and checkpointing.
  Mlp& trunk() { return trunk_; }
  const Mlp& trunk() const { return trunk_; }
  std::vector<CouplingLayer>& couplings() { return couplings_; }
  const std::vector<CouplingLayer>& couplings() const { return couplings_; }

 private:
  friend struct DensityModelIo;

  DensityModelConfig config_;
  TransformPack transforms_;
  int theta_dim_ = 0;
  int obs_dim_ = 0;
  Mlp trunk_;
  std::vector<CouplingLayer> couplings_;
};

struct NpeTrainConfig {
  DensityModelConfig model;
  double learning_rate = 1e-3;
  int batch_size = 128;
  long max_steps = 20000;
  int eval_every = 100;   // optimizer steps between validation passes
  int patience = 20;      // validation passes without improvement before stopping
  double val_fraction = 0.2;
  double clip_norm = 1.0;
  double finetune_lr_scale = 0.1;
};

struct TrainReport {
  long steps = 0;               // optimizer steps actually run
  long best_step = 0;           // step whose parameters were kept
  double best_val_nll = 0.0;
  double final_val_nll = 0.0;   // of the returned parameters
  int evals = 0;
  std::string warning;
};

// Maximum-likelihood fit on (theta, obs) pairs with an 80/20 train/validation
// split, early stopping, and best-parameter restore. Transforms must already
// be fitted; they are stored in the returned model.
ConditionalDensityModel train_npe(const PairDataset& data, const TransformPack& transforms,
                                  const NpeTrainConfig& cfg, RandomSource& rng,
                                  TrainReport* report = nullptr);

// Same fit restricted to a (small) calibration set.
ConditionalDensityModel train_npe_calibration_only(const PairDataset& cal,
                                                   const TransformPack& transforms,
                                                   const NpeTrainConfig& cfg, RandomSource& rng,
                                                   TrainReport* report = nullptr);

// Continues training every parameter of an existing model on calibration
// pairs at a reduced learning rate. An empty calibration set leaves the model
// untouched and only sets a warning in the report.
TrainReport finetune(ConditionalDensityModel& model, const PairDataset& cal,
                     const NpeTrainConfig& cfg, RandomSource& rng);

}  // namespace fmcpe
