#pragma once

#include <string>
#include <vector>

#include "fmcpe/dataset.hpp"
#include "fmcpe/density_model.hpp"
#include "fmcpe/matrix.hpp"
#include "fmcpe/mlp.hpp"
#include "fmcpe/random.hpp"
#include "fmcpe/tasks.hpp"

namespace fmcpe {

struct VectorFieldConfig {
  std::vector<int> body_hidden{128, 128, 128};
  int time_frequencies = 8;  // embedding dimension is twice this
  double time_base = 1.0;
  std::vector<int> cond_hidden{128};
  int cond_dim = 64;
};

// Conditional vector field u(t, z, y): the state, a sinusoidal embedding of
// t, and a learned embedding of the condition y feed one body network. The
// body's output layer starts at zero, so a fresh field is the zero field and
// its transport is the identity.
class VectorField {
 public:
  struct EvalCache {
    MlpCache cond_cache;
    MlpCache body_cache;
  };

  VectorField() = default;
  VectorField(VectorFieldConfig cfg, int state_dim, int cond_input_dim, RandomSource& init_rng);

  int state_dim() const { return state_dim_; }
  int cond_input_dim() const { return cond_input_dim_; }
  const VectorFieldConfig& config() const { return config_; }

  int param_count() const;
  Vec parameters() const;  // body first, then condition embedder
  void set_parameters(const Vec& params);

  // Condition contexts for repeated evaluation under a fixed y per row.
  DenseMatrix embed_condition(const DenseMatrix& y_rows) const;
  // One shared t for every row; contexts precomputed by embed_condition.
  DenseMatrix evaluate_shared_t(double t, const DenseMatrix& z_rows,
                                const DenseMatrix& ctx_rows) const;
  // Per-row times, gradients recordable; used by the training loss.
  DenseMatrix evaluate_batch(const Vec& ts, const DenseMatrix& z_rows, const DenseMatrix& y_rows,
                             EvalCache& cache) const;
  // Gradients of <output, out_grad> w.r.t. the flat parameter vector.
  Vec backward_batch(const EvalCache& cache, const DenseMatrix& out_grad) const;

  Vec evaluate(double t, const Vec& z, const Vec& y) const;

  const Mlp& body() const { return body_; }
  Mlp& body() { return body_; }
  const Mlp& condition_embedder() const { return cond_; }
  const TimeEmbedding& time_embedding() const { return time_; }

 private:
  friend struct VectorFieldIo;

  VectorFieldConfig config_;
  int state_dim_ = 0;
  int cond_input_dim_ = 0;
  TimeEmbedding time_;
  Mlp body_;
  Mlp cond_;
};

struct OdeConfig {
  enum class Kind { kEuler, kRk4 };
  Kind kind = Kind::kRk4;
  int steps = 64;
};

// (1 - t) z0 + t z1 with 0 <= t <= 1.
Vec interpolate(const Vec& z0, const Vec& z1, double t);

// Integrate dz/dt = field(t, z, y) from t=0 to t=1, row-wise; each row keeps
// its own condition. Throws if the state leaves the finite range, naming the
// step.
DenseMatrix transport_rows(const VectorField& field, const DenseMatrix& z0,
                           const DenseMatrix& y_rows, const OdeConfig& cfg);
Vec ode_transport(const VectorField& field, const Vec& z0, const Vec& y, const OdeConfig& cfg);

// One training tuple, every vector in model coordinates.
struct TrainingTuple {
  Vec y;
  Vec theta1;  // calibration target
  Vec theta0;  // baseline draw at the transported surrogate
  Vec x1;      // fresh simulator output at theta1
  Vec x0;      // Gaussian base draw around y
};

// Draw tuples per the training-tuple recipe: pick a calibration pair, run the
// simulator at its parameters, push a Gaussian draw around y through the
// current x-field, and sample the frozen baseline at the result. The baseline
// draw is a sample, so no gradient path from theta0 back to the x-field
// exists by construction.
std::vector<TrainingTuple> sample_training_tuples(const PairDataset& cal, const Task& task,
                                                  const ConditionalDensityModel& baseline,
                                                  const VectorField& ux, double sigma,
                                                  const OdeConfig& ode, RandomSource& rng,
                                                  int count);
TrainingTuple sample_training_tuple(const PairDataset& cal, const Task& task,
                                    const ConditionalDensityModel& baseline,
                                    const VectorField& ux, double sigma, const OdeConfig& ode,
                                    RandomSource& rng);

struct JointLossOptions {
  bool x_term = true;
  bool theta_term = true;
  bool with_grads = true;
};

struct JointLossResult {
  double loss = 0.0;
  double loss_x = 0.0;
  double loss_theta = 0.0;
  Vec grad_x;      // flat gradients for the x-field (empty when not computed)
  Vec grad_theta;  // flat gradients for the theta-field
};

// Mean over the batch of the two squared regression errors onto straight-line
// velocities. Each tuple draws its own t for the x-term and an independent
// tau for the theta-term.
JointLossResult joint_loss(const std::vector<TrainingTuple>& batch, const VectorField& ux,
                           const VectorField& ut, RandomSource& rng,
                           const JointLossOptions& opt = {});

struct FlowTrainConfig {
  VectorFieldConfig field;
  double sigma = 0.1;  // base-noise scale in standardized observation space
  OdeConfig train_ode{OdeConfig::Kind::kEuler, 64};
  OdeConfig inference_ode{OdeConfig::Kind::kRk4, 64};
  double learning_rate = 3e-4;
  int batch_size = 32;
  long max_steps = 6000;
  int eval_every = 50;      // optimizer steps between validation passes
  int patience_steps = 200; // steps without validation improvement before stopping
  int val_tuples = 128;     // fresh tuples per validation pass
  int probe_tuples = 64;    // tuples for the before/after loss probes
  double clip_norm = 1.0;
  double val_fraction = 0.2;
};

struct FlowTrainReport {
  long steps = 0;
  long best_step = 0;
  double best_val_loss = 0.0;
  double final_val_loss = 0.0;
  double initial_train_x_loss = 0.0;
  double initial_train_theta_loss = 0.0;
  double final_train_x_loss = 0.0;
  double final_train_theta_loss = 0.0;
  int evals = 0;
  std::string warning;
};

// The trained corrector: frozen baseline, both fields, the base-noise scale,
// and the inference-time integrator. Transforms live inside the baseline.
struct FmcpeModel {
  ConditionalDensityModel baseline;
  VectorField ux;
  VectorField ut;
  double sigma = 0.1;
  OdeConfig ode;
};

// Jointly train both fields on minibatches of freshly sampled tuples (the
// theta-source follows the evolving x-field), early-stopped on fresh tuples
// from the 20% validation split. Divergence restores the last good
// checkpoint and sets a warning instead of throwing.
FmcpeModel train_fmcpe(const PairDataset& cal, const Task& task,
                       const ConditionalDensityModel& baseline, const FlowTrainConfig& cfg,
                       RandomSource& rng, FlowTrainReport* report = nullptr);

// Corrected posterior draws for one observation, in original coordinates.
std::vector<Vec> sample_posterior(const FmcpeModel& model, const Vec& y_raw, int n,
                                  RandomSource& rng);
// One corrected draw per observation row; the batched path the benchmark uses.
DenseMatrix sample_posterior_rows(const FmcpeModel& model, const std::vector<Vec>& y_raw_rows,
                                  RandomSource& rng);

}  // namespace fmcpe
