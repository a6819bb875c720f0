#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fmcpe/dataset.hpp"
#include "fmcpe/matrix.hpp"
#include "fmcpe/random.hpp"

namespace fmcpe {

// Prior over parameters: either a full-covariance Gaussian or a per-dimension
// uniform box (the latter requires the logit transform downstream).
struct PriorDescriptor {
  enum class Kind { kGaussian, kUniformBox };
  Kind kind = Kind::kGaussian;
  // Gaussian prior.
  Vec mean;
  DenseMatrix cov;
  // Uniform box prior.
  Vec lower;
  Vec upper;
};

struct TaskSpec {
  int theta_dim = 0;
  int obs_dim = 0;
  PriorDescriptor prior;

  bool needs_logit() const { return prior.kind == PriorDescriptor::Kind::kUniformBox; }
};

// A generative world: prior, cheap simulator, and the real data-generating
// process. Simulator outputs and real observations share dimension d.
class Task {
 public:
  virtual ~Task() = default;

  virtual const TaskSpec& spec() const = 0;
  virtual std::string name() const = 0;
  virtual Vec prior_sample(RandomSource& rng) const = 0;
  virtual Vec simulate(const Vec& theta, RandomSource& rng) const = 0;
  virtual Vec observe_real(const Vec& theta, RandomSource& rng) const = 0;

  // Posterior oracle under the real process, where one exists.
  virtual bool has_analytic_posterior() const { return false; }
  virtual std::pair<Vec, DenseMatrix> analytic_posterior(const Vec& /*y*/) const;

  std::vector<Vec> prior_sample_n(RandomSource& rng, int n) const;
};

// Linear-Gaussian world: prior N(mu_theta, sigma_theta); simulator draws
// x ~ N(A theta + b, sigma_x); the real process draws y ~ N(C theta + d,
// sigma_y). Misspecification is the gap between the two affine maps.
struct GaussianTaskParams {
  Vec mu_theta;
  DenseMatrix sigma_theta;
  DenseMatrix a;
  Vec b;
  DenseMatrix sigma_x;
  DenseMatrix c;
  Vec d;
  DenseMatrix sigma_y;
};

class GaussianTask : public Task {
 public:
  explicit GaussianTask(GaussianTaskParams params);

  // Random world draw: matrix/vector entries N(0,1); covariances L L^T + 1e-3 I
  // with L entries N(0, 0.3^2). Simulator and real maps drawn independently.
  static GaussianTask random_draw(RandomSource& rng, int theta_dim = 3, int obs_dim = 10);
  // Same draw for the simulator, then C=A, d=b, sigma_y=sigma_x: the
  // well-specified control where both processes coincide.
  static GaussianTask well_specified_draw(RandomSource& rng, int theta_dim = 3, int obs_dim = 10);

  const TaskSpec& spec() const override { return spec_; }
  std::string name() const override { return "gaussian"; }
  Vec prior_sample(RandomSource& rng) const override;
  Vec simulate(const Vec& theta, RandomSource& rng) const override;
  Vec observe_real(const Vec& theta, RandomSource& rng) const override;

  bool has_analytic_posterior() const override { return true; }
  // Conjugate posterior given y under (C, d, sigma_y).
  std::pair<Vec, DenseMatrix> analytic_posterior(const Vec& y) const override;
  // Conjugate posterior given x under the simulator's (A, b, sigma_x); the
  // oracle for models trained on simulations.
  std::pair<Vec, DenseMatrix> analytic_posterior_sim(const Vec& x) const;

  const GaussianTaskParams& params() const { return params_; }

 private:
  std::pair<Vec, DenseMatrix> conjugate_posterior(const DenseMatrix& map, const Vec& shift,
                                                  const DenseMatrix& noise_cov,
                                                  const Vec& y) const;

  GaussianTaskParams params_;
  TaskSpec spec_;
  DenseMatrix chol_theta_;
  DenseMatrix chol_x_;
  DenseMatrix chol_y_;
};

// Damped-oscillator world: theta = (amplitude A, angular frequency omega0),
// prior U[0,3] x U[0.5,10]. The simulator emits an undamped cosine on a fixed
// time grid; the real process multiplies in e^(-alpha t) damping with
// alpha ~ U[0,1] per observation. Phase phi ~ U[0,2pi] is a latent nuisance
// redrawn for every series.
struct PendulumTaskParams {
  Vec time_grid;                      // sorted draws from U[0,10]
  double sigma_noise = 0.1;
  Vec lower{0.0, 0.5};                // A, omega0
  Vec upper{3.0, 10.0};
  std::optional<double> fixed_phase;  // tests only: pin phi
  std::optional<double> fixed_alpha;  // tests only: pin alpha
};

class PendulumTask : public Task {
 public:
  explicit PendulumTask(PendulumTaskParams params);

  // Draw the shared time grid (n_steps sorted U[0,10] values) from rng.
  static PendulumTask from_grid_draw(RandomSource& rng, int n_steps = 200,
                                     double sigma_noise = 0.1);

  const TaskSpec& spec() const override { return spec_; }
  std::string name() const override { return "pendulum"; }
  Vec prior_sample(RandomSource& rng) const override;
  Vec simulate(const Vec& theta, RandomSource& rng) const override;
  Vec observe_real(const Vec& theta, RandomSource& rng) const override;

  const PendulumTaskParams& params() const { return params_; }

 private:
  Vec trajectory(const Vec& theta, double phase, double damping, RandomSource& rng) const;

  PendulumTaskParams params_;
  TaskSpec spec_;
};

// Simulation, calibration-pool, and test sets on disjoint derived streams.
// sim pairs (theta, x) come from the simulator; cal/test pairs (theta, y)
// from the real process.
struct DatasetBundle {
  PairDataset sim;
  PairDataset cal_pool;
  PairDataset test;
};

DatasetBundle build_datasets(const Task& task, const RandomSource& rng, int n_sim, int n_cal_pool,
                             int n_test);

}  // namespace fmcpe
