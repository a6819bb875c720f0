#include "fmcpe/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "fmcpe/gaussian.hpp"

namespace fmcpe {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_zero_matrix(const DenseMatrix& m) {
  for (double e : m.entries()) {
    if (e != 0.0) return false;
  }
  return true;
}

// Zero covariance is a legitimate degenerate limit in tests; everything else
// must factor cleanly.
DenseMatrix factor_or_zero(const DenseMatrix& cov) {
  if (is_zero_matrix(cov)) return DenseMatrix(cov.rows(), cov.cols());
  return cholesky(cov);
}

DenseMatrix random_entries(int rows, int cols, double scale, RandomSource& rng) {
  DenseMatrix m(rows, cols);
  for (auto& e : m.entries()) e = scale * rng.normal();
  return m;
}

DenseMatrix random_spd(int n, RandomSource& rng) {
  DenseMatrix l = random_entries(n, n, 0.3, rng);
  DenseMatrix s = matmul_nt(l, l);
  for (int i = 0; i < n; ++i) s(i, i) += 1e-3;
  return s;
}

}  // namespace

std::pair<Vec, DenseMatrix> Task::analytic_posterior(const Vec&) const {
  throw std::logic_error("analytic posterior unavailable for task " + name());
}

std::vector<Vec> Task::prior_sample_n(RandomSource& rng, int n) const {
  if (n < 1) throw std::invalid_argument("prior_sample_n: need n >= 1");
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) out.push_back(prior_sample(rng));
  return out;
}

GaussianTask::GaussianTask(GaussianTaskParams params) : params_(std::move(params)) {
  const int p = static_cast<int>(params_.mu_theta.size());
  const int d = static_cast<int>(params_.b.size());
  if (params_.sigma_theta.rows() != p || params_.sigma_theta.cols() != p ||
      params_.a.rows() != d || params_.a.cols() != p || params_.sigma_x.rows() != d ||
      params_.c.rows() != d || params_.c.cols() != p || static_cast<int>(params_.d.size()) != d ||
      params_.sigma_y.rows() != d) {
    throw std::invalid_argument("GaussianTask: inconsistent parameter shapes");
  }
  chol_theta_ = factor_or_zero(params_.sigma_theta);
  chol_x_ = factor_or_zero(params_.sigma_x);
  chol_y_ = factor_or_zero(params_.sigma_y);
  spec_.theta_dim = p;
  spec_.obs_dim = d;
  spec_.prior.kind = PriorDescriptor::Kind::kGaussian;
  spec_.prior.mean = params_.mu_theta;
  spec_.prior.cov = params_.sigma_theta;
}

GaussianTask GaussianTask::random_draw(RandomSource& rng, int theta_dim, int obs_dim) {
  GaussianTaskParams p;
  p.mu_theta = random_entries(theta_dim, 1, 1.0, rng).entries();
  p.sigma_theta = random_spd(theta_dim, rng);
  p.a = random_entries(obs_dim, theta_dim, 1.0, rng);
  p.b = random_entries(obs_dim, 1, 1.0, rng).entries();
  p.sigma_x = random_spd(obs_dim, rng);
  p.c = random_entries(obs_dim, theta_dim, 1.0, rng);
  p.d = random_entries(obs_dim, 1, 1.0, rng).entries();
  p.sigma_y = random_spd(obs_dim, rng);
  return GaussianTask(std::move(p));
}

GaussianTask GaussianTask::well_specified_draw(RandomSource& rng, int theta_dim, int obs_dim) {
  GaussianTaskParams p;
  p.mu_theta = random_entries(theta_dim, 1, 1.0, rng).entries();
  p.sigma_theta = random_spd(theta_dim, rng);
  p.a = random_entries(obs_dim, theta_dim, 1.0, rng);
  p.b = random_entries(obs_dim, 1, 1.0, rng).entries();
  p.sigma_x = random_spd(obs_dim, rng);
  p.c = p.a;
  p.d = p.b;
  p.sigma_y = p.sigma_x;
  return GaussianTask(std::move(p));
}

Vec GaussianTask::prior_sample(RandomSource& rng) const {
  return gaussian_sample(rng, params_.mu_theta, chol_theta_);
}

Vec GaussianTask::simulate(const Vec& theta, RandomSource& rng) const {
  Vec mean = matvec(params_.a, theta);
  for (size_t i = 0; i < mean.size(); ++i) mean[i] += params_.b[i];
  return gaussian_sample(rng, mean, chol_x_);
}

Vec GaussianTask::observe_real(const Vec& theta, RandomSource& rng) const {
  Vec mean = matvec(params_.c, theta);
  for (size_t i = 0; i < mean.size(); ++i) mean[i] += params_.d[i];
  return gaussian_sample(rng, mean, chol_y_);
}

std::pair<Vec, DenseMatrix> GaussianTask::conjugate_posterior(const DenseMatrix& map,
                                                              const Vec& shift,
                                                              const DenseMatrix& noise_cov,
                                                              const Vec& y) const {
  if (y.size() != shift.size()) {
    throw std::invalid_argument("analytic_posterior: observation dimension mismatch");
  }
  DenseMatrix prior_prec = spd_inverse(params_.sigma_theta);
  DenseMatrix noise_prec = spd_inverse(noise_cov);
  DenseMatrix mt_prec = matmul_tn(map, noise_prec);        // p x d
  DenseMatrix posterior_prec = add(prior_prec, matmul(mt_prec, map));
  DenseMatrix cov = spd_inverse(posterior_prec);
  // Symmetrize away last-ulp asymmetry from the two solves.
  for (int i = 0; i < cov.rows(); ++i) {
    for (int j = i + 1; j < cov.cols(); ++j) {
      double s = 0.5 * (cov(i, j) + cov(j, i));
      cov(i, j) = s;
      cov(j, i) = s;
    }
  }
  Vec rhs = matvec(prior_prec, params_.mu_theta);
  Vec shifted = vec_sub(y, shift);
  Vec lik = matvec(mt_prec, shifted);
  for (size_t i = 0; i < rhs.size(); ++i) rhs[i] += lik[i];
  return {matvec(cov, rhs), std::move(cov)};
}

std::pair<Vec, DenseMatrix> GaussianTask::analytic_posterior(const Vec& y) const {
  return conjugate_posterior(params_.c, params_.d, params_.sigma_y, y);
}

std::pair<Vec, DenseMatrix> GaussianTask::analytic_posterior_sim(const Vec& x) const {
  return conjugate_posterior(params_.a, params_.b, params_.sigma_x, x);
}

PendulumTask::PendulumTask(PendulumTaskParams params) : params_(std::move(params)) {
  if (params_.time_grid.empty()) throw std::invalid_argument("PendulumTask: empty time grid");
  if (params_.sigma_noise < 0.0) throw std::invalid_argument("PendulumTask: negative noise std");
  if (params_.lower.size() != 2 || params_.upper.size() != 2) {
    throw std::invalid_argument("PendulumTask: prior boxes must cover (A, omega0)");
  }
  spec_.theta_dim = 2;
  spec_.obs_dim = static_cast<int>(params_.time_grid.size());
  spec_.prior.kind = PriorDescriptor::Kind::kUniformBox;
  spec_.prior.lower = params_.lower;
  spec_.prior.upper = params_.upper;
}

PendulumTask PendulumTask::from_grid_draw(RandomSource& rng, int n_steps, double sigma_noise) {
  if (n_steps < 1) throw std::invalid_argument("PendulumTask: need at least one timestep");
  PendulumTaskParams p;
  p.time_grid.resize(static_cast<size_t>(n_steps));
  for (auto& t : p.time_grid) t = rng.uniform(0.0, 10.0);
  std::sort(p.time_grid.begin(), p.time_grid.end());
  p.sigma_noise = sigma_noise;
  return PendulumTask(std::move(p));
}

Vec PendulumTask::prior_sample(RandomSource& rng) const {
  Vec theta(2);
  theta[0] = rng.uniform(params_.lower[0], params_.upper[0]);
  theta[1] = rng.uniform(params_.lower[1], params_.upper[1]);
  return theta;
}

Vec PendulumTask::trajectory(const Vec& theta, double phase, double damping,
                             RandomSource& rng) const {
  if (theta.size() != 2) throw std::invalid_argument("PendulumTask: theta must be (A, omega0)");
  const double amp = theta[0];
  const double omega = theta[1];
  Vec out(params_.time_grid.size());
  for (size_t i = 0; i < out.size(); ++i) {
    const double t = params_.time_grid[i];
    double v = amp * std::cos(omega * t + phase);
    if (damping > 0.0) v *= std::exp(-damping * t);
    out[i] = v + params_.sigma_noise * rng.normal();
  }
  return out;
}

Vec PendulumTask::simulate(const Vec& theta, RandomSource& rng) const {
  const double phase =
      params_.fixed_phase ? *params_.fixed_phase : rng.uniform(0.0, kTwoPi);
  return trajectory(theta, phase, 0.0, rng);
}

Vec PendulumTask::observe_real(const Vec& theta, RandomSource& rng) const {
  const double phase =
      params_.fixed_phase ? *params_.fixed_phase : rng.uniform(0.0, kTwoPi);
  const double alpha = params_.fixed_alpha ? *params_.fixed_alpha : rng.uniform(0.0, 1.0);
  return trajectory(theta, phase, alpha, rng);
}

DatasetBundle build_datasets(const Task& task, const RandomSource& rng, int n_sim, int n_cal_pool,
                             int n_test) {
  if (n_sim < 0 || n_cal_pool < 0 || n_test < 0) {
    throw std::invalid_argument("build_datasets: negative size");
  }
  DatasetBundle bundle;
  bundle.sim.provenance = Provenance::kSimulated;
  bundle.cal_pool.provenance = Provenance::kCalibration;
  bundle.test.provenance = Provenance::kTest;

  RandomSource sim_rng = rng.derive("sim");
  for (int i = 0; i < n_sim; ++i) {
    Vec theta = task.prior_sample(sim_rng);
    Vec x = task.simulate(theta, sim_rng);
    bundle.sim.push(std::move(theta), std::move(x));
  }
  RandomSource cal_rng = rng.derive("cal");
  for (int i = 0; i < n_cal_pool; ++i) {
    Vec theta = task.prior_sample(cal_rng);
    Vec y = task.observe_real(theta, cal_rng);
    bundle.cal_pool.push(std::move(theta), std::move(y));
  }
  RandomSource test_rng = rng.derive("test");
  for (int i = 0; i < n_test; ++i) {
    Vec theta = task.prior_sample(test_rng);
    Vec y = task.observe_real(theta, test_rng);
    bundle.test.push(std::move(theta), std::move(y));
  }
  bundle.sim.validate();
  bundle.cal_pool.validate();
  bundle.test.validate();
  return bundle;
}

}  // namespace fmcpe
