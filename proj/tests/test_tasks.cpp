#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "fmcpe/matrix.hpp"
#include "fmcpe/random.hpp"
#include "fmcpe/tasks.hpp"

using fmcpe::DenseMatrix;
using fmcpe::GaussianTask;
using fmcpe::GaussianTaskParams;
using fmcpe::PendulumTask;
using fmcpe::PendulumTaskParams;
using fmcpe::RandomSource;
using fmcpe::Vec;

namespace {

GaussianTaskParams small_gaussian_params() {
  GaussianTaskParams p;
  p.mu_theta = Vec{1.0, -1.0};
  p.sigma_theta = DenseMatrix::identity(2);
  p.a = DenseMatrix(3, 2, {1, 0, 0, 1, 1, 1});
  p.b = Vec{0.5, -0.5, 0.0};
  p.sigma_x = DenseMatrix::identity(3);
  p.c = DenseMatrix(3, 2, {2, 0, 0, 2, -1, 1});
  p.d = Vec{0.0, 0.0, 1.0};
  p.sigma_y = DenseMatrix::identity(3);
  return p;
}

}  // namespace

TEST_CASE("gaussian prior sample mean obeys the CLT bound") {
  RandomSource rng(401);
  GaussianTask task = GaussianTask::random_draw(rng);
  const int n = 100000;
  RandomSource draw_rng(402);
  Vec mean_acc(3, 0.0);
  for (int i = 0; i < n; ++i) {
    Vec t = task.prior_sample(draw_rng);
    for (int j = 0; j < 3; ++j) mean_acc[static_cast<size_t>(j)] += t[static_cast<size_t>(j)];
  }
  for (int j = 0; j < 3; ++j) {
    double est = mean_acc[static_cast<size_t>(j)] / n;
    double sigma = std::sqrt(task.params().sigma_theta(j, j));
    CHECK(std::abs(est - task.params().mu_theta[static_cast<size_t>(j)]) <
          3.0 * sigma / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("pendulum prior respects its box") {
  RandomSource rng(403);
  PendulumTask task = PendulumTask::from_grid_draw(rng);
  RandomSource draw_rng(404);
  for (int i = 0; i < 5000; ++i) {
    Vec t = task.prior_sample(draw_rng);
    CHECK(t[0] >= 0.0);
    CHECK(t[0] <= 3.0);
    CHECK(t[1] >= 0.5);
    CHECK(t[1] <= 10.0);
  }
}

TEST_CASE("single prior draw is seed-reproducible") {
  RandomSource rng(405);
  GaussianTask task = GaussianTask::random_draw(rng);
  RandomSource a(7), b(7);
  CHECK(task.prior_sample(a) == task.prior_sample(b));
}

TEST_CASE("pendulum with zero amplitude is pure noise at sigma_noise") {
  RandomSource rng(406);
  PendulumTask task = PendulumTask::from_grid_draw(rng, 200, 0.1);
  RandomSource draw_rng(407);
  const int n = 2000;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    Vec x = task.simulate(Vec{0.0, 5.0}, draw_rng);
    sum += x[0];
    sumsq += x[0] * x[0];
  }
  double mean = sum / n;
  double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean) < 0.01);
  CHECK(sd == doctest::Approx(0.1).epsilon(0.10));
}

TEST_CASE("noiseless pendulum with pinned phase is the exact cosine") {
  RandomSource rng(408);
  PendulumTaskParams p;
  p.time_grid = Vec{0.0, 0.5, 1.0, 2.0, 5.0};
  p.sigma_noise = 0.0;
  p.fixed_phase = 0.0;
  PendulumTask task(p);
  Vec theta{2.0, 3.0};
  Vec x = task.simulate(theta, rng);
  for (size_t i = 0; i < p.time_grid.size(); ++i) {
    CHECK(x[i] == doctest::Approx(2.0 * std::cos(3.0 * p.time_grid[i])).epsilon(1e-12));
  }
}

TEST_CASE("gaussian simulator with zero covariance is the exact affine map") {
  GaussianTaskParams p = small_gaussian_params();
  p.sigma_x = DenseMatrix(3, 3);  // exact zero: deterministic limit
  GaussianTask task(p);
  RandomSource rng(409);
  Vec theta{2.0, 3.0};
  Vec x = task.simulate(theta, rng);
  CHECK(x[0] == doctest::Approx(2.0 + 0.5));
  CHECK(x[1] == doctest::Approx(3.0 - 0.5));
  CHECK(x[2] == doctest::Approx(5.0));
}

TEST_CASE("pendulum with damping pinned to zero reproduces the simulator exactly") {
  RandomSource grid_rng(410);
  PendulumTaskParams p;
  p.time_grid.resize(50);
  for (auto& t : p.time_grid) t = grid_rng.uniform(0.0, 10.0);
  p.fixed_alpha = 0.0;
  PendulumTask task(p);
  Vec theta{1.5, 4.0};
  RandomSource a(411), b(411);
  Vec sim = task.simulate(theta, a);
  Vec real = task.observe_real(theta, b);
  CHECK(sim == real);
}

TEST_CASE("damped trajectories stay inside the noise envelope") {
  RandomSource grid_rng(412);
  PendulumTaskParams p;
  p.time_grid.resize(200);
  for (auto& t : p.time_grid) t = grid_rng.uniform(0.0, 10.0);
  p.sigma_noise = 0.1;
  p.fixed_alpha = 0.9;
  PendulumTask task(p);
  RandomSource rng(413);
  const double amp = 2.5;
  long total = 0, violations = 0;
  for (int i = 0; i < 1000; ++i) {
    Vec y = task.observe_real(Vec{amp, 6.0}, rng);
    for (size_t k = 0; k < y.size(); ++k) {
      double envelope = amp * std::exp(-0.9 * p.time_grid[k]) + 5.0 * p.sigma_noise;
      ++total;
      if (std::abs(y[k]) > envelope) ++violations;
    }
  }
  CHECK(static_cast<double>(violations) / static_cast<double>(total) < 1e-4);
}

TEST_CASE("well-specified draw makes both processes share moments") {
  RandomSource rng(414);
  GaussianTask task = GaussianTask::well_specified_draw(rng);
  const auto& prm = task.params();
  CHECK(fmcpe::frobenius_distance(prm.a, prm.c) == 0.0);
  CHECK(prm.b == prm.d);
  CHECK(fmcpe::frobenius_distance(prm.sigma_x, prm.sigma_y) == 0.0);
  // Same rng, same theta: identical draw paths.
  RandomSource a(415), b(415);
  Vec theta = task.params().mu_theta;
  CHECK(task.simulate(theta, a) == task.observe_real(theta, b));
}

TEST_CASE("uninformative likelihood collapses the posterior to the prior") {
  GaussianTaskParams p = small_gaussian_params();
  p.c = DenseMatrix(3, 2);  // C = 0
  GaussianTask task(p);
  auto [mean, cov] = task.analytic_posterior(Vec{1.0, 2.0, 3.0});
  for (int j = 0; j < 2; ++j) CHECK(mean[static_cast<size_t>(j)] == doctest::Approx(p.mu_theta[static_cast<size_t>(j)]).epsilon(1e-9));
  CHECK(fmcpe::frobenius_distance(cov, p.sigma_theta) < 1e-9);
}

TEST_CASE("vanishing observation noise pins the posterior mean at the inverse map") {
  // Square invertible C on a 3-parameter variant.
  GaussianTaskParams p;
  p.mu_theta = Vec{0.0, 0.0, 0.0};
  p.sigma_theta = DenseMatrix::identity(3);
  p.a = DenseMatrix::identity(3);
  p.b = Vec{0.0, 0.0, 0.0};
  p.sigma_x = DenseMatrix::identity(3);
  p.c = DenseMatrix(3, 3, {2, 0, 1, 0, 1, 0, 0, 0, 3});
  p.d = Vec{0.5, -0.5, 1.0};
  DenseMatrix tiny = DenseMatrix::identity(3);
  for (int i = 0; i < 3; ++i) tiny(i, i) = 1e-10;
  p.sigma_y = tiny;
  GaussianTask task(p);
  Vec y{3.0, 1.0, 4.0};
  auto [mean, cov] = task.analytic_posterior(y);
  // Solve C theta = y - d directly.
  Vec rhs = fmcpe::vec_sub(y, p.d);
  // C is upper triangular here: back-substitute by hand.
  Vec expect(3);
  expect[2] = rhs[2] / 3.0;
  expect[1] = rhs[1] / 1.0;
  expect[0] = (rhs[0] - expect[2]) / 2.0;
  for (int j = 0; j < 3; ++j) {
    CHECK(mean[static_cast<size_t>(j)] == doctest::Approx(expect[static_cast<size_t>(j)]).epsilon(1e-3));
  }
  CHECK(fmcpe::frobenius_norm(cov) < 1e-6);
}

TEST_CASE("scalar-parameter posterior matches grid quadrature within 1%") {
  // p = 1, d = 2 variant integrable by brute force.
  GaussianTaskParams p;
  p.mu_theta = Vec{0.7};
  p.sigma_theta = DenseMatrix(1, 1, {1.5});
  p.a = DenseMatrix(2, 1, {1.0, -1.0});
  p.b = Vec{0.0, 0.0};
  p.sigma_x = DenseMatrix::identity(2);
  p.c = DenseMatrix(2, 1, {1.2, 0.4});
  p.d = Vec{0.3, -0.2};
  p.sigma_y = DenseMatrix(2, 2, {0.8, 0.2, 0.2, 0.5});
  GaussianTask task(p);
  Vec y{1.4, 0.9};
  auto [mean, cov] = task.analytic_posterior(y);

  // Dense Bayes rule on a theta grid.
  DenseMatrix noise_prec = fmcpe::spd_inverse(p.sigma_y);
  const double prior_mu = p.mu_theta[0];
  const double prior_var = p.sigma_theta(0, 0);
  const int grid_n = 20001;
  const double lo = prior_mu - 10.0, hi = prior_mu + 10.0;
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < grid_n; ++i) {
    double theta = lo + (hi - lo) * i / (grid_n - 1);
    double log_prior = -0.5 * (theta - prior_mu) * (theta - prior_mu) / prior_var;
    Vec resid{y[0] - (p.c(0, 0) * theta + p.d[0]), y[1] - (p.c(1, 0) * theta + p.d[1])};
    double quad = 0.0;
    for (int r = 0; r < 2; ++r) {
      for (int s = 0; s < 2; ++s) quad += resid[static_cast<size_t>(r)] * noise_prec(r, s) * resid[static_cast<size_t>(s)];
    }
    double w = std::exp(log_prior - 0.5 * quad);
    z += w;
    m1 += w * theta;
    m2 += w * theta * theta;
  }
  double grid_mean = m1 / z;
  double grid_var = m2 / z - grid_mean * grid_mean;
  CHECK(mean[0] == doctest::Approx(grid_mean).epsilon(0.01));
  CHECK(cov(0, 0) == doctest::Approx(grid_var).epsilon(0.01));
}

TEST_CASE("posterior covariance is symmetric positive definite across draws") {
  RandomSource rng(416);
  for (int trial = 0; trial < 5; ++trial) {
    GaussianTask task = GaussianTask::random_draw(rng);
    RandomSource obs_rng = rng.derive(trial);
    Vec theta = task.prior_sample(obs_rng);
    Vec y = task.observe_real(theta, obs_rng);
    auto [mean, cov] = task.analytic_posterior(y);
    CHECK(fmcpe::all_finite(mean));
    CHECK_NOTHROW((void)fmcpe::cholesky(cov));
  }
}

TEST_CASE("analytic posterior refuses non-gaussian tasks") {
  RandomSource rng(417);
  PendulumTask task = PendulumTask::from_grid_draw(rng, 20);
  CHECK(!task.has_analytic_posterior());
  CHECK_THROWS_AS((void)task.analytic_posterior(Vec(20, 0.0)), std::logic_error);
}

TEST_CASE("dataset bundle draws the right sizes from disjoint streams") {
  RandomSource rng(418);
  GaussianTask task = GaussianTask::random_draw(rng);
  RandomSource data_rng(419);
  auto bundle = fmcpe::build_datasets(task, data_rng, 50, 30, 20);
  CHECK(bundle.sim.size() == 50);
  CHECK(bundle.cal_pool.size() == 30);
  CHECK(bundle.test.size() == 20);
  CHECK(bundle.sim.theta_dim() == 3);
  CHECK(bundle.sim.obs_dim() == 10);
  CHECK(bundle.sim.provenance == fmcpe::Provenance::kSimulated);
  CHECK(bundle.cal_pool.provenance == fmcpe::Provenance::kCalibration);
  CHECK(bundle.test.provenance == fmcpe::Provenance::kTest);
  // Streams are disjoint: no theta appears in two splits.
  CHECK(bundle.sim.theta[0] != bundle.cal_pool.theta[0]);
  CHECK(bundle.cal_pool.theta[0] != bundle.test.theta[0]);
}

TEST_CASE("empty simulation budget yields an empty split") {
  RandomSource rng(420);
  GaussianTask task = GaussianTask::random_draw(rng);
  auto bundle = fmcpe::build_datasets(task, RandomSource(421), 0, 5, 5);
  CHECK(bundle.sim.size() == 0);
  CHECK(bundle.cal_pool.size() == 5);
}

TEST_CASE("dataset generation replays byte-identically under one seed") {
  RandomSource rng(422);
  GaussianTask task = GaussianTask::random_draw(rng);
  auto a = fmcpe::build_datasets(task, RandomSource(423), 40, 20, 10);
  auto b = fmcpe::build_datasets(task, RandomSource(423), 40, 20, 10);
  CHECK(a.sim.theta == b.sim.theta);
  CHECK(a.sim.obs == b.sim.obs);
  CHECK(a.cal_pool.theta == b.cal_pool.theta);
  CHECK(a.cal_pool.obs == b.cal_pool.obs);
  CHECK(a.test.theta == b.test.theta);
  CHECK(a.test.obs == b.test.obs);
}
