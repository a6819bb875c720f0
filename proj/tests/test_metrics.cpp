#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fmcpe/assignment.hpp"
#include "fmcpe/metrics.hpp"
#include "fmcpe/random.hpp"

using fmcpe::DenseMatrix;
using fmcpe::JointSampleSet;
using fmcpe::RandomSource;
using fmcpe::Vec;

namespace {

JointSampleSet cloud(const std::vector<Vec>& pts, JointSampleSet::Label label) {
  JointSampleSet s;
  s.points = pts;
  s.label = label;
  return s;
}

std::vector<Vec> gaussian_cloud(RandomSource& rng, int n, int dim, double shift = 0.0) {
  std::vector<Vec> pts;
  pts.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vec v = rng.normal_vec(dim);
    v[0] += shift;
    pts.push_back(std::move(v));
  }
  return pts;
}

double brute_force_min_cost(const DenseMatrix& cost) {
  const int n = cost.rows();
  std::vector<int> perm(static_cast<size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += cost(i, perm[static_cast<size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

double w2_value(const JointSampleSet& a, const JointSampleSet& b) {
  return fmcpe::w2_joint(a, b).value;
}

}  // namespace

TEST_CASE("assignment matches brute force on random cost matrices up to 6x6") {
  RandomSource rng(500);
  for (int n = 1; n <= 6; ++n) {
    for (int trial = 0; trial < 10; ++trial) {
      DenseMatrix cost(n, n);
      for (auto& e : cost.entries()) e = rng.uniform(0.0, 10.0);
      auto [assignment, total] = fmcpe::solve_assignment(cost);
      // Assignment is a permutation.
      std::vector<int> seen(static_cast<size_t>(n), 0);
      for (int c : assignment) {
        REQUIRE(c >= 0);
        REQUIRE(c < n);
        seen[static_cast<size_t>(c)]++;
      }
      for (int s : seen) CHECK(s == 1);
      // Total equals sum along the assignment and the brute-force optimum.
      double sum = 0.0;
      for (int i = 0; i < n; ++i) sum += cost(i, assignment[static_cast<size_t>(i)]);
      CHECK(total == doctest::Approx(sum).epsilon(1e-12));
      CHECK(total == doctest::Approx(brute_force_min_cost(cost)).epsilon(1e-9));
    }
  }
}

TEST_CASE("assignment rejects bad inputs") {
  CHECK_THROWS_AS((void)fmcpe::solve_assignment(DenseMatrix(2, 3)), std::invalid_argument);
  DenseMatrix nan_cost(2, 2);
  nan_cost(0, 0) = std::nan("");
  CHECK_THROWS_AS((void)fmcpe::solve_assignment(nan_cost), std::invalid_argument);
}

TEST_CASE("identical clouds have zero distance") {
  RandomSource rng(501);
  auto pts = gaussian_cloud(rng, 40, 5);
  auto real = cloud(pts, JointSampleSet::Label::kReal);
  auto gen = cloud(pts, JointSampleSet::Label::kGenerated);
  CHECK(w2_value(real, gen) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("two single points are separated by their L2 distance") {
  auto real = cloud({Vec{0.0, 0.0}}, JointSampleSet::Label::kReal);
  auto gen = cloud({Vec{3.0, 4.0}}, JointSampleSet::Label::kGenerated);
  CHECK(w2_value(real, gen) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("w2 on small clouds matches permutation enumeration") {
  RandomSource rng(502);
  for (int trial = 0; trial < 8; ++trial) {
    const int n = 2 + static_cast<int>(rng.next_below(5));  // 2..6
    auto a = cloud(gaussian_cloud(rng, n, 3), JointSampleSet::Label::kReal);
    auto b = cloud(gaussian_cloud(rng, n, 3, 1.0), JointSampleSet::Label::kGenerated);
    DenseMatrix cost(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        cost(i, j) = fmcpe::squared_distance(a.points[static_cast<size_t>(i)],
                                             b.points[static_cast<size_t>(j)]);
      }
    }
    double expect = std::sqrt(brute_force_min_cost(cost) / n);
    CHECK(w2_value(a, b) == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("w2 is symmetric and satisfies the triangle inequality on small clouds") {
  RandomSource rng(503);
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 5;
    auto a = cloud(gaussian_cloud(rng, n, 2), JointSampleSet::Label::kReal);
    auto b = cloud(gaussian_cloud(rng, n, 2, 0.5), JointSampleSet::Label::kGenerated);
    auto c = cloud(gaussian_cloud(rng, n, 2, -0.5), JointSampleSet::Label::kGenerated);
    double ab = w2_value(a, b);
    double ba = w2_value(b, a);
    double ac = w2_value(a, c);
    double cb = w2_value(c, b);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-10));
    CHECK(ab <= ac + cb + 1e-10);
  }
}

TEST_CASE("w2 enforces size agreement and the cap") {
  RandomSource rng(504);
  auto a = cloud(gaussian_cloud(rng, 10, 2), JointSampleSet::Label::kReal);
  auto b = cloud(gaussian_cloud(rng, 8, 2), JointSampleSet::Label::kGenerated);
  CHECK_THROWS_AS((void)fmcpe::w2_joint(a, b), std::invalid_argument);

  auto big_a = cloud(gaussian_cloud(rng, 50, 2), JointSampleSet::Label::kReal);
  auto big_b = cloud(gaussian_cloud(rng, 50, 2), JointSampleSet::Label::kGenerated);
  fmcpe::W2Options opt;
  opt.cap = 20;
  CHECK_THROWS_AS((void)fmcpe::w2_joint(big_a, big_b, opt), std::invalid_argument);
  opt.subsample_above_cap = true;
  auto res = fmcpe::w2_joint(big_a, big_b, opt);
  CHECK(res.subsampled);
  CHECK(res.effective_n == 20);
  CHECK(res.value > 0.0);
  // Deterministic: same call, same value.
  CHECK(fmcpe::w2_joint(big_a, big_b, opt).value == res.value);
}

TEST_CASE("separated clouds are perfectly classifiable") {
  RandomSource rng(505);
  const int n = 200;
  auto real = cloud(gaussian_cloud(rng, n, 4), JointSampleSet::Label::kReal);
  auto gen = cloud(gaussian_cloud(rng, n, 4, 10.0), JointSampleSet::Label::kGenerated);
  RandomSource test_rng(506);
  double acc = fmcpe::jc2st(real, gen, test_rng);
  CHECK(acc >= 0.99);
  CHECK(acc <= 1.0);
}

TEST_CASE("same-distribution clouds sit near chance level (small-n smoke)") {
  RandomSource rng(507);
  const int n = 200;
  auto real = cloud(gaussian_cloud(rng, n, 4), JointSampleSet::Label::kReal);
  auto gen = cloud(gaussian_cloud(rng, n, 4), JointSampleSet::Label::kGenerated);
  RandomSource test_rng(508);
  double acc = fmcpe::jc2st(real, gen, test_rng);
  CHECK(acc >= 0.35);
  CHECK(acc <= 0.65);
}

TEST_CASE("jc2st validates inputs and is seed-deterministic") {
  RandomSource rng(509);
  auto a = cloud(gaussian_cloud(rng, 40, 2), JointSampleSet::Label::kReal);
  auto b = cloud(gaussian_cloud(rng, 35, 2), JointSampleSet::Label::kGenerated);
  RandomSource t(510);
  CHECK_THROWS_AS((void)fmcpe::jc2st(a, b, t), std::invalid_argument);
  auto tiny = cloud(gaussian_cloud(rng, 10, 2), JointSampleSet::Label::kReal);
  auto tiny2 = cloud(gaussian_cloud(rng, 10, 2), JointSampleSet::Label::kGenerated);
  CHECK_THROWS_AS((void)fmcpe::jc2st(tiny, tiny2, t), std::invalid_argument);

  auto c = cloud(gaussian_cloud(rng, 60, 3), JointSampleSet::Label::kReal);
  auto d = cloud(gaussian_cloud(rng, 60, 3, 0.7), JointSampleSet::Label::kGenerated);
  RandomSource s1(511), s2(511);
  CHECK(fmcpe::jc2st(c, d, s1) == fmcpe::jc2st(c, d, s2));
}

TEST_CASE("mse is zero when samples equal their truths") {
  std::vector<Vec> truths{{1.0, 2.0}, {3.0, 4.0}};
  std::vector<std::vector<Vec>> samples{{truths[0], truths[0]}, {truths[1], truths[1]}};
  CHECK(fmcpe::mse_metric(samples, truths) == doctest::Approx(0.0));
}

TEST_CASE("unit offset with one sample gives exactly one") {
  std::vector<Vec> truths{{0.5, -1.0, 2.0}};
  std::vector<std::vector<Vec>> samples{{Vec{1.5, -1.0, 2.0}}};
  CHECK(fmcpe::mse_metric(samples, truths) == doctest::Approx(1.0));
}

TEST_CASE("mse matches an independent recomputation on random inputs") {
  RandomSource rng(512);
  const int n_test = 7, m = 5, p = 3;
  std::vector<Vec> truths;
  std::vector<std::vector<Vec>> samples;
  for (int j = 0; j < n_test; ++j) {
    truths.push_back(rng.normal_vec(p));
    std::vector<Vec> row;
    for (int i = 0; i < m; ++i) row.push_back(rng.normal_vec(p));
    samples.push_back(std::move(row));
  }
  double expect = 0.0;
  for (int j = 0; j < n_test; ++j) {
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < p; ++k) {
        double d = samples[static_cast<size_t>(j)][static_cast<size_t>(i)][static_cast<size_t>(k)] -
                   truths[static_cast<size_t>(j)][static_cast<size_t>(k)];
        expect += d * d;
      }
    }
  }
  expect /= n_test * m;
  CHECK(fmcpe::mse_metric(samples, truths) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("mse rejects mismatched and empty inputs") {
  std::vector<Vec> truths{{1.0}};
  CHECK_THROWS_AS((void)fmcpe::mse_metric({}, truths), std::invalid_argument);
  CHECK_THROWS_AS((void)fmcpe::mse_metric({{}}, truths), std::invalid_argument);
  std::vector<std::vector<Vec>> ragged{{Vec{1.0}}, {Vec{1.0}, Vec{2.0}}};
  std::vector<Vec> two{{1.0}, {2.0}};
  CHECK_THROWS_AS((void)fmcpe::mse_metric(ragged, two), std::invalid_argument);
}

TEST_CASE("metric report serializes and validates") {
  fmcpe::MetricReport rep;
  rep.method = "fmcpe";
  rep.task = "gaussian";
  rep.n_cal = 200;
  rep.seed = 3;
  rep.w2 = 1.25;
  rep.jc2st = 0.61;
  rep.mse = 0.5;
  rep.seconds = 12.345;
  rep.validate();
  CHECK(fmcpe::MetricReport::csv_header() == "method,task,n_cal,seed,w2,jc2st,mse,seconds");
  CHECK(rep.csv_row() == "fmcpe,gaussian,200,3,1.25,0.60999999999999999,0.5,12.345");

  fmcpe::MetricReport bad = rep;
  bad.jc2st = 1.5;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  bad = rep;
  bad.w2 = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
}

TEST_CASE("joint_set concatenates and validates") {
  std::vector<Vec> thetas{{1.0, 2.0}};
  std::vector<Vec> obs{{3.0}};
  auto s = fmcpe::joint_set(thetas, obs, JointSampleSet::Label::kReal);
  CHECK(s.dim() == 3);
  CHECK(s.points[0] == Vec{1.0, 2.0, 3.0});
  std::vector<Vec> bad_obs{{std::nan("")}};
  CHECK_THROWS_AS((void)fmcpe::joint_set(thetas, bad_obs, JointSampleSet::Label::kReal),
                  std::invalid_argument);
}
