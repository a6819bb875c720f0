#include "fmcpe/gaussian.hpp"

#include <cmath>
#include <stdexcept>

namespace fmcpe {

Vec gaussian_sample(RandomSource& rng, const Vec& mean, const DenseMatrix& chol_cov) {
  const int n = static_cast<int>(mean.size());
  if (chol_cov.rows() != n || chol_cov.cols() != n) {
    throw std::invalid_argument("gaussian_sample: Cholesky factor does not match mean dimension");
  }
  Vec z = rng.normal_vec(n);
  Vec out(mean);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    const double* lrow = chol_cov.row(i);
    for (int j = 0; j <= i; ++j) s += lrow[j] * z[static_cast<size_t>(j)];
    out[static_cast<size_t>(i)] += s;
  }
  return out;
}

Vec isotropic_gaussian_sample(RandomSource& rng, const Vec& mean, double sigma) {
  Vec out(mean);
  for (auto& v : out) v += sigma * rng.normal();
  return out;
}

double standard_normal_log_density(const Vec& x) {
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  double s = 0.0;
  for (double v : x) s += -0.5 * v * v - kLogSqrt2Pi;
  return s;
}

}  // namespace fmcpe
