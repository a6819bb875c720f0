#pragma once

#include "fmcpe/matrix.hpp"
#include "fmcpe/random.hpp"

namespace fmcpe {

// Draw mean + L z with z iid standard normal; L is a lower Cholesky factor.
Vec gaussian_sample(RandomSource& rng, const Vec& mean, const DenseMatrix& chol_cov);

// Draw from an isotropic Gaussian centered at mean.
Vec isotropic_gaussian_sample(RandomSource& rng, const Vec& mean, double sigma);

// log N(x | 0, I) summed over coordinates.
double standard_normal_log_density(const Vec& x);

}  // namespace fmcpe
