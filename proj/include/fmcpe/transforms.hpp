#pragma once

#include <optional>
#include <vector>

#include "fmcpe/matrix.hpp"

namespace fmcpe {

// Per-dimension z-scoring with population standard deviations. The transform
// is a fixed preprocessing constant once fitted; stds are clamped below at
// 1e-8 so constant columns stay usable.
class Standardizer {
 public:
  Standardizer() = default;

  static Standardizer fit(const std::vector<Vec>& rows);

  Vec transform(const Vec& v) const;
  Vec inverse(const Vec& v) const;
  std::vector<Vec> transform_all(const std::vector<Vec>& rows) const;

  bool fitted() const { return fitted_; }
  int dim() const { return static_cast<int>(mean_.size()); }
  const Vec& mean() const { return mean_; }
  const Vec& stddev() const { return std_; }
  // Dimensions whose std hit the clamp floor (constant columns).
  const std::vector<int>& clamped_dims() const { return clamped_; }
  // Jacobian term of transform(): sum over dims of -log(std).
  double log_det_jacobian() const;

  static Standardizer from_moments(Vec mean, Vec stddev);

 private:
  Vec mean_;
  Vec std_;
  std::vector<int> clamped_;
  bool fitted_ = false;
};

// Maps a per-dimension box (lo, hi) to all of R via log((v-lo)/(hi-v)).
// Inputs are clamped eps into the box before the forward map, with
// eps = 1e-6 * (hi - lo), which keeps outputs below ~14 in magnitude.
class LogitTransform {
 public:
  LogitTransform() = default;
  LogitTransform(Vec lower, Vec upper);

  Vec forward(const Vec& v) const;
  Vec inverse(const Vec& u) const;
  // d/dv of forward, evaluated at (clamped) v; log-determinant of forward.
  double forward_log_det_jacobian(const Vec& v) const;

  int dim() const { return static_cast<int>(lower_.size()); }
  const Vec& lower() const { return lower_; }
  const Vec& upper() const { return upper_; }

 private:
  Vec lower_;
  Vec upper_;
};

// The preprocessing state shared by every model in a run: observations are
// z-scored; parameters are logit-mapped first when the prior is a box, then
// z-scored. Fitted once on the simulation training split and reused verbatim
// for calibration and test data.
struct TransformPack {
  Standardizer obs;
  std::optional<LogitTransform> theta_logit;
  Standardizer theta;

  Vec obs_to_model(const Vec& raw) const;
  Vec obs_from_model(const Vec& model) const;
  Vec theta_to_model(const Vec& raw) const;
  Vec theta_from_model(const Vec& model) const;
  // log |d theta_model / d theta_raw|, for densities over raw parameters.
  double theta_to_model_log_det(const Vec& raw) const;

  static TransformPack fit(const std::vector<Vec>& theta_rows, const std::vector<Vec>& obs_rows,
                           const std::optional<LogitTransform>& theta_logit);
};

}  // namespace fmcpe
