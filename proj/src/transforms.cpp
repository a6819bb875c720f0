#include "fmcpe/transforms.hpp"

#include <cmath>
#include <stdexcept>

namespace fmcpe {

namespace {
constexpr double kStdFloor = 1e-8;
constexpr double kLogitEpsScale = 1e-6;
}  // namespace

Standardizer Standardizer::fit(const std::vector<Vec>& rows) {
  if (rows.size() < 2) throw std::invalid_argument("Standardizer::fit: need at least 2 rows");
  const size_t dim = rows[0].size();
  Standardizer s;
  s.mean_.assign(dim, 0.0);
  s.std_.assign(dim, 0.0);
  for (const auto& r : rows) {
    if (r.size() != dim) throw std::invalid_argument("Standardizer::fit: ragged rows");
    for (size_t j = 0; j < dim; ++j) s.mean_[j] += r[j];
  }
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (size_t j = 0; j < dim; ++j) s.mean_[j] *= inv_n;
  for (const auto& r : rows) {
    for (size_t j = 0; j < dim; ++j) {
      const double d = r[j] - s.mean_[j];
      s.std_[j] += d * d;
    }
  }
  for (size_t j = 0; j < dim; ++j) {
    // Population convention: divide by n, this is a preprocessing constant.
    double sd = std::sqrt(s.std_[j] * inv_n);
    if (sd < kStdFloor) {
      sd = kStdFloor;
      s.clamped_.push_back(static_cast<int>(j));
    }
    s.std_[j] = sd;
  }
  s.fitted_ = true;
  return s;
}

Standardizer Standardizer::from_moments(Vec mean, Vec stddev) {
  if (mean.size() != stddev.size()) {
    throw std::invalid_argument("Standardizer::from_moments: size mismatch");
  }
  Standardizer s;
  s.mean_ = std::move(mean);
  s.std_ = std::move(stddev);
  for (size_t j = 0; j < s.std_.size(); ++j) {
    if (s.std_[j] < kStdFloor) {
      s.std_[j] = kStdFloor;
      s.clamped_.push_back(static_cast<int>(j));
    }
  }
  s.fitted_ = true;
  return s;
}

Vec Standardizer::transform(const Vec& v) const {
  if (!fitted_) throw std::logic_error("Standardizer: not fitted");
  if (v.size() != mean_.size()) throw std::invalid_argument("Standardizer: dimension mismatch");
  Vec out(v.size());
  for (size_t j = 0; j < v.size(); ++j) out[j] = (v[j] - mean_[j]) / std_[j];
  return out;
}

Vec Standardizer::inverse(const Vec& v) const {
  if (!fitted_) throw std::logic_error("Standardizer: not fitted");
  if (v.size() != mean_.size()) throw std::invalid_argument("Standardizer: dimension mismatch");
  Vec out(v.size());
  for (size_t j = 0; j < v.size(); ++j) out[j] = v[j] * std_[j] + mean_[j];
  return out;
}

std::vector<Vec> Standardizer::transform_all(const std::vector<Vec>& rows) const {
  std::vector<Vec> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(transform(r));
  return out;
}

double Standardizer::log_det_jacobian() const {
  double s = 0.0;
  for (double sd : std_) s -= std::log(sd);
  return s;
}

LogitTransform::LogitTransform(Vec lower, Vec upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) {
    throw std::invalid_argument("LogitTransform: bound size mismatch");
  }
  for (size_t j = 0; j < lower_.size(); ++j) {
    if (!std::isfinite(lower_[j]) || !std::isfinite(upper_[j]) || lower_[j] >= upper_[j]) {
      throw std::invalid_argument("LogitTransform: need finite lower < upper per dimension");
    }
  }
}

Vec LogitTransform::forward(const Vec& v) const {
  if (v.size() != lower_.size()) throw std::invalid_argument("LogitTransform: dimension mismatch");
  Vec out(v.size());
  for (size_t j = 0; j < v.size(); ++j) {
    const double width = upper_[j] - lower_[j];
    const double eps = kLogitEpsScale * width;
    double x = std::min(std::max(v[j], lower_[j] + eps), upper_[j] - eps);
    out[j] = std::log((x - lower_[j]) / (upper_[j] - x));
  }
  return out;
}

Vec LogitTransform::inverse(const Vec& u) const {
  if (u.size() != lower_.size()) throw std::invalid_argument("LogitTransform: dimension mismatch");
  Vec out(u.size());
  for (size_t j = 0; j < u.size(); ++j) {
    const double s = 1.0 / (1.0 + std::exp(-u[j]));
    out[j] = lower_[j] + (upper_[j] - lower_[j]) * s;
  }
  return out;
}

double LogitTransform::forward_log_det_jacobian(const Vec& v) const {
  if (v.size() != lower_.size()) throw std::invalid_argument("LogitTransform: dimension mismatch");
  double acc = 0.0;
  for (size_t j = 0; j < v.size(); ++j) {
    const double width = upper_[j] - lower_[j];
    const double eps = kLogitEpsScale * width;
    double x = std::min(std::max(v[j], lower_[j] + eps), upper_[j] - eps);
    // d/dx log((x-lo)/(hi-x)) = (hi-lo) / ((x-lo)(hi-x))
    acc += std::log(width) - std::log(x - lower_[j]) - std::log(upper_[j] - x);
  }
  return acc;
}

Vec TransformPack::obs_to_model(const Vec& raw) const { return obs.transform(raw); }

Vec TransformPack::obs_from_model(const Vec& model) const { return obs.inverse(model); }

Vec TransformPack::theta_to_model(const Vec& raw) const {
  if (theta_logit) return theta.transform(theta_logit->forward(raw));
  return theta.transform(raw);
}

Vec TransformPack::theta_from_model(const Vec& model) const {
  Vec v = theta.inverse(model);
  if (theta_logit) return theta_logit->inverse(v);
  return v;
}

double TransformPack::theta_to_model_log_det(const Vec& raw) const {
  double acc = theta.log_det_jacobian();
  if (theta_logit) acc += theta_logit->forward_log_det_jacobian(raw);
  return acc;
}

TransformPack TransformPack::fit(const std::vector<Vec>& theta_rows,
                                 const std::vector<Vec>& obs_rows,
                                 const std::optional<LogitTransform>& theta_logit) {
  TransformPack pack;
  pack.obs = Standardizer::fit(obs_rows);
  pack.theta_logit = theta_logit;
  if (theta_logit) {
    std::vector<Vec> mapped;
    mapped.reserve(theta_rows.size());
    for (const auto& t : theta_rows) mapped.push_back(theta_logit->forward(t));
    pack.theta = Standardizer::fit(mapped);
  } else {
    pack.theta = Standardizer::fit(theta_rows);
  }
  return pack;
}

}  // namespace fmcpe
