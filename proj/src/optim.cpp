#include "fmcpe/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fmcpe {

AdamState::AdamState(int dim, AdamConfig cfg)
    : cfg_(cfg), m_(static_cast<size_t>(dim), 0.0), v_(static_cast<size_t>(dim), 0.0) {
  if (dim <= 0) throw std::invalid_argument("AdamState: dimension must be positive");
}

void AdamState::step(Vec& params, const Vec& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw std::invalid_argument("AdamState::step: dimension mismatch");
  }
  for (size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("AdamState::step: non-finite gradient at coordinate " +
                               std::to_string(i) + " on step " + std::to_string(t_ + 1));
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grads[i];
    v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grads[i] * grads[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
  }
}

Vec clip_global_norm(const Vec& grads, const GradClipConfig& cfg) {
  if (cfg.max_norm <= 0.0) throw std::invalid_argument("clip_global_norm: max_norm must be > 0");
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (norm <= cfg.max_norm) return grads;
  Vec out(grads);
  const double s = cfg.max_norm / norm;
  for (auto& g : out) g *= s;
  return out;
}

}  // namespace fmcpe
