#include "fmcpe/mlp.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>

namespace fmcpe {

void MlpGrad::scale(double s) {
  for (auto& m : w) {
    for (auto& e : m.entries()) e *= s;
  }
  for (auto& v : b) {
    for (auto& e : v) e *= s;
  }
}

Vec MlpGrad::flatten() const {
  Vec out;
  for (size_t l = 0; l < w.size(); ++l) {
    out.insert(out.end(), w[l].entries().begin(), w[l].entries().end());
    out.insert(out.end(), b[l].begin(), b[l].end());
  }
  return out;
}

Mlp::Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
  if (widths_.size() < 2) throw std::invalid_argument("Mlp: need at least input and output widths");
  for (int wd : widths_) {
    if (wd <= 0) throw std::invalid_argument("Mlp: widths must be positive");
  }
  for (size_t l = 0; l + 1 < widths_.size(); ++l) {
    w_.emplace_back(widths_[l + 1], widths_[l]);
    b_.emplace_back(static_cast<size_t>(widths_[l + 1]), 0.0);
  }
}

Mlp Mlp::xavier_init(std::vector<int> widths, RandomSource& rng) {
  Mlp net(std::move(widths));
  for (int l = 0; l < net.layer_count(); ++l) {
    DenseMatrix& w = net.weight(l);
    const double a = std::sqrt(6.0 / (w.rows() + w.cols()));
    for (auto& e : w.entries()) e = rng.uniform(-a, a);
  }
  return net;
}

int Mlp::param_count() const {
  int n = 0;
  for (size_t l = 0; l < w_.size(); ++l) {
    n += w_[l].rows() * w_[l].cols() + static_cast<int>(b_[l].size());
  }
  return n;
}

Vec Mlp::flatten() const {
  Vec out;
  out.reserve(static_cast<size_t>(param_count()));
  for (size_t l = 0; l < w_.size(); ++l) {
    out.insert(out.end(), w_[l].entries().begin(), w_[l].entries().end());
    out.insert(out.end(), b_[l].begin(), b_[l].end());
  }
  return out;
}

void Mlp::unflatten(const Vec& params) {
  if (static_cast<int>(params.size()) != param_count()) {
    throw std::invalid_argument("Mlp::unflatten: parameter count mismatch");
  }
  size_t pos = 0;
  for (size_t l = 0; l < w_.size(); ++l) {
    for (auto& e : w_[l].entries()) e = params[pos++];
    for (auto& e : b_[l]) e = params[pos++];
  }
}

Vec Mlp::forward(const Vec& input) const {
  DenseMatrix in(1, static_cast<int>(input.size()), input);
  DenseMatrix out = forward_batch(in);
  return Vec(out.entries());
}

DenseMatrix Mlp::forward_batch(const DenseMatrix& input) const {
  MlpCache cache;
  return forward_batch(input, cache);
}

DenseMatrix Mlp::forward_batch(const DenseMatrix& input, MlpCache& cache) const {
  if (input.cols() != input_dim()) {
    throw std::invalid_argument("Mlp::forward: input dimension mismatch");
  }
  cache.acts.clear();
  cache.acts.reserve(w_.size() + 1);
  cache.acts.push_back(input);
  const int last = layer_count() - 1;
  for (int l = 0; l <= last; ++l) {
    DenseMatrix z = matmul_nt(cache.acts.back(), w_[static_cast<size_t>(l)]);
    const Vec& bias = b_[static_cast<size_t>(l)];
    for (int r = 0; r < z.rows(); ++r) {
      double* row = z.row(r);
      for (int c = 0; c < z.cols(); ++c) row[c] += bias[static_cast<size_t>(c)];
    }
    if (l != last) {
      for (auto& e : z.entries()) e = std::tanh(e);
    }
    cache.acts.push_back(std::move(z));
  }
  return cache.acts.back();
}

DenseMatrix Mlp::backward_batch(const MlpCache& cache, const DenseMatrix& out_grad,
                                MlpGrad& grad) const {
  const int last = layer_count() - 1;
  if (cache.acts.size() != w_.size() + 1) {
    throw std::invalid_argument("Mlp::backward: cache does not match network");
  }
  if (out_grad.rows() != cache.acts.back().rows() || out_grad.cols() != output_dim()) {
    throw std::invalid_argument("Mlp::backward: out_grad shape mismatch");
  }
  DenseMatrix g = out_grad;
  for (int l = last; l >= 0; --l) {
    const DenseMatrix& act_out = cache.acts[static_cast<size_t>(l) + 1];
    if (l != last) {
      // tanh'(z) from the post-activation value: 1 - a^2.
      for (size_t i = 0; i < g.entries().size(); ++i) {
        const double a = act_out.entries()[i];
        g.entries()[i] *= 1.0 - a * a;
      }
    }
    const DenseMatrix& act_in = cache.acts[static_cast<size_t>(l)];
    DenseMatrix dw = matmul_tn(g, act_in);  // (out x in)
    DenseMatrix& wacc = grad.w[static_cast<size_t>(l)];
    for (size_t i = 0; i < dw.entries().size(); ++i) wacc.entries()[i] += dw.entries()[i];
    Vec& bacc = grad.b[static_cast<size_t>(l)];
    for (int r = 0; r < g.rows(); ++r) {
      const double* row = g.row(r);
      for (int c = 0; c < g.cols(); ++c) bacc[static_cast<size_t>(c)] += row[c];
    }
    if (l > 0) {
      g = matmul(g, w_[static_cast<size_t>(l)]);  // (batch x in)
    } else {
      return matmul(g, w_[0]);
    }
  }
  return DenseMatrix();  // unreachable
}

std::pair<MlpGrad, Vec> Mlp::backward(const Vec& input, const Vec& out_grad) const {
  MlpCache cache;
  DenseMatrix in(1, static_cast<int>(input.size()), input);
  forward_batch(in, cache);
  MlpGrad grad = zero_grad();
  DenseMatrix og(1, static_cast<int>(out_grad.size()), out_grad);
  DenseMatrix ig = backward_batch(cache, og, grad);
  return {std::move(grad), Vec(ig.entries())};
}

MlpGrad Mlp::zero_grad() const {
  MlpGrad g;
  for (size_t l = 0; l < w_.size(); ++l) {
    g.w.emplace_back(w_[l].rows(), w_[l].cols());
    g.b.emplace_back(b_[l].size(), 0.0);
  }
  return g;
}

namespace {
std::atomic<long> g_clamp_events{0};
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

TimeEmbedding::TimeEmbedding(int num_frequencies, double base_frequency)
    : k_(num_frequencies), base_(base_frequency) {
  if (k_ <= 0) throw std::invalid_argument("TimeEmbedding: need at least one frequency");
  if (base_ <= 0.0) throw std::invalid_argument("TimeEmbedding: base frequency must be positive");
}

Vec TimeEmbedding::embed(double t) const {
  if (t < 0.0 || t > 1.0) {
    g_clamp_events.fetch_add(1, std::memory_order_relaxed);
    t = t < 0.0 ? 0.0 : 1.0;
  }
  Vec out(static_cast<size_t>(2 * k_));
  double f = base_;
  for (int k = 0; k < k_; ++k) {
    const double phase = kTwoPi * f * t;
    out[static_cast<size_t>(2 * k)] = std::sin(phase);
    out[static_cast<size_t>(2 * k) + 1] = std::cos(phase);
    f *= 2.0;
  }
  return out;
}

long TimeEmbedding::clamp_events() { return g_clamp_events.load(std::memory_order_relaxed); }

void TimeEmbedding::reset_clamp_events() { g_clamp_events.store(0, std::memory_order_relaxed); }

}  // namespace fmcpe
