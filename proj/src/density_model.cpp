#include "fmcpe/density_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include "fmcpe/optim.hpp"

namespace fmcpe {
namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<int> trunk_widths(const DensityModelConfig& cfg, int theta_dim, int obs_dim) {
  std::vector<int> w;
  w.push_back(obs_dim);
  for (int h : cfg.hidden) w.push_back(h);
  w.push_back(cfg.head == DensityHead::kDiagonalGaussian ? 2 * theta_dim : cfg.context_dim);
  return w;
}

// Everything the NLL backward pass needs from the forward pass.
struct NllPass {
  MlpCache trunk_cache;
  DenseMatrix trunk_out;
  std::vector<MlpCache> net_cache;  // per coupling layer
  std::vector<DenseMatrix> s;       // clamped log-scales, rows x |unmasked|
  std::vector<DenseMatrix> wu;      // transformed coords after each layer
  DenseMatrix z;                    // base-space coordinates (coupling head)
  Vec row_nll;
};

NllPass run_nll_forward(const ConditionalDensityModel& m, const DenseMatrix& theta_m,
                        const DenseMatrix& obs_m) {
  if (theta_m.rows() != obs_m.rows()) {
    throw std::invalid_argument("density model: theta and obs row counts differ");
  }
  if (theta_m.cols() != m.theta_dim() || obs_m.cols() != m.obs_dim()) {
    throw std::invalid_argument("density model: theta/obs dimension mismatch");
  }
  const int n = theta_m.rows();
  const int td = m.theta_dim();
  const DensityModelConfig& cfg = m.config();

  NllPass p;
  p.trunk_out = m.trunk().forward_batch(obs_m, p.trunk_cache);
  p.row_nll.assign(static_cast<size_t>(n), 0.0);

  if (cfg.head == DensityHead::kDiagonalGaussian) {
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = 0; k < td; ++k) {
        const double mu = p.trunk_out(i, k);
        const double raw = p.trunk_out(i, td + k);
        const double ls = cfg.log_std_cap - softplus(cfg.log_std_cap - raw);
        const double zk = (theta_m(i, k) - mu) * std::exp(-ls);
        acc += 0.5 * zk * zk + ls + kLogSqrt2Pi;
      }
      p.row_nll[static_cast<size_t>(i)] = acc;
    }
    return p;
  }

  const std::vector<CouplingLayer>& layers = m.couplings();
  const int ctx = p.trunk_out.cols();
  DenseMatrix v = theta_m;
  p.net_cache.resize(layers.size());
  p.s.resize(layers.size());
  p.wu.resize(layers.size());
  Vec logdet(static_cast<size_t>(n), 0.0);
  for (size_t l = 0; l < layers.size(); ++l) {
    const CouplingLayer& cl = layers[l];
    const int pm = static_cast<int>(cl.masked.size());
    const int pu = static_cast<int>(cl.unmasked.size());
    DenseMatrix nin(n, pm + ctx);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < pm; ++j) nin(i, j) = v(i, cl.masked[static_cast<size_t>(j)]);
      for (int c = 0; c < ctx; ++c) nin(i, pm + c) = p.trunk_out(i, c);
    }
    const DenseMatrix out = cl.net.forward_batch(nin, p.net_cache[l]);
    p.s[l] = DenseMatrix(n, pu);
    p.wu[l] = DenseMatrix(n, pu);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < pu; ++k) {
        const double s = cfg.scale_cap * std::tanh(out(i, k) / cfg.scale_cap);
        const double w = (v(i, cl.unmasked[static_cast<size_t>(k)]) - out(i, pu + k)) * std::exp(-s);
        p.s[l](i, k) = s;
        p.wu[l](i, k) = w;
        logdet[static_cast<size_t>(i)] += s;
        v(i, cl.unmasked[static_cast<size_t>(k)]) = w;
      }
    }
  }
  p.z = std::move(v);
  for (int i = 0; i < n; ++i) {
    double sq = 0.0;
    for (int k = 0; k < td; ++k) sq += p.z(i, k) * p.z(i, k);
    p.row_nll[static_cast<size_t>(i)] = 0.5 * sq + td * kLogSqrt2Pi + logdet[static_cast<size_t>(i)];
  }
  return p;
}

DenseMatrix gather_rows(const DenseMatrix& src, const std::vector<int>& idx) {
  DenseMatrix out(static_cast<int>(idx.size()), src.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    const double* r = src.row(idx[i]);
    for (int c = 0; c < src.cols(); ++c) out(static_cast<int>(i), c) = r[c];
  }
  return out;
}

DenseMatrix rows_to_model_matrix(const std::vector<Vec>& rows,
                                 Vec (TransformPack::*map)(const Vec&) const,
                                 const TransformPack& tf) {
  if (rows.empty()) return DenseMatrix();
  DenseMatrix out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
  for (size_t i = 0; i < rows.size(); ++i) {
    const Vec m = (tf.*map)(rows[i]);
    for (size_t c = 0; c < m.size(); ++c) {
      out(static_cast<int>(i), static_cast<int>(c)) = m[c];
    }
  }
  return out;
}

// Shared optimization loop: minibatch Adam with gradient clipping, periodic
// validation, patience-based early stopping, and best-parameter restore.
TrainReport fit_model(ConditionalDensityModel& model, const DenseMatrix& theta_m,
                      const DenseMatrix& obs_m, const NpeTrainConfig& cfg, double lr,
                      RandomSource& rng) {
  const int n = theta_m.rows();
  if (n < 1) throw std::invalid_argument("density fit: empty dataset");
  if (cfg.batch_size < 1 || cfg.max_steps < 1 || cfg.eval_every < 1 || cfg.patience < 1) {
    throw std::invalid_argument("density fit: non-positive training configuration value");
  }

  RandomSource split_rng = rng.derive("split");
  std::vector<int> train_idx;
  std::vector<int> val_idx;
  if (n == 1) {
    train_idx = {0};
    val_idx = {0};
  } else {
    const std::vector<int> perm = random_permutation(n, split_rng);
    int n_val = static_cast<int>(std::llround(cfg.val_fraction * n));
    n_val = std::clamp(n_val, 1, n - 1);
    const int n_train = n - n_val;
    train_idx.assign(perm.begin(), perm.begin() + n_train);
    val_idx.assign(perm.begin() + n_train, perm.end());
  }
  const DenseMatrix th_tr = gather_rows(theta_m, train_idx);
  const DenseMatrix ob_tr = gather_rows(obs_m, train_idx);
  const DenseMatrix th_val = gather_rows(theta_m, val_idx);
  const DenseMatrix ob_val = gather_rows(obs_m, val_idx);

  const int n_train = th_tr.rows();
  const int batch = std::min(cfg.batch_size, n_train);

  AdamConfig adam_cfg;
  adam_cfg.lr = lr;
  AdamState adam(model.param_count(), adam_cfg);
  const GradClipConfig clip{cfg.clip_norm};

  Vec params = model.parameters();
  Vec best_params = params;
  double best_val = model.mean_nll(th_val, ob_val);
  if (!std::isfinite(best_val)) {
    throw std::runtime_error("density fit: non-finite validation loss at initialization");
  }
  long best_step = 0;
  int evals = 1;  // the initial evaluation above
  int evals_since_best = 0;

  RandomSource order_rng = rng.derive("order");
  std::vector<int> order(static_cast<size_t>(n_train));
  for (int i = 0; i < n_train; ++i) order[static_cast<size_t>(i)] = i;
  int pos = n_train;  // force an initial shuffle

  Vec grad;
  std::vector<int> batch_idx(static_cast<size_t>(batch));
  long step = 0;
  long last_eval_step = 0;
  while (step < cfg.max_steps) {
    if (pos + batch > n_train) {
      shuffle_indices(order, order_rng);
      pos = 0;
    }
    for (int i = 0; i < batch; ++i) batch_idx[static_cast<size_t>(i)] = order[static_cast<size_t>(pos + i)];
    pos += batch;
    const DenseMatrix th_b = gather_rows(th_tr, batch_idx);
    const DenseMatrix ob_b = gather_rows(ob_tr, batch_idx);

    const double loss = model.mean_nll_backward(th_b, ob_b, grad);
    if (!std::isfinite(loss)) {
      throw std::runtime_error("density fit: non-finite training loss at step " +
                               std::to_string(step + 1));
    }
    grad = clip_global_norm(grad, clip);
    adam.step(params, grad);
    model.set_parameters(params);
    ++step;

    if (step % cfg.eval_every == 0) {
      last_eval_step = step;
      const double val = model.mean_nll(th_val, ob_val);
      if (!std::isfinite(val)) {
        throw std::runtime_error("density fit: non-finite validation loss at step " +
                                 std::to_string(step));
      }
      ++evals;
      if (val < best_val) {
        best_val = val;
        best_params = params;
        best_step = step;
        evals_since_best = 0;
      } else {
        ++evals_since_best;
        if (evals_since_best >= cfg.patience) break;
      }
    }
  }
  if (step > last_eval_step) {
    const double val = model.mean_nll(th_val, ob_val);
    ++evals;
    if (std::isfinite(val) && val < best_val) {
      best_val = val;
      best_params = params;
      best_step = step;
    }
  }

  model.set_parameters(best_params);
  TrainReport report;
  report.steps = step;
  report.best_step = best_step;
  report.best_val_nll = best_val;
  report.final_val_nll = model.mean_nll(th_val, ob_val);
  report.evals = evals;
  return report;
}

}  // namespace

ConditionalDensityModel::ConditionalDensityModel(DensityModelConfig config, TransformPack transforms,
                                                 int theta_dim, int obs_dim, RandomSource& init_rng)
    : config_(std::move(config)), transforms_(std::move(transforms)), theta_dim_(theta_dim),
      obs_dim_(obs_dim) {
  if (theta_dim_ < 1 || obs_dim_ < 1) {
    throw std::invalid_argument("density model: dimensions must be positive");
  }
  for (int h : config_.hidden) {
    if (h < 1) throw std::invalid_argument("density model: hidden widths must be positive");
  }
  if (config_.log_std_cap <= 0.0 || config_.scale_cap <= 0.0) {
    throw std::invalid_argument("density model: caps must be positive");
  }

  RandomSource trunk_rng = init_rng.derive("trunk");
  trunk_ = Mlp::xavier_init(trunk_widths(config_, theta_dim_, obs_dim_), trunk_rng);
  // Zero the output layer so the initial density is (near-)standard normal in
  // model coordinates regardless of the observation.
  trunk_.weight(trunk_.layer_count() - 1).fill(0.0);

  if (config_.head == DensityHead::kAffineCoupling) {
    if (theta_dim_ < 2) {
      throw std::invalid_argument(
          "density model: affine coupling head needs at least 2 parameter dimensions");
    }
    if (config_.context_dim < 1 || config_.coupling_layers < 1) {
      throw std::invalid_argument("density model: invalid coupling configuration");
    }
    for (int h : config_.coupling_hidden) {
      if (h < 1) throw std::invalid_argument("density model: coupling hidden widths must be positive");
    }
    RandomSource base = init_rng.derive("couplings");
    couplings_.resize(static_cast<size_t>(config_.coupling_layers));
    for (int l = 0; l < config_.coupling_layers; ++l) {
      CouplingLayer& cl = couplings_[static_cast<size_t>(l)];
      for (int k = 0; k < theta_dim_; ++k) {
        const bool even_coord = (k % 2 == 0);
        const bool even_layer = (l % 2 == 0);
        if (even_coord == even_layer) {
          cl.masked.push_back(k);
        } else {
          cl.unmasked.push_back(k);
        }
      }
      std::vector<int> w;
      w.push_back(static_cast<int>(cl.masked.size()) + config_.context_dim);
      for (int h : config_.coupling_hidden) w.push_back(h);
      w.push_back(2 * static_cast<int>(cl.unmasked.size()));
      RandomSource net_rng = base.derive(static_cast<uint64_t>(l));
      cl.net = Mlp::xavier_init(w, net_rng);
      cl.net.weight(cl.net.layer_count() - 1).fill(0.0);  // identity flow at init
    }
  }
}

int ConditionalDensityModel::param_count() const {
  int total = trunk_.param_count();
  for (const CouplingLayer& cl : couplings_) total += cl.net.param_count();
  return total;
}

Vec ConditionalDensityModel::parameters() const {
  Vec out;
  out.reserve(static_cast<size_t>(param_count()));
  const Vec t = trunk_.flatten();
  out.insert(out.end(), t.begin(), t.end());
  for (const CouplingLayer& cl : couplings_) {
    const Vec c = cl.net.flatten();
    out.insert(out.end(), c.begin(), c.end());
  }
  return out;
}

void ConditionalDensityModel::set_parameters(const Vec& params) {
  if (static_cast<int>(params.size()) != param_count()) {
    throw std::invalid_argument("density model: parameter vector size mismatch");
  }
  size_t pos = 0;
  const auto take = [&params, &pos](int count) {
    Vec seg(params.begin() + static_cast<std::ptrdiff_t>(pos),
            params.begin() + static_cast<std::ptrdiff_t>(pos) + count);
    pos += static_cast<size_t>(count);
    return seg;
  };
  trunk_.unflatten(take(trunk_.param_count()));
  for (CouplingLayer& cl : couplings_) cl.net.unflatten(take(cl.net.param_count()));
}

Vec ConditionalDensityModel::nll_rows(const DenseMatrix& theta_m, const DenseMatrix& obs_m) const {
  return run_nll_forward(*this, theta_m, obs_m).row_nll;
}

double ConditionalDensityModel::mean_nll(const DenseMatrix& theta_m, const DenseMatrix& obs_m) const {
  const Vec nll = nll_rows(theta_m, obs_m);
  if (nll.empty()) throw std::invalid_argument("density model: mean_nll of empty batch");
  double acc = 0.0;
  for (double v : nll) acc += v;
  return acc / static_cast<double>(nll.size());
}

double ConditionalDensityModel::mean_nll_backward(const DenseMatrix& theta_m,
                                                  const DenseMatrix& obs_m, Vec& grad) const {
  const NllPass p = run_nll_forward(*this, theta_m, obs_m);
  const int n = theta_m.rows();
  const int td = theta_dim_;
  const double inv_n = 1.0 / static_cast<double>(n);
  double loss = 0.0;
  for (double v : p.row_nll) loss += v;
  loss *= inv_n;

  MlpGrad trunk_grad = trunk_.zero_grad();

  if (config_.head == DensityHead::kDiagonalGaussian) {
    DenseMatrix out_grad(n, 2 * td);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < td; ++k) {
        const double mu = p.trunk_out(i, k);
        const double raw = p.trunk_out(i, td + k);
        const double ls = config_.log_std_cap - softplus(config_.log_std_cap - raw);
        const double inv_std = std::exp(-ls);
        const double zk = (theta_m(i, k) - mu) * inv_std;
        out_grad(i, k) = -zk * inv_std * inv_n;
        out_grad(i, td + k) = (1.0 - zk * zk) * sigmoid(config_.log_std_cap - raw) * inv_n;
      }
    }
    trunk_.backward_batch(p.trunk_cache, out_grad, trunk_grad);
    grad = trunk_grad.flatten();
    return loss;
  }

  const int ctx = p.trunk_out.cols();
  DenseMatrix g = p.z;
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < td; ++k) g(i, k) *= inv_n;
  }
  DenseMatrix ctx_grad(n, ctx);
  std::vector<MlpGrad> net_grads;
  net_grads.reserve(couplings_.size());
  for (const CouplingLayer& cl : couplings_) net_grads.push_back(cl.net.zero_grad());

  for (int l = static_cast<int>(couplings_.size()) - 1; l >= 0; --l) {
    const CouplingLayer& cl = couplings_[static_cast<size_t>(l)];
    const int pm = static_cast<int>(cl.masked.size());
    const int pu = static_cast<int>(cl.unmasked.size());
    DenseMatrix net_out_grad(n, 2 * pu);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < pu; ++k) {
        const int col = cl.unmasked[static_cast<size_t>(k)];
        const double gu = g(i, col);
        const double s = p.s[static_cast<size_t>(l)](i, k);
        const double es = std::exp(-s);
        const double w = p.wu[static_cast<size_t>(l)](i, k);
        // d(mean NLL)/ds: chain through w = (v - b) e^{-s}, plus the direct
        // log-det term contributing 1/n per element.
        const double ds = -gu * w + inv_n;
        const double ratio = s / config_.scale_cap;
        net_out_grad(i, k) = ds * (1.0 - ratio * ratio);
        net_out_grad(i, pu + k) = -gu * es;
        g(i, col) = gu * es;  // gradient w.r.t. the layer's input coordinate
      }
    }
    const DenseMatrix nin_grad = cl.net.backward_batch(p.net_cache[static_cast<size_t>(l)],
                                                       net_out_grad,
                                                       net_grads[static_cast<size_t>(l)]);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < pm; ++j) g(i, cl.masked[static_cast<size_t>(j)]) += nin_grad(i, j);
      for (int c = 0; c < ctx; ++c) ctx_grad(i, c) += nin_grad(i, pm + c);
    }
  }
  trunk_.backward_batch(p.trunk_cache, ctx_grad, trunk_grad);

  grad.clear();
  grad.reserve(static_cast<size_t>(param_count()));
  const Vec tg = trunk_grad.flatten();
  grad.insert(grad.end(), tg.begin(), tg.end());
  for (const MlpGrad& ng : net_grads) {
    const Vec f = ng.flatten();
    grad.insert(grad.end(), f.begin(), f.end());
  }
  return loss;
}

// Generative direction of the coupling stack, applied in place to base-space
// rows z given per-row contexts. Layers run in reverse of the normalizing
// order; draws are not consumed here.
namespace {
void apply_generative(const std::vector<CouplingLayer>& layers, const DensityModelConfig& cfg,
                      DenseMatrix& z, const DenseMatrix& ctx_rows) {
  const int n = z.rows();
  const int ctx = ctx_rows.cols();
  for (int l = static_cast<int>(layers.size()) - 1; l >= 0; --l) {
    const CouplingLayer& cl = layers[static_cast<size_t>(l)];
    const int pm = static_cast<int>(cl.masked.size());
    const int pu = static_cast<int>(cl.unmasked.size());
    DenseMatrix nin(n, pm + ctx);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < pm; ++j) nin(i, j) = z(i, cl.masked[static_cast<size_t>(j)]);
      for (int c = 0; c < ctx; ++c) nin(i, pm + c) = ctx_rows(i, c);
    }
    const DenseMatrix out = cl.net.forward_batch(nin);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < pu; ++k) {
        const double s = cfg.scale_cap * std::tanh(out(i, k) / cfg.scale_cap);
        const int col = cl.unmasked[static_cast<size_t>(k)];
        z(i, col) = z(i, col) * std::exp(s) + out(i, pu + k);
      }
    }
  }
}
}  // namespace

DenseMatrix ConditionalDensityModel::theta_to_base(const DenseMatrix& theta_m,
                                                   const DenseMatrix& obs_m) const {
  const NllPass p = run_nll_forward(*this, theta_m, obs_m);
  if (config_.head == DensityHead::kAffineCoupling) return p.z;
  const int n = theta_m.rows();
  DenseMatrix z(n, theta_dim_);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < theta_dim_; ++k) {
      const double mu = p.trunk_out(i, k);
      const double raw = p.trunk_out(i, theta_dim_ + k);
      const double ls = config_.log_std_cap - softplus(config_.log_std_cap - raw);
      z(i, k) = (theta_m(i, k) - mu) * std::exp(-ls);
    }
  }
  return z;
}

DenseMatrix ConditionalDensityModel::base_to_theta(const DenseMatrix& z,
                                                   const DenseMatrix& obs_m) const {
  if (z.rows() != obs_m.rows() || z.cols() != theta_dim_ || obs_m.cols() != obs_dim_) {
    throw std::invalid_argument("density model: base_to_theta dimension mismatch");
  }
  const DenseMatrix trunk_out = trunk_.forward_batch(obs_m);
  DenseMatrix th = z;
  if (config_.head == DensityHead::kDiagonalGaussian) {
    for (int i = 0; i < th.rows(); ++i) {
      for (int k = 0; k < theta_dim_; ++k) {
        const double mu = trunk_out(i, k);
        const double raw = trunk_out(i, theta_dim_ + k);
        const double ls = config_.log_std_cap - softplus(config_.log_std_cap - raw);
        th(i, k) = mu + std::exp(ls) * th(i, k);
      }
    }
    return th;
  }
  apply_generative(couplings_, config_, th, trunk_out);
  return th;
}

DenseMatrix ConditionalDensityModel::sample_rows_model(const DenseMatrix& obs_m,
                                                       RandomSource& rng) const {
  if (obs_m.cols() != obs_dim_) {
    throw std::invalid_argument("density model: observation dimension mismatch");
  }
  const int n = obs_m.rows();
  const DenseMatrix trunk_out = trunk_.forward_batch(obs_m);
  DenseMatrix th(n, theta_dim_);
  if (config_.head == DensityHead::kDiagonalGaussian) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < theta_dim_; ++k) {
        const double mu = trunk_out(i, k);
        const double raw = trunk_out(i, theta_dim_ + k);
        const double ls = config_.log_std_cap - softplus(config_.log_std_cap - raw);
        th(i, k) = mu + std::exp(ls) * rng.normal();
      }
    }
    return th;
  }
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < theta_dim_; ++k) th(i, k) = rng.normal();
  }
  apply_generative(couplings_, config_, th, trunk_out);
  return th;
}

DenseMatrix ConditionalDensityModel::sample_model(const Vec& obs_m, int n,
                                                  RandomSource& rng) const {
  if (static_cast<int>(obs_m.size()) != obs_dim_) {
    throw std::invalid_argument("density model: observation dimension mismatch");
  }
  if (n < 0) throw std::invalid_argument("density model: negative sample count");
  const Vec trunk_out = trunk_.forward(obs_m);
  DenseMatrix th(n, theta_dim_);
  if (config_.head == DensityHead::kDiagonalGaussian) {
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < theta_dim_; ++k) {
        const double mu = trunk_out[static_cast<size_t>(k)];
        const double raw = trunk_out[static_cast<size_t>(theta_dim_ + k)];
        const double ls = config_.log_std_cap - softplus(config_.log_std_cap - raw);
        th(i, k) = mu + std::exp(ls) * rng.normal();
      }
    }
    return th;
  }
  DenseMatrix ctx_rows(n, static_cast<int>(trunk_out.size()));
  for (int i = 0; i < n; ++i) {
    for (size_t c = 0; c < trunk_out.size(); ++c) {
      ctx_rows(i, static_cast<int>(c)) = trunk_out[c];
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < theta_dim_; ++k) th(i, k) = rng.normal();
  }
  apply_generative(couplings_, config_, th, ctx_rows);
  return th;
}

double ConditionalDensityModel::log_prob_model(const Vec& theta_m, const Vec& obs_m) const {
  DenseMatrix th(1, theta_dim_);
  DenseMatrix ob(1, obs_dim_);
  if (static_cast<int>(theta_m.size()) != theta_dim_ ||
      static_cast<int>(obs_m.size()) != obs_dim_) {
    throw std::invalid_argument("density model: log_prob dimension mismatch");
  }
  for (int k = 0; k < theta_dim_; ++k) th(0, k) = theta_m[static_cast<size_t>(k)];
  for (int c = 0; c < obs_dim_; ++c) ob(0, c) = obs_m[static_cast<size_t>(c)];
  return -nll_rows(th, ob)[0];
}

std::vector<Vec> ConditionalDensityModel::sample(const Vec& obs_raw, int n,
                                                 RandomSource& rng) const {
  const Vec obs_m = transforms_.obs_to_model(obs_raw);
  const DenseMatrix th_m = sample_model(obs_m, n, rng);
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(n));
  Vec row(static_cast<size_t>(theta_dim_));
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < theta_dim_; ++k) row[static_cast<size_t>(k)] = th_m(i, k);
    out.push_back(transforms_.theta_from_model(row));
  }
  return out;
}

double ConditionalDensityModel::log_prob(const Vec& theta_raw, const Vec& obs_raw) const {
  const Vec theta_m = transforms_.theta_to_model(theta_raw);
  const Vec obs_m = transforms_.obs_to_model(obs_raw);
  return log_prob_model(theta_m, obs_m) + transforms_.theta_to_model_log_det(theta_raw);
}

ConditionalDensityModel train_npe(const PairDataset& data, const TransformPack& transforms,
                                  const NpeTrainConfig& cfg, RandomSource& rng,
                                  TrainReport* report) {
  data.validate();
  if (data.size() < 10) {
    throw std::invalid_argument("train_npe: need at least 10 pairs, got " +
                                std::to_string(data.size()));
  }
  if (!transforms.obs.fitted() || !transforms.theta.fitted()) {
    throw std::invalid_argument("train_npe: transforms must be fitted");
  }
  if (transforms.obs.dim() != data.obs_dim() || transforms.theta.dim() != data.theta_dim()) {
    throw std::invalid_argument("train_npe: transform dimensions do not match data");
  }
  const DenseMatrix theta_m = rows_to_model_matrix(data.theta, &TransformPack::theta_to_model,
                                                   transforms);
  const DenseMatrix obs_m = rows_to_model_matrix(data.obs, &TransformPack::obs_to_model,
                                                 transforms);
  RandomSource init_rng = rng.derive("init");
  ConditionalDensityModel model(cfg.model, transforms, data.theta_dim(), data.obs_dim(), init_rng);
  RandomSource fit_rng = rng.derive("fit");
  const TrainReport r = fit_model(model, theta_m, obs_m, cfg, cfg.learning_rate, fit_rng);
  if (report != nullptr) *report = r;
  return model;
}

ConditionalDensityModel train_npe_calibration_only(const PairDataset& cal,
                                                   const TransformPack& transforms,
                                                   const NpeTrainConfig& cfg, RandomSource& rng,
                                                   TrainReport* report) {
  return train_npe(cal, transforms, cfg, rng, report);
}

TrainReport finetune(ConditionalDensityModel& model, const PairDataset& cal,
                     const NpeTrainConfig& cfg, RandomSource& rng) {
  TrainReport report;
  if (cal.size() == 0) {
    report.warning = "finetune: empty calibration set; model left unchanged";
    return report;
  }
  cal.validate();
  if (cal.theta_dim() != model.theta_dim() || cal.obs_dim() != model.obs_dim()) {
    throw std::invalid_argument("finetune: calibration dimensions do not match model");
  }
  const DenseMatrix theta_m = rows_to_model_matrix(cal.theta, &TransformPack::theta_to_model,
                                                   model.transforms());
  const DenseMatrix obs_m = rows_to_model_matrix(cal.obs, &TransformPack::obs_to_model,
                                                 model.transforms());
  RandomSource fit_rng = rng.derive("finetune");
  return fit_model(model, theta_m, obs_m, cfg, cfg.learning_rate * cfg.finetune_lr_scale, fit_rng);
}

}  // namespace fmcpe
