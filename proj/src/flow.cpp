#include "fmcpe/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include "fmcpe/optim.hpp"

namespace fmcpe {
namespace {

Vec matrix_row(const DenseMatrix& m, int r) {
  Vec v(static_cast<size_t>(m.cols()));
  for (int c = 0; c < m.cols(); ++c) v[static_cast<size_t>(c)] = m(r, c);
  return v;
}

}  // namespace

VectorField::VectorField(VectorFieldConfig cfg, int state_dim, int cond_input_dim,
                         RandomSource& init_rng)
    : config_(std::move(cfg)), state_dim_(state_dim), cond_input_dim_(cond_input_dim) {
  if (state_dim_ < 1 || cond_input_dim_ < 1) {
    throw std::invalid_argument("vector field: dimensions must be positive");
  }
  if (config_.time_frequencies < 1 || config_.cond_dim < 1) {
    throw std::invalid_argument("vector field: embedding sizes must be positive");
  }
  for (int h : config_.body_hidden) {
    if (h < 1) throw std::invalid_argument("vector field: body widths must be positive");
  }
  for (int h : config_.cond_hidden) {
    if (h < 1) throw std::invalid_argument("vector field: embedder widths must be positive");
  }
  time_ = TimeEmbedding(config_.time_frequencies, config_.time_base);

  std::vector<int> cw;
  cw.push_back(cond_input_dim_);
  for (int h : config_.cond_hidden) cw.push_back(h);
  cw.push_back(config_.cond_dim);
  RandomSource cond_rng = init_rng.derive("cond");
  cond_ = Mlp::xavier_init(cw, cond_rng);

  std::vector<int> bw;
  bw.push_back(state_dim_ + time_.dim() + config_.cond_dim);
  for (int h : config_.body_hidden) bw.push_back(h);
  bw.push_back(state_dim_);
  RandomSource body_rng = init_rng.derive("body");
  body_ = Mlp::xavier_init(bw, body_rng);
  // Start as the zero field: transports are the identity until training moves
  // the output layer.
  body_.weight(body_.layer_count() - 1).fill(0.0);
}

int VectorField::param_count() const { return body_.param_count() + cond_.param_count(); }

Vec VectorField::parameters() const {
  Vec out;
  out.reserve(static_cast<size_t>(param_count()));
  const Vec b = body_.flatten();
  out.insert(out.end(), b.begin(), b.end());
  const Vec c = cond_.flatten();
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

void VectorField::set_parameters(const Vec& params) {
  if (static_cast<int>(params.size()) != param_count()) {
    throw std::invalid_argument("vector field: parameter vector size mismatch");
  }
  const int nb = body_.param_count();
  Vec b(params.begin(), params.begin() + nb);
  Vec c(params.begin() + nb, params.end());
  body_.unflatten(b);
  cond_.unflatten(c);
}

DenseMatrix VectorField::embed_condition(const DenseMatrix& y_rows) const {
  if (y_rows.cols() != cond_input_dim_) {
    throw std::invalid_argument("vector field: condition dimension mismatch");
  }
  return cond_.forward_batch(y_rows);
}

DenseMatrix VectorField::evaluate_shared_t(double t, const DenseMatrix& z_rows,
                                           const DenseMatrix& ctx_rows) const {
  if (z_rows.cols() != state_dim_ || ctx_rows.cols() != config_.cond_dim ||
      z_rows.rows() != ctx_rows.rows()) {
    throw std::invalid_argument("vector field: evaluate_shared_t dimension mismatch");
  }
  const int n = z_rows.rows();
  const Vec te = time_.embed(t);
  const int td = time_.dim();
  DenseMatrix in(n, state_dim_ + td + config_.cond_dim);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < state_dim_; ++k) in(i, k) = z_rows(i, k);
    for (int k = 0; k < td; ++k) in(i, state_dim_ + k) = te[static_cast<size_t>(k)];
    for (int k = 0; k < config_.cond_dim; ++k) in(i, state_dim_ + td + k) = ctx_rows(i, k);
  }
  return body_.forward_batch(in);
}

DenseMatrix VectorField::evaluate_batch(const Vec& ts, const DenseMatrix& z_rows,
                                        const DenseMatrix& y_rows, EvalCache& cache) const {
  const int n = z_rows.rows();
  if (static_cast<int>(ts.size()) != n || y_rows.rows() != n || z_rows.cols() != state_dim_ ||
      y_rows.cols() != cond_input_dim_) {
    throw std::invalid_argument("vector field: evaluate_batch dimension mismatch");
  }
  const DenseMatrix ctx = cond_.forward_batch(y_rows, cache.cond_cache);
  const int td = time_.dim();
  DenseMatrix in(n, state_dim_ + td + config_.cond_dim);
  for (int i = 0; i < n; ++i) {
    const Vec te = time_.embed(ts[static_cast<size_t>(i)]);
    for (int k = 0; k < state_dim_; ++k) in(i, k) = z_rows(i, k);
    for (int k = 0; k < td; ++k) in(i, state_dim_ + k) = te[static_cast<size_t>(k)];
    for (int k = 0; k < config_.cond_dim; ++k) in(i, state_dim_ + td + k) = ctx(i, k);
  }
  return body_.forward_batch(in, cache.body_cache);
}

Vec VectorField::backward_batch(const EvalCache& cache, const DenseMatrix& out_grad) const {
  MlpGrad body_grad = body_.zero_grad();
  const DenseMatrix in_grad = body_.backward_batch(cache.body_cache, out_grad, body_grad);
  const int td = time_.dim();
  const int n = in_grad.rows();
  DenseMatrix ctx_grad(n, config_.cond_dim);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < config_.cond_dim; ++k) {
      ctx_grad(i, k) = in_grad(i, state_dim_ + td + k);
    }
  }
  MlpGrad cond_grad = cond_.zero_grad();
  cond_.backward_batch(cache.cond_cache, ctx_grad, cond_grad);

  Vec out;
  out.reserve(static_cast<size_t>(param_count()));
  const Vec b = body_grad.flatten();
  out.insert(out.end(), b.begin(), b.end());
  const Vec c = cond_grad.flatten();
  out.insert(out.end(), c.begin(), c.end());
  return out;
}

Vec VectorField::evaluate(double t, const Vec& z, const Vec& y) const {
  DenseMatrix zr(1, state_dim_);
  if (static_cast<int>(z.size()) != state_dim_ || static_cast<int>(y.size()) != cond_input_dim_) {
    throw std::invalid_argument("vector field: evaluate dimension mismatch");
  }
  for (int k = 0; k < state_dim_; ++k) zr(0, k) = z[static_cast<size_t>(k)];
  DenseMatrix yr(1, cond_input_dim_);
  for (int k = 0; k < cond_input_dim_; ++k) yr(0, k) = y[static_cast<size_t>(k)];
  const DenseMatrix ctx = embed_condition(yr);
  const DenseMatrix out = evaluate_shared_t(t, zr, ctx);
  return matrix_row(out, 0);
}

Vec interpolate(const Vec& z0, const Vec& z1, double t) {
  if (z0.size() != z1.size()) throw std::invalid_argument("interpolate: dimension mismatch");
  if (!(t >= 0.0 && t <= 1.0)) throw std::invalid_argument("interpolate: t outside [0, 1]");
  Vec out(z0.size());
  for (size_t i = 0; i < z0.size(); ++i) out[i] = (1.0 - t) * z0[i] + t * z1[i];
  return out;
}

namespace {

void check_finite_state(const DenseMatrix& z, int step, const char* where) {
  if (!z.all_finite()) {
    throw std::runtime_error(std::string(where) + ": non-finite state at step " +
                             std::to_string(step));
  }
}

}  // namespace

DenseMatrix transport_rows(const VectorField& field, const DenseMatrix& z0,
                           const DenseMatrix& y_rows, const OdeConfig& cfg) {
  if (cfg.steps < 1) throw std::invalid_argument("ode_transport: step count must be >= 1");
  if (z0.rows() != y_rows.rows()) {
    throw std::invalid_argument("ode_transport: row count mismatch");
  }
  check_finite_state(z0, 0, "ode_transport");
  const DenseMatrix ctx = field.embed_condition(y_rows);
  DenseMatrix z = z0;
  const double h = 1.0 / static_cast<double>(cfg.steps);
  const int n = z.rows();
  const int d = z.cols();
  for (int step = 0; step < cfg.steps; ++step) {
    const double t = h * static_cast<double>(step);
    if (cfg.kind == OdeConfig::Kind::kEuler) {
      const DenseMatrix k1 = field.evaluate_shared_t(t, z, ctx);
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) z(i, c) += h * k1(i, c);
      }
    } else {
      const DenseMatrix k1 = field.evaluate_shared_t(t, z, ctx);
      DenseMatrix zk = z;
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) zk(i, c) = z(i, c) + 0.5 * h * k1(i, c);
      }
      const DenseMatrix k2 = field.evaluate_shared_t(t + 0.5 * h, zk, ctx);
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) zk(i, c) = z(i, c) + 0.5 * h * k2(i, c);
      }
      const DenseMatrix k3 = field.evaluate_shared_t(t + 0.5 * h, zk, ctx);
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) zk(i, c) = z(i, c) + h * k3(i, c);
      }
      const DenseMatrix k4 = field.evaluate_shared_t(t + h, zk, ctx);
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) {
          z(i, c) += h / 6.0 * (k1(i, c) + 2.0 * k2(i, c) + 2.0 * k3(i, c) + k4(i, c));
        }
      }
    }
    check_finite_state(z, step + 1, "ode_transport");
  }
  return z;
}

Vec ode_transport(const VectorField& field, const Vec& z0, const Vec& y, const OdeConfig& cfg) {
  DenseMatrix zr(1, static_cast<int>(z0.size()));
  for (size_t k = 0; k < z0.size(); ++k) zr(0, static_cast<int>(k)) = z0[k];
  DenseMatrix yr(1, static_cast<int>(y.size()));
  for (size_t k = 0; k < y.size(); ++k) yr(0, static_cast<int>(k)) = y[k];
  return matrix_row(transport_rows(field, zr, yr, cfg), 0);
}

std::vector<TrainingTuple> sample_training_tuples(const PairDataset& cal, const Task& task,
                                                  const ConditionalDensityModel& baseline,
                                                  const VectorField& ux, double sigma,
                                                  const OdeConfig& ode, RandomSource& rng,
                                                  int count) {
  if (cal.size() == 0) throw std::invalid_argument("sample_training_tuples: empty calibration set");
  if (sigma < 0.0) throw std::invalid_argument("sample_training_tuples: negative sigma");
  if (count < 0) throw std::invalid_argument("sample_training_tuples: negative count");
  if (cal.theta_dim() != baseline.theta_dim() || cal.obs_dim() != baseline.obs_dim()) {
    throw std::invalid_argument("sample_training_tuples: calibration/baseline dimension mismatch");
  }
  const TransformPack& tf = baseline.transforms();
  const int d = cal.obs_dim();

  std::vector<TrainingTuple> tuples(static_cast<size_t>(count));
  DenseMatrix y_m(count, d);
  DenseMatrix x0_m(count, d);
  for (int i = 0; i < count; ++i) {
    const int idx = static_cast<int>(rng.next_below(static_cast<uint64_t>(cal.size())));
    TrainingTuple& tp = tuples[static_cast<size_t>(i)];
    tp.theta1 = tf.theta_to_model(cal.theta[static_cast<size_t>(idx)]);
    tp.y = tf.obs_to_model(cal.obs[static_cast<size_t>(idx)]);
    const Vec x1_raw = task.simulate(cal.theta[static_cast<size_t>(idx)], rng);
    tp.x1 = tf.obs_to_model(x1_raw);
    tp.x0.resize(static_cast<size_t>(d));
    for (int c = 0; c < d; ++c) {
      tp.x0[static_cast<size_t>(c)] = tp.y[static_cast<size_t>(c)] + sigma * rng.normal();
      y_m(i, c) = tp.y[static_cast<size_t>(c)];
      x0_m(i, c) = tp.x0[static_cast<size_t>(c)];
    }
  }
  if (count == 0) return tuples;

  // The surrogate observation: transported base draws. theta0 below is a
  // fresh sample at the surrogate, so the theta-term of the loss has no
  // gradient path into the x-field.
  const DenseMatrix x_tilde = transport_rows(ux, x0_m, y_m, ode);
  const DenseMatrix theta0 = baseline.sample_rows_model(x_tilde, rng);
  for (int i = 0; i < count; ++i) {
    tuples[static_cast<size_t>(i)].theta0 = matrix_row(theta0, i);
  }
  return tuples;
}

TrainingTuple sample_training_tuple(const PairDataset& cal, const Task& task,
                                    const ConditionalDensityModel& baseline,
                                    const VectorField& ux, double sigma, const OdeConfig& ode,
                                    RandomSource& rng) {
  return sample_training_tuples(cal, task, baseline, ux, sigma, ode, rng, 1).front();
}

JointLossResult joint_loss(const std::vector<TrainingTuple>& batch, const VectorField& ux,
                           const VectorField& ut, RandomSource& rng,
                           const JointLossOptions& opt) {
  if (batch.empty()) throw std::invalid_argument("joint_loss: empty batch");
  const int n = static_cast<int>(batch.size());
  const int d = ux.state_dim();
  const int p = ut.state_dim();

  Vec ts(static_cast<size_t>(n));
  Vec taus(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    ts[static_cast<size_t>(i)] = rng.uniform();
    taus[static_cast<size_t>(i)] = rng.uniform();
  }

  DenseMatrix y(n, ux.cond_input_dim());
  DenseMatrix xt(n, d);
  DenseMatrix vx(n, d);
  DenseMatrix tt(n, p);
  DenseMatrix vt(n, p);
  for (int i = 0; i < n; ++i) {
    const TrainingTuple& tp = batch[static_cast<size_t>(i)];
    if (static_cast<int>(tp.x0.size()) != d || static_cast<int>(tp.x1.size()) != d ||
        static_cast<int>(tp.theta0.size()) != p || static_cast<int>(tp.theta1.size()) != p ||
        static_cast<int>(tp.y.size()) != y.cols()) {
      throw std::invalid_argument("joint_loss: tuple dimension mismatch");
    }
    const double t = ts[static_cast<size_t>(i)];
    const double tau = taus[static_cast<size_t>(i)];
    for (int c = 0; c < y.cols(); ++c) y(i, c) = tp.y[static_cast<size_t>(c)];
    for (int c = 0; c < d; ++c) {
      xt(i, c) = (1.0 - t) * tp.x0[static_cast<size_t>(c)] + t * tp.x1[static_cast<size_t>(c)];
      vx(i, c) = tp.x1[static_cast<size_t>(c)] - tp.x0[static_cast<size_t>(c)];
    }
    for (int c = 0; c < p; ++c) {
      tt(i, c) = (1.0 - tau) * tp.theta0[static_cast<size_t>(c)] +
                 tau * tp.theta1[static_cast<size_t>(c)];
      vt(i, c) = tp.theta1[static_cast<size_t>(c)] - tp.theta0[static_cast<size_t>(c)];
    }
  }

  JointLossResult res;
  const double inv_n = 1.0 / static_cast<double>(n);
  if (opt.x_term) {
    VectorField::EvalCache cache;
    const DenseMatrix out = ux.evaluate_batch(ts, xt, y, cache);
    DenseMatrix resid(n, d);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c) {
        const double r = out(i, c) - vx(i, c);
        resid(i, c) = r;
        res.loss_x += r * r;
      }
    }
    res.loss_x *= inv_n;
    if (opt.with_grads) {
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < d; ++c) resid(i, c) *= 2.0 * inv_n;
      }
      res.grad_x = ux.backward_batch(cache, resid);
    }
  }
  if (opt.theta_term) {
    VectorField::EvalCache cache;
    const DenseMatrix out = ut.evaluate_batch(taus, tt, y, cache);
    DenseMatrix resid(n, p);
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < p; ++c) {
        const double r = out(i, c) - vt(i, c);
        resid(i, c) = r;
        res.loss_theta += r * r;
      }
    }
    res.loss_theta *= inv_n;
    if (opt.with_grads) {
      for (int i = 0; i < n; ++i) {
        for (int c = 0; c < p; ++c) resid(i, c) *= 2.0 * inv_n;
      }
      res.grad_theta = ut.backward_batch(cache, resid);
    }
  }
  res.loss = res.loss_x + res.loss_theta;
  if (!std::isfinite(res.loss)) throw std::runtime_error("joint_loss: non-finite loss");
  return res;
}

FmcpeModel train_fmcpe(const PairDataset& cal, const Task& task,
                       const ConditionalDensityModel& baseline, const FlowTrainConfig& cfg,
                       RandomSource& rng, FlowTrainReport* report) {
  cal.validate();
  if (cal.size() < 2) {
    throw std::invalid_argument("train_fmcpe: need at least 2 calibration pairs for a split");
  }
  if (cfg.sigma <= 0.0) throw std::invalid_argument("train_fmcpe: sigma must be positive");
  if (cfg.batch_size < 1 || cfg.max_steps < 1 || cfg.eval_every < 1 || cfg.patience_steps < 1 ||
      cfg.val_tuples < 1 || cfg.probe_tuples < 1) {
    throw std::invalid_argument("train_fmcpe: non-positive training configuration value");
  }
  if (cal.theta_dim() != baseline.theta_dim() || cal.obs_dim() != baseline.obs_dim()) {
    throw std::invalid_argument("train_fmcpe: calibration/baseline dimension mismatch");
  }
  const int d = cal.obs_dim();
  const int p = cal.theta_dim();

  RandomSource split_rng = rng.derive("split");
  const std::vector<int> perm = random_permutation(cal.size(), split_rng);
  int n_val = static_cast<int>(std::llround(cfg.val_fraction * cal.size()));
  n_val = std::clamp(n_val, 1, cal.size() - 1);
  const int n_train = cal.size() - n_val;
  const PairDataset train_set = cal.take(std::vector<int>(perm.begin(), perm.begin() + n_train));
  const PairDataset val_set = cal.take(std::vector<int>(perm.begin() + n_train, perm.end()));

  RandomSource init_x = rng.derive("init-x");
  RandomSource init_t = rng.derive("init-theta");
  VectorField ux(cfg.field, d, d, init_x);
  VectorField ut(cfg.field, p, d, init_t);
  const int nx = ux.param_count();
  const int nt = ut.param_count();

  Vec params(static_cast<size_t>(nx + nt));
  {
    const Vec px = ux.parameters();
    const Vec pt = ut.parameters();
    std::copy(px.begin(), px.end(), params.begin());
    std::copy(pt.begin(), pt.end(), params.begin() + nx);
  }
  const auto apply_params = [&](const Vec& flat) {
    ux.set_parameters(Vec(flat.begin(), flat.begin() + nx));
    ut.set_parameters(Vec(flat.begin() + nx, flat.end()));
  };

  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.learning_rate;
  AdamState adam(nx + nt, adam_cfg);
  const GradClipConfig clip{cfg.clip_norm};

  FlowTrainReport rep;
  const JointLossOptions no_grads{true, true, false};

  // Loss probe on the training split before any updates.
  {
    RandomSource probe_rng = rng.derive("probe-initial");
    const std::vector<TrainingTuple> probe = sample_training_tuples(
        train_set, task, baseline, ux, cfg.sigma, cfg.train_ode, probe_rng, cfg.probe_tuples);
    const JointLossResult r = joint_loss(probe, ux, ut, probe_rng, no_grads);
    rep.initial_train_x_loss = r.loss_x;
    rep.initial_train_theta_loss = r.loss_theta;
  }

  RandomSource tuple_rng = rng.derive("tuples");
  RandomSource val_base = rng.derive("val");
  const auto val_loss_at = [&](int eval_index) {
    RandomSource vr = val_base.derive(static_cast<uint64_t>(eval_index));
    const std::vector<TrainingTuple> tuples = sample_training_tuples(
        val_set, task, baseline, ux, cfg.sigma, cfg.train_ode, vr, cfg.val_tuples);
    return joint_loss(tuples, ux, ut, vr, no_grads).loss;
  };

  double best_val = val_loss_at(0);
  Vec best_params = params;
  long best_step = 0;
  int evals = 1;
  long step = 0;
  std::string warning;

  while (step < cfg.max_steps) {
    bool diverged = false;
    try {
      const std::vector<TrainingTuple> batch = sample_training_tuples(
          train_set, task, baseline, ux, cfg.sigma, cfg.train_ode, tuple_rng, cfg.batch_size);
      const JointLossResult r = joint_loss(batch, ux, ut, tuple_rng);
      Vec grad(static_cast<size_t>(nx + nt));
      std::copy(r.grad_x.begin(), r.grad_x.end(), grad.begin());
      std::copy(r.grad_theta.begin(), r.grad_theta.end(), grad.begin() + nx);
      if (!all_finite(grad)) {
        diverged = true;
      } else {
        grad = clip_global_norm(grad, clip);
        adam.step(params, grad);
        apply_params(params);
      }
    } catch (const std::runtime_error& e) {
      diverged = true;
      warning = e.what();
    }
    if (diverged) {
      if (warning.empty()) warning = "non-finite gradients";
      warning = "train_fmcpe: divergence at step " + std::to_string(step + 1) + " (" + warning +
                "); restored best checkpoint";
      break;
    }
    ++step;

    if (step % cfg.eval_every == 0) {
      double val = 0.0;
      try {
        val = val_loss_at(evals);
      } catch (const std::runtime_error& e) {
        warning = std::string("train_fmcpe: divergence in validation at step ") +
                  std::to_string(step) + " (" + e.what() + "); restored best checkpoint";
        break;
      }
      ++evals;
      if (val < best_val) {
        best_val = val;
        best_params = params;
        best_step = step;
      } else if (step - best_step >= cfg.patience_steps) {
        break;
      }
    }
  }

  params = best_params;
  apply_params(params);
  rep.steps = step;
  rep.best_step = best_step;
  rep.best_val_loss = best_val;
  rep.final_val_loss = best_val;
  rep.evals = evals;
  rep.warning = warning;

  // Loss probe with the returned fields (fresh tuples from the final source).
  {
    RandomSource probe_rng = rng.derive("probe-final");
    const std::vector<TrainingTuple> probe = sample_training_tuples(
        train_set, task, baseline, ux, cfg.sigma, cfg.train_ode, probe_rng, cfg.probe_tuples);
    const JointLossResult r = joint_loss(probe, ux, ut, probe_rng, no_grads);
    rep.final_train_x_loss = r.loss_x;
    rep.final_train_theta_loss = r.loss_theta;
  }

  if (report != nullptr) *report = rep;

  FmcpeModel model;
  model.baseline = baseline;
  model.ux = std::move(ux);
  model.ut = std::move(ut);
  model.sigma = cfg.sigma;
  model.ode = cfg.inference_ode;
  return model;
}

namespace {

// Shared batched inference core: y rows already in model space.
DenseMatrix corrected_draws_model(const FmcpeModel& m, const DenseMatrix& y_m,
                                  RandomSource& rng) {
  const int n = y_m.rows();
  const int d = m.baseline.obs_dim();
  DenseMatrix x0(n, d);
  for (int i = 0; i < n; ++i) {
    for (int c = 0; c < d; ++c) x0(i, c) = y_m(i, c) + m.sigma * rng.normal();
  }
  const DenseMatrix x_tilde = transport_rows(m.ux, x0, y_m, m.ode);
  const DenseMatrix theta0 = m.baseline.sample_rows_model(x_tilde, rng);
  return transport_rows(m.ut, theta0, y_m, m.ode);
}

}  // namespace

std::vector<Vec> sample_posterior(const FmcpeModel& model, const Vec& y_raw, int n,
                                  RandomSource& rng) {
  if (n < 0) throw std::invalid_argument("sample_posterior: negative count");
  if (n == 0) return {};
  const Vec y_m = model.baseline.transforms().obs_to_model(y_raw);
  DenseMatrix y_rows(n, static_cast<int>(y_m.size()));
  for (int i = 0; i < n; ++i) {
    for (size_t c = 0; c < y_m.size(); ++c) y_rows(i, static_cast<int>(c)) = y_m[c];
  }
  const DenseMatrix theta_m = corrected_draws_model(model, y_rows, rng);
  std::vector<Vec> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.push_back(model.baseline.transforms().theta_from_model(matrix_row(theta_m, i)));
  }
  return out;
}

DenseMatrix sample_posterior_rows(const FmcpeModel& model, const std::vector<Vec>& y_raw_rows,
                                  RandomSource& rng) {
  const int n = static_cast<int>(y_raw_rows.size());
  const int d = model.baseline.obs_dim();
  DenseMatrix y_m(n, d);
  for (int i = 0; i < n; ++i) {
    const Vec m = model.baseline.transforms().obs_to_model(y_raw_rows[static_cast<size_t>(i)]);
    for (int c = 0; c < d; ++c) y_m(i, c) = m[static_cast<size_t>(c)];
  }
  if (n == 0) return DenseMatrix(0, model.baseline.theta_dim());
  const DenseMatrix theta_m = corrected_draws_model(model, y_m, rng);
  DenseMatrix out(n, model.baseline.theta_dim());
  for (int i = 0; i < n; ++i) {
    const Vec t = model.baseline.transforms().theta_from_model(matrix_row(theta_m, i));
    for (size_t c = 0; c < t.size(); ++c) out(i, static_cast<int>(c)) = t[c];
  }
  return out;
}

}  // namespace fmcpe
