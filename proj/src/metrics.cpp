#include "fmcpe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

#include "fmcpe/assignment.hpp"
#include "fmcpe/mlp.hpp"
#include "fmcpe/optim.hpp"
#include "fmcpe/transforms.hpp"

namespace fmcpe {

JointSampleSet joint_set(const std::vector<Vec>& thetas, const std::vector<Vec>& obs,
                         JointSampleSet::Label label) {
  if (thetas.size() != obs.size()) {
    throw std::invalid_argument("joint_set: theta/obs count mismatch");
  }
  JointSampleSet set;
  set.label = label;
  set.points.reserve(thetas.size());
  for (size_t i = 0; i < thetas.size(); ++i) {
    Vec joint = concat(thetas[i], obs[i]);
    if (!all_finite(joint)) {
      throw std::invalid_argument("joint_set: non-finite entry at row " + std::to_string(i));
    }
    set.points.push_back(std::move(joint));
  }
  return set;
}

namespace {

void check_pair(const JointSampleSet& real, const JointSampleSet& gen) {
  if (real.size() != gen.size()) {
    throw std::invalid_argument("joint metric: sample sets must have equal sizes, got " +
                                std::to_string(real.size()) + " and " +
                                std::to_string(gen.size()));
  }
  if (real.dim() != gen.dim()) {
    throw std::invalid_argument("joint metric: sample sets must share dimension");
  }
}

double stable_logistic_loss(double z, double y) {
  // max(z,0) - z*y + log(1 + exp(-|z|))
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

struct FoldScore {
  double accuracy = 0.0;
};

FoldScore train_fold(const std::vector<Vec>& pool, const std::vector<double>& labels,
                     const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                     RandomSource fold_rng, const Jc2stOptions& opt) {
  const int dim = static_cast<int>(pool.front().size());
  RandomSource init_rng = fold_rng.derive("init");
  Mlp net = Mlp::xavier_init({dim, opt.hidden, opt.hidden, 1}, init_rng);
  AdamConfig acfg;
  acfg.lr = opt.lr;
  AdamState adam(net.param_count(), acfg);
  Vec params = net.flatten();
  RandomSource shuffle_rng = fold_rng.derive("shuffle");

  DenseMatrix val_in(static_cast<int>(val_idx.size()), dim);
  for (size_t r = 0; r < val_idx.size(); ++r) {
    const Vec& src = pool[static_cast<size_t>(val_idx[r])];
    std::copy(src.begin(), src.end(), val_in.row(static_cast<int>(r)));
  }

  std::vector<int> order = train_idx;
  double best_val_loss = std::numeric_limits<double>::infinity();
  double best_val_acc = 0.0;
  int since_best = 0;

  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    shuffle_indices(order, shuffle_rng);
    for (size_t start = 0; start < order.size(); start += static_cast<size_t>(opt.batch_size)) {
      const size_t stop = std::min(order.size(), start + static_cast<size_t>(opt.batch_size));
      const int bsz = static_cast<int>(stop - start);
      DenseMatrix in(bsz, dim);
      for (int r = 0; r < bsz; ++r) {
        const Vec& src = pool[static_cast<size_t>(order[start + static_cast<size_t>(r)])];
        std::copy(src.begin(), src.end(), in.row(r));
      }
      MlpCache cache;
      DenseMatrix out = net.forward_batch(in, cache);
      DenseMatrix dz(bsz, 1);
      for (int r = 0; r < bsz; ++r) {
        const double y = labels[static_cast<size_t>(order[start + static_cast<size_t>(r)])];
        dz(r, 0) = (sigmoid(out(r, 0)) - y) / bsz;
      }
      MlpGrad grad = net.zero_grad();
      net.backward_batch(cache, dz, grad);
      Vec flat = clip_global_norm(grad.flatten(), GradClipConfig{1.0});
      adam.step(params, flat);
      net.unflatten(params);
    }

    DenseMatrix val_out = net.forward_batch(val_in);
    double val_loss = 0.0;
    int correct = 0;
    for (size_t r = 0; r < val_idx.size(); ++r) {
      const double y = labels[static_cast<size_t>(val_idx[r])];
      const double z = val_out(static_cast<int>(r), 0);
      val_loss += stable_logistic_loss(z, y);
      if ((z > 0.0) == (y > 0.5)) ++correct;
    }
    val_loss /= static_cast<double>(val_idx.size());
    if (val_loss < best_val_loss) {
      best_val_loss = val_loss;
      best_val_acc = static_cast<double>(correct) / static_cast<double>(val_idx.size());
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }
  return FoldScore{best_val_acc};
}

}  // namespace

double jc2st(const JointSampleSet& real, const JointSampleSet& gen, RandomSource& rng,
             const Jc2stOptions& opt) {
  check_pair(real, gen);
  const int n = real.size();
  if (n < 30) {
    throw std::invalid_argument("jc2st: need at least 30 samples per class, got " +
                                std::to_string(n));
  }
  if (opt.folds < 2) throw std::invalid_argument("jc2st: need at least 2 folds");

  // Pool both classes and z-score with pooled statistics.
  std::vector<Vec> pool;
  pool.reserve(static_cast<size_t>(2 * n));
  std::vector<double> labels;
  labels.reserve(static_cast<size_t>(2 * n));
  for (const auto& v : real.points) {
    pool.push_back(v);
    labels.push_back(1.0);
  }
  for (const auto& v : gen.points) {
    pool.push_back(v);
    labels.push_back(0.0);
  }
  Standardizer std_all = Standardizer::fit(pool);
  for (auto& v : pool) v = std_all.transform(v);

  // Stratified folds: shuffle each class separately, deal round-robin.
  RandomSource strat_rng = rng.derive("jc2st-folds");
  std::vector<int> real_perm = random_permutation(n, strat_rng);
  std::vector<int> gen_perm = random_permutation(n, strat_rng);
  std::vector<int> fold_of(static_cast<size_t>(2 * n));
  for (int k = 0; k < n; ++k) {
    fold_of[static_cast<size_t>(real_perm[static_cast<size_t>(k)])] = k % opt.folds;
    fold_of[static_cast<size_t>(gen_perm[static_cast<size_t>(k)]) + static_cast<size_t>(n)] =
        k % opt.folds;
  }

  double acc_sum = 0.0;
  for (int f = 0; f < opt.folds; ++f) {
    std::vector<int> train_idx, val_idx;
    for (int i = 0; i < 2 * n; ++i) {
      (fold_of[static_cast<size_t>(i)] == f ? val_idx : train_idx).push_back(i);
    }
    FoldScore score =
        train_fold(pool, labels, train_idx, val_idx, rng.derive(static_cast<uint64_t>(f)), opt);
    acc_sum += score.accuracy;
  }
  return acc_sum / static_cast<double>(opt.folds);
}

W2Result w2_joint(const JointSampleSet& real, const JointSampleSet& gen, const W2Options& opt) {
  check_pair(real, gen);
  if (real.size() == 0) throw std::invalid_argument("w2_joint: empty sample sets");
  if (opt.cap < 1) throw std::invalid_argument("w2_joint: cap must be positive");

  const int n = real.size();
  W2Result result;
  const std::vector<Vec>* a = &real.points;
  const std::vector<Vec>* b = &gen.points;
  std::vector<Vec> sub_a, sub_b;
  int m = n;
  if (n > opt.cap) {
    if (!opt.subsample_above_cap) {
      throw std::invalid_argument("w2_joint: " + std::to_string(n) + " samples exceed cap " +
                                  std::to_string(opt.cap) +
                                  "; enable subsampling or raise the cap");
    }
    // Deterministic stride so reruns pick identical rows.
    m = opt.cap;
    sub_a.reserve(static_cast<size_t>(m));
    sub_b.reserve(static_cast<size_t>(m));
    for (int k = 0; k < m; ++k) {
      const int idx = static_cast<int>((static_cast<long long>(k) * n) / m);
      sub_a.push_back((*a)[static_cast<size_t>(idx)]);
      sub_b.push_back((*b)[static_cast<size_t>(idx)]);
    }
    a = &sub_a;
    b = &sub_b;
    result.subsampled = true;
  }
  result.effective_n = m;

  DenseMatrix cost(m, m);
  for (int i = 0; i < m; ++i) {
    double* crow = cost.row(i);
    const Vec& ai = (*a)[static_cast<size_t>(i)];
    for (int j = 0; j < m; ++j) {
      crow[j] = squared_distance(ai, (*b)[static_cast<size_t>(j)]);
    }
  }
  auto [assignment, total] = solve_assignment(cost);
  (void)assignment;
  result.value = std::sqrt(std::max(0.0, total / static_cast<double>(m)));
  return result;
}

double mse_metric(const std::vector<std::vector<Vec>>& samples_per_test,
                  const std::vector<Vec>& truths) {
  if (samples_per_test.size() != truths.size()) {
    throw std::invalid_argument("mse: sample list and truth list lengths differ");
  }
  if (truths.empty()) throw std::invalid_argument("mse: empty inputs");
  const size_t m = samples_per_test.front().size();
  if (m == 0) throw std::invalid_argument("mse: need at least one sample per test point");
  double acc = 0.0;
  for (size_t j = 0; j < truths.size(); ++j) {
    if (samples_per_test[j].size() != m) {
      throw std::invalid_argument("mse: uneven sample counts across test points");
    }
    for (const Vec& s : samples_per_test[j]) acc += squared_distance(s, truths[j]);
  }
  return acc / (static_cast<double>(truths.size()) * static_cast<double>(m));
}

void MetricReport::validate() const {
  if (!(jc2st >= 0.0 && jc2st <= 1.0)) {
    throw std::runtime_error("MetricReport: jc2st outside [0,1]: " + std::to_string(jc2st));
  }
  if (!(w2 >= 0.0) || !std::isfinite(w2)) {
    throw std::runtime_error("MetricReport: invalid w2: " + std::to_string(w2));
  }
  if (!(mse >= 0.0) || !std::isfinite(mse)) {
    throw std::runtime_error("MetricReport: invalid mse: " + std::to_string(mse));
  }
}

std::string MetricReport::csv_header() { return "method,task,n_cal,seed,w2,jc2st,mse,seconds"; }

std::string MetricReport::csv_row() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%s,%s,%d,%llu,%.17g,%.17g,%.17g,%.3f", method.c_str(),
                task.c_str(), n_cal, static_cast<unsigned long long>(seed), w2, jc2st, mse,
                seconds);
  return std::string(buf);
}

}  // namespace fmcpe
