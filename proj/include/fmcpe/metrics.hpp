#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fmcpe/matrix.hpp"
#include "fmcpe/random.hpp"

namespace fmcpe {

// Concatenated (theta parallel y) vectors treated as draws from a joint
// distribution over parameters and observations.
struct JointSampleSet {
  enum class Label { kReal, kGenerated };

  std::vector<Vec> points;
  Label label = Label::kReal;
  bool standardized = false;

  int size() const { return static_cast<int>(points.size()); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
};

JointSampleSet joint_set(const std::vector<Vec>& thetas, const std::vector<Vec>& obs,
                         JointSampleSet::Label label);

// ---------------------------------------------------------------------------
// Classifier two-sample test on the joint samples: mean validation accuracy
// of an MLP over stratified cross-validation folds. 0.5 means the classifier
// cannot tell the two sets apart.
// ---------------------------------------------------------------------------
struct Jc2stOptions {
  int folds = 3;
  int hidden = 64;       // two hidden layers of this width
  int max_epochs = 300;
  int batch_size = 256;
  double lr = 1e-3;
  int patience = 20;     // epochs without validation-loss improvement
};

double jc2st(const JointSampleSet& real, const JointSampleSet& gen, RandomSource& rng,
             const Jc2stOptions& opt = {});

// ---------------------------------------------------------------------------
// Exact L2 Wasserstein distance between equal-weight empirical measures:
// sqrt of the minimal mean squared-L2 cost over perfect matchings. Above the
// cap both sets are subsampled with a deterministic stride (flag required).
// ---------------------------------------------------------------------------
struct W2Options {
  int cap = 2000;
  bool subsample_above_cap = false;
};

struct W2Result {
  double value = 0.0;
  bool subsampled = false;
  int effective_n = 0;
};

W2Result w2_joint(const JointSampleSet& real, const JointSampleSet& gen,
                  const W2Options& opt = {});

// ---------------------------------------------------------------------------
// Average mean squared error between posterior samples and the paired true
// parameters: (1/(N*M)) sum_j sum_i ||sample_ji - truth_j||^2, in original
// theta coordinates.
// ---------------------------------------------------------------------------
double mse_metric(const std::vector<std::vector<Vec>>& samples_per_test,
                  const std::vector<Vec>& truths);

// ---------------------------------------------------------------------------
// One benchmark cell: method x task x calibration size x seed.
// ---------------------------------------------------------------------------
struct MetricReport {
  std::string method;
  std::string task;
  int n_cal = 0;
  uint64_t seed = 0;
  double w2 = 0.0;
  double jc2st = 0.0;
  double mse = 0.0;
  double seconds = 0.0;

  void validate() const;  // jc2st in [0,1]; w2, mse >= 0; finite
  std::string csv_row() const;
  static std::string csv_header();
};

}  // namespace fmcpe
