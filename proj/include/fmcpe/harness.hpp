#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "fmcpe/dataset.hpp"
#include "fmcpe/density_model.hpp"
#include "fmcpe/flow.hpp"
#include "fmcpe/metrics.hpp"
#include "fmcpe/tasks.hpp"
#include "fmcpe/transforms.hpp"

namespace fmcpe {

// Method identifiers accepted in configs, CLI flags, and CSV rows.
inline constexpr const char* kMethodNpeCal = "npe-cal";
inline constexpr const char* kMethodFinetune = "finetune";
inline constexpr const char* kMethodFmcpe = "fmcpe";

// ---------------------------------------------------------------------------
// Experiment configuration. Every field has a flat config-file key (see
// apply_config_entry for the grammar); CLI flags override file values.
// ---------------------------------------------------------------------------
struct ExperimentConfig {
  std::string task = "gaussian";  // gaussian | pendulum | csv:<dir>
  uint64_t experiment_seed = 1u;  // master seed; every stream derives from it
  int n_sim = 50000;
  std::vector<int> cal_sizes{10, 50, 200, 1000};  // strictly increasing
  std::vector<uint64_t> seeds{0, 1, 2, 3, 4};
  int n_test = 2000;
  std::vector<std::string> methods{kMethodNpeCal, kMethodFinetune, kMethodFmcpe};
  std::vector<std::string> metrics{"w2", "jc2st", "mse"};  // skipped ones emit nan
  int mse_samples = 64;  // posterior draws per test point for the mse column
  std::string out_dir = "out";
  // When off, the seconds column is written as 0.000 so that metrics.csv is
  // byte-reproducible; wall-clock timing measures the machine, not the
  // experiment.
  bool timing = true;

  NpeTrainConfig baseline;   // architecture + training for all density models
  FlowTrainConfig flow;      // vector fields, sigma, integrators
  Jc2stOptions jc2st_options;
  W2Options w2_options;
  int pendulum_steps = 200;  // observation grid length for the pendulum task
  int csv_sim_draws = 8;     // pre-simulated draws per cal row in generate

  // Structural checks (sizes increasing, lists nonempty, names known).
  void validate() const;
  // Stable key=value rendering of every field, used for the manifest and the
  // config hash.
  std::string canonical_text() const;
};

// Apply one `key = value` entry; unknown keys or malformed values throw.
void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value);
// Parse a whole config file ('#' comments, blank lines allowed).
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Nested calibration subsets: per seed one uniform permutation of the pool;
// the size-N set is that permutation's first N entries, so smaller sets are
// prefixes of larger ones by construction.
// ---------------------------------------------------------------------------
struct NestedCalibrationFamily {
  std::vector<uint64_t> seeds;
  std::vector<int> sizes;
  std::vector<std::vector<int>> permutations;  // aligned with seeds

  const std::vector<int>& permutation(uint64_t seed) const;
  std::vector<int> indices(uint64_t seed, int size) const;
};

NestedCalibrationFamily build_nested_calibration(const PairDataset& pool,
                                                 const std::vector<int>& sizes,
                                                 const std::vector<uint64_t>& seeds,
                                                 const RandomSource& rng);

// ---------------------------------------------------------------------------
// File-backed task for externally supplied data. The directory must hold
// sim.csv, cal.csv, and test.csv in the PairDataset exchange format.
// An optional cal_sim.csv supplies pre-simulated draws for calibration
// parameters (same format, thetas repeated once per draw); simulate() then
// serves a uniform pick among the draws stored for exactly that theta and
// throws for any other input. Without cal_sim.csv the corrector cannot train,
// but the density-only methods still run.
// ---------------------------------------------------------------------------
class CsvTask : public Task {
 public:
  static CsvTask load(const std::string& dir);

  const TaskSpec& spec() const override { return spec_; }
  std::string name() const override { return "csv"; }
  Vec prior_sample(RandomSource& rng) const override;
  Vec simulate(const Vec& theta, RandomSource& rng) const override;
  Vec observe_real(const Vec& theta, RandomSource& rng) const override;

  const PairDataset& sim() const { return sim_; }
  const PairDataset& cal() const { return cal_; }
  const PairDataset& test() const { return test_; }

 private:
  TaskSpec spec_;
  PairDataset sim_;
  PairDataset cal_;
  PairDataset test_;
  // Pre-simulated draws keyed by the exact bytes of theta.
  std::unordered_map<std::string, std::vector<Vec>> sim_bank_;
};

// ---------------------------------------------------------------------------
// Task + datasets + preprocessing for one experiment. Generated tasks draw
// the world from seed-derived streams; csv tasks read their files. The
// transform pack is always fitted on the simulation set.
// ---------------------------------------------------------------------------
struct ExperimentSetup {
  std::unique_ptr<Task> task;
  DatasetBundle data;
  TransformPack transforms;
};

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Full benchmark run: per seed one baseline on the simulation set, then per
// (calibration size, method) one trained model, one single-draw joint sample
// for w2/jc2st, mse_samples draws per point for mse, a metrics.csv row, a
// sample dump, and a checkpoint. A failing cell is recorded and the sweep
// continues.
// ---------------------------------------------------------------------------
struct CellFailure {
  std::string method;
  int n_cal = 0;
  uint64_t seed = 0;
  std::string message;
};

struct RunArtifacts {
  std::vector<MetricReport> rows;
  std::vector<CellFailure> failures;
  std::vector<std::string> files;  // emitted paths, relative to out_dir
  std::string metrics_path;
  std::string manifest_path;
  std::string log_path;
};

RunArtifacts run_experiment(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Posterior sample dumps: CSV `point_id,method,theta_0..theta_{p-1}`, one row
// per draw, n_per_point rows per test point.
// ---------------------------------------------------------------------------
struct SampleDump {
  std::string method;
  std::vector<std::vector<Vec>> samples_per_point;
};

void write_sample_dump(const std::string& method,
                       const std::vector<std::vector<Vec>>& samples_per_point,
                       const std::string& path);
SampleDump read_sample_dump(const std::string& path);

void dump_posterior_samples(const ConditionalDensityModel& model, const std::string& method,
                            const std::vector<Vec>& test_obs, int n_per_point, RandomSource& rng,
                            const std::string& path);
void dump_posterior_samples(const FmcpeModel& model, const std::string& method,
                            const std::vector<Vec>& test_obs, int n_per_point, RandomSource& rng,
                            const std::string& path);

// Recompute metric rows from a run directory's sample dumps and test_set.csv,
// re-deriving the original evaluation streams from the manifest's stored
// config. w2 and jc2st reproduce the original rows exactly; mse uses however
// many draws per point the dumps hold.
std::vector<MetricReport> recompute_metrics(const std::string& out_dir);

}  // namespace fmcpe
