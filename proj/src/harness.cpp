#include "fmcpe/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "fmcpe/checkpoint.hpp"
#include "fmcpe/mlp.hpp"

namespace fmcpe {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Nested calibration family
// ---------------------------------------------------------------------------

const std::vector<int>& NestedCalibrationFamily::permutation(uint64_t seed) const {
  for (size_t i = 0; i < seeds.size(); ++i) {
    if (seeds[i] == seed) return permutations[i];
  }
  throw std::out_of_range("nested calibration: unknown seed " + std::to_string(seed));
}

std::vector<int> NestedCalibrationFamily::indices(uint64_t seed, int size) const {
  const std::vector<int>& perm = permutation(seed);
  if (size < 0 || size > static_cast<int>(perm.size())) {
    throw std::out_of_range("nested calibration: size " + std::to_string(size) +
                            " outside pool of " + std::to_string(perm.size()));
  }
  return std::vector<int>(perm.begin(), perm.begin() + size);
}

NestedCalibrationFamily build_nested_calibration(const PairDataset& pool,
                                                 const std::vector<int>& sizes,
                                                 const std::vector<uint64_t>& seeds,
                                                 const RandomSource& rng) {
  if (sizes.empty()) throw std::invalid_argument("nested calibration: empty size list");
  const int max_size = *std::max_element(sizes.begin(), sizes.end());
  if (max_size > pool.size()) {
    throw std::invalid_argument("nested calibration: size " + std::to_string(max_size) +
                                " exceeds calibration pool of " + std::to_string(pool.size()));
  }
  NestedCalibrationFamily family;
  family.sizes = sizes;
  family.seeds = seeds;
  for (uint64_t seed : seeds) {
    RandomSource child = rng.derive("cal-family").derive(seed);
    family.permutations.push_back(random_permutation(pool.size(), child));
  }
  return family;
}

// ---------------------------------------------------------------------------
// CsvTask
// ---------------------------------------------------------------------------

namespace {

std::string theta_key(const Vec& v) {
  return std::string(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
}

void check_pair_dims(const PairDataset& a, const PairDataset& b, const std::string& what) {
  if (a.theta_dim() != b.theta_dim() || a.obs_dim() != b.obs_dim()) {
    throw std::runtime_error("csv task: " + what + " dimensions (" +
                             std::to_string(b.theta_dim()) + "," + std::to_string(b.obs_dim()) +
                             ") do not match sim.csv (" + std::to_string(a.theta_dim()) + "," +
                             std::to_string(a.obs_dim()) + ")");
  }
}

}  // namespace

CsvTask CsvTask::load(const std::string& dir) {
  CsvTask t;
  t.sim_ = ingest_csv(dir + "/sim.csv");
  t.cal_ = ingest_csv(dir + "/cal.csv");
  t.test_ = ingest_csv(dir + "/test.csv");
  if (t.sim_.size() == 0 || t.cal_.size() == 0 || t.test_.size() == 0) {
    throw std::runtime_error("csv task: sim.csv, cal.csv, and test.csv must all be non-empty");
  }
  check_pair_dims(t.sim_, t.cal_, "cal.csv");
  check_pair_dims(t.sim_, t.test_, "test.csv");
  t.spec_.theta_dim = t.sim_.theta_dim();
  t.spec_.obs_dim = t.sim_.obs_dim();
  const std::string bank_path = dir + "/cal_sim.csv";
  if (fs::exists(bank_path)) {
    PairDataset bank = ingest_csv(bank_path);
    check_pair_dims(t.sim_, bank, "cal_sim.csv");
    for (int i = 0; i < bank.size(); ++i) {
      t.sim_bank_[theta_key(bank.theta[i])].push_back(bank.obs[i]);
    }
  }
  return t;
}

Vec CsvTask::prior_sample(RandomSource&) const {
  throw std::runtime_error("csv task: no generative prior; datasets come from files");
}

Vec CsvTask::observe_real(const Vec&, RandomSource&) const {
  throw std::runtime_error("csv task: no real-process generator; datasets come from files");
}

Vec CsvTask::simulate(const Vec& theta, RandomSource& rng) const {
  if (sim_bank_.empty()) {
    throw std::runtime_error(
        "csv task: cal_sim.csv not provided; the corrector needs simulator draws for "
        "calibration parameters");
  }
  auto it = sim_bank_.find(theta_key(theta));
  if (it == sim_bank_.end()) {
    throw std::runtime_error("csv task: no stored simulator draws for the requested parameters");
  }
  const std::vector<Vec>& draws = it->second;
  return draws[static_cast<size_t>(rng.next_below(draws.size()))];
}

// ---------------------------------------------------------------------------
// Experiment setup
// ---------------------------------------------------------------------------

ExperimentSetup prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSetup setup;
  const RandomSource root(cfg.experiment_seed);
  const int max_cal = *std::max_element(cfg.cal_sizes.begin(), cfg.cal_sizes.end());
  if (cfg.task.rfind("csv:", 0) == 0) {
    auto task = std::make_unique<CsvTask>(CsvTask::load(cfg.task.substr(4)));
    setup.data.sim = task->sim();
    setup.data.cal_pool = task->cal();
    setup.data.test = task->test();
    setup.task = std::move(task);
    if (setup.data.cal_pool.size() < max_cal) {
      throw std::runtime_error("csv task: cal.csv holds " +
                               std::to_string(setup.data.cal_pool.size()) +
                               " rows but the largest calibration size is " +
                               std::to_string(max_cal));
    }
  } else {
    RandomSource task_rng = root.derive("task");
    if (cfg.task == "gaussian") {
      setup.task = std::make_unique<GaussianTask>(GaussianTask::random_draw(task_rng));
    } else {
      setup.task = std::make_unique<PendulumTask>(
          PendulumTask::from_grid_draw(task_rng, cfg.pendulum_steps));
    }
    // The pool holds twice the largest requested size so different seeds draw
    // genuinely different calibration sets even at the largest size.
    setup.data =
        build_datasets(*setup.task, root.derive("data"), cfg.n_sim, 2 * max_cal, cfg.n_test);
  }
  std::optional<LogitTransform> logit;
  if (setup.task->spec().needs_logit()) {
    logit = LogitTransform(setup.task->spec().prior.lower, setup.task->spec().prior.upper);
  }
  setup.transforms = TransformPack::fit(setup.data.sim.theta, setup.data.sim.obs, logit);
  return setup;
}

// ---------------------------------------------------------------------------
// Sample dumps
// ---------------------------------------------------------------------------

void write_sample_dump(const std::string& method,
                       const std::vector<std::vector<Vec>>& samples_per_point,
                       const std::string& path) {
  int theta_dim = -1;
  for (const auto& draws : samples_per_point) {
    if (!draws.empty()) {
      theta_dim = static_cast<int>(draws.front().size());
      break;
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("sample dump: cannot open '" + path + "' for writing");
  out << "point_id,method";
  for (int k = 0; k < theta_dim; ++k) out << ",theta_" << k;
  out << '\n';
  char buf[40];
  for (size_t i = 0; i < samples_per_point.size(); ++i) {
    for (const Vec& draw : samples_per_point[i]) {
      out << i << ',' << method;
      for (double v : draw) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        out << ',' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw std::runtime_error("sample dump: write to '" + path + "' failed");
}

SampleDump read_sample_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sample dump: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("sample dump: '" + path + "' is empty");
  int n_cols = 1;
  for (char c : line) {
    if (c == ',') ++n_cols;
  }
  const int theta_dim = n_cols - 2;
  if (theta_dim < 0 || line.rfind("point_id,method", 0) != 0) {
    throw std::runtime_error("sample dump: '" + path + "' has an unexpected header: " + line);
  }
  SampleDump dump;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    int point_id = 0;
    try {
      point_id = std::stoi(field);
    } catch (const std::exception&) {
      throw std::runtime_error("sample dump: bad point id on line " + std::to_string(line_no) +
                               " of '" + path + "'");
    }
    if (point_id < 0) {
      throw std::runtime_error("sample dump: negative point id on line " +
                               std::to_string(line_no) + " of '" + path + "'");
    }
    std::getline(ss, field, ',');
    if (dump.method.empty()) dump.method = field;
    Vec draw(theta_dim);
    for (int k = 0; k < theta_dim; ++k) {
      if (!std::getline(ss, field, ',')) {
        throw std::runtime_error("sample dump: short row on line " + std::to_string(line_no) +
                                 " of '" + path + "'");
      }
      try {
        draw[k] = std::stod(field);
      } catch (const std::exception&) {
        throw std::runtime_error("sample dump: bad number on line " + std::to_string(line_no) +
                                 " of '" + path + "'");
      }
    }
    if (point_id >= static_cast<int>(dump.samples_per_point.size())) {
      dump.samples_per_point.resize(point_id + 1);
    }
    dump.samples_per_point[point_id].push_back(std::move(draw));
  }
  return dump;
}

void dump_posterior_samples(const ConditionalDensityModel& model, const std::string& method,
                            const std::vector<Vec>& test_obs, int n_per_point, RandomSource& rng,
                            const std::string& path) {
  if (n_per_point < 0) throw std::invalid_argument("dump: n_per_point must be non-negative");
  std::vector<std::vector<Vec>> samples(test_obs.size());
  for (size_t j = 0; j < test_obs.size(); ++j) {
    if (n_per_point > 0) samples[j] = model.sample(test_obs[j], n_per_point, rng);
  }
  write_sample_dump(method, samples, path);
}

void dump_posterior_samples(const FmcpeModel& model, const std::string& method,
                            const std::vector<Vec>& test_obs, int n_per_point, RandomSource& rng,
                            const std::string& path) {
  if (n_per_point < 0) throw std::invalid_argument("dump: n_per_point must be non-negative");
  std::vector<std::vector<Vec>> samples(test_obs.size());
  for (size_t j = 0; j < test_obs.size(); ++j) {
    if (n_per_point > 0) samples[j] = sample_posterior(model, test_obs[j], n_per_point, rng);
  }
  write_sample_dump(method, samples, path);
}

// ---------------------------------------------------------------------------
// Experiment run
// ---------------------------------------------------------------------------

namespace {

struct TrainedModel {
  std::optional<ConditionalDensityModel> density;
  std::optional<FmcpeModel> corrected;

  std::vector<Vec> draw(const Vec& y, int n, RandomSource& rng) const {
    if (density.has_value()) return density->sample(y, n, rng);
    return sample_posterior(*corrected, y, n, rng);
  }

  std::vector<Vec> draw_one_each(const std::vector<Vec>& ys, RandomSource& rng) const {
    if (corrected.has_value()) {
      const DenseMatrix rows = sample_posterior_rows(*corrected, ys, rng);
      std::vector<Vec> out(rows.rows());
      for (int r = 0; r < rows.rows(); ++r) {
        out[r] = Vec(rows.row(r), rows.row(r) + rows.cols());
      }
      return out;
    }
    std::vector<Vec> out;
    out.reserve(ys.size());
    for (const Vec& y : ys) {
      out.push_back(density->sample(y, 1, rng).front());
    }
    return out;
  }

  void save(const std::string& path) const {
    if (density.has_value()) {
      save_density_model(*density, path);
    } else {
      save_fmcpe_model(*corrected, path);
    }
  }
};

TrainedModel train_cell_model(const std::string& method, const ExperimentConfig& cfg,
                              const ExperimentSetup& setup, const PairDataset& cal,
                              const std::optional<ConditionalDensityModel>& baseline,
                              const std::string& baseline_error, RandomSource& train_rng,
                              std::string* warning) {
  TrainedModel out;
  if (method == kMethodNpeCal) {
    TrainReport rep;
    out.density =
        train_npe_calibration_only(cal, setup.transforms, cfg.baseline, train_rng, &rep);
    *warning = rep.warning;
  } else if (method == kMethodFinetune) {
    if (!baseline.has_value()) {
      throw std::runtime_error("baseline unavailable: " + baseline_error);
    }
    ConditionalDensityModel model = *baseline;
    const TrainReport rep = finetune(model, cal, cfg.baseline, train_rng);
    *warning = rep.warning;
    out.density = std::move(model);
  } else if (method == kMethodFmcpe) {
    if (!baseline.has_value()) {
      throw std::runtime_error("baseline unavailable: " + baseline_error);
    }
    FlowTrainReport rep;
    out.corrected = train_fmcpe(cal, *setup.task, *baseline, cfg.flow, train_rng, &rep);
    *warning = rep.warning;
  } else {
    throw std::runtime_error("unknown method '" + method + "'");
  }
  return out;
}

std::string cell_tag(const std::string& method, int n_cal, uint64_t seed) {
  return method + "_ncal" + std::to_string(n_cal) + "_seed" + std::to_string(seed);
}

bool wants(const std::vector<std::string>& metrics, const char* name) {
  return std::find(metrics.begin(), metrics.end(), name) != metrics.end();
}

double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentSetup setup = prepare_experiment(cfg);
  const RandomSource root(cfg.experiment_seed);
  const fs::path dir(cfg.out_dir);
  fs::create_directories(dir / "samples");
  fs::create_directories(dir / "checkpoints");

  RunArtifacts art;
  art.metrics_path = (dir / "metrics.csv").string();
  art.manifest_path = (dir / "manifest.json").string();
  art.log_path = (dir / "run.log").string();

  {
    std::ofstream config_out(dir / "config.txt", std::ios::binary);
    if (!config_out) throw std::runtime_error("run: cannot write " + (dir / "config.txt").string());
    config_out << cfg.canonical_text();
  }
  art.files.push_back("config.txt");
  export_csv(setup.data.test, (dir / "test_set.csv").string());
  art.files.push_back("test_set.csv");

  std::ofstream log(art.log_path, std::ios::binary);
  if (!log) throw std::runtime_error("run: cannot open " + art.log_path);
  log << "task " << setup.task->name() << " theta_dim " << setup.task->spec().theta_dim
      << " obs_dim " << setup.task->spec().obs_dim << " sim " << setup.data.sim.size()
      << " cal_pool " << setup.data.cal_pool.size() << " test " << setup.data.test.size() << '\n';
  for (int d : setup.transforms.obs.clamped_dims()) {
    log << "warning: constant observation column " << d << "; std clamped at floor\n";
  }
  for (int d : setup.transforms.theta.clamped_dims()) {
    log << "warning: constant parameter column " << d << "; std clamped at floor\n";
  }

  std::ofstream csv(art.metrics_path, std::ios::binary);
  if (!csv) throw std::runtime_error("run: cannot open " + art.metrics_path);
  csv << MetricReport::csv_header() << '\n';

  const NestedCalibrationFamily family =
      build_nested_calibration(setup.data.cal_pool, cfg.cal_sizes, cfg.seeds, root);

  const bool need_baseline = wants(cfg.methods, kMethodFinetune) || wants(cfg.methods, kMethodFmcpe);
  const bool want_w2 = wants(cfg.metrics, "w2");
  const bool want_jc2st = wants(cfg.metrics, "jc2st");
  const bool want_mse = wants(cfg.metrics, "mse");

  for (uint64_t seed : cfg.seeds) {
    std::optional<ConditionalDensityModel> baseline;
    std::string baseline_error = "not trained";
    if (need_baseline) {
      try {
        RandomSource baseline_rng = root.derive("baseline").derive(seed);
        TrainReport rep;
        baseline = train_npe(setup.data.sim, setup.transforms, cfg.baseline, baseline_rng, &rep);
        if (!rep.warning.empty()) {
          log << "[baseline seed=" << seed << "] warning: " << rep.warning << '\n';
        }
        log << "[baseline seed=" << seed << "] steps " << rep.steps << " best_val_nll "
            << rep.best_val_nll << '\n';
        const std::string rel = "checkpoints/baseline_seed" + std::to_string(seed) + ".json";
        save_density_model(*baseline, (dir / rel).string());
        art.files.push_back(rel);
      } catch (const std::exception& e) {
        baseline_error = e.what();
        log << "[baseline seed=" << seed << "] failed: " << e.what() << '\n';
      }
    }

    for (int n_cal : cfg.cal_sizes) {
      const PairDataset cal = setup.data.cal_pool.take(family.indices(seed, n_cal));
      for (const std::string& method : cfg.methods) {
        const std::string tag = cell_tag(method, n_cal, seed);
        try {
          const auto t0 = std::chrono::steady_clock::now();
          const long clamp0 = TimeEmbedding::clamp_events();
          const RandomSource cell =
              root.derive("cell").derive(method).derive(static_cast<uint64_t>(n_cal)).derive(seed);
          RandomSource train_rng = cell.derive("train");
          std::string warning;
          const TrainedModel model = train_cell_model(method, cfg, setup, cal, baseline,
                                                      baseline_error, train_rng, &warning);
          if (!warning.empty()) log << "[" << tag << "] warning: " << warning << '\n';
          const std::string ckpt_rel = "checkpoints/" + tag + ".json";
          model.save((dir / ckpt_rel).string());
          art.files.push_back(ckpt_rel);

          const RandomSource eval = cell.derive("eval");
          RandomSource joint_rng = eval.derive("joint");
          const std::vector<Vec> theta_hat =
              model.draw_one_each(setup.data.test.obs, joint_rng);

          MetricReport row;
          row.method = method;
          row.task = setup.task->name();
          row.n_cal = n_cal;
          row.seed = seed;
          row.w2 = std::numeric_limits<double>::quiet_NaN();
          row.jc2st = std::numeric_limits<double>::quiet_NaN();
          row.mse = std::numeric_limits<double>::quiet_NaN();
          if (want_w2 || want_jc2st) {
            const JointSampleSet real =
                joint_set(setup.data.test.theta, setup.data.test.obs, JointSampleSet::Label::kReal);
            const JointSampleSet gen =
                joint_set(theta_hat, setup.data.test.obs, JointSampleSet::Label::kGenerated);
            if (want_w2) {
              const W2Result w2 = w2_joint(real, gen, cfg.w2_options);
              row.w2 = w2.value;
              if (w2.subsampled) {
                log << "[" << tag << "] w2 subsampled to " << w2.effective_n << " points\n";
              }
            }
            if (want_jc2st) {
              RandomSource jc2st_rng = eval.derive("jc2st");
              row.jc2st = jc2st(real, gen, jc2st_rng, cfg.jc2st_options);
            }
          }
          if (want_mse) {
            const RandomSource mse_base = eval.derive("mse");
            std::vector<std::vector<Vec>> samples(setup.data.test.size());
            for (int j = 0; j < setup.data.test.size(); ++j) {
              RandomSource point_rng = mse_base.derive(static_cast<uint64_t>(j));
              samples[j] = model.draw(setup.data.test.obs[j], cfg.mse_samples, point_rng);
            }
            row.mse = mse_metric(samples, setup.data.test.theta);
          }
          if (want_w2 && want_jc2st && want_mse) row.validate();

          const std::string dump_rel = "samples/" + tag + ".csv";
          std::vector<std::vector<Vec>> one_draw(theta_hat.size());
          for (size_t j = 0; j < theta_hat.size(); ++j) one_draw[j] = {theta_hat[j]};
          write_sample_dump(method, one_draw, (dir / dump_rel).string());
          art.files.push_back(dump_rel);

          const long clamp_delta = TimeEmbedding::clamp_events() - clamp0;
          if (clamp_delta > 0) {
            log << "[" << tag << "] time embedding clamped " << clamp_delta
                << " inputs outside [0,1]\n";
          }
          row.seconds = cfg.timing ? elapsed_seconds(t0) : 0.0;
          csv << row.csv_row() << '\n';
          csv.flush();
          art.rows.push_back(row);
          log << "[" << tag << "] done\n";
        } catch (const std::exception& e) {
          art.failures.push_back({method, n_cal, seed, e.what()});
          log << "[" << tag << "] failed: " << e.what() << '\n';
        }
      }
    }
  }

  csv.close();
  art.files.push_back("metrics.csv");
  log << "rows " << art.rows.size() << " failures " << art.failures.size() << '\n';
  log.close();
  art.files.push_back("run.log");

  json files_json = json::object();
  for (const std::string& rel : art.files) {
    files_json[rel] = hash_file_hex((dir / rel).string());
  }
  json failures_json = json::array();
  for (const CellFailure& f : art.failures) {
    failures_json.push_back(json{
        {"method", f.method}, {"n_cal", f.n_cal}, {"seed", f.seed}, {"message", f.message}});
  }
  const json manifest{{"format", "fmcpe-run-manifest"},
                      {"version", 1},
                      {"task", setup.task->name()},
                      {"config", cfg.canonical_text()},
                      {"config_hash", hash_file_hex((dir / "config.txt").string())},
                      {"seeds", cfg.seeds},
                      {"files", files_json},
                      {"failures", failures_json},
                      {"rows", art.rows.size()}};
  {
    std::ofstream manifest_out(art.manifest_path, std::ios::binary);
    if (!manifest_out) throw std::runtime_error("run: cannot write " + art.manifest_path);
    manifest_out << manifest.dump(2) << '\n';
  }
  return art;
}

// ---------------------------------------------------------------------------
// Metric recomputation from dumps
// ---------------------------------------------------------------------------

std::vector<MetricReport> recompute_metrics(const std::string& out_dir) {
  const fs::path dir(out_dir);
  std::ifstream manifest_in(dir / "manifest.json", std::ios::binary);
  if (!manifest_in) {
    throw std::runtime_error("recompute: cannot open manifest.json under '" + out_dir + "'");
  }
  json manifest;
  try {
    manifest_in >> manifest;
  } catch (const json::parse_error& e) {
    throw std::runtime_error(std::string("recompute: manifest.json is not valid JSON: ") +
                             e.what());
  }
  const ExperimentConfig cfg = parse_config_text(manifest.at("config").get<std::string>());
  const std::string task_name = manifest.at("task").get<std::string>();
  const PairDataset test = ingest_csv((dir / "test_set.csv").string());
  const RandomSource root(cfg.experiment_seed);
  const bool want_w2 = wants(cfg.metrics, "w2");
  const bool want_jc2st = wants(cfg.metrics, "jc2st");
  const bool want_mse = wants(cfg.metrics, "mse");

  std::vector<MetricReport> rows;
  for (uint64_t seed : cfg.seeds) {
    for (int n_cal : cfg.cal_sizes) {
      for (const std::string& method : cfg.methods) {
        const std::string tag = cell_tag(method, n_cal, seed);
        const fs::path path = dir / "samples" / (tag + ".csv");
        if (!fs::exists(path)) continue;  // failed or absent cell
        const SampleDump dump = read_sample_dump(path.string());
        if (static_cast<int>(dump.samples_per_point.size()) != test.size()) {
          throw std::runtime_error("recompute: dump '" + tag + "' covers " +
                                   std::to_string(dump.samples_per_point.size()) +
                                   " points; test set has " + std::to_string(test.size()));
        }
        std::vector<Vec> theta_hat(test.size());
        for (int j = 0; j < test.size(); ++j) {
          if (dump.samples_per_point[j].empty()) {
            throw std::runtime_error("recompute: dump '" + tag + "' has no draws for point " +
                                     std::to_string(j));
          }
          theta_hat[j] = dump.samples_per_point[j].front();
        }
        MetricReport row;
        row.method = method;
        row.task = task_name;
        row.n_cal = n_cal;
        row.seed = seed;
        row.w2 = std::numeric_limits<double>::quiet_NaN();
        row.jc2st = std::numeric_limits<double>::quiet_NaN();
        row.mse = std::numeric_limits<double>::quiet_NaN();
        row.seconds = 0.0;
        const RandomSource eval = root.derive("cell")
                                      .derive(method)
                                      .derive(static_cast<uint64_t>(n_cal))
                                      .derive(seed)
                                      .derive("eval");
        if (want_w2 || want_jc2st) {
          const JointSampleSet real = joint_set(test.theta, test.obs, JointSampleSet::Label::kReal);
          const JointSampleSet gen =
              joint_set(theta_hat, test.obs, JointSampleSet::Label::kGenerated);
          if (want_w2) row.w2 = w2_joint(real, gen, cfg.w2_options).value;
          if (want_jc2st) {
            RandomSource jc2st_rng = eval.derive("jc2st");
            row.jc2st = jc2st(real, gen, jc2st_rng, cfg.jc2st_options);
          }
        }
        if (want_mse) row.mse = mse_metric(dump.samples_per_point, test.theta);
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace fmcpe
