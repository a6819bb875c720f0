// Benchmark CLI: dataset generation, baseline pretraining, the full method
// sweep, metric recomputation from dumps, and posterior sample dumps.

#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fmcpe/checkpoint.hpp"
#include "fmcpe/harness.hpp"

namespace fs = std::filesystem;
using namespace fmcpe;

namespace {

// Every value is kept as the raw flag string and pushed through the config
// grammar, so CLI overrides and file entries share one parser and one set of
// error messages.
struct CommonFlags {
  std::string config, task, n_sim, n_cal, seeds, n_test, methods, metrics, out, sigma, ode_steps,
      seed, mse_samples;
};

void add_common_flags(CLI::App* sub, CommonFlags& f) {
  sub->add_option("--config", f.config, "config file with key = value lines");
  sub->add_option("--task", f.task, "gaussian | pendulum | csv:<dir>");
  sub->add_option("--n-sim", f.n_sim, "simulation budget");
  sub->add_option("--n-cal", f.n_cal, "comma-separated calibration sizes, e.g. 10,50,200,1000");
  sub->add_option("--seeds", f.seeds, "comma-separated run seeds");
  sub->add_option("--n-test", f.n_test, "number of test points");
  sub->add_option("--methods", f.methods, "comma-separated: npe-cal,finetune,fmcpe");
  sub->add_option("--metrics", f.metrics, "comma-separated: w2,jc2st,mse");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--sigma", f.sigma, "base-noise scale in standardized observation space");
  sub->add_option("--ode-steps", f.ode_steps, "integrator steps for training and inference");
  sub->add_option("--seed", f.seed, "master experiment seed");
  sub->add_option("--mse-samples", f.mse_samples, "posterior draws per test point for mse");
}

ExperimentConfig build_config(const CommonFlags& f) {
  ExperimentConfig cfg = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  const std::pair<const char*, const std::string*> overrides[] = {
      {"task", &f.task},       {"n_sim", &f.n_sim},     {"n_cal", &f.n_cal},
      {"seeds", &f.seeds},     {"n_test", &f.n_test},   {"methods", &f.methods},
      {"metrics", &f.metrics}, {"out", &f.out},         {"sigma", &f.sigma},
      {"ode_steps", &f.ode_steps}, {"seed", &f.seed},   {"mse_samples", &f.mse_samples},
  };
  for (const auto& [key, value] : overrides) {
    if (!value->empty()) apply_config_entry(cfg, key, *value);
  }
  cfg.validate();
  return cfg;
}

int cmd_run(const CommonFlags& flags) {
  const ExperimentConfig cfg = build_config(flags);
  const RunArtifacts art = run_experiment(cfg);
  std::cout << "wrote " << art.metrics_path << " with " << art.rows.size() << " rows\n";
  for (const CellFailure& f : art.failures) {
    std::cout << "failed: " << f.method << " n_cal=" << f.n_cal << " seed=" << f.seed << ": "
              << f.message << '\n';
  }
  if (!art.failures.empty()) {
    std::cout << art.failures.size() << " cell(s) failed; see " << art.log_path << '\n';
    return 1;
  }
  return 0;
}

int cmd_generate(const CommonFlags& flags) {
  const ExperimentConfig cfg = build_config(flags);
  if (cfg.task.rfind("csv:", 0) == 0) {
    throw std::runtime_error("generate needs a generative task (gaussian or pendulum)");
  }
  const ExperimentSetup setup = prepare_experiment(cfg);
  const fs::path dir = fs::path(cfg.out_dir) / "data";
  fs::create_directories(dir);
  export_csv(setup.data.sim, (dir / "sim.csv").string());
  export_csv(setup.data.cal_pool, (dir / "cal.csv").string());
  export_csv(setup.data.test, (dir / "test.csv").string());

  // Pre-simulated draws per calibration parameter, so the directory can be
  // fed back in as task csv:<dir> with the corrector enabled.
  const RandomSource root(cfg.experiment_seed);
  RandomSource sim_rng = root.derive("cal-sim");
  PairDataset bank;
  for (int i = 0; i < setup.data.cal_pool.size(); ++i) {
    for (int k = 0; k < cfg.csv_sim_draws; ++k) {
      const Vec& theta = setup.data.cal_pool.theta[i];
      bank.push(theta, setup.task->simulate(theta, sim_rng));
    }
  }
  export_csv(bank, (dir / "cal_sim.csv").string());
  {
    std::ofstream config_out(fs::path(cfg.out_dir) / "config.txt", std::ios::binary);
    config_out << cfg.canonical_text();
  }
  std::cout << "wrote " << dir.string() << "/{sim,cal,test,cal_sim}.csv (" << setup.data.sim.size()
            << " sim, " << setup.data.cal_pool.size() << " cal-pool, " << setup.data.test.size()
            << " test rows; " << cfg.csv_sim_draws << " draws per cal parameter)\n";
  return 0;
}

int cmd_train_baseline(const CommonFlags& flags) {
  const ExperimentConfig cfg = build_config(flags);
  const ExperimentSetup setup = prepare_experiment(cfg);
  const RandomSource root(cfg.experiment_seed);
  const fs::path dir = fs::path(cfg.out_dir) / "checkpoints";
  fs::create_directories(dir);
  for (uint64_t seed : cfg.seeds) {
    RandomSource rng = root.derive("baseline").derive(seed);
    TrainReport report;
    const ConditionalDensityModel model =
        train_npe(setup.data.sim, setup.transforms, cfg.baseline, rng, &report);
    const std::string path = (dir / ("baseline_seed" + std::to_string(seed) + ".json")).string();
    save_density_model(model, path);
    std::cout << "seed " << seed << ": " << report.steps << " steps, best val nll "
              << report.best_val_nll << " at step " << report.best_step << " -> " << path << '\n';
    if (!report.warning.empty()) std::cout << "  warning: " << report.warning << '\n';
  }
  return 0;
}

int cmd_metrics(const CommonFlags& flags) {
  if (flags.out.empty()) throw std::runtime_error("metrics needs --out <run directory>");
  const std::vector<MetricReport> rows = recompute_metrics(flags.out);
  std::cout << MetricReport::csv_header() << '\n';
  for (const MetricReport& row : rows) std::cout << row.csv_row() << '\n';
  return 0;
}

int cmd_dump_samples(const CommonFlags& flags, const std::string& checkpoint,
                     const std::string& file, int points, int n_per_point,
                     std::string method_label) {
  const ExperimentConfig cfg = build_config(flags);
  const ExperimentSetup setup = prepare_experiment(cfg);
  if (points < 1 || points > setup.data.test.size()) {
    throw std::runtime_error("dump-samples: --points must be in [1, " +
                             std::to_string(setup.data.test.size()) + "]");
  }
  const std::vector<Vec> obs(setup.data.test.obs.begin(), setup.data.test.obs.begin() + points);

  std::ifstream probe(checkpoint, std::ios::binary);
  if (!probe) throw std::runtime_error("dump-samples: cannot open '" + checkpoint + "'");
  nlohmann::json header;
  probe >> header;
  const std::string format = header.at("format").get<std::string>();
  probe.close();

  const RandomSource root(cfg.experiment_seed);
  RandomSource rng = root.derive("dump");
  if (format == "fmcpe-bundle") {
    if (method_label.empty()) method_label = kMethodFmcpe;
    dump_posterior_samples(load_fmcpe_model(checkpoint), method_label, obs, n_per_point, rng,
                           file);
  } else {
    if (method_label.empty()) method_label = "npe";
    dump_posterior_samples(load_density_model(checkpoint), method_label, obs, n_per_point, rng,
                           file);
  }
  std::cout << "wrote " << file << " (" << points << " points x " << n_per_point << " draws)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulation-based posterior benchmark: flow-matching correction vs baselines"};
  app.require_subcommand(1);

  CommonFlags run_flags, gen_flags, base_flags, metrics_flags, dump_flags;
  std::string dump_checkpoint, dump_file, dump_label;
  int dump_points = 1;
  int dump_n_per_point = 2000;

  CLI::App* run = app.add_subcommand("run", "train all methods over the sweep and write metrics");
  add_common_flags(run, run_flags);
  CLI::App* gen = app.add_subcommand("generate", "write sim/cal/test datasets as CSV");
  add_common_flags(gen, gen_flags);
  CLI::App* base = app.add_subcommand("train-baseline",
                                      "pretrain the simulation posterior, one model per seed");
  add_common_flags(base, base_flags);
  CLI::App* metrics = app.add_subcommand("metrics", "recompute metric rows from a run's dumps");
  add_common_flags(metrics, metrics_flags);
  CLI::App* dump = app.add_subcommand("dump-samples",
                                      "draw posterior samples from a checkpoint into a CSV");
  add_common_flags(dump, dump_flags);
  dump->add_option("--checkpoint", dump_checkpoint, "model checkpoint (.json)")->required();
  dump->add_option("--file", dump_file, "output CSV path")->required();
  dump->add_option("--points", dump_points, "number of leading test points to cover");
  dump->add_option("--n-per-point", dump_n_per_point, "draws per test point");
  dump->add_option("--method-label", dump_label, "method column value in the dump");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags);
    if (gen->parsed()) return cmd_generate(gen_flags);
    if (base->parsed()) return cmd_train_baseline(base_flags);
    if (metrics->parsed()) return cmd_metrics(metrics_flags);
    if (dump->parsed()) {
      return cmd_dump_samples(dump_flags, dump_checkpoint, dump_file, dump_points,
                              dump_n_per_point, dump_label);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
