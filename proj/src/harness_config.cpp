#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmcpe/harness.hpp"

namespace fmcpe {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const int v = std::stoi(trim(value), &used);
    if (used != trim(value).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

long parse_long(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const long v = std::stol(trim(value), &used);
    if (used != trim(value).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' expects an integer, got '" + value + "'");
  }
}

uint64_t parse_u64(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const unsigned long long v = std::stoull(trim(value), &used);
    if (used != trim(value).size()) throw std::invalid_argument("trailing characters");
    return static_cast<uint64_t>(v);
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' expects a non-negative integer, got '" +
                             value + "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    size_t used = 0;
    const double v = std::stod(trim(value), &used);
    if (used != trim(value).size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("config: key '" + key + "' expects a number, got '" + value + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string v = trim(value);
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  throw std::runtime_error("config: key '" + key + "' expects on/off, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value) {
  std::vector<int> out;
  for (const std::string& item : split_list(value)) out.push_back(parse_int(key, item));
  return out;
}

std::vector<uint64_t> parse_u64_list(const std::string& key, const std::string& value) {
  std::vector<uint64_t> out;
  for (const std::string& item : split_list(value)) out.push_back(parse_u64(key, item));
  return out;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
std::string join(const std::vector<T>& items) {
  std::string out;
  for (size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_same_v<T, std::string>) {
      out += items[i];
    } else {
      out += std::to_string(items[i]);
    }
  }
  return out;
}

}  // namespace

void apply_config_entry(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "task") {
    cfg.task = trim(value);
  } else if (key == "seed") {
    cfg.experiment_seed = parse_u64(key, value);
  } else if (key == "n_sim") {
    cfg.n_sim = parse_int(key, value);
  } else if (key == "n_cal") {
    cfg.cal_sizes = parse_int_list(key, value);
  } else if (key == "seeds") {
    cfg.seeds = parse_u64_list(key, value);
  } else if (key == "n_test") {
    cfg.n_test = parse_int(key, value);
  } else if (key == "methods") {
    cfg.methods = split_list(value);
  } else if (key == "metrics") {
    cfg.metrics = split_list(value);
  } else if (key == "mse_samples") {
    cfg.mse_samples = parse_int(key, value);
  } else if (key == "out") {
    cfg.out_dir = trim(value);
  } else if (key == "timing") {
    cfg.timing = parse_bool(key, value);
  } else if (key == "sigma") {
    cfg.flow.sigma = parse_double(key, value);
  } else if (key == "ode_steps") {
    const int steps = parse_int(key, value);
    cfg.flow.train_ode.steps = steps;
    cfg.flow.inference_ode.steps = steps;
  } else if (key == "train_ode_steps") {
    cfg.flow.train_ode.steps = parse_int(key, value);
  } else if (key == "baseline_head") {
    const std::string head = trim(value);
    if (head == "diagonal-gaussian") {
      cfg.baseline.model.head = DensityHead::kDiagonalGaussian;
    } else if (head == "affine-coupling") {
      cfg.baseline.model.head = DensityHead::kAffineCoupling;
    } else {
      throw std::runtime_error(
          "config: baseline_head expects diagonal-gaussian or affine-coupling, got '" + head +
          "'");
    }
  } else if (key == "baseline_hidden") {
    cfg.baseline.model.hidden = parse_int_list(key, value);
  } else if (key == "baseline_context_dim") {
    cfg.baseline.model.context_dim = parse_int(key, value);
  } else if (key == "baseline_coupling_layers") {
    cfg.baseline.model.coupling_layers = parse_int(key, value);
  } else if (key == "baseline_coupling_hidden") {
    cfg.baseline.model.coupling_hidden = parse_int_list(key, value);
  } else if (key == "baseline_lr") {
    cfg.baseline.learning_rate = parse_double(key, value);
  } else if (key == "baseline_batch") {
    cfg.baseline.batch_size = parse_int(key, value);
  } else if (key == "baseline_max_steps") {
    cfg.baseline.max_steps = parse_long(key, value);
  } else if (key == "baseline_patience") {
    cfg.baseline.patience = parse_int(key, value);
  } else if (key == "finetune_lr_scale") {
    cfg.baseline.finetune_lr_scale = parse_double(key, value);
  } else if (key == "flow_hidden") {
    cfg.flow.field.body_hidden = parse_int_list(key, value);
  } else if (key == "flow_cond_hidden") {
    cfg.flow.field.cond_hidden = parse_int_list(key, value);
  } else if (key == "flow_cond_dim") {
    cfg.flow.field.cond_dim = parse_int(key, value);
  } else if (key == "flow_lr") {
    cfg.flow.learning_rate = parse_double(key, value);
  } else if (key == "flow_batch") {
    cfg.flow.batch_size = parse_int(key, value);
  } else if (key == "flow_max_steps") {
    cfg.flow.max_steps = parse_long(key, value);
  } else if (key == "flow_eval_every") {
    cfg.flow.eval_every = parse_int(key, value);
  } else if (key == "flow_patience_steps") {
    cfg.flow.patience_steps = parse_int(key, value);
  } else if (key == "jc2st_folds") {
    cfg.jc2st_options.folds = parse_int(key, value);
  } else if (key == "jc2st_hidden") {
    cfg.jc2st_options.hidden = parse_int(key, value);
  } else if (key == "jc2st_epochs") {
    cfg.jc2st_options.max_epochs = parse_int(key, value);
  } else if (key == "w2_cap") {
    cfg.w2_options.cap = parse_int(key, value);
  } else if (key == "w2_subsample") {
    cfg.w2_options.subsample_above_cap = parse_bool(key, value);
  } else if (key == "pendulum_steps") {
    cfg.pendulum_steps = parse_int(key, value);
  } else if (key == "csv_sim_draws") {
    cfg.csv_sim_draws = parse_int(key, value);
  } else {
    throw std::runtime_error("config: unknown key '" + key + "'");
  }
}

ExperimentConfig parse_config_text(const std::string& text) {
  ExperimentConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config: line " + std::to_string(line_no) +
                               " is not 'key = value': '" + line + "'");
    }
    apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

void ExperimentConfig::validate() const {
  if (task.empty()) throw std::runtime_error("config: task must not be empty");
  const bool is_csv = task.rfind("csv:", 0) == 0;
  if (task != "gaussian" && task != "pendulum" && !is_csv) {
    throw std::runtime_error("config: unknown task '" + task +
                             "' (expected gaussian, pendulum, or csv:<dir>)");
  }
  if (n_sim <= 0) throw std::runtime_error("config: n_sim must be positive");
  if (n_test <= 0) throw std::runtime_error("config: n_test must be positive");
  if (cal_sizes.empty()) throw std::runtime_error("config: n_cal must list at least one size");
  for (size_t i = 0; i < cal_sizes.size(); ++i) {
    if (cal_sizes[i] <= 0) throw std::runtime_error("config: calibration sizes must be positive");
    if (i > 0 && cal_sizes[i] <= cal_sizes[i - 1]) {
      throw std::runtime_error("config: calibration sizes must be strictly increasing");
    }
  }
  if (seeds.empty()) throw std::runtime_error("config: seeds must list at least one seed");
  std::set<uint64_t> unique_seeds(seeds.begin(), seeds.end());
  if (unique_seeds.size() != seeds.size()) {
    throw std::runtime_error("config: seeds must be distinct");
  }
  if (methods.empty()) throw std::runtime_error("config: methods must list at least one method");
  for (const std::string& m : methods) {
    if (m != kMethodNpeCal && m != kMethodFinetune && m != kMethodFmcpe) {
      throw std::runtime_error("config: unknown method '" + m + "'");
    }
  }
  std::set<std::string> unique_methods(methods.begin(), methods.end());
  if (unique_methods.size() != methods.size()) {
    throw std::runtime_error("config: methods must be distinct");
  }
  if (metrics.empty()) throw std::runtime_error("config: metrics must list at least one metric");
  for (const std::string& m : metrics) {
    if (m != "w2" && m != "jc2st" && m != "mse") {
      throw std::runtime_error("config: unknown metric '" + m + "'");
    }
  }
  if (mse_samples <= 0) throw std::runtime_error("config: mse_samples must be positive");
  if (out_dir.empty()) throw std::runtime_error("config: out must not be empty");
  if (flow.sigma < 0.0) throw std::runtime_error("config: sigma must be non-negative");
  if (flow.train_ode.steps <= 0 || flow.inference_ode.steps <= 0) {
    throw std::runtime_error("config: ode_steps must be positive");
  }
  if (pendulum_steps <= 0) throw std::runtime_error("config: pendulum_steps must be positive");
  if (csv_sim_draws <= 0) throw std::runtime_error("config: csv_sim_draws must be positive");
}

std::string ExperimentConfig::canonical_text() const {
  std::ostringstream out;
  out << "task = " << task << '\n';
  out << "seed = " << experiment_seed << '\n';
  out << "n_sim = " << n_sim << '\n';
  out << "n_cal = " << join(cal_sizes) << '\n';
  out << "seeds = " << join(seeds) << '\n';
  out << "n_test = " << n_test << '\n';
  out << "methods = " << join(methods) << '\n';
  out << "metrics = " << join(metrics) << '\n';
  out << "mse_samples = " << mse_samples << '\n';
  out << "out = " << out_dir << '\n';
  out << "timing = " << (timing ? "on" : "off") << '\n';
  out << "sigma = " << format_double(flow.sigma) << '\n';
  out << "ode_steps = " << flow.inference_ode.steps << '\n';
  out << "train_ode_steps = " << flow.train_ode.steps << '\n';
  out << "baseline_head = "
      << (baseline.model.head == DensityHead::kDiagonalGaussian ? "diagonal-gaussian"
                                                                : "affine-coupling")
      << '\n';
  out << "baseline_hidden = " << join(baseline.model.hidden) << '\n';
  out << "baseline_context_dim = " << baseline.model.context_dim << '\n';
  out << "baseline_coupling_layers = " << baseline.model.coupling_layers << '\n';
  out << "baseline_coupling_hidden = " << join(baseline.model.coupling_hidden) << '\n';
  out << "baseline_lr = " << format_double(baseline.learning_rate) << '\n';
  out << "baseline_batch = " << baseline.batch_size << '\n';
  out << "baseline_max_steps = " << baseline.max_steps << '\n';
  out << "baseline_patience = " << baseline.patience << '\n';
  out << "finetune_lr_scale = " << format_double(baseline.finetune_lr_scale) << '\n';
  out << "flow_hidden = " << join(flow.field.body_hidden) << '\n';
  out << "flow_cond_hidden = " << join(flow.field.cond_hidden) << '\n';
  out << "flow_cond_dim = " << flow.field.cond_dim << '\n';
  out << "flow_lr = " << format_double(flow.learning_rate) << '\n';
  out << "flow_batch = " << flow.batch_size << '\n';
  out << "flow_max_steps = " << flow.max_steps << '\n';
  out << "flow_eval_every = " << flow.eval_every << '\n';
  out << "flow_patience_steps = " << flow.patience_steps << '\n';
  out << "jc2st_folds = " << jc2st_options.folds << '\n';
  out << "jc2st_hidden = " << jc2st_options.hidden << '\n';
  out << "jc2st_epochs = " << jc2st_options.max_epochs << '\n';
  out << "w2_cap = " << w2_options.cap << '\n';
  out << "w2_subsample = " << (w2_options.subsample_above_cap ? "on" : "off") << '\n';
  out << "pendulum_steps = " << pendulum_steps << '\n';
  out << "csv_sim_draws = " << csv_sim_draws << '\n';
  return out.str();
}

}  // namespace fmcpe
