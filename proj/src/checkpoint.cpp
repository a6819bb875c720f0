#include "fmcpe/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <utility>

#include <json.hpp>

namespace fmcpe {

using nlohmann::json;

// Rebuilds models from deserialized parts without going through the
// rng-seeded constructors.
struct DensityModelIo {
  static ConditionalDensityModel build(DensityModelConfig cfg, TransformPack tf, int theta_dim,
                                       int obs_dim, Mlp trunk, std::vector<CouplingLayer> cpl) {
    ConditionalDensityModel m;
    m.config_ = std::move(cfg);
    m.transforms_ = std::move(tf);
    m.theta_dim_ = theta_dim;
    m.obs_dim_ = obs_dim;
    m.trunk_ = std::move(trunk);
    m.couplings_ = std::move(cpl);
    return m;
  }
};

struct VectorFieldIo {
  static VectorField build(VectorFieldConfig cfg, int state_dim, int cond_input_dim, Mlp body,
                           Mlp cond) {
    VectorField f;
    f.config_ = std::move(cfg);
    f.state_dim_ = state_dim;
    f.cond_input_dim_ = cond_input_dim;
    f.time_ = TimeEmbedding(f.config_.time_frequencies, f.config_.time_base);
    f.body_ = std::move(body);
    f.cond_ = std::move(cond);
    return f;
  }
};

namespace {

json mlp_to_json(const Mlp& net) {
  return json{{"widths", net.widths()}, {"activation", "tanh"}, {"params", net.flatten()}};
}

Mlp mlp_from_json(const json& j) {
  if (j.at("activation").get<std::string>() != "tanh") {
    throw std::runtime_error("checkpoint: unsupported activation tag");
  }
  Mlp net(j.at("widths").get<std::vector<int>>());
  net.unflatten(j.at("params").get<Vec>());
  return net;
}

json standardizer_to_json(const Standardizer& s) {
  return json{{"mean", s.mean()}, {"std", s.stddev()}};
}

Standardizer standardizer_from_json(const json& j) {
  return Standardizer::from_moments(j.at("mean").get<Vec>(), j.at("std").get<Vec>());
}

json transforms_to_json(const TransformPack& tf) {
  json j{{"obs", standardizer_to_json(tf.obs)}, {"theta", standardizer_to_json(tf.theta)}};
  if (tf.theta_logit.has_value()) {
    j["theta_logit"] = json{{"lower", tf.theta_logit->lower()}, {"upper", tf.theta_logit->upper()}};
  } else {
    j["theta_logit"] = nullptr;
  }
  return j;
}

TransformPack transforms_from_json(const json& j) {
  TransformPack tf;
  tf.obs = standardizer_from_json(j.at("obs"));
  tf.theta = standardizer_from_json(j.at("theta"));
  if (!j.at("theta_logit").is_null()) {
    tf.theta_logit = LogitTransform(j.at("theta_logit").at("lower").get<Vec>(),
                                    j.at("theta_logit").at("upper").get<Vec>());
  }
  return tf;
}

json density_config_to_json(const DensityModelConfig& c) {
  return json{{"head", c.head == DensityHead::kDiagonalGaussian ? "diagonal-gaussian"
                                                                : "affine-coupling"},
              {"hidden", c.hidden},
              {"context_dim", c.context_dim},
              {"coupling_layers", c.coupling_layers},
              {"coupling_hidden", c.coupling_hidden},
              {"log_std_cap", c.log_std_cap},
              {"scale_cap", c.scale_cap}};
}

DensityModelConfig density_config_from_json(const json& j) {
  DensityModelConfig c;
  const std::string head = j.at("head").get<std::string>();
  if (head == "diagonal-gaussian") {
    c.head = DensityHead::kDiagonalGaussian;
  } else if (head == "affine-coupling") {
    c.head = DensityHead::kAffineCoupling;
  } else {
    throw std::runtime_error("checkpoint: unknown density head tag '" + head + "'");
  }
  c.hidden = j.at("hidden").get<std::vector<int>>();
  c.context_dim = j.at("context_dim").get<int>();
  c.coupling_layers = j.at("coupling_layers").get<int>();
  c.coupling_hidden = j.at("coupling_hidden").get<std::vector<int>>();
  c.log_std_cap = j.at("log_std_cap").get<double>();
  c.scale_cap = j.at("scale_cap").get<double>();
  return c;
}

json density_to_json(const ConditionalDensityModel& m) {
  json couplings = json::array();
  for (const CouplingLayer& cl : m.couplings()) {
    couplings.push_back(json{{"masked", cl.masked},
                             {"unmasked", cl.unmasked},
                             {"net", mlp_to_json(cl.net)}});
  }
  return json{{"format", "density-model"},
              {"version", 1},
              {"config", density_config_to_json(m.config())},
              {"transforms", transforms_to_json(m.transforms())},
              {"theta_dim", m.theta_dim()},
              {"obs_dim", m.obs_dim()},
              {"trunk", mlp_to_json(m.trunk())},
              {"couplings", couplings}};
}

void check_header(const json& j, const char* format) {
  if (j.at("format").get<std::string>() != format) {
    throw std::runtime_error("checkpoint: expected format '" + std::string(format) + "', found '" +
                             j.at("format").get<std::string>() + "'");
  }
  const int version = j.at("version").get<int>();
  if (version != 1) {
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));
  }
}

ConditionalDensityModel density_from_json(const json& j) {
  check_header(j, "density-model");
  std::vector<CouplingLayer> couplings;
  for (const json& cj : j.at("couplings")) {
    CouplingLayer cl;
    cl.masked = cj.at("masked").get<std::vector<int>>();
    cl.unmasked = cj.at("unmasked").get<std::vector<int>>();
    cl.net = mlp_from_json(cj.at("net"));
    couplings.push_back(std::move(cl));
  }
  return DensityModelIo::build(density_config_from_json(j.at("config")),
                               transforms_from_json(j.at("transforms")),
                               j.at("theta_dim").get<int>(), j.at("obs_dim").get<int>(),
                               mlp_from_json(j.at("trunk")), std::move(couplings));
}

json field_config_to_json(const VectorFieldConfig& c) {
  return json{{"body_hidden", c.body_hidden},
              {"time_frequencies", c.time_frequencies},
              {"time_base", c.time_base},
              {"cond_hidden", c.cond_hidden},
              {"cond_dim", c.cond_dim}};
}

VectorFieldConfig field_config_from_json(const json& j) {
  VectorFieldConfig c;
  c.body_hidden = j.at("body_hidden").get<std::vector<int>>();
  c.time_frequencies = j.at("time_frequencies").get<int>();
  c.time_base = j.at("time_base").get<double>();
  c.cond_hidden = j.at("cond_hidden").get<std::vector<int>>();
  c.cond_dim = j.at("cond_dim").get<int>();
  return c;
}

json field_to_json(const VectorField& f) {
  return json{{"config", field_config_to_json(f.config())},
              {"state_dim", f.state_dim()},
              {"cond_input_dim", f.cond_input_dim()},
              {"body", mlp_to_json(f.body())},
              {"cond", mlp_to_json(f.condition_embedder())}};
}

VectorField field_from_json(const json& j) {
  return VectorFieldIo::build(field_config_from_json(j.at("config")), j.at("state_dim").get<int>(),
                              j.at("cond_input_dim").get<int>(), mlp_from_json(j.at("body")),
                              mlp_from_json(j.at("cond")));
}

json ode_to_json(const OdeConfig& c) {
  return json{{"kind", c.kind == OdeConfig::Kind::kEuler ? "euler" : "rk4"}, {"steps", c.steps}};
}

OdeConfig ode_from_json(const json& j) {
  OdeConfig c;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "euler") {
    c.kind = OdeConfig::Kind::kEuler;
  } else if (kind == "rk4") {
    c.kind = OdeConfig::Kind::kRk4;
  } else {
    throw std::runtime_error("checkpoint: unknown integrator tag '" + kind + "'");
  }
  c.steps = j.at("steps").get<int>();
  return c;
}

void write_file(const json& j, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("checkpoint: write to '" + path + "' failed");
}

json read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("checkpoint: '" + path + "' is not valid JSON: " + e.what());
  }
  return j;
}

}  // namespace

void save_density_model(const ConditionalDensityModel& model, const std::string& path) {
  write_file(density_to_json(model), path);
}

ConditionalDensityModel load_density_model(const std::string& path) {
  return density_from_json(read_file(path));
}

void save_fmcpe_model(const FmcpeModel& model, const std::string& path) {
  const json j{{"format", "fmcpe-bundle"},
               {"version", 1},
               {"baseline", density_to_json(model.baseline)},
               {"ux", field_to_json(model.ux)},
               {"ut", field_to_json(model.ut)},
               {"sigma", model.sigma},
               {"ode", ode_to_json(model.ode)}};
  write_file(j, path);
}

FmcpeModel load_fmcpe_model(const std::string& path) {
  const json j = read_file(path);
  check_header(j, "fmcpe-bundle");
  FmcpeModel m;
  m.baseline = density_from_json(j.at("baseline"));
  m.ux = field_from_json(j.at("ux"));
  m.ut = field_from_json(j.at("ut"));
  m.sigma = j.at("sigma").get<double>();
  m.ode = ode_from_json(j.at("ode"));
  return m;
}

uint64_t fnv1a_bytes(const void* data, size_t size) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 14695981039346656037ull;
  for (size_t i = 0; i < size; ++i) {
    h ^= static_cast<uint64_t>(p[i]);
    h *= 1099511628211ull;
  }
  return h;
}

namespace {

std::string to_hex(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace

std::string hash_file_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash_file: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  return to_hex(fnv1a_bytes(bytes.data(), bytes.size()));
}

std::string hash_parameters_hex(const Vec& params) {
  return to_hex(fnv1a_bytes(params.data(), params.size() * sizeof(double)));
}

}  // namespace fmcpe
