#pragma once

#include <cstdint>
#include <string>

#include "fmcpe/density_model.hpp"
#include "fmcpe/flow.hpp"
#include "fmcpe/mlp.hpp"

namespace fmcpe {

// Versioned JSON checkpoints. Every file carries a "format" tag and a
// "version" integer; loading rejects unknown tags and versions. Doubles
// round-trip exactly through the JSON encoder.

void save_density_model(const ConditionalDensityModel& model, const std::string& path);
ConditionalDensityModel load_density_model(const std::string& path);

void save_fmcpe_model(const FmcpeModel& model, const std::string& path);
FmcpeModel load_fmcpe_model(const std::string& path);

// FNV-1a 64-bit content hashes, hex-encoded; used for manifest entries and
// frozen-parameter checks.
uint64_t fnv1a_bytes(const void* data, size_t size);
std::string hash_file_hex(const std::string& path);
std::string hash_parameters_hex(const Vec& params);

}  // namespace fmcpe
