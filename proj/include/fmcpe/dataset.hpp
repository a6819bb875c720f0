#pragma once

#include <string>
#include <vector>

#include "fmcpe/matrix.hpp"

namespace fmcpe {

enum class Provenance { kSimulated, kCalibration, kTest, kIngested };

// Paired parameters and observations. theta[i] belongs with obs[i]; all
// rows share dimensions and must stay finite.
struct PairDataset {
  std::vector<Vec> theta;
  std::vector<Vec> obs;
  Provenance provenance = Provenance::kSimulated;

  int size() const { return static_cast<int>(theta.size()); }
  int theta_dim() const { return theta.empty() ? 0 : static_cast<int>(theta.front().size()); }
  int obs_dim() const { return obs.empty() ? 0 : static_cast<int>(obs.front().size()); }

  void push(Vec t, Vec o);
  // Throws if pairing, dimensions, or finiteness are violated.
  void validate() const;
  // Subset by row indices, preserving provenance.
  PairDataset take(const std::vector<int>& indices) const;
};

// CSV exchange format: header theta_0,...,theta_{p-1},obs_0,...,obs_{d-1},
// one pair per row, 17-significant-digit floats on export so values
// round-trip exactly.
PairDataset ingest_csv(const std::string& path);
void export_csv(const PairDataset& ds, const std::string& path);

}  // namespace fmcpe
