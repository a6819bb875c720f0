#pragma once

#include <utility>
#include <vector>

#include "fmcpe/matrix.hpp"

namespace fmcpe {

// Exact solution of the square linear assignment problem by shortest
// augmenting paths with dual potentials (Jonker-Volgenant style, O(n^3)).
// Returns (row -> column assignment, minimal total cost).
std::pair<std::vector<int>, double> solve_assignment(const DenseMatrix& cost);

}  // namespace fmcpe
