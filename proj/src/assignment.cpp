#include "fmcpe/assignment.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace fmcpe {

std::pair<std::vector<int>, double> solve_assignment(const DenseMatrix& cost) {
  const int n = cost.rows();
  if (cost.cols() != n) throw std::invalid_argument("solve_assignment: cost matrix not square");
  if (n == 0) return {std::vector<int>{}, 0.0};
  if (!cost.all_finite()) throw std::invalid_argument("solve_assignment: non-finite cost");

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays with column 0 as sentinel. p[j] is the row matched to
  // column j; u, v are dual potentials kept feasible throughout.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<double> minv(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> p(static_cast<size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<size_t>(n) + 1, 0);
  std::vector<char> used(static_cast<size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = p[static_cast<size_t>(j0)];
      int j1 = 0;
      double delta = inf;
      const double* crow = cost.row(i0 - 1);
      const double ui0 = u[static_cast<size_t>(i0)];
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = crow[j - 1] - ui0 - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          way[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<size_t>(j0)] != 0);
    // Walk the alternating path backwards, flipping assignments.
    do {
      const int j1 = way[static_cast<size_t>(j0)];
      p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
      j0 = j1;
    } while (j0);
  }

  std::vector<int> row_to_col(static_cast<size_t>(n), -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    const int i = p[static_cast<size_t>(j)];
    if (i > 0) {
      row_to_col[static_cast<size_t>(i) - 1] = j - 1;
      total += cost(i - 1, j - 1);
    }
  }
  return {std::move(row_to_col), total};
}

}  // namespace fmcpe
