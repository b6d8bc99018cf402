#include "cbonn/assignment.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace cbonn {

AssignmentSolution solve_assignment(std::span<const double> cost, std::size_t n) {
  if (n == 0) throw std::invalid_argument("assignment problem of size 0");
  if (cost.size() != n * n)
    throw std::invalid_argument("cost matrix has " + std::to_string(cost.size()) +
                                " entries, expected " + std::to_string(n * n));
  for (double c : cost)
    if (!std::isfinite(c)) throw std::invalid_argument("non-finite assignment cost");

  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based rows/columns; index 0 is the virtual root of each augmenting tree.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> row_of_col(n + 1, 0), way(n + 1, 0);
  std::vector<double> minv(n + 1);
  std::vector<char> used(n + 1);

  for (std::size_t i = 1; i <= n; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  AssignmentSolution sol;
  sol.col_of_row.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) sol.col_of_row[row_of_col[j] - 1] = j - 1;
  for (std::size_t i = 0; i < n; ++i) sol.total_cost += cost[i * n + sol.col_of_row[i]];
  return sol;
}

}  // namespace cbonn
