#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace cbonn {

/// Optimal row -> column matching of a square cost matrix.
struct AssignmentSolution {
  std::vector<std::size_t> col_of_row;
  double total_cost = 0.0;  // sum_j cost(j, col_of_row[j]), summed in row order
};

/// Minimum-cost perfect matching for an n x n row-major cost matrix, using the
/// shortest augmenting path method with dual potentials (O(n^3)). Ties are
/// resolved by the fixed column scan order, so the result is deterministic.
AssignmentSolution solve_assignment(std::span<const double> cost, std::size_t n);

}  // namespace cbonn
