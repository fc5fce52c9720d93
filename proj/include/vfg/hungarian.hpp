#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

#include "vfg/errors.hpp"

namespace vfg {

// Sentinel cost for gated-out entries. Strictly larger than any feasible
// cost this library produces; pairs resolved at this cost are stripped by
// the caller.
inline constexpr double kInfeasibleCost = 1e6;

// Dense rectangular cost matrix for the linear assignment problem. The
// solver normalizes orientation internally, so rows > cols is accepted.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> cost;  // row-major, rows * cols entries
  double infeasible_cost = kInfeasibleCost;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), cost(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return cost[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return cost[i * cols + j]; }
};

// Solution of the assignment problem: in the normalized orientation
// (rows <= cols) every row appears in exactly one pair and every column in
// at most one. total_cost is the sum of the selected entries, including any
// infeasible sentinels the solver was forced to take.
struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (row, col)
  double total_cost = 0.0;
};

// Kuhn-Munkres with potentials and shortest augmenting paths, O(R^2 C).
// When rows > cols the problem is transposed, solved, and transposed back.
inline Assignment hungarian_solve(const CostMatrix& m) {
  Assignment result;
  if (m.rows == 0 || m.cols == 0) return result;

  const bool transposed = m.rows > m.cols;
  const std::size_t n_rows = transposed ? m.cols : m.rows;
  const std::size_t n_cols = transposed ? m.rows : m.cols;
  auto cost_at = [&](std::size_t i, std::size_t j) {
    return transposed ? m.at(j, i) : m.at(i, j);
  };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; match_col[j] is the row assigned to column j, 0 = none.
  std::vector<double> row_potential(n_rows + 1, 0.0);
  std::vector<double> col_potential(n_cols + 1, 0.0);
  std::vector<std::size_t> match_col(n_cols + 1, 0);
  std::vector<std::size_t> prev_col(n_cols + 1, 0);

  for (std::size_t i = 1; i <= n_rows; ++i) {
    match_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> min_reduced(n_cols + 1, kInf);
    std::vector<bool> used(n_cols + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = match_col[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n_cols; ++j) {
        if (used[j]) continue;
        const double reduced = cost_at(i0 - 1, j - 1) - row_potential[i0] - col_potential[j];
        if (reduced < min_reduced[j]) {
          min_reduced[j] = reduced;
          prev_col[j] = j0;
        }
        if (min_reduced[j] < delta) {
          delta = min_reduced[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n_cols; ++j) {
        if (used[j]) {
          row_potential[match_col[j]] += delta;
          col_potential[j] -= delta;
        } else {
          min_reduced[j] -= delta;
        }
      }
      j0 = j1;
    } while (match_col[j0] != 0);
    // Unwind the augmenting path.
    do {
      const std::size_t j1 = prev_col[j0];
      match_col[j0] = match_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  for (std::size_t j = 1; j <= n_cols; ++j) {
    if (match_col[j] == 0) continue;
    const std::size_t i = match_col[j] - 1;
    const std::size_t row = transposed ? j - 1 : i;
    const std::size_t col = transposed ? i : j - 1;
    result.pairs.emplace_back(row, col);
    result.total_cost += m.at(row, col);
  }
  std::sort(result.pairs.begin(), result.pairs.end());
  return result;
}

}  // namespace vfg
