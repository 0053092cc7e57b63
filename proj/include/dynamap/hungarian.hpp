#pragma once

#include <Eigen/Dense>
#include <vector>

namespace dynamap {

struct AssignmentResult {
  std::vector<int> row_to_col;  // -1 for unassigned rows
  double cost = 0;
};

// Minimum-cost assignment via shortest augmenting paths with potentials,
// O(n^2 m). Rectangular matrices assign every row when rows <= cols,
// otherwise every column (leaving the surplus rows unmatched).
AssignmentResult hungarian(const Eigen::MatrixXd& cost);

}  // namespace dynamap
