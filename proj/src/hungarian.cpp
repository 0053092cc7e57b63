#include "dynamap/hungarian.hpp"

#include <limits>

namespace dynamap {

namespace {

// Rows must not outnumber columns here; hungarian() transposes otherwise.
std::vector<int> solve(const Eigen::MatrixXd& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(m + 1, 0);
  std::vector<int> match(m + 1, 0), way(m + 1, 0);
  for (int i = 1; i <= n; ++i) {
    match[0] = i;
    int j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      int i0 = match[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      int j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= m; ++j)
    if (match[j] > 0) row_to_col[match[j] - 1] = j - 1;
  return row_to_col;
}

}  // namespace

AssignmentResult hungarian(const Eigen::MatrixXd& cost) {
  AssignmentResult out;
  if (cost.rows() == 0 || cost.cols() == 0) {
    out.row_to_col.assign(cost.rows(), -1);
    return out;
  }
  if (cost.rows() <= cost.cols()) {
    out.row_to_col = solve(cost);
  } else {
    std::vector<int> col_to_row = solve(cost.transpose());
    out.row_to_col.assign(cost.rows(), -1);
    for (size_t j = 0; j < col_to_row.size(); ++j)
      out.row_to_col[col_to_row[j]] = static_cast<int>(j);
  }
  for (int i = 0; i < cost.rows(); ++i)
    if (out.row_to_col[i] >= 0) out.cost += cost(i, out.row_to_col[i]);
  return out;
}

}  // namespace dynamap
