#include "dynamap/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace dynamap {

PhdOracleResult sequential_phd_update(const std::vector<Vec3>& positions,
                                      const Eigen::VectorXd& weights,
                                      const std::vector<char>& observable,
                                      const std::vector<Vec3>& points,
                                      const PhdOracleParams& params) {
  const int n = static_cast<int>(positions.size());
  const int m = static_cast<int>(points.size());
  if (n > 2000 || m > 500)
    throw std::invalid_argument("sequential_phd_update: size guard exceeded");
  if (weights.size() != n || static_cast<int>(observable.size()) != n)
    throw std::invalid_argument("sequential_phd_update: length mismatch");

  const double norm =
      1.0 / (std::pow(2.0 * M_PI, 1.5) * std::pow(params.sigma_obs, 3));
  const double inv2s2 = 1.0 / (2.0 * params.sigma_obs * params.sigma_obs);
  auto g = [&](const Vec3& z, const Vec3& x) {
    return norm * std::exp(-(z - x).squaredNorm() * inv2s2);
  };

  PhdOracleResult out;
  out.denominators.resize(m);
  for (int i = 0; i < m; ++i) {
    double acc = 0;
    for (int j = 0; j < n; ++j)
      if (observable[j]) acc += weights[j] * g(points[i], positions[j]);
    out.denominators[i] = params.detection * acc +
                          params.newborn_count * params.birth_weight +
                          params.clutter;
  }
  out.weights = weights;
  for (int j = 0; j < n; ++j) {
    if (!observable[j]) continue;
    double s = 0;
    for (int i = 0; i < m; ++i) {
      if (out.denominators[i] <= 0) continue;
      s += g(points[i], positions[j]) / out.denominators[i];
    }
    out.weights[j] = (1.0 - params.detection + params.detection * s) * weights[j];
  }
  return out;
}

std::vector<Mat6> recursive_ekf_covariance(const Mat6& sigma0,
                                           const Eigen::VectorXd& dt,
                                           const Mat6& Q) {
  std::vector<Mat6> out;
  out.reserve(dt.size());
  Mat6 sigma = sigma0;
  for (int h = 0; h < dt.size(); ++h) {
    Mat6 A = Mat6::Identity();
    A.block<3, 3>(0, 3) = dt[h] * Mat3::Identity();
    sigma = A * sigma * A.transpose() + Q;
    out.push_back(sigma);
  }
  return out;
}

AssignmentResult brute_force_assignment(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  AssignmentResult best;
  best.row_to_col.assign(n, -1);
  if (n == 0 || m == 0) return best;
  if (std::max(n, m) > 8)
    throw std::invalid_argument("brute_force_assignment: size guard exceeded");

  // Zero-pad to square so every candidate is a plain permutation; padded
  // rows/columns contribute nothing to the cost.
  const int s = std::max(n, m);
  Eigen::MatrixXd sq = Eigen::MatrixXd::Zero(s, s);
  sq.topLeftCorner(n, m) = cost;
  std::vector<int> perm(s);
  std::iota(perm.begin(), perm.end(), 0);
  best.cost = std::numeric_limits<double>::infinity();
  std::vector<int> best_perm;
  do {
    double c = 0;
    for (int i = 0; i < s; ++i) c += sq(i, perm[i]);
    if (c < best.cost) {
      best.cost = c;
      best_perm = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (int i = 0; i < n; ++i)
    if (best_perm[i] < m) best.row_to_col[i] = best_perm[i];
  return best;
}

}  // namespace dynamap
