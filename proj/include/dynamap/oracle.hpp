#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dynamap/geometry.hpp"
#include "dynamap/hungarian.hpp"

namespace dynamap {

// Slow reference implementations, nested scalar loops only. Size guards keep
// them out of any production path.

struct PhdOracleParams {
  double detection = 0.9;
  double sigma_obs = 0.05;
  double clutter = 0.01;
  double birth_weight = 0.1;
  int newborn_count = 0;  // L_b, the births planned for this frame
};

struct PhdOracleResult {
  Eigen::VectorXd weights;
  Eigen::VectorXd denominators;  // C(z_i), one per observation
};

// Literal per-particle/per-observation evaluation of the PHD weight update:
// w_j <- (1 - P_d + P_d * sum_i g(z_i|x_j)/C(z_i)) * w_j for observable j,
// C(z_i) = P_d * sum_j w_j g(z_i|x_j) + L_b*w_b + kappa, g isotropic Gaussian.
// Guard: at most 2000 particles and 500 observations.
PhdOracleResult sequential_phd_update(const std::vector<Vec3>& positions,
                                      const Eigen::VectorXd& weights,
                                      const std::vector<char>& observable,
                                      const std::vector<Vec3>& points,
                                      const PhdOracleParams& params);

// Step-by-step A*Sigma*A^T + Q with the constant-velocity transition over each
// dt; element h holds the covariance after steps 0..h.
std::vector<Mat6> recursive_ekf_covariance(const Mat6& sigma0,
                                           const Eigen::VectorXd& dt,
                                           const Mat6& Q);

// Exhaustive minimum-cost matching by permutation enumeration, min(n,m) <= 8.
AssignmentResult brute_force_assignment(const Eigen::MatrixXd& cost);

}  // namespace dynamap
