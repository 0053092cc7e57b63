#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "dynamap/gdsp.hpp"
#include "dynamap/robot.hpp"

namespace dynamap {

struct PlannerParams {
  int samples = 100;  // K
  int horizon = 30;   // H
  Eigen::VectorXd dt = default_dt(30);
  Eigen::MatrixXd sigma_c0;  // d x d, set when the robot is known
  double beta = 1.0;
  double alpha_u = 0.98;
  double alpha_sigma = 0.05;
  double sigma_floor = 1e-4;  // lower bound on sampled-control stddev
  double gamma = 0.98;
  Eigen::MatrixXd R;  // d x d control cost
  double w_goal = 1.0;
  double w_collision = 1.0;
  double w_limit = 1.0;
  double w_manip = 1.0;
  double confidence = 2.5;      // nu
  double safety_margin = 0.01;  // delta_r (m)
  double softmax_alpha = 25.0;  // alpha_o
  double manip_threshold = 0.05;
  int obstacle_cap = 20;        // N_o^c
  double process_noise = 0.0;   // reserved; closed-form propagation assumes 0
  double control_interval = 0.02;  // delta_tau (s)
  double limit_margin = 0.05;      // shrink joint limits before the cost (rad)
  bool baseline = false;           // treat obstacles as static
  enum class CollisionMode { max, softmax };
  CollisionMode collision_mode = CollisionMode::softmax;

  // 0.02 s for the first five steps, 0.06 s after.
  static Eigen::VectorXd default_dt(int horizon);
};

struct ControlSequence {
  Eigen::MatrixXd u;  // H x d nominal joint accelerations
};

struct RolloutBatch {
  std::vector<Eigen::MatrixXd> du;         // K perturbations, H x d each
  std::vector<Eigen::MatrixXd> v;          // K sampled controls (theta_dd)
  std::vector<Eigen::MatrixXd> theta;      // K positions
  std::vector<Eigen::MatrixXd> theta_dot;  // K velocities
  Eigen::VectorXd cost;
  Eigen::VectorXd eta;
};

struct ObstaclePrediction {
  int count = 0;
  std::vector<Eigen::Matrix3Xd> x;      // per obstacle, 3 x H positions
  std::vector<Vec3> v;                  // per obstacle velocity
  std::vector<std::vector<Mat3>> cov;   // per obstacle, per step
  std::vector<Eigen::VectorXd> radius;  // per obstacle, H radii
};

// K perturbation matrices drawn row-wise from N(0, sigma_c); sample 0 is kept
// at zero so the nominal sequence is always evaluated.
std::vector<Eigen::MatrixXd> sample_controls(const Eigen::MatrixXd& U,
                                             const Eigen::MatrixXd& sigma_c, int K,
                                             std::mt19937_64& rng);

// Fills theta/theta_dot from batch.v by the double cumulative sum
// (inclusive): qd_h = qd0 + sum dt_j*a_j, q_h = q0 + sum dt_j*qd_j.
void rollout_robot(const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                   const Eigen::VectorXd& dt, RolloutBatch& batch);

Eigen::Matrix3Xd rollout_obstacles(const Vec3& x0, const Vec3& v0,
                                   const Eigen::VectorXd& dt);

// Closed form Sigma_p + T_h^2 * Sigma_v with T_h the inclusive time sum.
std::vector<Mat3> propagate_obstacle_covariance(const Mat3& sigma_p0,
                                                const Mat3& sigma_v,
                                                const Eigen::VectorXd& dt);

// r_d = confidence * sqrt(lambda_max), clamped to [3/4 l + dr, 5/4 l + dr].
double uncertainty_radius(const Mat3& sigma_p, double confidence, double edge,
                          double margin);

Eigen::MatrixXd collision_cost(const RobotModel& model, const RolloutBatch& batch,
                               const ObstaclePrediction& obs,
                               PlannerParams::CollisionMode mode, double alpha);

double self_collision_cost(const RobotModel& model, const Eigen::VectorXd& q);
double joint_limit_cost(const Eigen::VectorXd& q, const Eigen::VectorXd& q_min,
                        const Eigen::VectorXd& q_max);
double manipulability_cost(const RobotModel& model, const Eigen::VectorXd& q,
                           double threshold);
double goal_cost(const Eigen::VectorXd& q_goal, const Eigen::VectorXd& q_terminal);

struct CostResult {
  Eigen::VectorXd total;          // per trajectory
  double nominal_min_clearance;   // min inflated-obstacle clearance, sample 0
};

// Discounted sum over the horizon of the weighted cost stack plus the control
// term 0.5*u^T R (u + 2 du); the goal term applies to the terminal step only.
CostResult total_cost(const RobotModel& model, const RolloutBatch& batch,
                      const ObstaclePrediction& obs, const Eigen::MatrixXd& U,
                      const Eigen::VectorXd& q_goal, const PlannerParams& params);

// eta_k proportional to exp(-(c_k - min c)/beta), normalized to sum 1.
Eigen::VectorXd trajectory_weights(const Eigen::VectorXd& cost, double beta);

// U <- (1-a_u) U + a_u sum eta V; sigma_c <- (1-a_s) sigma_c + a_s sum_k eta_k
// mean_h (V-U)(V-U)^T with the fresh U, then symmetrize and floor the
// eigenvalues at sigma_floor^2 so annealing cannot kill exploration.
void update_control_and_covariance(Eigen::MatrixXd& U, Eigen::MatrixXd& sigma_c,
                                   const RolloutBatch& batch,
                                   const Eigen::VectorXd& eta, double alpha_u,
                                   double alpha_sigma, double sigma_floor = 1e-4);

// Nearest estimates by robot surface distance, ties by voxel index.
std::vector<VoxelEstimate> select_top_obstacles(
    const std::vector<VoxelEstimate>& estimates, const RobotModel& model,
    const Eigen::VectorXd& q, int cap);

// Constant-velocity rollout + covariance + radii for selected estimates;
// baseline mode zeroes velocities and velocity covariances first.
ObstaclePrediction predict_obstacles(const std::vector<VoxelEstimate>& selected,
                                     const PlannerParams& params);

class Planner {
 public:
  struct StepResult {
    Eigen::VectorXd u0;
    double cost_min = 0;
    double cost_mean = 0;
    double cost_max = 0;
    double min_clearance = 0;
    int obstacle_count = 0;
  };

  Planner(const PlannerParams& params, const RobotModel& model,
          const Eigen::VectorXd& q_goal, uint64_t seed);

  // One receding-horizon iteration; mutates the desired state in place and
  // shifts the warm start.
  StepResult control_step(JointState& desired,
                          const std::vector<VoxelEstimate>& estimates);

  const Eigen::MatrixXd& nominal() const { return U_; }
  // Updated sequence as it stood before the warm-start shift, for diagnostics.
  const Eigen::MatrixXd& pre_shift() const { return pre_shift_; }
  const Eigen::MatrixXd& covariance() const { return sigma_c_; }
  const PlannerParams& params() const { return params_; }

 private:
  PlannerParams params_;
  RobotModel model_;
  Eigen::VectorXd q_goal_;
  Eigen::MatrixXd U_;
  Eigen::MatrixXd pre_shift_;
  Eigen::MatrixXd sigma_c_;
  std::mt19937_64 rng_;
};

}  // namespace dynamap
