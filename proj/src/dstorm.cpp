#include "dynamap/dstorm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dynamap/common.hpp"

namespace dynamap {

namespace {

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

void floor_eigenvalues(Eigen::MatrixXd& m, double floor) {
  m = 0.5 * (m + m.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd ev = es.eigenvalues().cwiseMax(floor);
  m = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  m = 0.5 * (m + m.transpose()).eval();
}

double self_collision_from_capsules(const RobotModel& model,
                                    const std::vector<Capsule>& caps) {
  double best = std::numeric_limits<double>::infinity();
  for (auto [i, j] : model.self_pairs) {
    double d = segment_segment_distance(caps[i].a, caps[i].b, caps[j].a, caps[j].b) -
               caps[i].radius - caps[j].radius;
    best = std::min(best, d);
  }
  return -std::min(0.0, best);
}

double limit_violation(const Eigen::VectorXd& q, const Eigen::VectorXd& lo,
                       const Eigen::VectorXd& hi) {
  double sq = 0;
  for (int i = 0; i < q.size(); ++i) {
    double v = std::max(0.0, lo[i] - q[i]) + std::max(0.0, q[i] - hi[i]);
    sq += v * v;
  }
  return std::sqrt(sq);
}

double aggregate_collision(const std::vector<double>& costs,
                           PlannerParams::CollisionMode mode, double alpha) {
  if (costs.empty()) return 0;
  double peak = *std::max_element(costs.begin(), costs.end());
  if (mode == PlannerParams::CollisionMode::max) return peak;
  double s = 0;
  for (double c : costs) s += std::exp(alpha * (c - peak));
  return peak + std::log(s) / alpha;
}

}  // namespace

Eigen::VectorXd PlannerParams::default_dt(int horizon) {
  Eigen::VectorXd dt(horizon);
  for (int h = 0; h < horizon; ++h) dt[h] = h < 5 ? 0.02 : 0.06;
  return dt;
}

std::vector<Eigen::MatrixXd> sample_controls(const Eigen::MatrixXd& U,
                                             const Eigen::MatrixXd& sigma_c, int K,
                                             std::mt19937_64& rng) {
  const int d = static_cast<int>(U.cols());
  if (sigma_c.rows() != d || sigma_c.cols() != d ||
      (sigma_c - sigma_c.transpose()).cwiseAbs().maxCoeff() > 1e-9)
    throw std::invalid_argument("sample_controls: sigma_c must be symmetric d x d");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_c);
  if (es.eigenvalues().minCoeff() < -1e-12)
    throw std::invalid_argument("sample_controls: sigma_c not PSD");
  const Eigen::MatrixXd A = psd_sqrt(sigma_c);

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<Eigen::MatrixXd> du(K);
  du[0] = Eigen::MatrixXd::Zero(U.rows(), d);
  for (int k = 1; k < K; ++k) {
    Eigen::MatrixXd G(U.rows(), d);
    for (int h = 0; h < U.rows(); ++h)
      for (int c = 0; c < d; ++c) G(h, c) = gauss(rng);
    du[k] = G * A.transpose();
  }
  return du;
}

void rollout_robot(const Eigen::VectorXd& q0, const Eigen::VectorXd& qd0,
                   const Eigen::VectorXd& dt, RolloutBatch& batch) {
  const int K = static_cast<int>(batch.v.size());
  batch.theta.resize(K);
  batch.theta_dot.resize(K);
  for (int k = 0; k < K; ++k) {
    const Eigen::MatrixXd& a = batch.v[k];
    Eigen::MatrixXd qd(a.rows(), a.cols()), q(a.rows(), a.cols());
    Eigen::VectorXd vel = qd0, pos = q0;
    for (int h = 0; h < a.rows(); ++h) {
      vel += dt[h] * a.row(h).transpose();
      pos += dt[h] * vel;
      qd.row(h) = vel.transpose();
      q.row(h) = pos.transpose();
    }
    batch.theta_dot[k] = std::move(qd);
    batch.theta[k] = std::move(q);
  }
}

Eigen::Matrix3Xd rollout_obstacles(const Vec3& x0, const Vec3& v0,
                                   const Eigen::VectorXd& dt) {
  Eigen::Matrix3Xd x(3, dt.size());
  double T = 0;
  for (int h = 0; h < dt.size(); ++h) {
    T += dt[h];
    x.col(h) = x0 + T * v0;
  }
  return x;
}

std::vector<Mat3> propagate_obstacle_covariance(const Mat3& sigma_p0,
                                                const Mat3& sigma_v,
                                                const Eigen::VectorXd& dt) {
  std::vector<Mat3> out;
  out.reserve(dt.size());
  double T = 0;
  for (int h = 0; h < dt.size(); ++h) {
    T += dt[h];
    out.push_back(sigma_p0 + T * T * sigma_v);
  }
  return out;
}

double uncertainty_radius(const Mat3& sigma_p, double confidence, double edge,
                          double margin) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(sigma_p);
  double r_d = confidence * std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
  return std::clamp(r_d, 0.75 * edge + margin, 1.25 * edge + margin);
}

Eigen::MatrixXd collision_cost(const RobotModel& model, const RolloutBatch& batch,
                               const ObstaclePrediction& obs,
                               PlannerParams::CollisionMode mode, double alpha) {
  const int K = static_cast<int>(batch.theta.size());
  const int H = K > 0 ? static_cast<int>(batch.theta[0].rows()) : 0;
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(K, H);
  std::vector<double> per_obs(obs.count);
  for (int k = 0; k < K; ++k) {
    for (int h = 0; h < H; ++h) {
      Eigen::VectorXd q = batch.theta[k].row(h).transpose();
      std::vector<Capsule> caps = world_capsules(model, forward_kinematics(model, q));
      for (int i = 0; i < obs.count; ++i) {
        double dist = min_dist_to_robot(caps, obs.x[i].col(h));
        per_obs[i] = std::max(0.0, obs.radius[i][h] - dist);
      }
      cost(k, h) = aggregate_collision(per_obs, mode, alpha);
    }
  }
  return cost;
}

double self_collision_cost(const RobotModel& model, const Eigen::VectorXd& q) {
  return -std::min(0.0, self_collision_distance(model, q));
}

double joint_limit_cost(const Eigen::VectorXd& q, const Eigen::VectorXd& q_min,
                        const Eigen::VectorXd& q_max) {
  return limit_violation(q, q_min, q_max);
}

double manipulability_cost(const RobotModel& model, const Eigen::VectorXd& q,
                           double threshold) {
  double m = manipulability(model, q);
  return m >= threshold ? 0.0 : 1.0 - m / threshold;
}

double goal_cost(const Eigen::VectorXd& q_goal, const Eigen::VectorXd& q_terminal) {
  return (q_goal - q_terminal).norm();
}

CostResult total_cost(const RobotModel& model, const RolloutBatch& batch,
                      const ObstaclePrediction& obs, const Eigen::MatrixXd& U,
                      const Eigen::VectorXd& q_goal, const PlannerParams& params) {
  const int K = static_cast<int>(batch.theta.size());
  const int H = params.horizon;
  const Eigen::VectorXd lim_lo = model.q_min.array() + params.limit_margin;
  const Eigen::VectorXd lim_hi = model.q_max.array() - params.limit_margin;
  Eigen::VectorXd discount(H);
  for (int h = 0; h < H; ++h) discount[h] = std::pow(params.gamma, h);

  CostResult out;
  out.total.resize(K);
  out.nominal_min_clearance = std::numeric_limits<double>::infinity();
  std::vector<double> per_obs(obs.count);
  for (int k = 0; k < K; ++k) {
    double c = 0;
    for (int h = 0; h < H; ++h) {
      Eigen::VectorXd q = batch.theta[k].row(h).transpose();
      FkResult fk = forward_kinematics(model, q);
      std::vector<Capsule> caps = world_capsules(model, fk);

      for (int i = 0; i < obs.count; ++i) {
        double clearance =
            min_dist_to_robot(caps, obs.x[i].col(h)) - obs.radius[i][h];
        per_obs[i] = std::max(0.0, -clearance);
        if (k == 0)
          out.nominal_min_clearance = std::min(out.nominal_min_clearance, clearance);
      }
      double coll = aggregate_collision(per_obs, params.collision_mode,
                                        params.softmax_alpha) +
                    self_collision_from_capsules(model, caps);
      double lim = limit_violation(q, lim_lo, lim_hi);
      Eigen::MatrixXd J = jacobian(model, fk);
      Eigen::MatrixXd Jr(model.manip_rows.size(), model.dof());
      for (size_t r = 0; r < model.manip_rows.size(); ++r)
        Jr.row(r) = J.row(model.manip_rows[r]);
      double m = std::sqrt(std::max(0.0, (Jr * Jr.transpose()).determinant()));
      double manip =
          m >= params.manip_threshold ? 0.0 : 1.0 - m / params.manip_threshold;
      Eigen::VectorXd u = U.row(h).transpose();
      Eigen::VectorXd du = batch.du[k].row(h).transpose();
      double control = 0.5 * u.dot(params.R * (u + 2.0 * du));

      double step = params.w_collision * coll + params.w_limit * lim +
                    params.w_manip * manip + control;
      if (h == H - 1) step += params.w_goal * goal_cost(q_goal, q);
      c += discount[h] * step;
    }
    out.total[k] = c;
  }
  if (obs.count == 0) out.nominal_min_clearance = std::numeric_limits<double>::infinity();
  return out;
}

Eigen::VectorXd trajectory_weights(const Eigen::VectorXd& cost, double beta) {
  if (beta <= 0) throw std::invalid_argument("trajectory_weights: beta must be > 0");
  const int K = static_cast<int>(cost.size());
  Eigen::VectorXd eta(K);
  if (K == 0) return eta;
  double base = cost.minCoeff();
  for (int k = 0; k < K; ++k) eta[k] = std::exp(-(cost[k] - base) / beta);
  eta /= eta.sum();
  return eta;
}

void update_control_and_covariance(Eigen::MatrixXd& U, Eigen::MatrixXd& sigma_c,
                                   const RolloutBatch& batch,
                                   const Eigen::VectorXd& eta, double alpha_u,
                                   double alpha_sigma, double sigma_floor) {
  const int K = static_cast<int>(batch.v.size());
  const int H = static_cast<int>(U.rows());
  const int d = static_cast<int>(U.cols());
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(H, d);
  for (int k = 0; k < K; ++k) mean += eta[k] * batch.v[k];
  U = (1.0 - alpha_u) * U + alpha_u * mean;

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (int k = 0; k < K; ++k) {
    Eigen::MatrixXd m_k = Eigen::MatrixXd::Zero(d, d);
    for (int h = 0; h < H; ++h) {
      Eigen::VectorXd e = (batch.v[k].row(h) - U.row(h)).transpose();
      m_k += e * e.transpose();
    }
    scatter += eta[k] / H * m_k;
  }
  sigma_c = (1.0 - alpha_sigma) * sigma_c + alpha_sigma * scatter;
  floor_eigenvalues(sigma_c, sigma_floor * sigma_floor);
}

std::vector<VoxelEstimate> select_top_obstacles(
    const std::vector<VoxelEstimate>& estimates, const RobotModel& model,
    const Eigen::VectorXd& q, int cap) {
  std::vector<Capsule> caps = world_capsules(model, forward_kinematics(model, q));
  std::vector<std::pair<double, int>> order;
  order.reserve(estimates.size());
  for (size_t i = 0; i < estimates.size(); ++i)
    order.emplace_back(min_dist_to_robot(caps, estimates[i].center), i);
  std::stable_sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return estimates[a.second].voxel < estimates[b.second].voxel;
  });
  std::vector<VoxelEstimate> kept;
  kept.reserve(std::min<size_t>(cap, order.size()));
  for (size_t i = 0; i < order.size() && static_cast<int>(i) < cap; ++i)
    kept.push_back(estimates[order[i].second]);
  return kept;
}

ObstaclePrediction predict_obstacles(const std::vector<VoxelEstimate>& selected,
                                     const PlannerParams& params) {
  ObstaclePrediction out;
  out.count = static_cast<int>(selected.size());
  for (const VoxelEstimate& est : selected) {
    Vec3 v = params.baseline ? Vec3::Zero() : est.velocity;
    Mat3 sigma_v = params.baseline ? Mat3::Zero() : est.cov_v;
    out.v.push_back(v);
    out.x.push_back(rollout_obstacles(est.center, v, params.dt));
    std::vector<Mat3> cov = propagate_obstacle_covariance(est.cov_p, sigma_v, params.dt);
    Eigen::VectorXd r(params.dt.size());
    for (int h = 0; h < params.dt.size(); ++h)
      r[h] = uncertainty_radius(cov[h], params.confidence, est.edge,
                                params.safety_margin);
    out.cov.push_back(std::move(cov));
    out.radius.push_back(std::move(r));
  }
  return out;
}

Planner::Planner(const PlannerParams& params, const RobotModel& model,
                 const Eigen::VectorXd& q_goal, uint64_t seed)
    : params_(params), model_(model), q_goal_(q_goal),
      rng_(derive_seed(seed, "dstorm")) {
  const int d = model_.dof();
  if (params_.dt.size() != params_.horizon)
    params_.dt = PlannerParams::default_dt(params_.horizon);
  if (params_.sigma_c0.size() == 0)
    params_.sigma_c0 = 0.25 * Eigen::MatrixXd::Identity(d, d);
  if (params_.R.size() == 0)
    params_.R = 1e-4 * Eigen::MatrixXd::Identity(d, d);
  if (params_.process_noise != 0.0)
    throw std::invalid_argument(
        "Planner: nonzero process noise is unsupported by the closed-form "
        "covariance propagation");
  U_ = Eigen::MatrixXd::Zero(params_.horizon, d);
  sigma_c_ = params_.sigma_c0;
}

Planner::StepResult Planner::control_step(JointState& desired,
                                          const std::vector<VoxelEstimate>& estimates) {
  RolloutBatch batch;
  batch.du = sample_controls(U_, sigma_c_, params_.samples, rng_);
  batch.v.resize(batch.du.size());
  for (size_t k = 0; k < batch.du.size(); ++k) batch.v[k] = U_ + batch.du[k];
  rollout_robot(desired.q, desired.qd, params_.dt, batch);

  std::vector<VoxelEstimate> selected =
      select_top_obstacles(estimates, model_, desired.q, params_.obstacle_cap);
  ObstaclePrediction obs = predict_obstacles(selected, params_);

  CostResult cost = total_cost(model_, batch, obs, U_, q_goal_, params_);
  batch.cost = cost.total;
  batch.eta = trajectory_weights(batch.cost, params_.beta);
  update_control_and_covariance(U_, sigma_c_, batch, batch.eta, params_.alpha_u,
                                params_.alpha_sigma, params_.sigma_floor);

  StepResult out;
  out.u0 = U_.row(0).transpose();
  out.cost_min = batch.cost.minCoeff();
  out.cost_mean = batch.cost.mean();
  out.cost_max = batch.cost.maxCoeff();
  out.min_clearance = cost.nominal_min_clearance;
  out.obstacle_count = obs.count;

  desired.qd += out.u0 * params_.control_interval;
  desired.q += desired.qd * params_.control_interval;

  const int H = params_.horizon;
  pre_shift_ = U_;
  U_.topRows(H - 1) = U_.bottomRows(H - 1).eval();
  U_.row(H - 1).setZero();
  return out;
}

}  // namespace dynamap
