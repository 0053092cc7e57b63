#include "dynamap/robot.hpp"

#include <cmath>
#include <stdexcept>

namespace dynamap {

namespace {

RigidTransform dh_fixed(double d, double a, double alpha) {
  // T_z(d) * T_x(a) * R_x(alpha)
  RigidTransform T;
  T.R = Eigen::AngleAxisd(alpha, Vec3::UnitX()).toRotationMatrix();
  T.t = Vec3(a, 0, d);
  return T;
}

}  // namespace

RobotModel RobotModel::planar3(double l1, double l2, double l3, double radius) {
  RobotModel m;
  m.name = "planar3";
  double lens[3] = {l1, l2, l3};
  Vec3 offset = Vec3::Zero();
  for (int i = 0; i < 3; ++i) {
    Joint j;
    j.pre.t = offset;
    j.axis = Vec3::UnitZ();
    m.joints.push_back(j);
    offset = Vec3(lens[i], 0, 0);
    m.link_capsules.push_back({Vec3::Zero(), offset, radius});
  }
  m.tool.t = offset;
  m.q_min = Eigen::VectorXd::Constant(3, -2.9);
  m.q_max = Eigen::VectorXd::Constant(3, 2.9);
  m.qd_min = Eigen::VectorXd::Constant(3, -2.5);
  m.qd_max = Eigen::VectorXd::Constant(3, 2.5);
  m.self_pairs = {{0, 2}};
  m.manip_rows = {0, 1, 5};
  return m;
}

RobotModel RobotModel::ur5() {
  RobotModel m;
  m.name = "ur5";
  const double d[6] = {0.089159, 0, 0, 0.10915, 0.09465, 0.0823};
  const double a[6] = {0, -0.425, -0.39225, 0, 0, 0};
  const double alpha[6] = {M_PI / 2, 0, 0, M_PI / 2, -M_PI / 2, 0};
  for (int i = 0; i < 6; ++i) {
    Joint j;
    if (i > 0) j.pre = dh_fixed(d[i - 1], a[i - 1], alpha[i - 1]);
    j.axis = Vec3::UnitZ();
    m.joints.push_back(j);
  }
  m.tool = dh_fixed(d[5], a[5], alpha[5]);
  const double radii[6] = {0.06, 0.055, 0.05, 0.04, 0.04, 0.04};
  for (int i = 0; i < 6; ++i) {
    Vec3 b = (i + 1 < 6) ? dh_fixed(d[i], a[i], alpha[i]).t : m.tool.t;
    m.link_capsules.push_back({Vec3::Zero(), b, radii[i]});
  }
  m.q_min = Eigen::VectorXd::Constant(6, -2.0 * M_PI);
  m.q_max = Eigen::VectorXd::Constant(6, 2.0 * M_PI);
  m.qd_min = Eigen::VectorXd::Constant(6, -3.15);
  m.qd_max = Eigen::VectorXd::Constant(6, 3.15);
  m.self_pairs = {{0, 2}, {0, 3}, {0, 4}, {0, 5}, {1, 3},
                  {1, 4}, {1, 5}, {2, 4}, {2, 5}, {3, 5}};
  m.manip_rows = {0, 1, 2, 3, 4, 5};
  return m;
}

FkResult forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q) {
  if (q.size() != model.dof())
    throw std::invalid_argument("forward_kinematics: q size mismatch");
  FkResult fk;
  fk.link_pose.reserve(model.dof());
  fk.joint_origin.reserve(model.dof());
  fk.joint_axis.reserve(model.dof());
  RigidTransform X;
  for (int i = 0; i < model.dof(); ++i) {
    X = X.compose(model.joints[i].pre);
    fk.joint_origin.push_back(X.t);
    fk.joint_axis.push_back(X.R * model.joints[i].axis);
    X = X.compose(RigidTransform::from_axis_angle(model.joints[i].axis, q[i]));
    fk.link_pose.push_back(X);
  }
  fk.ee = X.compose(model.tool);
  return fk;
}

Eigen::MatrixXd jacobian(const RobotModel& model, const FkResult& fk) {
  int n = model.dof();
  Eigen::MatrixXd J(6, n);
  const Vec3 p_ee = fk.ee.t;
  for (int i = 0; i < n; ++i) {
    const Vec3& w = fk.joint_axis[i];
    J.block<3, 1>(0, i) = w.cross(p_ee - fk.joint_origin[i]);
    J.block<3, 1>(3, i) = w;
  }
  return J;
}

Eigen::MatrixXd jacobian(const RobotModel& model, const Eigen::VectorXd& q) {
  return jacobian(model, forward_kinematics(model, q));
}

double manipulability(const RobotModel& model, const Eigen::VectorXd& q) {
  Eigen::MatrixXd J = jacobian(model, q);
  Eigen::MatrixXd Jr(model.manip_rows.size(), model.dof());
  for (size_t r = 0; r < model.manip_rows.size(); ++r)
    Jr.row(r) = J.row(model.manip_rows[r]);
  double d = (Jr * Jr.transpose()).determinant();
  return std::sqrt(std::max(0.0, d));
}

std::vector<Capsule> world_capsules(const RobotModel& model, const FkResult& fk) {
  std::vector<Capsule> out;
  out.reserve(model.link_capsules.size());
  for (int i = 0; i < model.dof(); ++i) {
    const Capsule& c = model.link_capsules[i];
    out.push_back({fk.link_pose[i].apply(c.a), fk.link_pose[i].apply(c.b), c.radius});
  }
  return out;
}

double min_dist_to_robot(const std::vector<Capsule>& capsules_world, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const Capsule& c : capsules_world)
    best = std::min(best, point_segment_distance(p, c.a, c.b) - c.radius);
  return best;
}

double min_dist_to_robot(const RobotModel& model, const Eigen::VectorXd& q,
                         const Vec3& p) {
  return min_dist_to_robot(world_capsules(model, forward_kinematics(model, q)), p);
}

double self_collision_distance(const RobotModel& model, const Eigen::VectorXd& q) {
  std::vector<Capsule> caps = world_capsules(model, forward_kinematics(model, q));
  double best = std::numeric_limits<double>::infinity();
  for (auto [i, j] : model.self_pairs) {
    double d = segment_segment_distance(caps[i].a, caps[i].b, caps[j].a, caps[j].b) -
               caps[i].radius - caps[j].radius;
    best = std::min(best, d);
  }
  return best;
}

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  Vec3 ab = b - a;
  double denom = ab.squaredNorm();
  double s = denom > 0 ? (p - a).dot(ab) / denom : 0.0;
  s = std::clamp(s, 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2) {
  // Closest points of two segments (Ericson, Real-Time Collision Detection).
  Vec3 d1 = q1 - p1, d2 = q2 - p2, r = p1 - p2;
  double A = d1.squaredNorm(), E = d2.squaredNorm(), F = d2.dot(r);
  double s = 0, t = 0;
  constexpr double eps = 1e-12;
  if (A <= eps && E <= eps) return r.norm();
  if (A <= eps) {
    t = std::clamp(F / E, 0.0, 1.0);
  } else {
    double C = d1.dot(r);
    if (E <= eps) {
      s = std::clamp(-C / A, 0.0, 1.0);
    } else {
      double B = d1.dot(d2);
      double denom = A * E - B * B;
      if (denom > eps)
        s = std::clamp((B * F - C * E) / denom, 0.0, 1.0);
      t = (B * s + F) / E;
      if (t < 0) {
        t = 0;
        s = std::clamp(-C / A, 0.0, 1.0);
      } else if (t > 1) {
        t = 1;
        s = std::clamp((B - C) / A, 0.0, 1.0);
      }
    }
  }
  return (p1 + d1 * s - (p2 + d2 * t)).norm();
}

}  // namespace dynamap
