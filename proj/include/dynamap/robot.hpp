#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dynamap/geometry.hpp"

namespace dynamap {

// Capsule in the owning link's frame (segment a-b swept by `radius`).
struct Capsule {
  Vec3 a = Vec3::Zero();
  Vec3 b = Vec3::Zero();
  double radius = 0;
};

// Revolute joint: a fixed transform from the parent link frame, then a
// rotation by the joint angle about `axis`. Link frame i is the pose after
// joint i's rotation has been applied.
struct Joint {
  RigidTransform pre;
  Vec3 axis = Vec3::UnitZ();
};

struct RobotModel {
  std::string name;
  std::vector<Joint> joints;
  RigidTransform tool;  // link frame of the last joint -> end effector
  Eigen::VectorXd q_min, q_max;
  Eigen::VectorXd qd_min, qd_max;
  std::vector<Capsule> link_capsules;               // one per link
  std::vector<std::pair<int, int>> self_pairs;      // link index pairs to check
  std::vector<int> manip_rows;                      // twist rows used for manipulability

  int dof() const { return static_cast<int>(joints.size()); }

  // Three z-axis revolute joints with links along +x; the arm moves in the
  // z = 0 plane, so manipulability uses the (vx, vy, wz) rows only.
  static RobotModel planar3(double l1 = 0.40, double l2 = 0.35, double l3 = 0.25,
                            double radius = 0.04);
  // Six revolute joints with UR5 Denavit-Hartenberg constants.
  static RobotModel ur5();
};

struct JointState {
  Eigen::VectorXd q;
  Eigen::VectorXd qd;
};

struct FkResult {
  std::vector<RigidTransform> link_pose;  // world pose of each link frame
  std::vector<Vec3> joint_origin;         // world position of each joint axis
  std::vector<Vec3> joint_axis;           // world direction of each joint axis
  RigidTransform ee;
};

FkResult forward_kinematics(const RobotModel& model, const Eigen::VectorXd& q);

// Geometric Jacobian of the end effector, 6 x dof. Rows 0-2 are linear
// velocity, rows 3-5 angular velocity.
Eigen::MatrixXd jacobian(const RobotModel& model, const FkResult& fk);
Eigen::MatrixXd jacobian(const RobotModel& model, const Eigen::VectorXd& q);

// sqrt(det(Jr * Jr^T)) over the rows listed in model.manip_rows.
double manipulability(const RobotModel& model, const Eigen::VectorXd& q);

std::vector<Capsule> world_capsules(const RobotModel& model, const FkResult& fk);

// Signed distance from a point to the robot surface (negative inside).
double min_dist_to_robot(const std::vector<Capsule>& capsules_world, const Vec3& p);
double min_dist_to_robot(const RobotModel& model, const Eigen::VectorXd& q,
                         const Vec3& p);

// Minimum surface-to-surface distance over the model's self-collision pairs
// (negative when two capsules overlap).
double self_collision_distance(const RobotModel& model, const Eigen::VectorXd& q);

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b);
double segment_segment_distance(const Vec3& p1, const Vec3& q1, const Vec3& p2,
                                const Vec3& q2);

}  // namespace dynamap
