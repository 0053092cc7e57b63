#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynamap/geometry.hpp"
#include "dynamap/robot.hpp"

namespace dynamap {

struct SpherePrim {
  Vec3 offset = Vec3::Zero();  // relative to the body origin
  double radius = 0;
};

// Axis-aligned box; bodies translate but never rotate.
struct BoxPrim {
  Vec3 offset = Vec3::Zero();
  Vec3 half = Vec3::Zero();
};

enum class MotionType { fixed, sinusoid, conveyor };

struct ObstacleBody {
  std::string name;
  std::vector<SpherePrim> spheres;
  std::vector<BoxPrim> boxes;
  MotionType motion = MotionType::fixed;
  Vec3 p0 = Vec3::Zero();       // origin at t = 0
  Vec3 amplitude = Vec3::Zero();  // sinusoid displacement vector
  double period = 1.0;
  double phase = 0.0;
  Vec3 velocity0 = Vec3::Zero();  // conveyor velocity

  Vec3 position(double t) const;
  Vec3 velocity(double t) const;
};

struct Scene {
  std::vector<ObstacleBody> bodies;
  double time = 0.0;
};

// First scene hit along origin + t*dir (dir unit length); +inf if none.
double ray_scene_distance(const Scene& scene, const Vec3& origin, const Vec3& dir);

// Signed distance from a world point to the body surface (negative inside).
double body_signed_distance(const ObstacleBody& body, double t, const Vec3& p);

// Minimum capsule-to-primitive surface distance over the whole scene
// (negative on penetration).
double scene_min_distance(const Scene& scene, const std::vector<Capsule>& capsules);

// Casts one ray per image cell and perturbs each hit range with N(0, sigma^2)
// noise. Output is in the camera frame; rays with no hit within max_range
// produce no point.
PointCloud render_depth(const Scene& scene, const CameraModel& cam, double sigma,
                        uint64_t seed);

// One point per occupied cell of a cubic grid anchored at `anchor`: the
// centroid of the cell's points. Output sorted by cell, deterministic.
PointCloud voxel_filter(const PointCloud& cloud, double resolution,
                        const Vec3& anchor = Vec3::Zero());

// Drops world-frame points closer than `margin` to the robot surface.
PointCloud remove_robot_points(const PointCloud& cloud, const RobotModel& model,
                               const Eigen::VectorXd& q, double margin);

struct GroundTruthVoxel {
  int voxel = kOutside;
  int body = -1;
  bool visible = false;
};

// Voxels whose cell overlaps any body primitive, each tagged with the first
// overlapping body and whether any camera has an unoccluded view of the cell
// center (occlusion slack of half the cell diagonal).
std::vector<GroundTruthVoxel> ground_truth_voxels(const Scene& scene,
                                                  const MapExtents& extents,
                                                  const std::vector<CameraModel>& cams);

double segment_aabb_distance(const Vec3& a, const Vec3& b, const Vec3& lo,
                             const Vec3& hi);

}  // namespace dynamap
