#include "dynamap/sensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_map>
#include <random>

namespace dynamap {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double ray_sphere(const Vec3& o, const Vec3& d, const Vec3& c, double r) {
  Vec3 oc = o - c;
  double b = oc.dot(d);
  double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0) return kInf;
  double s = std::sqrt(disc);
  double t = -b - s;
  if (t < 0) t = -b + s;
  return t >= 0 ? t : kInf;
}

double ray_aabb(const Vec3& o, const Vec3& d, const Vec3& lo, const Vec3& hi) {
  double tmin = 0, tmax = kInf;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < lo[i] || o[i] > hi[i]) return kInf;
    } else {
      double inv = 1.0 / d[i];
      double t1 = (lo[i] - o[i]) * inv;
      double t2 = (hi[i] - o[i]) * inv;
      if (t1 > t2) std::swap(t1, t2);
      tmin = std::max(tmin, t1);
      tmax = std::min(tmax, t2);
      if (tmin > tmax) return kInf;
    }
  }
  return tmin;
}

double point_aabb_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  Vec3 d = Vec3::Zero();
  for (int i = 0; i < 3; ++i)
    d[i] = std::max({lo[i] - p[i], 0.0, p[i] - hi[i]});
  return d.norm();
}

bool aabb_overlap(const Vec3& lo1, const Vec3& hi1, const Vec3& lo2, const Vec3& hi2) {
  for (int i = 0; i < 3; ++i)
    if (hi1[i] < lo2[i] || hi2[i] < lo1[i]) return false;
  return true;
}

bool sphere_aabb_overlap(const Vec3& c, double r, const Vec3& lo, const Vec3& hi) {
  return point_aabb_distance(c, lo, hi) <= r;
}

}  // namespace

Vec3 ObstacleBody::position(double t) const {
  switch (motion) {
    case MotionType::fixed:
      return p0;
    case MotionType::sinusoid:
      return p0 + amplitude * std::sin(2.0 * M_PI * t / period + phase);
    case MotionType::conveyor:
      return p0 + velocity0 * t;
  }
  return p0;
}

Vec3 ObstacleBody::velocity(double t) const {
  switch (motion) {
    case MotionType::fixed:
      return Vec3::Zero();
    case MotionType::sinusoid:
      return amplitude * (2.0 * M_PI / period) * std::cos(2.0 * M_PI * t / period + phase);
    case MotionType::conveyor:
      return velocity0;
  }
  return Vec3::Zero();
}

double ray_scene_distance(const Scene& scene, const Vec3& origin, const Vec3& dir) {
  double best = kInf;
  for (const ObstacleBody& body : scene.bodies) {
    Vec3 pos = body.position(scene.time);
    for (const SpherePrim& s : body.spheres)
      best = std::min(best, ray_sphere(origin, dir, pos + s.offset, s.radius));
    for (const BoxPrim& b : body.boxes)
      best = std::min(best, ray_aabb(origin, dir, pos + b.offset - b.half,
                                     pos + b.offset + b.half));
  }
  return best;
}

double body_signed_distance(const ObstacleBody& body, double t, const Vec3& p) {
  Vec3 pos = body.position(t);
  double best = kInf;
  for (const SpherePrim& s : body.spheres)
    best = std::min(best, (p - (pos + s.offset)).norm() - s.radius);
  for (const BoxPrim& b : body.boxes) {
    Vec3 lo = pos + b.offset - b.half, hi = pos + b.offset + b.half;
    double d = point_aabb_distance(p, lo, hi);
    if (d == 0.0) {
      double inside = kInf;
      for (int i = 0; i < 3; ++i)
        inside = std::min(inside, std::min(p[i] - lo[i], hi[i] - p[i]));
      d = -inside;
    }
    best = std::min(best, d);
  }
  return best;
}

double segment_aabb_distance(const Vec3& a, const Vec3& b, const Vec3& lo,
                             const Vec3& hi) {
  // Distance from a point to a box is convex along the segment, so a ternary
  // search over the parameter converges to the minimum.
  auto f = [&](double s) { return point_aabb_distance(a + s * (b - a), lo, hi); };
  double left = 0, right = 1;
  for (int it = 0; it < 100; ++it) {
    double m1 = left + (right - left) / 3.0;
    double m2 = right - (right - left) / 3.0;
    if (f(m1) <= f(m2))
      right = m2;
    else
      left = m1;
  }
  return f(0.5 * (left + right));
}

double scene_min_distance(const Scene& scene, const std::vector<Capsule>& capsules) {
  double best = kInf;
  for (const ObstacleBody& body : scene.bodies) {
    Vec3 pos = body.position(scene.time);
    for (const Capsule& c : capsules) {
      for (const SpherePrim& s : body.spheres)
        best = std::min(best, point_segment_distance(pos + s.offset, c.a, c.b) -
                                  s.radius - c.radius);
      for (const BoxPrim& b : body.boxes)
        best = std::min(best, segment_aabb_distance(c.a, c.b, pos + b.offset - b.half,
                                                    pos + b.offset + b.half) -
                                  c.radius);
    }
  }
  return best;
}

PointCloud render_depth(const Scene& scene, const CameraModel& cam, double sigma,
                        uint64_t seed) {
  PointCloud out;
  out.frame = Frame::camera;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const Vec3 origin = cam.pose.t;
  for (int r = 0; r < cam.rows; ++r) {
    for (int c = 0; c < cam.cols; ++c) {
      Vec3 dir_cam = cam.ray_direction(r, c);
      double t = ray_scene_distance(scene, origin, cam.pose.R * dir_cam);
      if (t > cam.max_range) continue;
      if (sigma > 0) t += sigma * noise(rng);
      if (t <= 1e-6) continue;
      out.points.push_back(t * dir_cam);
    }
  }
  return out;
}

PointCloud voxel_filter(const PointCloud& cloud, double resolution, const Vec3& anchor) {
  struct Cell {
    Vec3 sum = Vec3::Zero();
    int count = 0;
  };
  std::map<std::tuple<int64_t, int64_t, int64_t>, Cell> cells;
  for (const Vec3& p : cloud.points) {
    Vec3 g = (p - anchor) / resolution;
    auto key = std::make_tuple(static_cast<int64_t>(std::floor(g.x())),
                               static_cast<int64_t>(std::floor(g.y())),
                               static_cast<int64_t>(std::floor(g.z())));
    Cell& cell = cells[key];
    cell.sum += p;
    cell.count += 1;
  }
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(cells.size());
  for (const auto& [key, cell] : cells) out.points.push_back(cell.sum / cell.count);
  return out;
}

PointCloud remove_robot_points(const PointCloud& cloud, const RobotModel& model,
                               const Eigen::VectorXd& q, double margin) {
  std::vector<Capsule> caps = world_capsules(model, forward_kinematics(model, q));
  PointCloud out;
  out.frame = cloud.frame;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points)
    if (min_dist_to_robot(caps, p) > margin) out.points.push_back(p);
  return out;
}

std::vector<GroundTruthVoxel> ground_truth_voxels(const Scene& scene,
                                                  const MapExtents& extents,
                                                  const std::vector<CameraModel>& cams) {
  std::vector<GroundTruthVoxel> out;
  std::unordered_map<int, size_t> slot;
  const double half = 0.5 * extents.resolution;
  for (int idx = 0; idx < extents.voxel_count(); ++idx) {
    Vec3 center = extents.voxel_center(idx);
    Vec3 lo = center - Vec3::Constant(half), hi = center + Vec3::Constant(half);
    int hit_body = -1;
    for (size_t bi = 0; bi < scene.bodies.size() && hit_body < 0; ++bi) {
      const ObstacleBody& body = scene.bodies[bi];
      Vec3 pos = body.position(scene.time);
      for (const SpherePrim& s : body.spheres)
        if (sphere_aabb_overlap(pos + s.offset, s.radius, lo, hi)) {
          hit_body = static_cast<int>(bi);
          break;
        }
      if (hit_body >= 0) break;
      for (const BoxPrim& b : body.boxes)
        if (aabb_overlap(lo, hi, pos + b.offset - b.half, pos + b.offset + b.half)) {
          hit_body = static_cast<int>(bi);
          break;
        }
    }
    if (hit_body < 0) continue;
    GroundTruthVoxel gt;
    gt.voxel = idx;
    gt.body = hit_body;
    slot[idx] = out.size();
    out.push_back(gt);
  }

  // A voxel is visible when a noise-free camera ray returns depth from inside
  // it: the first scene hit along one of the camera's own rays lands there.
  for (const CameraModel& cam : cams) {
    const Vec3 origin = cam.pose.t;
    for (int r = 0; r < cam.rows; ++r)
      for (int c = 0; c < cam.cols; ++c) {
        Vec3 dir = cam.pose.R * cam.ray_direction(r, c);
        double t = ray_scene_distance(scene, origin, dir);
        if (t > cam.max_range) continue;
        Vec3 hit = origin + t * dir;
        if (!extents.contains(hit)) continue;
        auto it = slot.find(extents.voxel_index(hit));
        if (it != slot.end()) out[it->second].visible = true;
      }
  }
  return out;
}

}  // namespace dynamap
