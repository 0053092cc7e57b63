#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace dynamap {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

// Sentinel for "not inside the map / not inside the field of view".
inline constexpr int kOutside = -1;

struct RigidTransform {
  Mat3 R = Mat3::Identity();
  Vec3 t = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_axis_angle(const Vec3& axis, double angle,
                                        const Vec3& translation = Vec3::Zero());

  Vec3 apply(const Vec3& p) const { return R * p + t; }
  Vec3 rotate(const Vec3& v) const { return R * v; }
  RigidTransform compose(const RigidTransform& other) const;  // this ∘ other
  RigidTransform inverse() const;
  Eigen::Matrix4d matrix() const;
  bool is_rigid(double tol = 1e-9) const;
};

RigidTransform look_at(const Vec3& eye, const Vec3& target,
                       const Vec3& up = Vec3::UnitZ());

enum class Frame { camera, world };

struct PointCloud {
  std::vector<Vec3> points;
  Frame frame = Frame::world;

  int size() const { return static_cast<int>(points.size()); }
  bool empty() const { return points.empty(); }
};

PointCloud transform_points(const RigidTransform& T, const PointCloud& cloud,
                            Frame target_frame);

// Axis-aligned map region, partitioned into cubic voxels of edge `resolution`.
// Cells are half-open: [origin + i*l, origin + (i+1)*l). Flattened index runs
// x-fastest: idx = ix + nx*(iy + ny*iz).
struct MapExtents {
  Vec3 origin = Vec3::Zero();
  double length_x = 0, length_y = 0, length_z = 0;
  double resolution = 0;
  int nx = 0, ny = 0, nz = 0;

  static MapExtents create(const Vec3& origin, double lx, double ly, double lz,
                           double resolution);

  int voxel_count() const { return nx * ny * nz; }
  bool contains(const Vec3& p) const;
  int voxel_index(const Vec3& p) const;  // kOutside if p is not in the region
  Vec3 voxel_center(int index) const;
};

// Pinhole-style camera with a rectangular angular field of view, used both to
// render depth and to bin particles/points into angular pyramid cells.
//
// Camera frame: z forward, x right, y down. Azimuth az = atan2(x, z) grows to
// the right, elevation el = atan2(y, z) grows downward. A point is inside the
// field of view iff z > 0, az in [-fov_h/2, fov_h/2) and el in [-fov_v/2,
// fov_v/2). Pyramid cells tile that angular rectangle with square bins of
// `pyramid_res` radians, row-major: idx = row * pyramid_cols() + col.
struct CameraModel {
  RigidTransform pose;  // camera-to-world
  double fov_h = 0, fov_v = 0;
  double pyramid_res = 0;
  double max_range = 0;
  int rows = 0, cols = 0;

  int pyramid_cols() const { return static_cast<int>(std::ceil(fov_h / pyramid_res)); }
  int pyramid_rows() const { return static_cast<int>(std::ceil(fov_v / pyramid_res)); }
  int pyramid_count() const { return pyramid_rows() * pyramid_cols(); }

  Vec3 to_camera(const Vec3& p_world) const;
  double distance(const Vec3& p_world) const { return (p_world - pose.t).norm(); }
  bool in_fov(const Vec3& p_world) const;
  int pyramid_index(const Vec3& p_world) const;  // kOutside if outside the FOV

  // Direction of the ray through the center of image cell (row, col), in the
  // camera frame: normalize(tan(az), tan(el), 1).
  Vec3 ray_direction(int row, int col) const;
};

void write_xyz(const std::string& path, const PointCloud& cloud);

}  // namespace dynamap
