#include "dynamap/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace dynamap {

RigidTransform RigidTransform::from_axis_angle(const Vec3& axis, double angle,
                                               const Vec3& translation) {
  RigidTransform T;
  T.R = Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
  T.t = translation;
  return T;
}

RigidTransform RigidTransform::compose(const RigidTransform& other) const {
  RigidTransform out;
  out.R = R * other.R;
  out.t = R * other.t + t;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.R = R.transpose();
  out.t = -(R.transpose() * t);
  return out;
}

Eigen::Matrix4d RigidTransform::matrix() const {
  Eigen::Matrix4d M = Eigen::Matrix4d::Identity();
  M.block<3, 3>(0, 0) = R;
  M.block<3, 1>(0, 3) = t;
  return M;
}

bool RigidTransform::is_rigid(double tol) const {
  return (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() <= tol &&
         std::abs(R.determinant() - 1.0) <= tol;
}

RigidTransform look_at(const Vec3& eye, const Vec3& target, const Vec3& up) {
  Vec3 forward = target - eye;
  if (forward.norm() < 1e-12) throw std::invalid_argument("look_at: eye == target");
  forward.normalize();
  Vec3 up_ref = up;
  if (std::abs(forward.dot(up.normalized())) > 1.0 - 1e-9)
    up_ref = std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 right = forward.cross(up_ref).normalized();
  Vec3 down = forward.cross(right);  // z × x = y, which points "down" on screen
  RigidTransform T;
  T.R.col(0) = right;
  T.R.col(1) = down;
  T.R.col(2) = forward;
  T.t = eye;
  return T;
}

PointCloud transform_points(const RigidTransform& T, const PointCloud& cloud,
                            Frame target_frame) {
  PointCloud out;
  out.frame = target_frame;
  out.points.reserve(cloud.points.size());
  for (const Vec3& p : cloud.points) out.points.push_back(T.apply(p));
  return out;
}

MapExtents MapExtents::create(const Vec3& origin, double lx, double ly, double lz,
                              double resolution) {
  if (resolution <= 0) throw std::invalid_argument("MapExtents: resolution must be > 0");
  if (lx <= 0 || ly <= 0 || lz <= 0)
    throw std::invalid_argument("MapExtents: side lengths must be > 0");
  MapExtents e;
  e.origin = origin;
  e.length_x = lx;
  e.length_y = ly;
  e.length_z = lz;
  e.resolution = resolution;
  auto cells = [resolution](double len, const char* name) {
    double n = len / resolution;
    int ni = static_cast<int>(std::lround(n));
    if (ni < 1 || std::abs(n - ni) > 1e-9 * std::max(1.0, n))
      throw std::invalid_argument(std::string("MapExtents: ") + name +
                                  " is not a positive multiple of the resolution");
    return ni;
  };
  e.nx = cells(lx, "length_x");
  e.ny = cells(ly, "length_y");
  e.nz = cells(lz, "length_z");
  return e;
}

bool MapExtents::contains(const Vec3& p) const {
  Vec3 d = p - origin;
  return d.x() >= 0 && d.x() < length_x && d.y() >= 0 && d.y() < length_y &&
         d.z() >= 0 && d.z() < length_z;
}

int MapExtents::voxel_index(const Vec3& p) const {
  Vec3 d = (p - origin) / resolution;
  int ix = static_cast<int>(std::floor(d.x()));
  int iy = static_cast<int>(std::floor(d.y()));
  int iz = static_cast<int>(std::floor(d.z()));
  if (ix < 0 || ix >= nx || iy < 0 || iy >= ny || iz < 0 || iz >= nz) return kOutside;
  return ix + nx * (iy + ny * iz);
}

Vec3 MapExtents::voxel_center(int index) const {
  int ix = index % nx;
  int iy = (index / nx) % ny;
  int iz = index / (nx * ny);
  return origin + resolution * Vec3(ix + 0.5, iy + 0.5, iz + 0.5);
}

Vec3 CameraModel::to_camera(const Vec3& p_world) const {
  return pose.R.transpose() * (p_world - pose.t);
}

bool CameraModel::in_fov(const Vec3& p_world) const {
  return pyramid_index(p_world) != kOutside;
}

int CameraModel::pyramid_index(const Vec3& p_world) const {
  Vec3 pc = to_camera(p_world);
  if (pc.z() <= 0) return kOutside;
  double az = std::atan2(pc.x(), pc.z());
  double el = std::atan2(pc.y(), pc.z());
  if (az < -0.5 * fov_h || az >= 0.5 * fov_h) return kOutside;
  if (el < -0.5 * fov_v || el >= 0.5 * fov_v) return kOutside;
  int col = static_cast<int>(std::floor((az + 0.5 * fov_h) / pyramid_res));
  int row = static_cast<int>(std::floor((el + 0.5 * fov_v) / pyramid_res));
  col = std::min(col, pyramid_cols() - 1);
  row = std::min(row, pyramid_rows() - 1);
  return row * pyramid_cols() + col;
}

Vec3 CameraModel::ray_direction(int row, int col) const {
  double az = -0.5 * fov_h + (col + 0.5) * fov_h / cols;
  double el = -0.5 * fov_v + (row + 0.5) * fov_v / rows;
  return Vec3(std::tan(az), std::tan(el), 1.0).normalized();
}

void write_xyz(const std::string& path, const PointCloud& cloud) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("write_xyz: cannot open " + path);
  for (const Vec3& p : cloud.points)
    std::fprintf(f, "%.9f %.9f %.9f\n", p.x(), p.y(), p.z());
  std::fclose(f);
}

}  // namespace dynamap
