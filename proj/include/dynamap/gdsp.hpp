#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "dynamap/geometry.hpp"
#include "dynamap/robot.hpp"

namespace dynamap {

inline constexpr int kMaxCameras = 2;

struct Particle {
  Vec3 p = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  double w = 0;
  int id_v = kOutside;
  std::array<int, kMaxCameras> id_p = {kOutside, kOutside};
  bool valid = false;
  bool observable = false;  // scratch, rewritten by every update
};

struct ParticlePool {
  std::vector<Particle> slots;
  int count = 0;  // valid particles occupy [0, count)

  explicit ParticlePool(int l_max) : slots(l_max) {}
  int capacity() const { return static_cast<int>(slots.size()); }
};

struct MapParams {
  MapExtents extents;
  int l_max = 200000;
  double survival = 0.98;        // P_s
  double detection = 0.9;        // P_d
  double clutter = 0.01;         // kappa
  double birth_weight = 0.1;     // omega_b
  double sigma_obs = 0.05;       // sigma_z (m)
  Mat6 pred_noise = default_pred_noise();
  double occ_threshold = 0.2;    // eps_occ
  double occlusion_thickness = 0.2;  // eps_H (m)
  double robot_margin = 0.03;    // eps_d (m)
  double dt = 0.1;               // map step (s)
  int max_points = 5000;         // M_max, caps the per-pyramid distance lists
  double cluster_gate = 0.3;     // single-linkage threshold and match gate (m)

  static Mat6 default_pred_noise() {
    Mat6 n = Mat6::Zero();
    n.topLeftCorner<3, 3>() = 1e-4 * Mat3::Identity();
    n.bottomRightCorner<3, 3>() = 1e-2 * Mat3::Identity();
    return n;
  }
  int per_voxel_cap() const { return std::max(1, l_max / extents.voxel_count()); }
  int birth_cap() const { return std::max(1, 5 * l_max / extents.voxel_count()); }
};

struct PyramidRange {
  int count = 0;
  int first = -1;  // index of the first particle in the pool sorted by id_p
  int last = -1;   // index of the last particle (inclusive)
  double d_max = 0;
};

struct PyramidTable {
  std::vector<PyramidRange> cells;
};

struct VoxelEstimate {
  int voxel = kOutside;
  Vec3 center = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 cov_p = Mat3::Zero();
  Mat3 cov_v = Mat3::Zero();
  double edge = 0;
  double occupancy = 0;  // P_occ
};

struct ClusterTrack {
  std::vector<Vec3> prev_centroids;
  std::vector<Vec3> cur_centroids;
  std::vector<std::pair<int, int>> pairs;  // (prev cluster, current cluster)
  std::vector<Vec3> cluster_velocity;      // per current cluster
  std::vector<int> point_cluster;          // per current point
  std::vector<Vec3> point_velocity;        // per current point
};

struct UpdateResult {
  Eigen::VectorXd denominators;  // C(z_i)
  int observable_count = 0;
};

// Constant-velocity propagation with additive Gaussian noise, survival
// scaling, invalidation of particles leaving the extents, and id recompute.
// Draws 6 N(0,1) variates per valid particle in slot order.
void predict_particles(ParticlePool& pool, const MapParams& params,
                       const std::vector<CameraModel>& cams, std::mt19937_64& rng);

// Stable-sorts the pool by the camera's pyramid index (out-of-FOV last) and
// derives the per-pyramid ranges by comparing the index sequence against its
// shifted copies.
PyramidTable assign_particles_to_pyramids(ParticlePool& pool, const CameraModel& cam,
                                          int cam_idx);

// Bins observation distances per pyramid, keeping at most M_max/N_p nearest
// per cell; d_max is the largest kept distance (0 for empty cells).
PyramidTable assign_points_to_pyramids(const PointCloud& cloud, const CameraModel& cam,
                                       int max_points);

// PHD weight update against a world-frame cloud. The observable set is the
// union over cameras of particles whose camera distance is at most the own
// pyramid's d_max + eps_H; the weight update runs once over that union.
UpdateResult update_weights(ParticlePool& pool, const PointCloud& cloud,
                            const CameraModel& cam, const MapParams& params);
UpdateResult update_dual_view(ParticlePool& pool, const PointCloud& cloud,
                              const std::vector<CameraModel>& cams,
                              const MapParams& params);

// Sorts the pool by voxel and emits one estimate per voxel with P_occ >=
// eps_occ: weight sum, normalized-weight means, scatter covariances + 1e-6*I.
std::vector<VoxelEstimate> estimate_voxels(ParticlePool& pool, const MapParams& params);

// Per-voxel SIR: voxels holding more than L_max/N_v particles are replaced by
// that many survivors drawn through the cumulative weight intervals, each
// carrying weight W/cap so the per-voxel weight sum is preserved exactly.
void resample(ParticlePool& pool, const MapParams& params, std::mt19937_64& rng);

// Single-linkage Euclidean clustering on both clouds, Hungarian matching of
// centroids, finite-difference velocities for matched pairs within the gate,
// zero for the rest.
ClusterTrack cluster_velocities(const PointCloud& cloud, const PointCloud& prev_cloud,
                                double dt, double gate);

// One newborn per observation point, weight (sum_i w_b/C_i)/M_z, rejected when
// the target voxel's live+born count exceeds L_r; pool truncated to L_max by
// evicting invalid slots first, then lowest weights.
void spawn_newborn(ParticlePool& pool, const PointCloud& cloud,
                   const std::vector<Vec3>& point_velocity,
                   const Eigen::VectorXd& denominators, const MapParams& params);

class GdspMap {
 public:
  GdspMap(const MapParams& params, std::vector<CameraModel> cams, uint64_t seed);

  // Full step: cloud prep, cluster velocities (child thread), predict, update
  // (dual view when two cameras), estimate, resample, newborn. Input clouds
  // are camera-frame, one per camera.
  std::vector<VoxelEstimate> map_step(const std::vector<PointCloud>& cam_clouds,
                                      const RobotModel* robot = nullptr,
                                      const Eigen::VectorXd* q = nullptr);

  const ParticlePool& pool() const { return pool_; }
  ParticlePool& pool() { return pool_; }
  const MapParams& params() const { return params_; }
  const std::vector<CameraModel>& cameras() const { return cams_; }
  const PointCloud& last_cloud() const { return prev_cloud_; }

 private:
  MapParams params_;
  std::vector<CameraModel> cams_;
  ParticlePool pool_;
  std::mt19937_64 rng_;
  PointCloud prev_cloud_;
  bool has_prev_ = false;
};

}  // namespace dynamap
