#include "dynamap/gdsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>
#include <unordered_map>

#include "dynamap/common.hpp"
#include "dynamap/hungarian.hpp"
#include "dynamap/sensor.hpp"

namespace dynamap {

namespace {

// Symmetric PSD square root, tolerant of zero/semidefinite noise matrices.
Mat6 psd_sqrt(const Mat6& m) {
  Eigen::SelfAdjointEigenSolver<Mat6> es(m);
  Vec6 ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Stable counting sort of the valid prefix; keys must lie in [0, buckets),
// with negative keys collected at the end.
template <typename KeyFn>
void counting_sort_pool(ParticlePool& pool, int buckets, KeyFn key) {
  static thread_local std::vector<Particle> scratch;
  static thread_local std::vector<int> offset;
  scratch.resize(pool.count);
  offset.assign(buckets + 2, 0);
  for (int i = 0; i < pool.count; ++i) {
    int k = key(pool.slots[i]);
    ++offset[(k < 0 ? buckets : k) + 1];
  }
  for (int b = 1; b < static_cast<int>(offset.size()); ++b) offset[b] += offset[b - 1];
  for (int i = 0; i < pool.count; ++i) {
    int k = key(pool.slots[i]);
    scratch[offset[k < 0 ? buckets : k]++] = pool.slots[i];
  }
  std::copy(scratch.begin(), scratch.end(), pool.slots.begin());
}

UpdateResult update_views(ParticlePool& pool, const PointCloud& cloud,
                          const CameraModel* cams, int n_cams,
                          const MapParams& params) {
  for (int i = 0; i < pool.count; ++i) pool.slots[i].observable = false;
  for (int c = 0; c < n_cams; ++c) {
    PyramidTable points = assign_points_to_pyramids(cloud, cams[c], params.max_points);
    assign_particles_to_pyramids(pool, cams[c], c);
    for (int i = 0; i < pool.count; ++i) {
      Particle& pt = pool.slots[i];
      int ip = pt.id_p[c];
      if (ip < 0) continue;
      if (cams[c].distance(pt.p) <=
          points.cells[ip].d_max + params.occlusion_thickness)
        pt.observable = true;
    }
  }

  std::vector<int> obs;
  obs.reserve(pool.count);
  for (int i = 0; i < pool.count; ++i)
    if (pool.slots[i].observable) obs.push_back(i);

  UpdateResult out;
  out.observable_count = static_cast<int>(obs.size());
  const int m = cloud.size();
  const int lf = static_cast<int>(obs.size());
  const double birth = m * params.birth_weight + params.clutter;
  out.denominators = Eigen::VectorXd::Constant(m, birth);
  if (m == 0) {
    for (int i : obs) pool.slots[i].w *= 1.0 - params.detection;
    return out;
  }
  if (lf == 0) return out;

  Eigen::ArrayXd px(lf), py(lf), pz(lf), w(lf);
  for (int j = 0; j < lf; ++j) {
    const Particle& pt = pool.slots[obs[j]];
    px[j] = pt.p.x();
    py[j] = pt.p.y();
    pz[j] = pt.p.z();
    w[j] = pt.w;
  }
  const double norm =
      1.0 / (std::pow(2.0 * M_PI, 1.5) * std::pow(params.sigma_obs, 3));
  const double inv2s2 = 1.0 / (2.0 * params.sigma_obs * params.sigma_obs);
  Eigen::ArrayXd g(lf), acc = Eigen::ArrayXd::Zero(lf);
  for (int i = 0; i < m; ++i) {
    const Vec3& z = cloud.points[i];
    g = norm * (-inv2s2 * ((px - z.x()).square() + (py - z.y()).square() +
                           (pz - z.z()).square()))
                   .exp();
    double c = params.detection * (g * w).sum() + birth;
    out.denominators[i] = c;
    if (c > 0) acc += g * (1.0 / c);
  }
  for (int j = 0; j < lf; ++j)
    pool.slots[obs[j]].w =
        (1.0 - params.detection + params.detection * acc[j]) * w[j];
  return out;
}

struct ClusterSet {
  std::vector<int> label;       // per point
  std::vector<Vec3> centroids;  // per cluster, in discovery order
};

// Single-linkage components under the distance gate, found by flooding a
// gate-sized grid hash (all pairs within the gate live in adjacent cells).
ClusterSet cluster_points(const PointCloud& cloud, double gate) {
  ClusterSet out;
  const int n = cloud.size();
  out.label.assign(n, -1);
  if (n == 0) return out;
  auto cell_of = [&](const Vec3& p) {
    return std::array<int64_t, 3>{static_cast<int64_t>(std::floor(p.x() / gate)),
                                  static_cast<int64_t>(std::floor(p.y() / gate)),
                                  static_cast<int64_t>(std::floor(p.z() / gate))};
  };
  auto hash_of = [](const std::array<int64_t, 3>& c) {
    uint64_t h = splitmix64(static_cast<uint64_t>(c[0]));
    h = splitmix64(h ^ static_cast<uint64_t>(c[1]));
    return splitmix64(h ^ static_cast<uint64_t>(c[2]));
  };
  std::unordered_map<uint64_t, std::vector<int>> grid;
  grid.reserve(n * 2);
  for (int i = 0; i < n; ++i) grid[hash_of(cell_of(cloud.points[i]))].push_back(i);

  const double gate2 = gate * gate;
  std::vector<int> stack;
  for (int i = 0; i < n; ++i) {
    if (out.label[i] >= 0) continue;
    int c = static_cast<int>(out.centroids.size());
    out.centroids.push_back(Vec3::Zero());
    out.label[i] = c;
    stack.assign(1, i);
    while (!stack.empty()) {
      int j = stack.back();
      stack.pop_back();
      auto base = cell_of(cloud.points[j]);
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            auto it = grid.find(hash_of({base[0] + dx, base[1] + dy, base[2] + dz}));
            if (it == grid.end()) continue;
            for (int k : it->second) {
              if (out.label[k] >= 0) continue;
              if ((cloud.points[k] - cloud.points[j]).squaredNorm() > gate2) continue;
              out.label[k] = c;
              stack.push_back(k);
            }
          }
    }
  }
  std::vector<int> counts(out.centroids.size(), 0);
  for (int i = 0; i < n; ++i) {
    out.centroids[out.label[i]] += cloud.points[i];
    ++counts[out.label[i]];
  }
  for (size_t c = 0; c < out.centroids.size(); ++c) out.centroids[c] /= counts[c];
  return out;
}

}  // namespace

void predict_particles(ParticlePool& pool, const MapParams& params,
                       const std::vector<CameraModel>& cams, std::mt19937_64& rng) {
  const Mat6 noise_sqrt = psd_sqrt(params.pred_noise);
  std::normal_distribution<double> gauss(0.0, 1.0);
  int write = 0;
  for (int i = 0; i < pool.count; ++i) {
    Particle pt = pool.slots[i];
    Vec6 u;
    for (int k = 0; k < 6; ++k) u[k] = gauss(rng);
    Vec6 zeta = noise_sqrt * u;
    pt.p += pt.v * params.dt + zeta.head<3>();
    pt.v += zeta.tail<3>();
    pt.w *= params.survival;
    if (!params.extents.contains(pt.p)) continue;
    pt.id_v = params.extents.voxel_index(pt.p);
    for (size_t c = 0; c < cams.size() && c < kMaxCameras; ++c)
      pt.id_p[c] = cams[c].pyramid_index(pt.p);
    pool.slots[write++] = pt;
  }
  pool.count = write;
}

PyramidTable assign_particles_to_pyramids(ParticlePool& pool, const CameraModel& cam,
                                          int cam_idx) {
  const int np = cam.pyramid_count();
  counting_sort_pool(pool, np,
                     [cam_idx](const Particle& pt) { return pt.id_p[cam_idx]; });
  PyramidTable table;
  table.cells.resize(np);
  // A cell starts where the sorted index sequence differs from its shift by
  // one, and ends where it differs from the shift the other way.
  for (int k = 0; k < pool.count; ++k) {
    int id = pool.slots[k].id_p[cam_idx];
    if (id < 0) break;  // out-of-FOV particles are sorted to the back
    bool starts = k == 0 || pool.slots[k - 1].id_p[cam_idx] != id;
    bool ends = k + 1 == pool.count || pool.slots[k + 1].id_p[cam_idx] != id;
    if (starts) table.cells[id].first = k;
    if (ends) table.cells[id].last = k;
    ++table.cells[id].count;
  }
  return table;
}

PyramidTable assign_points_to_pyramids(const PointCloud& cloud, const CameraModel& cam,
                                       int max_points) {
  const int np = cam.pyramid_count();
  const int cap = std::max(1, max_points / np);
  std::vector<std::vector<double>> dists(np);
  for (const Vec3& p : cloud.points) {
    int id = cam.pyramid_index(p);
    if (id >= 0) dists[id].push_back(cam.distance(p));
  }
  PyramidTable table;
  table.cells.resize(np);
  for (int k = 0; k < np; ++k) {
    auto& d = dists[k];
    if (d.empty()) continue;
    std::sort(d.begin(), d.end());
    if (static_cast<int>(d.size()) > cap) d.resize(cap);
    table.cells[k].count = static_cast<int>(d.size());
    table.cells[k].d_max = d.back();
  }
  return table;
}

UpdateResult update_weights(ParticlePool& pool, const PointCloud& cloud,
                            const CameraModel& cam, const MapParams& params) {
  return update_views(pool, cloud, &cam, 1, params);
}

UpdateResult update_dual_view(ParticlePool& pool, const PointCloud& cloud,
                              const std::vector<CameraModel>& cams,
                              const MapParams& params) {
  return update_views(pool, cloud, cams.data(),
                      static_cast<int>(std::min<size_t>(cams.size(), kMaxCameras)),
                      params);
}

std::vector<VoxelEstimate> estimate_voxels(ParticlePool& pool, const MapParams& params) {
  const int nv = params.extents.voxel_count();
  counting_sort_pool(pool, nv, [](const Particle& pt) { return pt.id_v; });
  std::vector<VoxelEstimate> out;
  int run = 0;
  while (run < pool.count) {
    const int id = pool.slots[run].id_v;
    int end = run;
    while (end < pool.count && pool.slots[end].id_v == id) ++end;
    if (id < 0) break;
    double occ = 0;
    for (int i = run; i < end; ++i) occ += pool.slots[i].w;
    if (occ >= params.occ_threshold) {
      VoxelEstimate est;
      est.voxel = id;
      est.edge = params.extents.resolution;
      est.occupancy = occ;
      for (int i = run; i < end; ++i) {
        const double wn = pool.slots[i].w / occ;
        est.center += wn * pool.slots[i].p;
        est.velocity += wn * pool.slots[i].v;
      }
      for (int i = run; i < end; ++i) {
        const double wn = pool.slots[i].w / occ;
        Vec3 dp = pool.slots[i].p - est.center;
        Vec3 dv = pool.slots[i].v - est.velocity;
        est.cov_p += wn * dp * dp.transpose();
        est.cov_v += wn * dv * dv.transpose();
      }
      est.cov_p += 1e-6 * Mat3::Identity();
      est.cov_v += 1e-6 * Mat3::Identity();
      out.push_back(est);
    }
    run = end;
  }
  return out;
}

void resample(ParticlePool& pool, const MapParams& params, std::mt19937_64& rng) {
  const int nv = params.extents.voxel_count();
  const int cap = params.per_voxel_cap();
  counting_sort_pool(pool, nv, [](const Particle& pt) { return pt.id_v; });
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  static thread_local std::vector<Particle> kept;
  kept.clear();
  kept.reserve(pool.count);
  std::vector<double> cum;
  int run = 0;
  while (run < pool.count) {
    const int id = pool.slots[run].id_v;
    int end = run;
    while (end < pool.count && pool.slots[end].id_v == id) ++end;
    const int n = end - run;
    if (n <= cap || id < 0) {
      kept.insert(kept.end(), pool.slots.begin() + run, pool.slots.begin() + end);
    } else {
      double total = 0;
      cum.resize(n);
      for (int i = 0; i < n; ++i) {
        total += pool.slots[run + i].w;
        cum[i] = total;
      }
      for (int s = 0; s < cap; ++s) {
        double u = uniform(rng) * total;
        int j = static_cast<int>(std::upper_bound(cum.begin(), cum.end(), u) -
                                 cum.begin());
        if (j >= n) j = n - 1;
        Particle survivor = pool.slots[run + j];
        survivor.w = total / cap;
        kept.push_back(survivor);
      }
    }
    run = end;
  }
  std::copy(kept.begin(), kept.end(), pool.slots.begin());
  pool.count = static_cast<int>(kept.size());
}

ClusterTrack cluster_velocities(const PointCloud& cloud, const PointCloud& prev_cloud,
                                double dt, double gate) {
  ClusterTrack out;
  ClusterSet cur = cluster_points(cloud, gate);
  ClusterSet prev = cluster_points(prev_cloud, gate);
  out.cur_centroids = cur.centroids;
  out.prev_centroids = prev.centroids;
  out.point_cluster = cur.label;
  out.cluster_velocity.assign(cur.centroids.size(), Vec3::Zero());

  const int np = static_cast<int>(prev.centroids.size());
  const int nc = static_cast<int>(cur.centroids.size());
  if (np > 0 && nc > 0 && dt > 0) {
    Eigen::MatrixXd cost(np, nc);
    for (int i = 0; i < np; ++i)
      for (int j = 0; j < nc; ++j)
        cost(i, j) = (cur.centroids[j] - prev.centroids[i]).norm();
    AssignmentResult match = hungarian(cost);
    for (int i = 0; i < np; ++i) {
      int j = match.row_to_col[i];
      if (j < 0 || cost(i, j) > gate) continue;
      out.pairs.emplace_back(i, j);
      out.cluster_velocity[j] = (cur.centroids[j] - prev.centroids[i]) / dt;
    }
  }
  out.point_velocity.resize(cloud.size());
  for (int i = 0; i < cloud.size(); ++i)
    out.point_velocity[i] = out.cluster_velocity[cur.label[i]];
  return out;
}

void spawn_newborn(ParticlePool& pool, const PointCloud& cloud,
                   const std::vector<Vec3>& point_velocity,
                   const Eigen::VectorXd& denominators, const MapParams& params) {
  const int m = cloud.size();
  if (m == 0) return;
  double mass = 0;
  for (int i = 0; i < denominators.size(); ++i)
    if (denominators[i] > 0) mass += params.birth_weight / denominators[i];
  const double w_each = mass / m;

  std::vector<int> live(params.extents.voxel_count(), 0);
  for (int i = 0; i < pool.count; ++i)
    if (pool.slots[i].id_v >= 0) ++live[pool.slots[i].id_v];

  const int birth_cap = params.birth_cap();
  std::vector<Particle> births;
  births.reserve(m);
  for (int i = 0; i < m; ++i) {
    int iv = params.extents.voxel_index(cloud.points[i]);
    if (iv < 0 || live[iv] >= birth_cap) continue;
    ++live[iv];
    Particle nb;
    nb.p = cloud.points[i];
    nb.v = i < static_cast<int>(point_velocity.size()) ? point_velocity[i]
                                                       : Vec3::Zero();
    nb.w = w_each;
    nb.id_v = iv;
    nb.valid = true;
    births.push_back(nb);
  }

  int total = pool.count + static_cast<int>(births.size());
  if (total > pool.capacity()) {
    // Evict the lowest weights (no invalid slots survive the other kernels).
    int drop = total - pool.capacity();
    std::vector<int> order(pool.count);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return pool.slots[a].w < pool.slots[b].w;
    });
    std::vector<char> evict(pool.count, 0);
    for (int k = 0; k < drop && k < pool.count; ++k) evict[order[k]] = 1;
    int write = 0;
    for (int i = 0; i < pool.count; ++i)
      if (!evict[i]) pool.slots[write++] = pool.slots[i];
    pool.count = write;
  }
  for (const Particle& nb : births) {
    if (pool.count >= pool.capacity()) break;
    pool.slots[pool.count++] = nb;
  }
}

GdspMap::GdspMap(const MapParams& params, std::vector<CameraModel> cams, uint64_t seed)
    : params_(params),
      cams_(std::move(cams)),
      pool_(params.l_max),
      rng_(derive_seed(seed, "gdsp")) {}

std::vector<VoxelEstimate> GdspMap::map_step(const std::vector<PointCloud>& cam_clouds,
                                             const RobotModel* robot,
                                             const Eigen::VectorXd* q) {
  PointCloud merged;
  merged.frame = Frame::world;
  for (size_t c = 0; c < cam_clouds.size() && c < cams_.size(); ++c) {
    PointCloud world = transform_points(cams_[c].pose, cam_clouds[c], Frame::world);
    for (const Vec3& p : world.points)
      if (params_.extents.contains(p)) merged.points.push_back(p);
  }
  PointCloud filtered =
      voxel_filter(merged, params_.extents.resolution, params_.extents.origin);
  if (robot && q)
    filtered = remove_robot_points(filtered, *robot, *q, params_.robot_margin);

  ClusterTrack track;
  std::thread cluster_thread([&] {
    track = cluster_velocities(filtered, prev_cloud_, params_.dt, params_.cluster_gate);
  });

  predict_particles(pool_, params_, cams_, rng_);
  UpdateResult update = cams_.size() >= 2
                            ? update_dual_view(pool_, filtered, cams_, params_)
                            : update_weights(pool_, filtered, cams_[0], params_);
  std::vector<VoxelEstimate> estimates = estimate_voxels(pool_, params_);
  resample(pool_, params_, rng_);

  cluster_thread.join();
  spawn_newborn(pool_, filtered, track.point_velocity, update.denominators, params_);
  prev_cloud_ = std::move(filtered);
  return estimates;
}

}  // namespace dynamap
