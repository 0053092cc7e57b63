#include "dynamap/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <json.hpp>
#include <stdexcept>
#include <unordered_set>

#include "dynamap/common.hpp"

namespace dynamap {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<PointCloud> render_all(const ScenarioConfig& config, const Scene& scene,
                                   uint64_t seed, int frame) {
  std::vector<PointCloud> clouds;
  clouds.reserve(config.cameras.size());
  for (size_t c = 0; c < config.cameras.size(); ++c)
    clouds.push_back(render_depth(scene, config.cameras[c], config.camera_noise[c],
                                  derive_seed(seed, "render",
                                              static_cast<uint64_t>(frame) * 16 + c)));
  return clouds;
}

std::FILE* open_or_throw(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open " + path);
  return f;
}

void dump_voxels(std::FILE* f, double t, const std::vector<VoxelEstimate>& est) {
  for (const VoxelEstimate& e : est) {
    std::fprintf(f, "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g", t, e.center.x(),
                 e.center.y(), e.center.z(), e.velocity.x(), e.velocity.y(),
                 e.velocity.z());
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) std::fprintf(f, ",%.9g", e.cov_p(r, c));
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) std::fprintf(f, ",%.9g", e.cov_v(r, c));
    std::fprintf(f, ",%.9g,%.9g\n", e.edge, e.occupancy);
  }
}

void dump_diag_header(std::FILE* f, int dof) {
  std::fprintf(f, "t");
  for (int i = 0; i < dof; ++i) std::fprintf(f, ",q%d", i);
  for (int i = 0; i < dof; ++i) std::fprintf(f, ",qd%d", i);
  for (int i = 0; i < dof; ++i) std::fprintf(f, ",u%d", i);
  std::fprintf(f, ",cost_min,cost_mean,cost_max,min_clearance,snapshot_age\n");
}

}  // namespace

EpisodeResult run_planning_episode(const ScenarioConfig& config, uint64_t seed,
                                   const EpisodeDumps* dumps) {
  const RobotModel robot = config.make_robot();
  GdspMap map(config.map, config.cameras, derive_seed(seed, "map"));
  Planner planner(config.planner, robot, config.q_goal, derive_seed(seed, "planner"));
  Scene scene = config.scene;
  JointState state{config.q_start, Eigen::VectorXd::Zero(robot.dof())};

  std::FILE* diag = nullptr;
  std::FILE* voxf = nullptr;
  if (dumps) {
    if (!dumps->diagnostics_csv.empty()) {
      diag = open_or_throw(dumps->diagnostics_csv);
      dump_diag_header(diag, robot.dof());
    }
    if (!dumps->voxels_csv.empty()) {
      voxf = open_or_throw(dumps->voxels_csv);
      std::fprintf(voxf,
                   "t,px,py,pz,vx,vy,vz,"
                   "sp00,sp01,sp02,sp10,sp11,sp12,sp20,sp21,sp22,"
                   "sv00,sv01,sv02,sv10,sv11,sv12,sv20,sv21,sv22,edge,occ\n");
    }
  }

  EpisodeResult res;
  res.seed = seed;
  res.min_clearance = std::numeric_limits<double>::infinity();
  const double dtau = config.planner.control_interval;
  const double map_dt = 1.0 / config.map_rate;
  const int control_per_map =
      std::max(1, static_cast<int>(std::lround(config.control_rate / config.map_rate)));

  double t = 0;
  int frame = 0;
  double map_ms = 0, control_ms = 0;
  std::vector<VoxelEstimate> snapshot;
  double snapshot_t = 0;

  auto do_map_step = [&] {
    scene.time = t;
    std::vector<PointCloud> clouds = render_all(config, scene, seed, frame);
    auto t0 = Clock::now();
    snapshot = map.map_step(clouds, &robot, &state.q);
    map_ms += ms_since(t0);
    snapshot_t = t;
    ++frame;
    ++res.map_steps;
    if (voxf) dump_voxels(voxf, t, snapshot);
    if (dumps && !dumps->cloud_dir.empty()) {
      char name[64];
      std::snprintf(name, sizeof(name), "cloud_%04d.xyz", frame - 1);
      write_xyz(dumps->cloud_dir + "/" + name, map.last_cloud());
    }
  };

  const int warm_frames =
      static_cast<int>(std::lround(config.map_warmup * config.map_rate));
  for (int i = 0; i < warm_frames; ++i) {
    do_map_step();
    t += map_dt;
  }

  for (int step = 0;; ++step) {
    if (t >= config.timeout - 1e-9) {
      res.timed_out = true;
      break;
    }
    if (step % control_per_map == 0) do_map_step();

    Eigen::VectorXd q_prev = state.q;
    auto t0 = Clock::now();
    Planner::StepResult sr = planner.control_step(state, snapshot);
    control_ms += ms_since(t0);
    ++res.control_steps;
    res.path_length += (state.q - q_prev).norm();
    if (diag) {
      std::fprintf(diag, "%.9g", t);
      for (int i = 0; i < robot.dof(); ++i) std::fprintf(diag, ",%.9g", state.q[i]);
      for (int i = 0; i < robot.dof(); ++i) std::fprintf(diag, ",%.9g", state.qd[i]);
      for (int i = 0; i < robot.dof(); ++i) std::fprintf(diag, ",%.9g", sr.u0[i]);
      std::fprintf(diag, ",%.9g,%.9g,%.9g,%.9g,%.9g\n", sr.cost_min, sr.cost_mean,
                   sr.cost_max, sr.min_clearance, t - snapshot_t);
    }
    t += dtau;

    scene.time = t;
    std::vector<Capsule> caps = world_capsules(robot, forward_kinematics(robot, state.q));
    double clearance = scene_min_distance(scene, caps);
    res.min_clearance = std::min(res.min_clearance, clearance);
    if (clearance < 0) {
      res.collision = true;
      break;
    }
    if ((state.q - config.q_goal).norm() <= config.goal_tolerance) {
      res.success = true;
      break;
    }
  }

  res.time_s = t;
  res.goal_error = (state.q - config.q_goal).norm();
  if (res.map_steps > 0) res.wall_map_ms = map_ms / res.map_steps;
  if (res.control_steps > 0) res.wall_control_ms = control_ms / res.control_steps;
  if (diag) std::fclose(diag);
  if (voxf) std::fclose(voxf);
  return res;
}

MappingMetrics run_mapping_benchmark(const ScenarioConfig& config, uint64_t seed) {
  GdspMap map(config.map, config.cameras, derive_seed(seed, "map"));
  Scene scene = config.scene;
  MappingMetrics out;
  out.seed = seed;

  const bool scene_static =
      std::all_of(scene.bodies.begin(), scene.bodies.end(),
                  [](const ObstacleBody& b) { return b.motion == MotionType::fixed; });
  std::vector<GroundTruthVoxel> gt_cache;
  if (scene_static) {
    scene.time = 0;
    gt_cache = ground_truth_voxels(scene, config.map.extents, config.cameras);
  }

  struct FrameScore {
    std::vector<std::pair<int, double>> pred;  // (voxel, P_occ)
    std::unordered_set<int> visible;
    std::unordered_set<int> occupied;
  };
  std::vector<FrameScore> scored;

  const int frames =
      static_cast<int>(std::lround(config.bench_duration * config.map_rate));
  double map_ms = 0;
  double vel_sq_sum = 0;
  long vel_count = 0;

  for (int f = 0; f < frames; ++f) {
    const double t = f / config.map_rate;
    scene.time = t;
    std::vector<PointCloud> clouds = render_all(config, scene, seed, f);
    auto t0 = Clock::now();
    std::vector<VoxelEstimate> est = map.map_step(clouds);
    map_ms += ms_since(t0);
    ++out.map_steps;
    out.max_observations = std::max(
        out.max_observations, static_cast<int>(map.last_cloud().points.size()));
    if (t < config.bench_warmup) continue;

    const std::vector<GroundTruthVoxel>& gt =
        scene_static ? gt_cache
                     : ground_truth_voxels(scene, config.map.extents, config.cameras);
    FrameScore fs;
    for (const GroundTruthVoxel& g : gt) {
      fs.occupied.insert(g.voxel);
      if (g.visible) fs.visible.insert(g.voxel);
    }
    fs.pred.reserve(est.size());
    for (const VoxelEstimate& e : est) fs.pred.emplace_back(e.voxel, e.occupancy);

    for (const ObstacleBody& body : scene.bodies) {
      if (body.motion == MotionType::fixed) continue;
      Vec3 v_true = body.velocity(t);
      Vec3 v_sum = Vec3::Zero();
      int n = 0;
      for (const VoxelEstimate& e : est) {
        if (body_signed_distance(body, t, e.center) <= config.map.extents.resolution) {
          v_sum += e.velocity;
          ++n;
        }
      }
      double err = n > 0 ? (v_sum / n - v_true).norm() : v_true.norm();
      vel_sq_sum += err * err;
      ++vel_count;
    }
    scored.push_back(std::move(fs));
    ++out.frames_scored;
  }
  out.wall_map_ms = out.map_steps > 0 ? map_ms / out.map_steps : 0;
  out.velocity_rmse =
      vel_count > 0 ? std::sqrt(vel_sq_sum / vel_count)
                    : std::numeric_limits<double>::quiet_NaN();

  double max_occ = 0;
  bool any_visible = false;
  for (const FrameScore& fs : scored) {
    for (const auto& [voxel, occ] : fs.pred) {
      max_occ = std::max(max_occ, occ);
      if (!fs.occupied.count(voxel)) ++out.total_false_positives;
    }
    any_visible = any_visible || !fs.visible.empty();
  }
  if (!any_visible || max_occ <= 0) {
    out.auc = std::numeric_limits<double>::quiet_NaN();
    out.best_f1 = std::numeric_limits<double>::quiet_NaN();
    return out;
  }

  constexpr int kThresholds = 50;
  std::vector<std::pair<double, double>> pr;  // (recall, precision)
  out.best_f1 = 0;
  for (int k = 1; k <= kThresholds; ++k) {
    const double tau = max_occ * k / kThresholds;
    long tp = 0, fp = 0, fn = 0;
    for (const FrameScore& fs : scored) {
      long hit = 0;
      for (const auto& [voxel, occ] : fs.pred) {
        if (occ < tau) continue;
        if (fs.visible.count(voxel))
          ++hit;
        else if (!fs.occupied.count(voxel))
          ++fp;  // predictions on occluded-but-occupied cells are not penalized
      }
      tp += hit;
      fn += static_cast<long>(fs.visible.size()) - hit;
    }
    double precision = (tp + fp) > 0 ? double(tp) / double(tp + fp) : 1.0;
    double recall = (tp + fn) > 0 ? double(tp) / double(tp + fn) : 0.0;
    if (precision + recall > 0)
      out.best_f1 = std::max(out.best_f1, 2 * precision * recall / (precision + recall));
    pr.emplace_back(recall, precision);
  }
  std::stable_sort(pr.begin(), pr.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  double auc = pr.front().first * pr.front().second;  // flat extension to recall 0
  for (size_t i = 1; i < pr.size(); ++i)
    auc += (pr[i].first - pr[i - 1].first) * 0.5 * (pr[i].second + pr[i - 1].second);
  out.auc = auc;
  return out;
}

SuiteResult aggregate_episodes(std::vector<EpisodeResult> episodes) {
  std::stable_sort(episodes.begin(), episodes.end(),
                   [](const EpisodeResult& a, const EpisodeResult& b) {
                     return a.seed < b.seed;
                   });
  SuiteResult out;
  out.min_clearance = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(episodes.size());
  for (const EpisodeResult& e : episodes) {
    out.success_rate += e.success ? 1 : 0;
    out.collision_rate += e.collision ? 1 : 0;
    out.timeout_rate += e.timed_out ? 1 : 0;
    out.mean_time_s += e.time_s;
    out.mean_path_length += e.path_length;
    out.mean_goal_error += e.goal_error;
    out.min_clearance = std::min(out.min_clearance, e.min_clearance);
  }
  if (n > 0) {
    out.success_rate /= n;
    out.collision_rate /= n;
    out.timeout_rate /= n;
    out.mean_time_s /= n;
    out.mean_path_length /= n;
    out.mean_goal_error /= n;
  }
  out.episodes = std::move(episodes);
  return out;
}

SuiteResult run_suite(const ScenarioConfig& config,
                      const std::optional<std::string>& out_dir) {
  std::vector<EpisodeResult> episodes;
  const int n = config.seeds.empty() ? config.episodes
                                     : static_cast<int>(config.seeds.size());
  episodes.reserve(n);
  for (int i = 0; i < n; ++i)
    episodes.push_back(run_planning_episode(config, config.episode_seed(i)));

  // Keep run order for the CSV; aggregate over a seed-sorted copy.
  SuiteResult agg = aggregate_episodes(episodes);
  agg.episodes = std::move(episodes);

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    std::FILE* csv = open_or_throw(*out_dir + "/episodes.csv");
    std::fprintf(csv,
                 "episode,seed,success,collision,timeout,time_s,path_length,"
                 "goal_error,min_clearance,control_steps,map_steps\n");
    for (size_t i = 0; i < agg.episodes.size(); ++i) {
      const EpisodeResult& e = agg.episodes[i];
      std::fprintf(csv, "%zu,%llu,%d,%d,%d,%.9g,%.9g,%.9g,%.9g,%d,%d\n", i,
                   static_cast<unsigned long long>(e.seed), e.success ? 1 : 0,
                   e.collision ? 1 : 0, e.timed_out ? 1 : 0, e.time_s, e.path_length,
                   e.goal_error, e.min_clearance, e.control_steps, e.map_steps);
    }
    std::fclose(csv);

    nlohmann::ordered_json j;
    j["name"] = config.name;
    j["robot"] = config.robot;
    j["episodes"] = agg.episodes.size();
    j["success_rate"] = agg.success_rate;
    j["collision_rate"] = agg.collision_rate;
    j["timeout_rate"] = agg.timeout_rate;
    j["mean_time_s"] = agg.mean_time_s;
    j["mean_path_length"] = agg.mean_path_length;
    j["mean_goal_error"] = agg.mean_goal_error;
    j["min_clearance"] = agg.min_clearance;
    std::FILE* jf = open_or_throw(*out_dir + "/summary.json");
    std::string dumped = j.dump(2);
    std::fwrite(dumped.data(), 1, dumped.size(), jf);
    std::fputc('\n', jf);
    std::fclose(jf);

    nlohmann::ordered_json timing;
    timing["episodes"] = nlohmann::ordered_json::array();
    double map_ms = 0, control_ms = 0;
    for (const EpisodeResult& e : agg.episodes) {
      timing["episodes"].push_back({{"seed", e.seed},
                                    {"map_step_ms", e.wall_map_ms},
                                    {"control_step_ms", e.wall_control_ms}});
      map_ms += e.wall_map_ms;
      control_ms += e.wall_control_ms;
    }
    if (!agg.episodes.empty()) {
      timing["mean_map_step_ms"] = map_ms / agg.episodes.size();
      timing["mean_control_step_ms"] = control_ms / agg.episodes.size();
    }
    std::FILE* tf = open_or_throw(*out_dir + "/timing.json");
    dumped = timing.dump(2);
    std::fwrite(dumped.data(), 1, dumped.size(), tf);
    std::fputc('\n', tf);
    std::fclose(tf);
  }
  return agg;
}

void write_mapping_outputs(const ScenarioConfig& config, const MappingMetrics& m,
                           const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  nlohmann::ordered_json j;
  j["name"] = config.name;
  j["seed"] = m.seed;
  j["frames_scored"] = m.frames_scored;
  j["auc"] = m.auc;
  j["best_f1"] = m.best_f1;
  j["velocity_rmse"] = m.velocity_rmse;
  j["total_false_positives"] = m.total_false_positives;
  j["max_observations"] = m.max_observations;
  std::FILE* jf = open_or_throw(out_dir + "/summary.json");
  std::string dumped = j.dump(2);
  std::fwrite(dumped.data(), 1, dumped.size(), jf);
  std::fputc('\n', jf);
  std::fclose(jf);

  nlohmann::ordered_json timing;
  timing["map_steps"] = m.map_steps;
  timing["mean_map_step_ms"] = m.wall_map_ms;
  std::FILE* tf = open_or_throw(out_dir + "/timing.json");
  dumped = timing.dump(2);
  std::fwrite(dumped.data(), 1, dumped.size(), tf);
  std::fputc('\n', tf);
  std::fclose(tf);
}

}  // namespace dynamap
