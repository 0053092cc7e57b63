#include "dynamap/config.hpp"

#include <yaml-cpp/yaml.h>

#include <stdexcept>

#include "dynamap/common.hpp"

namespace dynamap {

namespace {

Vec3 to_vec3(const YAML::Node& n) {
  if (!n || !n.IsSequence() || n.size() != 3)
    throw std::invalid_argument("config: expected a 3-element sequence");
  return Vec3(n[0].as<double>(), n[1].as<double>(), n[2].as<double>());
}

Eigen::VectorXd to_vector(const YAML::Node& n) {
  if (!n || !n.IsSequence())
    throw std::invalid_argument("config: expected a sequence");
  Eigen::VectorXd v(n.size());
  for (size_t i = 0; i < n.size(); ++i) v[i] = n[i].as<double>();
  return v;
}

template <typename T>
T get_or(const YAML::Node& n, const char* key, T fallback) {
  return n[key] ? n[key].as<T>() : fallback;
}

MapParams parse_map(const YAML::Node& n) {
  MapParams m;
  Vec3 origin = to_vec3(n["origin"]);
  Vec3 size = to_vec3(n["size"]);
  m.extents = MapExtents::create(origin, size.x(), size.y(), size.z(),
                                 n["resolution"].as<double>());
  m.l_max = get_or(n, "l_max", m.l_max);
  m.survival = get_or(n, "survival", m.survival);
  m.detection = get_or(n, "detection", m.detection);
  m.clutter = get_or(n, "clutter", m.clutter);
  m.birth_weight = get_or(n, "birth_weight", m.birth_weight);
  m.sigma_obs = get_or(n, "sigma_obs", m.sigma_obs);
  double np = get_or(n, "noise_position", 1e-4);
  double nv = get_or(n, "noise_velocity", 1e-2);
  m.pred_noise = Mat6::Zero();
  m.pred_noise.topLeftCorner<3, 3>() = np * Mat3::Identity();
  m.pred_noise.bottomRightCorner<3, 3>() = nv * Mat3::Identity();
  m.occ_threshold = get_or(n, "occ_threshold", m.occ_threshold);
  m.occlusion_thickness = get_or(n, "occlusion_thickness", m.occlusion_thickness);
  m.robot_margin = get_or(n, "robot_margin", m.robot_margin);
  m.max_points = get_or(n, "max_points", m.max_points);
  m.cluster_gate = get_or(n, "cluster_gate", m.cluster_gate);
  return m;
}

CameraModel parse_camera(const YAML::Node& n) {
  CameraModel cam;
  Vec3 eye = to_vec3(n["eye"]);
  Vec3 target = to_vec3(n["target"]);
  Vec3 up = n["up"] ? to_vec3(n["up"]) : Vec3::UnitZ();
  cam.pose = look_at(eye, target, up);
  if (!n["fov_deg"] || n["fov_deg"].size() != 2)
    throw std::invalid_argument("config: camera needs fov_deg: [h, v]");
  cam.fov_h = n["fov_deg"][0].as<double>() * M_PI / 180.0;
  cam.fov_v = n["fov_deg"][1].as<double>() * M_PI / 180.0;
  cam.pyramid_res = get_or(n, "pyramid_deg", 3.0) * M_PI / 180.0;
  cam.max_range = get_or(n, "range", 5.0);
  cam.rows = get_or(n, "rows", 120);
  cam.cols = get_or(n, "cols", 160);
  return cam;
}

ObstacleBody parse_body(const YAML::Node& n) {
  ObstacleBody body;
  body.name = get_or<std::string>(n, "name", "body");
  for (const auto& s : n["spheres"]) {
    SpherePrim p;
    p.offset = s["center"] ? to_vec3(s["center"]) : Vec3::Zero();
    p.radius = s["radius"].as<double>();
    body.spheres.push_back(p);
  }
  for (const auto& b : n["boxes"]) {
    BoxPrim p;
    p.offset = b["center"] ? to_vec3(b["center"]) : Vec3::Zero();
    p.half = to_vec3(b["half"]);
    body.boxes.push_back(p);
  }
  std::string motion = get_or<std::string>(n, "motion", "static");
  if (motion == "static") {
    body.motion = MotionType::fixed;
  } else if (motion == "sinusoid") {
    body.motion = MotionType::sinusoid;
  } else if (motion == "conveyor") {
    body.motion = MotionType::conveyor;
  } else {
    throw std::invalid_argument("config: unknown motion '" + motion + "'");
  }
  body.p0 = to_vec3(n["p0"]);
  if (n["amplitude"]) body.amplitude = to_vec3(n["amplitude"]);
  body.period = get_or(n, "period", 1.0);
  body.phase = get_or(n, "phase", 0.0);
  if (n["velocity"]) body.velocity0 = to_vec3(n["velocity"]);
  return body;
}

PlannerParams parse_planner(const YAML::Node& n, int dof) {
  PlannerParams p;
  p.samples = get_or(n, "samples", p.samples);
  p.horizon = get_or(n, "horizon", p.horizon);
  double dt_short = get_or(n, "dt_short", 0.02);
  int short_steps = get_or(n, "dt_short_steps", 5);
  double dt_long = get_or(n, "dt_long", 0.06);
  p.dt.resize(p.horizon);
  for (int h = 0; h < p.horizon; ++h) p.dt[h] = h < short_steps ? dt_short : dt_long;
  double sigma0 = get_or(n, "sigma0", 0.5);
  p.sigma_c0 = sigma0 * sigma0 * Eigen::MatrixXd::Identity(dof, dof);
  p.beta = get_or(n, "beta", p.beta);
  p.alpha_u = get_or(n, "alpha_u", p.alpha_u);
  p.alpha_sigma = get_or(n, "alpha_sigma", p.alpha_sigma);
  p.sigma_floor = get_or(n, "sigma_floor", p.sigma_floor);
  p.gamma = get_or(n, "gamma", p.gamma);
  p.R = get_or(n, "r_control", 1e-4) * Eigen::MatrixXd::Identity(dof, dof);
  p.w_goal = get_or(n, "w_goal", p.w_goal);
  p.w_collision = get_or(n, "w_collision", p.w_collision);
  p.w_limit = get_or(n, "w_limit", p.w_limit);
  p.w_manip = get_or(n, "w_manip", p.w_manip);
  p.confidence = get_or(n, "confidence", p.confidence);
  p.safety_margin = get_or(n, "safety_margin", p.safety_margin);
  p.softmax_alpha = get_or(n, "softmax_alpha", p.softmax_alpha);
  p.manip_threshold = get_or(n, "manip_threshold", p.manip_threshold);
  p.obstacle_cap = get_or(n, "obstacle_cap", p.obstacle_cap);
  p.control_interval = 1.0 / get_or(n, "control_rate", 50.0);
  p.limit_margin = get_or(n, "limit_margin", p.limit_margin);
  p.baseline = get_or(n, "baseline", false);
  std::string mode = get_or<std::string>(n, "collision_mode", "softmax");
  if (mode == "max") {
    p.collision_mode = PlannerParams::CollisionMode::max;
  } else if (mode == "softmax") {
    p.collision_mode = PlannerParams::CollisionMode::softmax;
  } else {
    throw std::invalid_argument("config: unknown collision_mode '" + mode + "'");
  }
  return p;
}

}  // namespace

uint64_t ScenarioConfig::episode_seed(int i) const {
  if (!seeds.empty()) {
    if (i >= static_cast<int>(seeds.size()))
      throw std::out_of_range("episode_seed: index beyond explicit seed list");
    return seeds[i];
  }
  return derive_seed(seed, "episode", static_cast<uint64_t>(i));
}

RobotModel ScenarioConfig::make_robot() const {
  if (robot == "planar3") return RobotModel::planar3();
  if (robot == "ur5") return RobotModel::ur5();
  throw std::invalid_argument("config: unknown robot '" + robot + "'");
}

ScenarioConfig load_scenario(const std::string& path) {
  YAML::Node root = YAML::LoadFile(path);
  ScenarioConfig cfg;
  cfg.name = get_or<std::string>(root, "name", "scenario");
  cfg.seed = get_or<uint64_t>(root, "seed", 1);
  cfg.episodes = get_or(root, "episodes", 1);
  if (root["seeds"])
    for (const auto& s : root["seeds"]) cfg.seeds.push_back(s.as<uint64_t>());
  cfg.robot = get_or<std::string>(root, "robot", "planar3");

  const int dof = cfg.make_robot().dof();
  cfg.q_start = root["q_start"] ? to_vector(root["q_start"])
                                : Eigen::VectorXd::Zero(dof);
  cfg.q_goal = root["q_goal"] ? to_vector(root["q_goal"])
                              : Eigen::VectorXd::Zero(dof);
  if (cfg.q_start.size() != dof || cfg.q_goal.size() != dof)
    throw std::invalid_argument("config: q_start/q_goal size does not match robot");
  cfg.goal_tolerance = get_or(root, "goal_tolerance", cfg.goal_tolerance);
  cfg.timeout = get_or(root, "timeout", cfg.timeout);
  cfg.map_warmup = get_or(root, "map_warmup", cfg.map_warmup);

  if (!root["map"]) throw std::invalid_argument("config: missing map section");
  cfg.map = parse_map(root["map"]);
  cfg.map_rate = get_or(root["map"], "rate", 10.0);
  cfg.map.dt = 1.0 / cfg.map_rate;

  if (!root["cameras"] || root["cameras"].size() < 1 || root["cameras"].size() > 2)
    throw std::invalid_argument("config: need 1 or 2 cameras");
  for (const auto& c : root["cameras"]) {
    cfg.cameras.push_back(parse_camera(c));
    cfg.camera_noise.push_back(get_or(c, "noise", 0.005));
  }

  for (const auto& b : root["scene"]) cfg.scene.bodies.push_back(parse_body(b));

  cfg.planner = parse_planner(root["planner"] ? root["planner"] : YAML::Node(), dof);
  cfg.control_rate = root["planner"] ? get_or(root["planner"], "control_rate", 50.0)
                                     : 50.0;

  if (root["benchmark"]) {
    cfg.bench_duration = get_or(root["benchmark"], "duration", cfg.bench_duration);
    cfg.bench_warmup = get_or(root["benchmark"], "warmup", cfg.bench_warmup);
  }
  return cfg;
}

}  // namespace dynamap
