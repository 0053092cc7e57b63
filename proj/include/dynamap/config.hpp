#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dynamap/dstorm.hpp"
#include "dynamap/gdsp.hpp"
#include "dynamap/sensor.hpp"

namespace dynamap {

struct ScenarioConfig {
  std::string name;
  uint64_t seed = 1;
  int episodes = 1;
  std::vector<uint64_t> seeds;  // explicit per-episode seeds; derived if empty

  std::string robot = "planar3";
  Eigen::VectorXd q_start, q_goal;
  double goal_tolerance = 0.05;  // rad
  double timeout = 12.0;         // s
  double map_warmup = 0.5;       // map-only settling time at episode start (s)

  MapParams map;
  double map_rate = 10.0;  // Hz

  std::vector<CameraModel> cameras;
  std::vector<double> camera_noise;  // range noise sigma per camera (m)

  Scene scene;

  PlannerParams planner;
  double control_rate = 50.0;  // Hz

  // map-bench settings
  double bench_duration = 30.0;
  double bench_warmup = 1.0;  // scoring starts here (s)

  uint64_t episode_seed(int i) const;
  RobotModel make_robot() const;
};

ScenarioConfig load_scenario(const std::string& path);

}  // namespace dynamap
