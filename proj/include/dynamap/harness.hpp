#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dynamap/config.hpp"

namespace dynamap {

struct EpisodeResult {
  uint64_t seed = 0;
  bool success = false;
  bool collision = false;
  bool timed_out = false;
  double time_s = 0;         // simulated time at episode end
  double path_length = 0;    // sum of joint-space increments (rad)
  double goal_error = 0;     // final joint distance to goal (rad)
  double min_clearance = 0;  // exact-geometry minimum over the episode (m)
  int control_steps = 0;
  int map_steps = 0;
  double wall_map_ms = 0;      // mean map_step wall time; excluded from outputs
  double wall_control_ms = 0;  // mean control_step wall time; excluded
};

struct MappingMetrics {
  uint64_t seed = 0;
  int frames_scored = 0;
  double auc = 0;
  double best_f1 = 0;
  double velocity_rmse = 0;
  long total_false_positives = 0;
  int map_steps = 0;
  int max_observations = 0;  // peak per-frame filtered cloud size
  double wall_map_ms = 0;    // mean map_step wall time; excluded from outputs
};

struct SuiteResult {
  std::vector<EpisodeResult> episodes;
  double success_rate = 0;
  double collision_rate = 0;
  double timeout_rate = 0;
  double mean_time_s = 0;
  double mean_path_length = 0;
  double mean_goal_error = 0;
  double min_clearance = 0;
};

// Optional per-step dump sinks for the `run` subcommand.
struct EpisodeDumps {
  std::string diagnostics_csv;  // planner per-step record
  std::string voxels_csv;       // occupied-voxel snapshot per map step
  std::string cloud_dir;        // filtered world cloud per map step (.xyz)
};

// Closed perception-planning loop at the control rate; the map steps at its
// own slower cadence and the planner consumes the latest snapshot. Ends on
// goal tolerance, timeout, or exact-geometry collision.
EpisodeResult run_planning_episode(const ScenarioConfig& config, uint64_t seed,
                                   const EpisodeDumps* dumps = nullptr);

// Maps the scene for bench_duration seconds and scores occupancy (AUC/F1
// against visible ground-truth voxels over 50 thresholds) and per-body mean
// voxel velocity RMSE for frames past bench_warmup.
MappingMetrics run_mapping_benchmark(const ScenarioConfig& config, uint64_t seed);

// Runs the configured episodes and aggregates; when out_dir is given, writes
// episodes.csv, summary.json, and timing.json (wall-clock data is confined to
// timing.json so reruns stay byte-identical).
SuiteResult run_suite(const ScenarioConfig& config,
                      const std::optional<std::string>& out_dir);

void write_mapping_outputs(const ScenarioConfig& config, const MappingMetrics& m,
                           const std::string& out_dir);

// Aggregates in seed-sorted order so the result is independent of episode
// execution order.
SuiteResult aggregate_episodes(std::vector<EpisodeResult> episodes);

}  // namespace dynamap
