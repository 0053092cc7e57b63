#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <string>

#include "dynamap/checks.hpp"
#include "dynamap/config.hpp"
#include "dynamap/harness.hpp"

namespace {

using dynamap::ScenarioConfig;

// Output directory: --out wins, then $DYNAMAP_OUT/<name>-<mode>, else none.
std::optional<std::string> resolve_out(const std::string& flag,
                                       const std::string& name,
                                       const std::string& mode) {
  if (!flag.empty()) return flag;
  if (const char* root = std::getenv("DYNAMAP_OUT"))
    return std::string(root) + "/" + name + "-" + mode;
  return std::nullopt;
}

ScenarioConfig load(const std::string& path, uint64_t seed_flag, bool has_seed) {
  ScenarioConfig config = dynamap::load_scenario(path);
  if (has_seed) config.seed = seed_flag;
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"particle occupancy map + sampling MPC benchmarks"};
  app.require_subcommand(1);

  std::string config_path, out_flag;
  uint64_t seed_flag = 0;
  bool has_seed = false;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    if (needs_config)
      sub->add_option("config", config_path, "scenario YAML")->required();
    sub->add_option("--out", out_flag, "output directory");
    sub->add_option("--seed", seed_flag, "seed override")
        ->each([&](const std::string&) { has_seed = true; });
  };

  CLI::App* map_bench = app.add_subcommand("map-bench", "mapping accuracy benchmark");
  add_common(map_bench, true);
  CLI::App* plan_bench = app.add_subcommand("plan-bench", "planning episode suite");
  add_common(plan_bench, true);
  CLI::App* run = app.add_subcommand("run", "single episode with full dumps");
  add_common(run, true);
  CLI::App* oracle = app.add_subcommand("oracle-check", "oracle equivalence suites");
  add_common(oracle, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (map_bench->parsed()) {
      ScenarioConfig config = load(config_path, seed_flag, has_seed);
      dynamap::MappingMetrics m = dynamap::run_mapping_benchmark(config, config.seed);
      if (auto dir = resolve_out(out_flag, config.name, "map"))
        dynamap::write_mapping_outputs(config, m, *dir);
      std::printf("map-bench %s: frames=%d auc=%.4f f1=%.4f vel_rmse=%.4f "
                  "fp=%ld obs=%d map_ms=%.2f\n",
                  config.name.c_str(), m.frames_scored, m.auc, m.best_f1,
                  m.velocity_rmse, m.total_false_positives, m.max_observations,
                  m.wall_map_ms);
    } else if (plan_bench->parsed()) {
      ScenarioConfig config = load(config_path, seed_flag, has_seed);
      dynamap::SuiteResult suite =
          dynamap::run_suite(config, resolve_out(out_flag, config.name, "plan"));
      std::printf("plan-bench %s: episodes=%zu success=%.2f collision=%.2f "
                  "timeout=%.2f path=%.3f clearance=%.4f\n",
                  config.name.c_str(), suite.episodes.size(), suite.success_rate,
                  suite.collision_rate, suite.timeout_rate, suite.mean_path_length,
                  suite.min_clearance);
    } else if (run->parsed()) {
      ScenarioConfig config = load(config_path, seed_flag, has_seed);
      auto dir = resolve_out(out_flag, config.name, "run");
      dynamap::EpisodeDumps dumps;
      const dynamap::EpisodeDumps* dumps_ptr = nullptr;
      if (dir) {
        std::filesystem::create_directories(*dir + "/clouds");
        dumps.diagnostics_csv = *dir + "/diagnostics.csv";
        dumps.voxels_csv = *dir + "/voxels.csv";
        dumps.cloud_dir = *dir + "/clouds";
        dumps_ptr = &dumps;
      }
      dynamap::EpisodeResult e =
          dynamap::run_planning_episode(config, config.episode_seed(0), dumps_ptr);
      std::printf("run %s: seed=%llu success=%d collision=%d timeout=%d "
                  "time=%.2fs path=%.3f goal_err=%.4f clearance=%.4f\n",
                  config.name.c_str(), static_cast<unsigned long long>(e.seed),
                  e.success ? 1 : 0, e.collision ? 1 : 0, e.timed_out ? 1 : 0,
                  e.time_s, e.path_length, e.goal_error, e.min_clearance);
    } else if (oracle->parsed()) {
      uint64_t seed = has_seed ? seed_flag : 20240817ULL;
      bool all = true;
      for (const auto& r : dynamap::checks::run_oracle_checks(seed)) {
        std::printf("[%s] %-45s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all = all && r.pass;
      }
      return all ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
