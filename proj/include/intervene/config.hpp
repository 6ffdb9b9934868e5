#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "intervene/orchestrator.hpp"

namespace intervene {

/// Resolved configuration for a command. File layout: one JSON object with
/// sections "run", "env", "learner", "dpo", "ppo", "orchestrator",
/// "ablations", "bench". Missing keys keep their defaults; unknown keys are errors.
struct RunConfig {
  ExperimentSpec spec;
  std::vector<std::uint64_t> seeds = default_seeds();
  std::string output_dir;  // empty: $INTERVENE_OUTPUT_ROOT or ./runs
  std::size_t jobs = 1;
  std::vector<std::string> bench_policies{"dpo", "random", "roundrobin", "maxvar", "ppo"};
  std::size_t bench_episodes = 171;
};

nlohmann::json to_json(const RunConfig& c);
/// Throws Error{ConfigError} naming the offending key; Error{UnknownPolicy}.
RunConfig run_config_from_json(const nlohmann::json& j);
/// Throws Error{IoError, ConfigError}.
RunConfig load_run_config(const std::filesystem::path& path);

nlohmann::json to_json(const LearnerConfig& c);
nlohmann::json to_json(const EnvironmentOptions& o);

}  // namespace intervene
