#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mg1/job_chain.hpp"

namespace mg1 {

struct RGridSpec {
  double min = -1.0, max = -1.0;  // both unset: derived from the rank spread
  int points = 200;
  std::string spacing = "log";
};

struct ScenarioConfig {
  std::string name = "scenario";
  nlohmann::json model_json;  // inline model; null means use model_path
  std::string model_path;
  double arrival_rate = -1.0;  // < 0: the model's own rate
  std::vector<std::string> policies{"gittins"};
  double horizon = 1e5;
  double warmup = -1.0;
  std::vector<std::uint64_t> seeds{1};
  RGridSpec r_grid;
  std::string out_dir = ".";
};

// Throws std::invalid_argument on violated invariants (nonpositive horizon,
// warmup >= horizon, empty seeds/policies, r_grid min <= 0, seed 0, ...).
ScenarioConfig parse_config(const nlohmann::json& j);
ScenarioConfig load_config(const std::string& path);
nlohmann::json config_to_json(const ScenarioConfig& c);

// Subcommand bodies behind the CLI. Exit codes: 0 success, 1 verification
// failure, 2 invalid input. seed_offset shifts every configured seed.
int cmd_rank(const ScenarioConfig& cfg, bool quiet = false);
int cmd_simulate(const ScenarioConfig& cfg, std::uint64_t seed_offset = 0,
                 bool quiet = false);
int cmd_compare(const ScenarioConfig& cfg, std::uint64_t seed_offset = 0,
                bool quiet = false);
int cmd_verify(const ScenarioConfig& cfg, std::uint64_t seed_offset = 0, bool quiet = false);

}  // namespace mg1
