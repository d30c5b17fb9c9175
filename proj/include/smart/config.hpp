#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include <json.hpp>

#include "smart/anomaly.hpp"

namespace smart {

struct Config {
  int port = 8080;
  std::string data_dir;  // empty: keep everything in memory
  double grid_res_deg = 0.01;
  std::int64_t bin_width_s = 3600;
  std::uint64_t learner_seed = 1;
  double anomaly_alpha = 0.1;
  DetectParams anomaly;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string& name)>;

// Reads std::getenv.
std::optional<std::string> process_env(const std::string& name);

// Layout: {port, data_dir, grid_res_deg, bin_width_s, learner:{seed},
// anomaly:{alpha, z, min_count, warmup}}. Every key is optional; SMART_<PATH>
// environment variables (e.g. SMART_LEARNER_SEED) override the file.
// Throws Error(kInvalidConfig) naming the bad field, e.g. "grid_res_deg".
Config parse_config(const nlohmann::json& j, const EnvLookup& env = process_env);

// Throws Error(kFileNotFound) or Error(kInvalidConfig).
Config load_config(const std::string& path, const EnvLookup& env = process_env);

void validate(const Config& config);

}  // namespace smart
