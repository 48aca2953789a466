#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "volfied/sim_engine.hpp"

namespace volfied::cli {

// JSON mirror of SimConfig. In strict mode every field must be present and
// a missing one raises std::invalid_argument naming it; otherwise absent
// fields keep `base`'s values. Unknown fields are rejected either way.
SimConfig config_from_json(const nlohmann::json& j, bool strict,
                           const SimConfig& base = {});
nlohmann::json config_to_json(const SimConfig& config);
std::vector<std::string> config_field_names();

struct SweepSpec {
  std::string param;  // canonical config field name
  std::vector<double> values;
};

// "PARAM=V1,V2,..." where PARAM is one of k, m, num_ads (or A), epsilon,
// d_max, cache_capacity (or C), detection_accuracy (or p). Values are
// checked against the parameter's domain.
SweepSpec parse_sweep(std::string_view text);
void apply_sweep_value(SimConfig& config, std::string_view param, double value);

struct RunSpec {
  SimConfig config;
  std::filesystem::path out_dir;
  std::vector<Strategy> strategies;
  std::vector<std::uint64_t> seeds;
  std::optional<SweepSpec> sweep;
  // Scenario inputs; generated from the seed when absent.
  std::optional<std::filesystem::path> ads_path;
  std::optional<std::filesystem::path> poas_path;
  std::optional<std::filesystem::path> trace_path;
  std::optional<std::filesystem::path> profiles_path;
};

struct RunReport {
  std::size_t completed = 0;
  std::vector<std::string> failures;
};

// Runs every (sweep value, seed, strategy) combination on a worker pool
// capped by VOLFIED_THREADS, writing one metrics CSV per combination and
// summary.csv. Files are written atomically.
RunReport cmd_run(const RunSpec& spec);

// Entry point shared by the executable and the tests. `args` excludes the
// program name. Returns the process exit status.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

}  // namespace volfied::cli
