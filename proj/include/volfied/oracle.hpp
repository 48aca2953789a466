#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "volfied/broker.hpp"
#include "volfied/core_model.hpp"
#include "volfied/vehicle_runtime.hpp"

namespace volfied {

inline constexpr std::size_t kOracleMaxCandidatesPerPoA = 15;
inline constexpr int kOracleMaxK = 5;

// One vehicle in a single-step instance. `poa` is the (single) covering PoA
// this step; `displayed` is the display history carried into the step.
struct OracleVehicle {
  VehicleProfile profile;
  std::optional<PoAId> poa;
  std::unordered_set<AdId> displayed;
};

struct OracleInstance {
  std::vector<Ad> ads;
  std::vector<OracleVehicle> vehicles;
  SelectionParams params;
};

using BroadcastPlan = std::map<PoAId, std::vector<AdId>>;

struct DisplayOutcome {
  std::map<VehicleId, std::vector<Impression>> impressions;
  double revenue = 0.0;
};

// Vehicle behaviour for one step with no cache: each covered vehicle shows
// the m closest relevant, not-yet-displayed ads its PoA broadcast.
// Throws std::invalid_argument if a plan exceeds k or names an unknown ad.
DisplayOutcome simulate_display(const BroadcastPlan& plan,
                                const OracleInstance& instance);

struct OracleSolution {
  BroadcastPlan broadcast;
  std::map<PoAId, double> revenue_per_poa;
  double revenue = 0.0;
};

// Exact revenue-maximizing broadcast sets, one PoA at a time (vehicles
// associate with one PoA, so PoAs decouple). Enumerates every subset of at
// most k ads; revenue ties go to the lexicographically smallest id set.
// Throws std::length_error above kOracleMaxCandidatesPerPoA positive-value
// ads at a PoA or k > kOracleMaxK.
OracleSolution solve_exact(const OracleInstance& instance);

// Instance file: {"params": {"k", "m", "d_max", "metric"},
//   "ads": [{"id", "features": [...], "value", "scope": "G"|"L",
//            "target_poa"?}],
//   "vehicles": [{"id", "interests": [...], "poa": int|null,
//                 "displayed"?: [...]}]}
// Throws std::invalid_argument naming the offending field.
OracleInstance oracle_instance_from_json(const nlohmann::json& j);
nlohmann::json oracle_instance_to_json(const OracleInstance& instance);
nlohmann::json to_json(const OracleSolution& solution);

}  // namespace volfied
