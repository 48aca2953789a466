#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "volfied/core_model.hpp"

namespace volfied {

// K (broadcast budget), M (display budget), relevance threshold and metric.
struct SelectionParams {
  int k = 5;
  int m = 1;
  double d_max = 0.15;
  DistanceMetric metric = DistanceMetric::kEuclidean;
};

// Throws std::invalid_argument unless k, m >= 1 and d_max > 0. Returns false
// (without throwing) for k < m, which is legal but unusual.
bool validate(const SelectionParams& params);

enum class Strategy { kVolfied, kTopK, kRandom };

// "volfied" | "topk" | "random"
Strategy parse_strategy(std::string_view name);
std::string_view strategy_name(Strategy strategy);

struct ScoredAd {
  const Ad* ad = nullptr;
  double revenue = 0.0;
};

struct SelectionStats {
  std::size_t candidates = 0;
  std::uint64_t distance_evaluations = 0;
};

// Conflict-free greedy selection. Scans candidates by descending revenue
// (ties: ascending id), skipping zero-revenue ads, and admits an ad when
// fewer than m already-admitted ads lie within 2*d_max of it. Stops at k.
std::vector<AdId> volfied_select(std::vector<ScoredAd> scored,
                                 const SelectionParams& params,
                                 SelectionStats* stats = nullptr);

// The k highest-revenue ads with revenue > 0, ties by ascending id.
std::vector<AdId> topk_select(std::vector<ScoredAd> scored,
                              const SelectionParams& params);

// min(k, count) ads sampled uniformly without replacement from those with
// revenue > 0.
std::vector<AdId> random_select(std::vector<ScoredAd> scored,
                                const SelectionParams& params,
                                std::mt19937_64& rng);

// Per-PoA revenue estimates R(a,u) with explicit contributor sets plus the
// broadcast registry of (ad, vehicle) pairs.
//
// R(a,u) = r(a,u) * |{detected v under u : v relevant to a, (a,v) not in
// registry}|. Candidate Ad pointers handed to on_vehicle_enter must outlive
// the estimator.
class RevenueEstimator {
 public:
  RevenueEstimator(DistanceMetric metric, double d_max);

  // Credits every relevant, not-yet-served candidate when detected; an
  // undetected vehicle is invisible to the broker. Throws std::logic_error if
  // the vehicle is already registered under `poa`.
  void on_vehicle_enter(PoAId poa, const VehicleProfile& vehicle,
                        bool detected, std::span<const Ad* const> candidates);
  void on_vehicle_enter(PoAId poa, const VehicleProfile& vehicle,
                        bool detected, std::span<const Ad> candidates);

  // Withdraws the vehicle's contributions. No-op if it was never detected.
  void on_vehicle_exit(PoAId poa, VehicleId vehicle);

  // Registers (a, v) for every selected ad and every detected vehicle under
  // `poa`, withdrawing those vehicles' contributions to a.
  void on_broadcast(PoAId poa, std::span<const AdId> selected);

  double estimate(PoAId poa, AdId ad) const;
  std::vector<VehicleId> contributors(PoAId poa, AdId ad) const;
  // Ads with R > 0 at `poa`, ordered by ascending id.
  std::vector<ScoredAd> positive_estimates(PoAId poa) const;
  std::vector<VehicleId> detected_vehicles(PoAId poa) const;

  bool was_broadcast(AdId ad, VehicleId vehicle) const;
  std::size_t registry_size() const { return registry_.size(); }

  // Candidates handed to the most recent on_vehicle_enter, or contributions
  // withdrawn by the most recent on_vehicle_exit.
  std::size_t last_event_ads_examined() const { return last_examined_; }

 private:
  struct Entry {
    const Ad* ad = nullptr;
    double value = 0.0;
    std::vector<VehicleId> contributors;  // ascending
  };
  struct PoAState {
    std::unordered_map<AdId, Entry> entries;
    // Detected vehicles present, with the ads each one contributes to.
    std::map<VehicleId, std::vector<AdId>> present;
  };

  static std::uint64_t key(AdId ad, VehicleId vehicle) {
    return (static_cast<std::uint64_t>(ad.value) << 32) | vehicle.value;
  }
  void withdraw(PoAState& state, AdId ad, VehicleId vehicle);

  DistanceMetric metric_;
  double d_max_;
  std::unordered_map<PoAId, PoAState> poas_;
  std::unordered_map<VehicleId, std::vector<PoAId>> registered_at_;
  std::unordered_set<std::uint64_t> registry_;
  std::size_t last_examined_ = 0;
};

std::vector<AdId> select_volfied(const RevenueEstimator& est, PoAId poa,
                                 const SelectionParams& params,
                                 SelectionStats* stats = nullptr);
std::vector<AdId> select_topk(const RevenueEstimator& est, PoAId poa,
                              const SelectionParams& params);
std::vector<AdId> select_random(const RevenueEstimator& est, PoAId poa,
                                const SelectionParams& params,
                                std::mt19937_64& rng);

// True iff every vehicle finds at most m of `selected` within d_max.
bool is_conflict_free(std::span<const Ad> selected,
                      std::span<const VehicleProfile> vehicles,
                      const SelectionParams& params);

// Structural certificate: in the given order, every ad has fewer than m
// predecessors within 2*d_max. Implies conflict freeness for any vehicle.
bool has_conflict_free_spacing(std::span<const Ad> ordered,
                               const SelectionParams& params);

}  // namespace volfied
