#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "volfied/core_model.hpp"

namespace volfied {

struct DisplayParams {
  int m = 1;
  std::size_t cache_capacity = 0;
  double d_max = 0.15;
  DistanceMetric metric = DistanceMetric::kEuclidean;
};

struct Impression {
  AdId ad;
  double distance = 0.0;
  double value = 0.0;
};

struct CachedAd {
  const Ad* ad = nullptr;
  double distance = 0.0;
};

// On-board state of one vehicle: what it has displayed (never shrinks) and
// what it holds for later (at most C ads, ascending distance, disjoint from
// displayed). Cached Ad pointers must outlive the state.
class VehicleState {
 public:
  explicit VehicleState(VehicleProfile profile,
                        std::unordered_set<AdId> displayed = {});

  const VehicleProfile& profile() const { return profile_; }
  const std::unordered_set<AdId>& displayed() const { return displayed_; }
  const std::vector<CachedAd>& cache() const { return cache_; }
  bool has_displayed(AdId ad) const { return displayed_.contains(ad); }

  double x_m = 0.0;
  double y_m = 0.0;

  // Pools the cache with the relevant, never-displayed received ads, shows
  // the m closest (ties by id) and keeps the next C closest for later.
  // Cached ads that lost relevance here (a local ad away from its target)
  // are dropped first. Returns this step's impressions, closest first.
  std::vector<Impression> step_display(std::span<const Ad* const> received,
                                       std::optional<PoAId> current_poa,
                                       const DisplayParams& params);

 private:
  VehicleProfile profile_;
  std::unordered_set<AdId> displayed_;
  std::vector<CachedAd> cache_;
};

}  // namespace volfied
