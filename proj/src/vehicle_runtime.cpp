#include "volfied/vehicle_runtime.hpp"

#include <algorithm>

namespace volfied {

VehicleState::VehicleState(VehicleProfile profile,
                           std::unordered_set<AdId> displayed)
    : profile_(std::move(profile)), displayed_(std::move(displayed)) {}

std::vector<Impression> VehicleState::step_display(
    std::span<const Ad* const> received, std::optional<PoAId> current_poa,
    const DisplayParams& params) {
  std::vector<CachedAd> pool;
  pool.reserve(cache_.size() + received.size());
  for (const CachedAd& c : cache_) {
    if (displayed_.contains(c.ad->id)) continue;
    if (ad_value(*c.ad, current_poa) <= 0.0) continue;
    pool.push_back(c);
  }
  for (const Ad* ad : received) {
    if (displayed_.contains(ad->id)) continue;
    if (ad_value(*ad, current_poa) <= 0.0) continue;
    const double d = distance(params.metric, ad->features, profile_.interests);
    if (d > params.d_max) continue;
    const bool pooled = std::any_of(pool.begin(), pool.end(), [&](const auto& c) {
      return c.ad->id == ad->id;
    });
    if (!pooled) pool.push_back({ad, d});
  }
  std::sort(pool.begin(), pool.end(), [](const CachedAd& a, const CachedAd& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.ad->id < b.ad->id;
  });

  const std::size_t shown =
      std::min(pool.size(), static_cast<std::size_t>(std::max(params.m, 0)));
  std::vector<Impression> impressions;
  impressions.reserve(shown);
  for (std::size_t i = 0; i < shown; ++i) {
    const Ad& ad = *pool[i].ad;
    displayed_.insert(ad.id);
    impressions.push_back({ad.id, pool[i].distance, ad_value(ad, current_poa)});
  }
  const std::size_t kept =
      std::min(pool.size() - shown, params.cache_capacity);
  cache_.assign(pool.begin() + static_cast<std::ptrdiff_t>(shown),
                pool.begin() + static_cast<std::ptrdiff_t>(shown + kept));
  return impressions;
}

}  // namespace volfied
