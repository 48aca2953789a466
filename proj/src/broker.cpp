#include "volfied/broker.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

namespace volfied {
namespace {

void sort_by_revenue(std::vector<ScoredAd>& scored) {
  std::sort(scored.begin(), scored.end(),
            [](const ScoredAd& a, const ScoredAd& b) {
              if (a.revenue != b.revenue) return a.revenue > b.revenue;
              return a.ad->id < b.ad->id;
            });
}

void drop_non_positive(std::vector<ScoredAd>& scored) {
  std::erase_if(scored, [](const ScoredAd& s) { return !(s.revenue > 0.0); });
}

}  // namespace

bool validate(const SelectionParams& params) {
  if (params.k < 1 || params.m < 1 || !(params.d_max > 0.0)) {
    throw std::invalid_argument("selection needs k >= 1, m >= 1, d_max > 0");
  }
  return params.k >= params.m;
}

Strategy parse_strategy(std::string_view name) {
  if (name == "volfied") return Strategy::kVolfied;
  if (name == "topk") return Strategy::kTopK;
  if (name == "random") return Strategy::kRandom;
  throw std::invalid_argument(fmt::format(
      "unknown strategy '{}' (expected volfied|topk|random)", name));
}

std::string_view strategy_name(Strategy strategy) {
  switch (strategy) {
    case Strategy::kVolfied:
      return "volfied";
    case Strategy::kTopK:
      return "topk";
    case Strategy::kRandom:
      return "random";
  }
  return "?";
}

std::vector<AdId> volfied_select(std::vector<ScoredAd> scored,
                                 const SelectionParams& params,
                                 SelectionStats* stats) {
  drop_non_positive(scored);
  sort_by_revenue(scored);
  const double spacing = 2.0 * params.d_max;
  std::vector<const Ad*> chosen;
  std::uint64_t evaluations = 0;
  for (const auto& s : scored) {
    if (chosen.size() >= static_cast<std::size_t>(params.k)) break;
    int close = 0;
    for (const Ad* b : chosen) {
      ++evaluations;
      if (distance(params.metric, s.ad->features, b->features) <= spacing &&
          ++close >= params.m) {
        break;
      }
    }
    if (close < params.m) chosen.push_back(s.ad);
  }
  if (stats) {
    stats->candidates = scored.size();
    stats->distance_evaluations = evaluations;
  }
  std::vector<AdId> ids;
  ids.reserve(chosen.size());
  for (const Ad* a : chosen) ids.push_back(a->id);
  return ids;
}

std::vector<AdId> topk_select(std::vector<ScoredAd> scored,
                              const SelectionParams& params) {
  drop_non_positive(scored);
  sort_by_revenue(scored);
  std::vector<AdId> ids;
  for (const auto& s : scored) {
    if (ids.size() >= static_cast<std::size_t>(params.k)) break;
    ids.push_back(s.ad->id);
  }
  return ids;
}

std::vector<AdId> random_select(std::vector<ScoredAd> scored,
                                const SelectionParams& params,
                                std::mt19937_64& rng) {
  drop_non_positive(scored);
  std::sort(scored.begin(), scored.end(),
            [](const ScoredAd& a, const ScoredAd& b) {
              return a.ad->id < b.ad->id;
            });
  const std::size_t take =
      std::min(scored.size(), static_cast<std::size_t>(params.k));
  std::vector<AdId> ids;
  ids.reserve(take);
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, scored.size() - 1);
    std::swap(scored[i], scored[pick(rng)]);
    ids.push_back(scored[i].ad->id);
  }
  return ids;
}

RevenueEstimator::RevenueEstimator(DistanceMetric metric, double d_max)
    : metric_(metric), d_max_(d_max) {
  if (!(d_max > 0.0)) throw std::invalid_argument("d_max must be > 0");
}

void RevenueEstimator::on_vehicle_enter(PoAId poa,
                                        const VehicleProfile& vehicle,
                                        bool detected,
                                        std::span<const Ad* const> candidates) {
  last_examined_ = 0;
  if (!detected) return;
  PoAState& state = poas_[poa];
  auto [slot, inserted] = state.present.try_emplace(vehicle.id);
  if (!inserted) {
    throw std::logic_error(fmt::format("vehicle {} already registered at PoA {}",
                                       vehicle.id.value, poa.value));
  }
  registered_at_[vehicle.id].push_back(poa);
  last_examined_ = candidates.size();

  auto& credited = slot->second;
  for (const Ad* ad : candidates) {
    if (registry_.contains(key(ad->id, vehicle.id))) continue;
    if (!is_relevant(metric_, *ad, vehicle, d_max_, poa)) continue;
    Entry& e = state.entries[ad->id];
    e.ad = ad;
    e.value = ad_value(*ad, poa);
    e.contributors.insert(
        std::upper_bound(e.contributors.begin(), e.contributors.end(),
                         vehicle.id),
        vehicle.id);
    credited.push_back(ad->id);
  }
}

void RevenueEstimator::on_vehicle_enter(PoAId poa,
                                        const VehicleProfile& vehicle,
                                        bool detected,
                                        std::span<const Ad> candidates) {
  std::vector<const Ad*> ptrs;
  ptrs.reserve(candidates.size());
  for (const Ad& a : candidates) ptrs.push_back(&a);
  on_vehicle_enter(poa, vehicle, detected, ptrs);
}

void RevenueEstimator::withdraw(PoAState& state, AdId ad, VehicleId vehicle) {
  auto it = state.entries.find(ad);
  if (it == state.entries.end()) return;
  auto& c = it->second.contributors;
  auto pos = std::lower_bound(c.begin(), c.end(), vehicle);
  if (pos != c.end() && *pos == vehicle) c.erase(pos);
  if (c.empty()) state.entries.erase(it);
}

void RevenueEstimator::on_vehicle_exit(PoAId poa, VehicleId vehicle) {
  last_examined_ = 0;
  auto ps = poas_.find(poa);
  if (ps == poas_.end()) return;
  auto v = ps->second.present.find(vehicle);
  if (v == ps->second.present.end()) return;
  last_examined_ = v->second.size();
  for (AdId ad : v->second) withdraw(ps->second, ad, vehicle);
  ps->second.present.erase(v);

  auto& where = registered_at_[vehicle];
  std::erase(where, poa);
  if (where.empty()) registered_at_.erase(vehicle);
}

void RevenueEstimator::on_broadcast(PoAId poa, std::span<const AdId> selected) {
  auto ps = poas_.find(poa);
  if (ps == poas_.end() || selected.empty()) return;
  for (const auto& [vehicle, credited] : ps->second.present) {
    for (AdId ad : selected) {
      registry_.insert(key(ad, vehicle));
      for (PoAId at : registered_at_[vehicle]) {
        PoAState& other = poas_[at];
        withdraw(other, ad, vehicle);
        std::erase(other.present[vehicle], ad);
      }
    }
  }
}

double RevenueEstimator::estimate(PoAId poa, AdId ad) const {
  auto ps = poas_.find(poa);
  if (ps == poas_.end()) return 0.0;
  auto it = ps->second.entries.find(ad);
  if (it == ps->second.entries.end()) return 0.0;
  return it->second.value * static_cast<double>(it->second.contributors.size());
}

std::vector<VehicleId> RevenueEstimator::contributors(PoAId poa,
                                                      AdId ad) const {
  auto ps = poas_.find(poa);
  if (ps == poas_.end()) return {};
  auto it = ps->second.entries.find(ad);
  if (it == ps->second.entries.end()) return {};
  return it->second.contributors;
}

std::vector<ScoredAd> RevenueEstimator::positive_estimates(PoAId poa) const {
  std::vector<ScoredAd> out;
  auto ps = poas_.find(poa);
  if (ps == poas_.end()) return out;
  out.reserve(ps->second.entries.size());
  for (const auto& [id, e] : ps->second.entries) {
    const double r = e.value * static_cast<double>(e.contributors.size());
    if (r > 0.0) out.push_back({e.ad, r});
  }
  std::sort(out.begin(), out.end(), [](const ScoredAd& a, const ScoredAd& b) {
    return a.ad->id < b.ad->id;
  });
  return out;
}

std::vector<VehicleId> RevenueEstimator::detected_vehicles(PoAId poa) const {
  std::vector<VehicleId> out;
  auto ps = poas_.find(poa);
  if (ps == poas_.end()) return out;
  for (const auto& [v, _] : ps->second.present) out.push_back(v);
  return out;
}

bool RevenueEstimator::was_broadcast(AdId ad, VehicleId vehicle) const {
  return registry_.contains(key(ad, vehicle));
}

std::vector<AdId> select_volfied(const RevenueEstimator& est, PoAId poa,
                                 const SelectionParams& params,
                                 SelectionStats* stats) {
  return volfied_select(est.positive_estimates(poa), params, stats);
}

std::vector<AdId> select_topk(const RevenueEstimator& est, PoAId poa,
                              const SelectionParams& params) {
  return topk_select(est.positive_estimates(poa), params);
}

std::vector<AdId> select_random(const RevenueEstimator& est, PoAId poa,
                                const SelectionParams& params,
                                std::mt19937_64& rng) {
  return random_select(est.positive_estimates(poa), params, rng);
}

bool is_conflict_free(std::span<const Ad> selected,
                      std::span<const VehicleProfile> vehicles,
                      const SelectionParams& params) {
  for (const auto& v : vehicles) {
    int relevant = 0;
    for (const Ad& a : selected) {
      if (distance(params.metric, a.features, v.interests) <= params.d_max &&
          ++relevant > params.m) {
        return false;
      }
    }
  }
  return true;
}

bool has_conflict_free_spacing(std::span<const Ad> ordered,
                               const SelectionParams& params) {
  const double spacing = 2.0 * params.d_max;
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    int close = 0;
    for (std::size_t j = 0; j < i; ++j) {
      if (distance(params.metric, ordered[i].features, ordered[j].features) <=
          spacing) {
        ++close;
      }
    }
    if (close >= params.m) return false;
  }
  return true;
}

}  // namespace volfied
