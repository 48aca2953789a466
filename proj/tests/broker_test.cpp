#include "volfied/broker.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "test_util.hpp"

namespace volfied {
namespace {

using testing::ad1d;
using testing::vehicle1d;

std::vector<ScoredAd> scored(const std::vector<Ad>& ads,
                             const std::vector<double>& r) {
  std::vector<ScoredAd> out;
  for (std::size_t i = 0; i < ads.size(); ++i) out.push_back({&ads[i], r[i]});
  return out;
}

std::set<AdId> as_set(const std::vector<AdId>& v) { return {v.begin(), v.end()}; }

// One vehicle at 0; a1 at 0.1 worth 10, a2 at 0.05 worth 1.
struct Example1 {
  std::vector<Ad> ads{ad1d(1, 0.10, 10.0), ad1d(2, 0.05, 1.0)};
  VehicleProfile v = vehicle1d(1, 0.0);
  RevenueEstimator est{DistanceMetric::kEuclidean, 0.15};
  Example1() { est.on_vehicle_enter(PoAId{0}, v, true, ads); }
};

TEST(Volfied, Example1SelectsOnlyTheValuableAd) {
  Example1 ex;
  EXPECT_EQ(ex.est.estimate(PoAId{0}, AdId{1}), 10.0);
  EXPECT_EQ(ex.est.estimate(PoAId{0}, AdId{2}), 1.0);
  auto sel = select_volfied(ex.est, PoAId{0}, {2, 1, 0.15});
  EXPECT_EQ(sel, std::vector<AdId>{AdId{1}});
}

TEST(TopK, Example1SendsBoth) {
  Example1 ex;
  auto sel = select_topk(ex.est, PoAId{0}, {2, 1, 0.15});
  EXPECT_EQ(sel, (std::vector<AdId>{AdId{1}, AdId{2}}));
  std::vector<Ad> chosen{ex.ads[0], ex.ads[1]};
  std::vector<VehicleProfile> vs{ex.v};
  EXPECT_FALSE(is_conflict_free(chosen, vs, {2, 1, 0.15}));
}

TEST(Volfied, HandTracedSpacing) {
  std::vector<Ad> ads{ad1d(1, 0.0, 1), ad1d(2, 0.2, 1), ad1d(3, 0.6, 1)};
  auto sel = volfied_select(scored(ads, {5, 4, 3}), {3, 1, 0.15});
  EXPECT_EQ(sel, (std::vector<AdId>{AdId{1}, AdId{3}}));
}

TEST(Volfied, SkipsZeroRevenueAndBreaksTiesById) {
  std::vector<Ad> ads{ad1d(5, 0.0, 1), ad1d(2, 0.9, 1), ad1d(3, 0.5, 1)};
  auto sel = volfied_select(scored(ads, {0.0, 2.0, 2.0}), {5, 1, 0.15});
  EXPECT_EQ(sel, (std::vector<AdId>{AdId{2}, AdId{3}}));
  EXPECT_TRUE(volfied_select(scored(ads, {0, 0, 0}), {5, 1, 0.15}).empty());
}

TEST(Volfied, MAllowsNeighbours) {
  std::vector<Ad> ads{ad1d(1, 0.0, 1), ad1d(2, 0.1, 1), ad1d(3, 0.2, 1)};
  auto sel = volfied_select(scored(ads, {3, 2, 1}), {3, 2, 0.15});
  EXPECT_EQ(sel, (std::vector<AdId>{AdId{1}, AdId{2}}));
}

TEST(Volfied, EqualsTopKWhenKEqualsM) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> r(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    auto ads = testing::random_ads(rng, 40, 2);
    std::vector<double> rev;
    for (std::size_t i = 0; i < ads.size(); ++i) rev.push_back(i % 5 ? r(rng) : 0.0);
    const int k = 1 + t % 4;
    SelectionParams p{k, k, 0.15};
    ASSERT_EQ(as_set(volfied_select(scored(ads, rev), p)),
              as_set(topk_select(scored(ads, rev), p)));
  }
}

TEST(Volfied, ConflictFreeAndWithinComparisonBudget) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> r(0.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    const auto metric = t % 2 ? DistanceMetric::kAngular : DistanceMetric::kEuclidean;
    auto ads = testing::random_ads(rng, 150, 3);
    std::vector<double> rev;
    for (std::size_t i = 0; i < ads.size(); ++i) rev.push_back(r(rng));
    SelectionParams p{1 + t % 10, 1 + t % 3, metric == DistanceMetric::kAngular ? 0.07 : 0.15,
                      metric};
    SelectionStats stats;
    auto sel = volfied_select(scored(ads, rev), p, &stats);
    ASSERT_LE(stats.distance_evaluations,
              stats.candidates * static_cast<std::uint64_t>(p.k));
    std::vector<Ad> chosen;
    for (AdId id : sel) chosen.push_back(ads[id.value - 1]);
    ASSERT_TRUE(has_conflict_free_spacing(chosen, p));
    std::vector<VehicleProfile> probes;
    for (std::uint32_t i = 0; i < 2000; ++i) {
      probes.push_back({VehicleId{i}, testing::uniform_point(rng, 3)});
    }
    ASSERT_TRUE(is_conflict_free(chosen, probes, p));
  }
}

TEST(TopK, Basics) {
  std::vector<Ad> ads{ad1d(1, 0, 1), ad1d(2, 0, 1), ad1d(3, 0, 1)};
  EXPECT_EQ(topk_select(scored(ads, {0.5, 0, 0.5}), {5, 1, 0.15}),
            (std::vector<AdId>{AdId{1}, AdId{3}}));
  EXPECT_TRUE(topk_select(scored(ads, {0, 0, 0}), {5, 1, 0.15}).empty());
  EXPECT_EQ(topk_select(scored(ads, {0.1, 0.3, 0.2}), {2, 1, 0.15}),
            (std::vector<AdId>{AdId{2}, AdId{3}}));
}

TEST(Random, Basics) {
  std::vector<Ad> ads{ad1d(1, 0, 1), ad1d(2, 0, 1), ad1d(3, 0, 1)};
  std::mt19937_64 rng(1);
  EXPECT_EQ(random_select(scored(ads, {0, 0.2, 0}), {5, 1, 0.15}, rng),
            std::vector<AdId>{AdId{2}});
  EXPECT_TRUE(random_select(scored(ads, {0, 0, 0}), {5, 1, 0.15}, rng).empty());

  std::mt19937_64 a(42), b(42);
  std::vector<Ad> many = [] {
    std::mt19937_64 g(0);
    return testing::random_ads(g, 50, 1);
  }();
  std::vector<double> rev(50, 1.0);
  EXPECT_EQ(random_select(scored(many, rev), {5, 1, 0.15}, a),
            random_select(scored(many, rev), {5, 1, 0.15}, b));
}

TEST(Random, RoughlyUniform) {
  std::vector<Ad> ads;
  for (std::uint32_t i = 1; i <= 10; ++i) ads.push_back(ad1d(i, 0, 1));
  std::vector<double> rev(10, 1.0);
  std::mt19937_64 rng(9);
  std::vector<int> hits(11, 0);
  for (int t = 0; t < 20000; ++t) {
    for (AdId id : random_select(scored(ads, rev), {3, 1, 0.15}, rng)) ++hits[id.value];
  }
  for (std::uint32_t i = 1; i <= 10; ++i) EXPECT_NEAR(hits[i], 6000, 300);
}

TEST(ConflictFree, EmptyAndParams) {
  std::vector<VehicleProfile> vs{vehicle1d(1, 0)};
  EXPECT_TRUE(is_conflict_free({}, vs, {}));
  EXPECT_THROW(validate(SelectionParams{0, 1, 0.15}), std::invalid_argument);
  EXPECT_THROW(validate(SelectionParams{1, 1, 0.0}), std::invalid_argument);
  EXPECT_FALSE(validate(SelectionParams{1, 2, 0.15}));
  EXPECT_TRUE(validate(SelectionParams{5, 1, 0.15}));
}

TEST(Estimator, AdditiveOverVehicles) {
  std::vector<Ad> ads{ad1d(1, 0.5, 0.4)};
  RevenueEstimator est(DistanceMetric::kEuclidean, 0.15);
  for (std::uint32_t i = 0; i < 3; ++i) {
    est.on_vehicle_enter(PoAId{0}, vehicle1d(i, 0.45 + 0.05 * i), true, ads);
  }
  EXPECT_NEAR(est.estimate(PoAId{0}, AdId{1}), 1.2, 1e-12);
  est.on_vehicle_enter(PoAId{0}, vehicle1d(9, 0.5), false, ads);
  EXPECT_NEAR(est.estimate(PoAId{0}, AdId{1}), 1.2, 1e-12);
  EXPECT_THROW(est.on_vehicle_enter(PoAId{0}, vehicle1d(0, 0.5), true, ads),
               std::logic_error);
}

TEST(Estimator, ExitRestoresState) {
  std::vector<Ad> ads{ad1d(1, 0.5, 0.4), ad1d(2, 0.6, 0.3)};
  RevenueEstimator est(DistanceMetric::kEuclidean, 0.15);
  est.on_vehicle_enter(PoAId{0}, vehicle1d(1, 0.5), true, ads);
  const auto before = est.contributors(PoAId{0}, AdId{1});
  const double r_before = est.estimate(PoAId{0}, AdId{1});
  est.on_vehicle_enter(PoAId{0}, vehicle1d(2, 0.55), true, ads);
  EXPECT_NEAR(est.estimate(PoAId{0}, AdId{1}), 0.8, 1e-12);
  est.on_vehicle_exit(PoAId{0}, VehicleId{2});
  EXPECT_EQ(est.contributors(PoAId{0}, AdId{1}), before);
  EXPECT_NEAR(est.estimate(PoAId{0}, AdId{1}), r_before, 1e-9);
  est.on_vehicle_exit(PoAId{0}, VehicleId{77});
  EXPECT_NEAR(est.estimate(PoAId{0}, AdId{1}), r_before, 1e-9);
}

TEST(Estimator, BroadcastServesDetectedOnly) {
  std::vector<Ad> ads{ad1d(1, 0.5, 0.4)};
  RevenueEstimator est(DistanceMetric::kEuclidean, 0.15);
  est.on_vehicle_enter(PoAId{0}, vehicle1d(1, 0.5), true, ads);
  est.on_vehicle_enter(PoAId{0}, vehicle1d(2, 0.5), true, ads);
  est.on_vehicle_enter(PoAId{0}, vehicle1d(3, 0.5), false, ads);
  EXPECT_NEAR(est.estimate(PoAId{0}, AdId{1}), 0.8, 1e-12);
  std::vector<AdId> none;
  est.on_broadcast(PoAId{0}, none);
  EXPECT_EQ(est.registry_size(), 0u);
  std::vector<AdId> sel{AdId{1}};
  est.on_broadcast(PoAId{0}, sel);
  EXPECT_EQ(est.estimate(PoAId{0}, AdId{1}), 0.0);
  EXPECT_EQ(est.registry_size(), 2u);
  EXPECT_TRUE(est.was_broadcast(AdId{1}, VehicleId{1}));
  EXPECT_FALSE(est.was_broadcast(AdId{1}, VehicleId{3}));

  // Served vehicles do not credit the ad again anywhere.
  est.on_vehicle_exit(PoAId{0}, VehicleId{1});
  est.on_vehicle_enter(PoAId{4}, vehicle1d(1, 0.5), true, ads);
  EXPECT_EQ(est.estimate(PoAId{4}, AdId{1}), 0.0);
  est.on_vehicle_enter(PoAId{4}, vehicle1d(8, 0.5), true, ads);
  EXPECT_NEAR(est.estimate(PoAId{4}, AdId{1}), 0.4, 1e-12);
}

TEST(Estimator, LocalAdsCountOnlyAtTarget) {
  std::vector<Ad> ads{ad1d(1, 0.5, 0.4, AdScope::local(PoAId{2}))};
  RevenueEstimator est(DistanceMetric::kEuclidean, 0.15);
  est.on_vehicle_enter(PoAId{1}, vehicle1d(1, 0.5), true, ads);
  est.on_vehicle_enter(PoAId{2}, vehicle1d(2, 0.5), true, ads);
  EXPECT_EQ(est.estimate(PoAId{1}, AdId{1}), 0.0);
  EXPECT_NEAR(est.estimate(PoAId{2}, AdId{1}), 0.4, 1e-12);
}

// Random event sequences checked against estimates recomputed from the
// definition after every event.
TEST(Estimator, MatchesRecomputation) {
  std::mt19937_64 rng(2024);
  const int kPoAs = 3;
  auto ads = testing::random_ads(rng, 60, 2);
  for (std::size_t i = 0; i < ads.size(); i += 4) {
    ads[i].scope = AdScope::local(PoAId{static_cast<std::uint32_t>(i % kPoAs)});
  }
  std::vector<VehicleProfile> vehicles;
  for (std::uint32_t i = 0; i < 25; ++i) {
    vehicles.push_back({VehicleId{i}, testing::uniform_point(rng, 2)});
  }
  const double d_max = 0.3;
  RevenueEstimator est(DistanceMetric::kEuclidean, d_max);

  struct Where {
    int poa = -1;
    bool detected = false;
  };
  std::vector<Where> where(vehicles.size());
  std::set<std::pair<std::uint32_t, std::uint32_t>> served;
  std::uniform_int_distribution<int> pick_v(0, 24), pick_poa(-1, kPoAs - 1),
      coin(0, 3);

  auto check = [&]() {
    for (int u = 0; u < kPoAs; ++u) {
      for (const Ad& a : ads) {
        double want = 0.0;
        for (std::size_t v = 0; v < vehicles.size(); ++v) {
          if (where[v].poa != u || !where[v].detected) continue;
          if (served.contains({a.id.value, vehicles[v].id.value})) continue;
          if (distance(DistanceMetric::kEuclidean, a.features,
                       vehicles[v].interests) > d_max) {
            continue;
          }
          want += ad_value(a, PoAId{static_cast<std::uint32_t>(u)});
        }
        ASSERT_NEAR(est.estimate(PoAId{static_cast<std::uint32_t>(u)}, a.id),
                    want, 1e-9);
      }
    }
  };

  for (int step = 0; step < 400; ++step) {
    if (coin(rng) == 0) {
      const int u = step % kPoAs;
      const PoAId poa{static_cast<std::uint32_t>(u)};
      auto sel = select_volfied(est, poa, {3, 1, d_max});
      est.on_broadcast(poa, sel);
      for (AdId a : sel) {
        for (std::size_t v = 0; v < vehicles.size(); ++v) {
          if (where[v].poa == u && where[v].detected) {
            served.insert({a.value, vehicles[v].id.value});
          }
        }
      }
    } else {
      const int v = pick_v(rng);
      const int to = pick_poa(rng);
      if (where[v].poa == to) continue;
      if (where[v].poa >= 0) {
        est.on_vehicle_exit(PoAId{static_cast<std::uint32_t>(where[v].poa)},
                            vehicles[v].id);
      }
      where[v] = {to, false};
      if (to >= 0) {
        where[v].detected = coin(rng) != 0;
        est.on_vehicle_enter(PoAId{static_cast<std::uint32_t>(to)}, vehicles[v],
                             where[v].detected, ads);
      }
    }
    check();
    if (HasFatalFailure()) return;
  }
  EXPECT_GT(served.size(), 0u);
}

}  // namespace
}  // namespace volfied
