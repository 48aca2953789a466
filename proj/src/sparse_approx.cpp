#include "volfied/sparse_approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

namespace volfied {
namespace {

void check_epsilon(double epsilon) {
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("epsilon must be > 0");
  }
}

// Indices of `ads` ordered by value descending, then id ascending.
std::vector<std::uint32_t> value_order(std::span<const Ad> ads,
                                       std::span<const std::uint32_t> subset,
                                       const AdValueFn& value_of) {
  std::vector<std::uint32_t> order(subset.begin(), subset.end());
  std::vector<double> value(ads.size(), 0.0);
  for (auto i : order) value[i] = value_of(ads[i]);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (value[a] != value[b]) return value[a] > value[b];
    return ads[a].id < ads[b].id;
  });
  return order;
}

// Shared layering loop. `for_each_close(i, fn)` calls fn(j, d) for every j
// that may lie within 2*epsilon of i; the loop re-checks the bound.
template <typename ForEachClose>
SparseAdSet build_layers(std::span<const Ad> ads,
                         std::span<const std::uint32_t> subset,
                         const SparseApproxParams& params,
                         const AdValueFn& value_of,
                         ForEachClose&& for_each_close) {
  check_epsilon(params.epsilon);
  if (params.m < 1) throw std::invalid_argument("m must be >= 1");

  const double reach = 2.0 * params.epsilon;
  const auto order = value_order(ads, subset, value_of);

  // 0 = not in play, 1 = residual, 2 = kept.
  std::vector<char> state(ads.size(), 0);
  for (auto i : order) state[i] = 1;
  std::vector<char> alive(ads.size(), 0);
  std::unordered_map<std::uint32_t, Representative> first_remover;

  SparseAdSet out;
  out.params = params;
  for (int layer = 0; layer < params.m; ++layer) {
    bool any = false;
    for (auto i : order) {
      if (state[i] == 1) {
        alive[i] = 1;
        any = true;
      }
    }
    if (!any) break;
    for (auto i : order) {
      if (!alive[i]) continue;
      alive[i] = 0;
      state[i] = 2;
      out.ads.push_back(ads[i]);
      out.layer.push_back(layer);
      for_each_close(i, [&](std::uint32_t j, double d) {
        if (!alive[j] || d > reach) return;
        alive[j] = 0;
        first_remover.try_emplace(j, Representative{ads[i].id, d});
      });
    }
  }
  for (auto i : order) {
    if (state[i] == 1) out.mapping.emplace(ads[i].id, first_remover.at(i));
  }
  return out;
}

}  // namespace

bool SparseAdSet::contains(AdId id) const {
  return std::any_of(ads.begin(), ads.end(),
                     [&](const Ad& a) { return a.id == id; });
}

SparseAdSet epsilon_set(std::span<const Ad> ads, double epsilon,
                        DistanceMetric metric, const AdValueFn& value_of) {
  return m_sparse_set(ads, epsilon, 1, metric, value_of);
}

SparseAdSet m_sparse_set(std::span<const Ad> ads, double epsilon, int m,
                         DistanceMetric metric, const AdValueFn& value_of) {
  std::vector<std::uint32_t> all(ads.size());
  std::iota(all.begin(), all.end(), 0u);
  const SparseApproxParams params{epsilon, m, metric};
  // Literal scan: every remaining ad is tested against each kept ad.
  return build_layers(ads, all, params, value_of, [&](std::uint32_t i,
                                                      auto&& fn) {
    for (std::uint32_t j = 0; j < ads.size(); ++j) {
      if (j != i) fn(j, distance(metric, ads[i].features, ads[j].features));
    }
  });
}

SparseAdSet m_sparse_set(const NeighborGraph& graph,
                         std::span<const Ad> catalog,
                         std::span<const std::uint32_t> subset,
                         const SparseApproxParams& params,
                         const AdValueFn& value_of) {
  if (graph.size() != catalog.size()) {
    throw std::invalid_argument("neighbour graph does not match catalog");
  }
  return build_layers(catalog, subset, params, value_of,
                      [&](std::uint32_t i, auto&& fn) {
                        for (const auto& e : graph.neighbors(i)) {
                          fn(e.index, e.distance);
                        }
                      });
}

std::size_t check_ball_bound(const SparseAdSet& set,
                             std::span<const FeatureVector> probes,
                             double radius) {
  std::size_t worst = 0;
  for (const auto& probe : probes) {
    std::size_t count = 0;
    for (const Ad& ad : set.ads) {
      if (distance(set.params.metric, ad.features, probe) <= radius) ++count;
    }
    worst = std::max(worst, count);
  }
  return worst;
}

std::uint64_t update_cost_bound(const SparseApproxParams& params, double d_max,
                                int n, std::optional<std::size_t> set_size) {
  check_epsilon(params.epsilon);
  if (!(d_max > 0.0) || n < 1 || params.m < 1) {
    throw std::invalid_argument("d_max, n and m must be positive");
  }
  const long double base =
      static_cast<long double>(params.m) * d_max / params.epsilon;
  const long double raw = std::pow(base, static_cast<long double>(n));
  // Absorb representation error: 0.15 / 0.0375 is 4.000000000000001.
  const long double bound = std::ceil(raw * (1.0L - 1e-9L));
  std::uint64_t out = bound >= 1.8e19L ? std::numeric_limits<std::uint64_t>::max()
                                       : static_cast<std::uint64_t>(bound);
  if (set_size) out = std::min<std::uint64_t>(out, *set_size);
  return out;
}

bool verify_analogue_bound(std::span<const Ad> original,
                           const SparseAdSet& sparse,
                           std::span<const AdId> selected,
                           std::span<const VehicleProfile> vehicles,
                           double d_max, const AdValueFn& value_of,
                           std::optional<AnalogueSlack> slack) {
  if (sparse.ads.size() > kAnalogueEnumerationLimit) {
    throw std::length_error(fmt::format(
        "analogue search limited to {} sparse ads, got {}",
        kAnalogueEnumerationLimit, sparse.ads.size()));
  }
  const double delta = slack ? slack->radius : sparse.params.epsilon;
  const auto metric = sparse.params.metric;
  const int m = sparse.params.m;

  std::vector<const Ad*> chosen;
  for (AdId id : selected) {
    auto it = std::find_if(original.begin(), original.end(),
                           [&](const Ad& a) { return a.id == id; });
    if (it == original.end()) {
      throw std::invalid_argument(
          fmt::format("ad {} is not in the original set", id.value));
    }
    chosen.push_back(&*it);
  }
  if (chosen.empty()) return true;

  // Extended conflict freeness of the input, and its conservative revenue.
  double conservative = 0.0;
  for (const auto& v : vehicles) {
    int near = 0;
    for (const Ad* a : chosen) {
      const double d = distance(metric, a->features, v.interests);
      if (d <= d_max + delta) ++near;
      if (d <= d_max - delta) conservative += value_of(*a);
    }
    if (near > m) {
      throw std::invalid_argument(
          "selected set is not extended-conflict-free for the vehicles");
    }
  }

  // Candidate images for each selected ad.
  std::vector<std::vector<std::size_t>> options(chosen.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    for (std::size_t j = 0; j < sparse.ads.size(); ++j) {
      const Ad& b = sparse.ads[j];
      if (distance(metric, chosen[i]->features, b.features) <= delta &&
          value_of(b) >= value_of(*chosen[i])) {
        options[i].push_back(j);
      }
    }
    if (options[i].empty()) return false;
  }

  std::vector<std::size_t> image(chosen.size());
  std::vector<char> used(sparse.ads.size(), 0);
  auto image_ok = [&]() {
    double revenue = 0.0;
    for (const auto& v : vehicles) {
      int relevant = 0;
      for (auto j : image) {
        const Ad& b = sparse.ads[j];
        if (distance(metric, b.features, v.interests) <= d_max) {
          ++relevant;
          revenue += value_of(b);
        }
      }
      if (relevant > m) return false;
    }
    return revenue >= conservative - 1e-12;
  };
  auto search = [&](auto&& self, std::size_t i) -> bool {
    if (i == chosen.size()) return image_ok();
    for (auto j : options[i]) {
      if (used[j]) continue;
      used[j] = 1;
      image[i] = j;
      if (self(self, i + 1)) return true;
      used[j] = 0;
    }
    return false;
  };
  return search(search, 0);
}

NeighborGraph::NeighborGraph(std::span<const Ad> catalog, double radius,
                             DistanceMetric metric)
    : adj_(catalog.size()) {
  const auto n = static_cast<std::uint32_t>(catalog.size());
  auto link = [&](std::uint32_t i, std::uint32_t j) {
    const double d = distance(metric, catalog[i].features, catalog[j].features);
    if (d <= radius) {
      adj_[i].push_back({j, d});
      adj_[j].push_back({i, d});
    }
  };
  if (metric == DistanceMetric::kEuclidean) {
    std::vector<std::uint32_t> by_x(n);
    std::iota(by_x.begin(), by_x.end(), 0u);
    std::sort(by_x.begin(), by_x.end(), [&](auto a, auto b) {
      return catalog[a].features[0] < catalog[b].features[0];
    });
    const double window = radius * (1.0 + 1e-12) + 1e-15;
    for (std::uint32_t p = 0; p < n; ++p) {
      const double x = catalog[by_x[p]].features[0];
      for (std::uint32_t q = p + 1; q < n; ++q) {
        if (catalog[by_x[q]].features[0] - x > window) break;
        link(by_x[p], by_x[q]);
      }
    }
  } else {
    for (std::uint32_t i = 0; i < n; ++i) {
      for (std::uint32_t j = i + 1; j < n; ++j) link(i, j);
    }
  }
}

SparseCatalog::SparseCatalog(std::span<const Ad> catalog,
                             std::span<const PoA> poas,
                             const SparseApproxParams& params)
    : params_(params) {
  check_epsilon(params.epsilon);
  const NeighborGraph graph(catalog, 2.0 * params.epsilon, params.metric);

  std::vector<std::uint32_t> global;
  std::map<PoAId, std::vector<std::uint32_t>> local;
  for (std::uint32_t i = 0; i < catalog.size(); ++i) {
    if (catalog[i].scope.is_global()) {
      global.push_back(i);
    } else {
      local[*catalog[i].scope.target].push_back(i);
    }
  }

  std::shared_ptr<const SparseAdSet> global_only;
  for (const PoA& poa : poas) {
    const auto value_of = [id = poa.id](const Ad& a) { return ad_value(a, id); };
    auto it = local.find(poa.id);
    if (it == local.end()) {
      if (!global_only) {
        global_only = std::make_shared<const SparseAdSet>(
            m_sparse_set(graph, catalog, global, params, value_of));
      }
      sets_[poa.id] = global_only;
      continue;
    }
    std::vector<std::uint32_t> subset = global;
    subset.insert(subset.end(), it->second.begin(), it->second.end());
    sets_[poa.id] = std::make_shared<const SparseAdSet>(
        m_sparse_set(graph, catalog, subset, params, value_of));
  }
}

const SparseAdSet& SparseCatalog::for_poa(PoAId poa) const {
  auto it = sets_.find(poa);
  if (it == sets_.end()) {
    throw std::out_of_range(fmt::format("no sparse set for PoA {}", poa.value));
  }
  return *it->second;
}

}  // namespace volfied
