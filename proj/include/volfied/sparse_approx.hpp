#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "volfied/core_model.hpp"

namespace volfied {

struct SparseApproxParams {
  double epsilon = 0.025;
  int m = 1;
  DistanceMetric metric = DistanceMetric::kEuclidean;
};

// Per-PoA value accessor used to order ads (r(a,u) for a fixed u).
using AdValueFn = std::function<double(const Ad&)>;

struct Representative {
  AdId ad;
  double distance = 0.0;
};

// Union of `m` layers, each a sparse set (pairwise distance > 2*epsilon).
// `ads` is in construction order: layer by layer, value-descending inside a
// layer. `layer[i]` is the 0-based layer of `ads[i]`. Every input ad that
// did not survive maps to the ad that removed it in the first layer.
struct SparseAdSet {
  std::vector<Ad> ads;
  std::vector<int> layer;
  SparseApproxParams params;
  std::map<AdId, Representative> mapping;

  bool contains(AdId id) const;
};

// Greedy sparse approximation: repeatedly keep the highest-value remaining
// ad (ties by ascending id) and drop every remaining ad within 2*epsilon of
// it. Throws std::invalid_argument if epsilon <= 0.
SparseAdSet epsilon_set(std::span<const Ad> ads, double epsilon,
                        DistanceMetric metric, const AdValueFn& value_of);

// `m` rounds of epsilon_set on the residual, unioned. Throws
// std::invalid_argument if m < 1 or epsilon <= 0.
SparseAdSet m_sparse_set(std::span<const Ad> ads, double epsilon, int m,
                         DistanceMetric metric, const AdValueFn& value_of);

// Max number of set members inside the closed ball of `radius` around any
// probe. 0 for an empty set or no probes.
std::size_t check_ball_bound(const SparseAdSet& set,
                             std::span<const FeatureVector> probes,
                             double radius);

// min(ceil((m * d_max / epsilon)^n), set_size): the most sparse-set ads one
// vehicle can find relevant, i.e. the work of one estimator update.
std::uint64_t update_cost_bound(const SparseApproxParams& params, double d_max,
                                int n,
                                std::optional<std::size_t> set_size = {});

// Slack used by the analogue check. With the default (slack == epsilon) this
// is the textbook statement: analogue ads lie within epsilon, the extended
// threshold is d_max + epsilon and the conservative revenue counts only
// vehicles within d_max - epsilon. Note the greedy construction only
// guarantees representatives within 2*epsilon, so with slack == epsilon a
// removed ad whose representative sits in (epsilon, 2*epsilon] can have no
// analogue at all; slack == 2*epsilon matches the construction.
struct AnalogueSlack {
  double radius = 0.0;
};

inline constexpr std::size_t kAnalogueEnumerationLimit = 15;

// Exhaustively searches injective maps from `selected` into `sparse` (each
// image within the slack radius and of no lower value) for one whose image
// is conflict free for `vehicles` and whose revenue is at least the
// conservative revenue of `selected`.
//
// Throws std::length_error when |sparse| exceeds kAnalogueEnumerationLimit,
// std::invalid_argument when `selected` is not a subset of `original` or is
// not extended-conflict-free for `vehicles`.
bool verify_analogue_bound(std::span<const Ad> original,
                           const SparseAdSet& sparse,
                           std::span<const AdId> selected,
                           std::span<const VehicleProfile> vehicles,
                           double d_max, const AdValueFn& value_of,
                           std::optional<AnalogueSlack> slack = {});

// Sparse sets for every PoA over {a : r(a,u) > 0}, built once per scenario.
// Output per PoA is identical to m_sparse_set over that PoA's ads; the
// catalog-wide 2*epsilon neighbour graph is shared, and PoAs with no local
// ads share one global-only set.
class SparseCatalog {
 public:
  SparseCatalog(std::span<const Ad> catalog, std::span<const PoA> poas,
                const SparseApproxParams& params);

  const SparseAdSet& for_poa(PoAId poa) const;
  const SparseApproxParams& params() const { return params_; }

 private:
  SparseApproxParams params_;
  std::map<PoAId, std::shared_ptr<const SparseAdSet>> sets_;
};

// Pairs of catalog entries within `radius`. Euclidean uses a sort-and-sweep
// on the first coordinate; other metrics scan all pairs.
class NeighborGraph {
 public:
  struct Edge {
    std::uint32_t index;
    double distance;
  };

  NeighborGraph(std::span<const Ad> catalog, double radius,
                DistanceMetric metric);

  std::span<const Edge> neighbors(std::size_t i) const { return adj_[i]; }
  std::size_t size() const { return adj_.size(); }

 private:
  std::vector<std::vector<Edge>> adj_;
};

// Greedy layering restricted to `subset` (indices into `catalog`), using a
// precomputed graph whose radius is 2*params.epsilon.
SparseAdSet m_sparse_set(const NeighborGraph& graph,
                         std::span<const Ad> catalog,
                         std::span<const std::uint32_t> subset,
                         const SparseApproxParams& params,
                         const AdValueFn& value_of);

}  // namespace volfied
