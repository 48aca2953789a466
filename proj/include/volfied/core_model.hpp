#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace volfied {

// Opaque integer identifier, one distinct type per tag.
template <typename Tag>
struct Id {
  std::uint32_t value = 0;

  constexpr Id() = default;
  constexpr explicit Id(std::uint32_t v) : value(v) {}

  friend constexpr auto operator<=>(Id, Id) = default;
};

using AdId = Id<struct AdTag>;
using VehicleId = Id<struct VehicleTag>;
using PoAId = Id<struct PoATag>;

// Point in the n-dimensional feature space shared by ads and vehicle
// profiles. Non-empty, all coordinates finite.
class FeatureVector {
 public:
  FeatureVector() = default;
  explicit FeatureVector(std::vector<double> coords);
  FeatureVector(std::initializer_list<double> coords);

  std::size_t dimension() const { return coords_.size(); }
  std::span<const double> coords() const { return coords_; }
  double operator[](std::size_t i) const { return coords_[i]; }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;

 private:
  std::vector<double> coords_;
};

enum class DistanceMetric { kEuclidean, kAngular };

// "euclidean" / "angular"; throws std::invalid_argument otherwise.
DistanceMetric parse_metric(std::string_view name);
std::string_view metric_name(DistanceMetric metric);

// Euclidean: 2-norm of the difference. Angular: arccos of the cosine
// similarity clamped to [-1, 1]. Throws std::invalid_argument on dimension
// mismatch, or on a zero vector for the angular metric.
double distance(DistanceMetric metric, const FeatureVector& f1,
                const FeatureVector& f2);

// Global ads carry no target; local ads are worth their value only under
// their target PoA.
struct AdScope {
  std::optional<PoAId> target;

  static AdScope global() { return {}; }
  static AdScope local(PoAId poa) { return {poa}; }
  bool is_global() const { return !target.has_value(); }

  friend bool operator==(const AdScope&, const AdScope&) = default;
};

struct Ad {
  AdId id;
  FeatureVector features;
  double base_value = 0.0;
  AdScope scope;

  // Throws std::invalid_argument if base_value is not a positive finite
  // number.
  Ad(AdId id, FeatureVector features, double base_value,
     AdScope scope = AdScope::global());

  friend bool operator==(const Ad&, const Ad&) = default;
};

struct PoA {
  PoAId id;
  double x_m = 0.0;
  double y_m = 0.0;
  double range_m = 0.0;

  PoA(PoAId id, double x_m, double y_m, double range_m);
};

struct VehicleProfile {
  VehicleId id;
  FeatureVector interests;
};

// r(a,u): base value for global ads and for local ads at their target,
// zero elsewhere. Out of coverage (nullopt) only global ads keep value.
double ad_value(const Ad& ad, std::optional<PoAId> poa);

// distance(ad, profile) <= d_max, and the vehicle is under the ad's target
// PoA when the ad is local.
bool is_relevant(DistanceMetric metric, const Ad& ad,
                 const VehicleProfile& profile, double d_max,
                 std::optional<PoAId> current_poa);

}  // namespace volfied

template <typename Tag>
struct std::hash<volfied::Id<Tag>> {
  std::size_t operator()(volfied::Id<Tag> id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value);
  }
};
