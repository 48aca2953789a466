#include "volfied/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

namespace volfied {

FeatureVector::FeatureVector(std::vector<double> coords)
    : coords_(std::move(coords)) {
  if (coords_.empty()) {
    throw std::invalid_argument("feature vector must have dimension >= 1");
  }
  for (double c : coords_) {
    if (!std::isfinite(c)) {
      throw std::invalid_argument("feature vector coordinate is not finite");
    }
  }
}

FeatureVector::FeatureVector(std::initializer_list<double> coords)
    : FeatureVector(std::vector<double>(coords)) {}

DistanceMetric parse_metric(std::string_view name) {
  if (name == "euclidean") return DistanceMetric::kEuclidean;
  if (name == "angular") return DistanceMetric::kAngular;
  throw std::invalid_argument(
      fmt::format("unknown distance metric '{}' (expected euclidean|angular)",
                  name));
}

std::string_view metric_name(DistanceMetric metric) {
  return metric == DistanceMetric::kEuclidean ? "euclidean" : "angular";
}

double distance(DistanceMetric metric, const FeatureVector& f1,
                const FeatureVector& f2) {
  if (f1.dimension() != f2.dimension()) {
    throw std::invalid_argument(fmt::format(
        "dimension mismatch: {} vs {}", f1.dimension(), f2.dimension()));
  }
  const auto a = f1.coords();
  const auto b = f2.coords();
  if (metric == DistanceMetric::kEuclidean) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      sum += d * d;
    }
    return std::sqrt(sum);
  }

  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw std::invalid_argument("angular distance undefined for zero vector");
  }
  // Identical inputs must give exactly zero.
  if (f1 == f2) return 0.0;
  const double cos_sim =
      std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
  return std::acos(cos_sim);
}

Ad::Ad(AdId id, FeatureVector features, double base_value, AdScope scope)
    : id(id),
      features(std::move(features)),
      base_value(base_value),
      scope(scope) {
  if (!(base_value > 0.0) || !std::isfinite(base_value)) {
    throw std::invalid_argument(
        fmt::format("ad {}: base_value must be > 0", id.value));
  }
}

PoA::PoA(PoAId id, double x_m, double y_m, double range_m)
    : id(id), x_m(x_m), y_m(y_m), range_m(range_m) {
  if (!(range_m > 0.0) || !std::isfinite(x_m) || !std::isfinite(y_m)) {
    throw std::invalid_argument(
        fmt::format("PoA {}: range must be > 0 and position finite", id.value));
  }
}

double ad_value(const Ad& ad, std::optional<PoAId> poa) {
  if (ad.scope.is_global()) return ad.base_value;
  return poa && *poa == *ad.scope.target ? ad.base_value : 0.0;
}

bool is_relevant(DistanceMetric metric, const Ad& ad,
                 const VehicleProfile& profile, double d_max,
                 std::optional<PoAId> current_poa) {
  if (!ad.scope.is_global() &&
      (!current_poa || *current_poa != *ad.scope.target)) {
    return false;
  }
  return distance(metric, ad.features, profile.interests) <= d_max;
}

}  // namespace volfied
