#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "volfied/broker.hpp"
#include "volfied/core_model.hpp"
#include "volfied/sparse_approx.hpp"

namespace volfied {

struct TracePoint {
  VehicleId vehicle;
  double x_m = 0.0;
  double y_m = 0.0;
};

// steps[t] lists the vehicles present at step t.
struct MobilityTrace {
  double step_seconds = 60.0;
  std::vector<std::vector<TracePoint>> steps;

  std::size_t record_count() const;
};

// `step,vehicle_id,x_m,y_m` with a header. Rows may come in any order; they
// are bucketed by step. Throws ParseError with the line number.
MobilityTrace load_trace(const std::filesystem::path& path);
std::string format_trace_csv(const MobilityTrace& trace);

struct SyntheticTraceParams {
  double width_m = 5000.0;
  double height_m = 5000.0;
  std::size_t vehicles = 500;
  std::size_t steps = 480;
  double speed_mps = 14.0;
  double step_seconds = 60.0;
};

// Random-waypoint mobility; every vehicle is present at every step and
// moves at most speed * step_seconds per step.
MobilityTrace gen_synthetic(const SyntheticTraceParams& params,
                            std::uint64_t seed);

// Uniformly placed PoAs with ids 0..count-1.
std::vector<PoA> gen_poas(std::size_t count, double width_m, double height_m,
                          double range_m, std::uint64_t seed);

// Scenario and algorithm parameters. Algorithm defaults are the reference
// configuration (K=5, M=1, |A|=10000, D_max=0.15, eps=0.025, n=5, C=0,
// p=1, 90% global ads, 480 steps); the geometry defaults describe a
// desk-scale synthetic area.
struct SimConfig {
  int k = 5;
  int m = 1;
  double d_max = 0.15;
  double epsilon = 0.025;
  int n = 5;
  DistanceMetric metric = DistanceMetric::kEuclidean;
  std::size_t cache_capacity = 0;
  double detection_accuracy = 1.0;
  std::size_t num_ads = 10000;
  double global_fraction = 0.9;
  std::size_t steps = 480;
  std::uint64_t seed = 1;
  Strategy strategy = Strategy::kVolfied;
  bool use_sparse = true;

  std::size_t num_poas = 20;
  double area_width_m = 5000.0;
  double area_height_m = 5000.0;
  double poa_range_m = 150.0;
  std::size_t num_vehicles = 500;
  double speed_mps = 14.0;
  double step_seconds = 60.0;

  SelectionParams selection() const { return {k, m, d_max, metric}; }
  SparseApproxParams sparse_params() const { return {epsilon, m, metric}; }
};

// D_max for the angular metric giving the same mean number of relevant ads
// per vehicle as D_max = 0.15 under the Euclidean metric.
inline constexpr double kCalibratedAngularDMax = 0.07;

// Throws std::invalid_argument naming the first out-of-domain field.
void validate(const SimConfig& config);

struct Population {
  std::vector<Ad> ads;
  std::vector<VehicleProfile> vehicles;
};

// Vehicle features ~ Normal(0.5, 0.15) clamped to [0,1]; ad features and
// values ~ Uniform(0,1). Exactly round((1 - global_fraction) * num_ads) ads
// are local, each targeting a uniformly drawn PoA.
Population gen_population(const SimConfig& config, std::span<const PoA> poas,
                          std::uint64_t seed);

// Nearest PoA whose range covers (x, y) (distance <= range); ties go to the
// lowest id.
std::optional<PoAId> coverage(std::span<const PoA> poas, double x_m,
                              double y_m);

struct StepMetrics {
  std::size_t step = 0;
  Strategy strategy = Strategy::kVolfied;
  double revenue_cum = 0.0;
  std::uint64_t impressions_cum = 0;
  double avg_distance_cum = 0.0;
  std::uint64_t broadcasts_cum = 0;
};

// Everything one run consumes. `sparse` is required when use_sparse is set.
struct Scenario {
  std::vector<PoA> poas;
  std::vector<Ad> ads;
  std::vector<VehicleProfile> vehicles;
  MobilityTrace trace;
  std::shared_ptr<const SparseCatalog> sparse;
};

// Generates PoAs, population and trace from config.seed, and prebuilds the
// sparse sets when use_sparse is set.
Scenario build_scenario(const SimConfig& config);

struct RunResult {
  std::vector<StepMetrics> steps;
  // Largest number of candidate ads handed to the estimator by a single
  // enter/exit event.
  std::size_t max_event_work = 0;
  std::uint64_t events = 0;
};

// Steps the whole system. Per step: coverage and enter/exit events (each
// dwell detected with probability p, drawn once on entry); per-PoA
// selection; registry update; reception and display for every present
// vehicle; metrics. Metrics count realized impressions only. Runs for
// min(config.steps, trace length) steps.
RunResult run(const SimConfig& config, const Scenario& scenario);

// `step,strategy,revenue_cum,impressions_cum,avg_distance_cum,broadcasts_cum`
// with reals at 6 decimals.
std::string format_metrics_csv(std::span<const StepMetrics> rows);

}  // namespace volfied
