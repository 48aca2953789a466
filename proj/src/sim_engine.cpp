#include "volfied/sim_engine.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

#include "volfied/csv_io.hpp"
#include "volfied/rng.hpp"
#include "volfied/vehicle_runtime.hpp"

namespace volfied {

std::size_t MobilityTrace::record_count() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.size();
  return n;
}

MobilityTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::string source = path.string();
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (!line.empty()) return true;
    }
    return false;
  };
  if (!next() || line != "step,vehicle_id,x_m,y_m") {
    throw ParseError(source, line_no, "header must be step,vehicle_id,x_m,y_m");
  }

  MobilityTrace trace;
  while (next()) {
    const auto f = split_csv_line(line);
    if (f.size() != 4) {
      throw ParseError(source, line_no,
                       fmt::format("expected 4 fields, got {}", f.size()));
    }
    std::size_t step = 0;
    std::uint32_t id = 0;
    double x = 0.0;
    double y = 0.0;
    auto ok = [](std::string_view s, auto& v) {
      const auto* end = s.data() + s.size();
      auto [p, ec] = std::from_chars(s.data(), end, v);
      return ec == std::errc() && p == end;
    };
    if (!ok(f[0], step) || !ok(f[1], id) || !ok(f[2], x) || !ok(f[3], y) ||
        !std::isfinite(x) || !std::isfinite(y)) {
      throw ParseError(source, line_no, "malformed trace row '" + line + "'");
    }
    if (step >= trace.steps.size()) trace.steps.resize(step + 1);
    trace.steps[step].push_back({VehicleId{id}, x, y});
  }
  for (auto& s : trace.steps) {
    std::stable_sort(s.begin(), s.end(), [](const auto& a, const auto& b) {
      return a.vehicle < b.vehicle;
    });
  }
  return trace;
}

std::string format_trace_csv(const MobilityTrace& trace) {
  std::string out = "step,vehicle_id,x_m,y_m\n";
  for (std::size_t t = 0; t < trace.steps.size(); ++t) {
    for (const auto& p : trace.steps[t]) {
      fmt::format_to(std::back_inserter(out), "{},{},{},{}\n", t,
                     p.vehicle.value, p.x_m, p.y_m);
    }
  }
  return out;
}

MobilityTrace gen_synthetic(const SyntheticTraceParams& params,
                            std::uint64_t seed) {
  if (!(params.width_m > 0.0) || !(params.height_m > 0.0) ||
      params.speed_mps < 0.0 || !(params.step_seconds > 0.0)) {
    throw std::invalid_argument("trace area, speed and step must be positive");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, params.width_m);
  std::uniform_real_distribution<double> uy(0.0, params.height_m);

  struct Walker {
    double x, y, wx, wy;
  };
  std::vector<Walker> walkers(params.vehicles);
  for (auto& w : walkers) {
    w.x = ux(rng);
    w.y = uy(rng);
    w.wx = ux(rng);
    w.wy = uy(rng);
  }

  MobilityTrace trace;
  trace.step_seconds = params.step_seconds;
  trace.steps.resize(params.steps);
  const double hop = params.speed_mps * params.step_seconds;
  for (std::size_t t = 0; t < params.steps; ++t) {
    auto& bucket = trace.steps[t];
    bucket.reserve(walkers.size());
    for (std::size_t i = 0; i < walkers.size(); ++i) {
      auto& w = walkers[i];
      bucket.push_back({VehicleId{static_cast<std::uint32_t>(i)}, w.x, w.y});
      const double dx = w.wx - w.x;
      const double dy = w.wy - w.y;
      const double left = std::hypot(dx, dy);
      if (left <= hop) {
        w.x = w.wx;
        w.y = w.wy;
        w.wx = ux(rng);
        w.wy = uy(rng);
      } else {
        w.x += dx / left * hop;
        w.y += dy / left * hop;
      }
    }
  }
  return trace;
}

std::vector<PoA> gen_poas(std::size_t count, double width_m, double height_m,
                          double range_m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, width_m);
  std::uniform_real_distribution<double> uy(0.0, height_m);
  std::vector<PoA> poas;
  poas.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double x = ux(rng);
    const double y = uy(rng);
    poas.emplace_back(PoAId{static_cast<std::uint32_t>(i)}, x, y, range_m);
  }
  return poas;
}

void validate(const SimConfig& c) {
  auto fail = [](const char* field, const char* rule) {
    throw std::invalid_argument(fmt::format("config field '{}' {}", field, rule));
  };
  if (c.k < 1) fail("k", "must be >= 1");
  if (c.m < 1) fail("m", "must be >= 1");
  if (!(c.d_max > 0.0)) fail("d_max", "must be > 0");
  if (!(c.epsilon > 0.0)) fail("epsilon", "must be > 0");
  if (c.n < 1) fail("n", "must be >= 1");
  if (!(c.detection_accuracy >= 0.0 && c.detection_accuracy <= 1.0)) {
    fail("detection_accuracy", "must be in [0,1]");
  }
  if (!(c.global_fraction >= 0.0 && c.global_fraction <= 1.0)) {
    fail("global_fraction", "must be in [0,1]");
  }
  if (!(c.poa_range_m > 0.0)) fail("poa_range_m", "must be > 0");
  if (!(c.area_width_m > 0.0)) fail("area_width_m", "must be > 0");
  if (!(c.area_height_m > 0.0)) fail("area_height_m", "must be > 0");
  if (c.speed_mps < 0.0) fail("speed_mps", "must be >= 0");
  if (!(c.step_seconds > 0.0)) fail("step_seconds", "must be > 0");
  if (c.global_fraction < 1.0 && c.num_ads > 0 && c.num_poas == 0) {
    fail("num_poas", "must be >= 1 when local ads exist");
  }
}

Population gen_population(const SimConfig& config, std::span<const PoA> poas,
                          std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> interest(0.5, 0.15);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto open_unit = [&]() {
    double v = 0.0;
    while (v == 0.0) v = unit(rng);
    return v;
  };
  const auto n = static_cast<std::size_t>(config.n);

  Population pop;
  pop.vehicles.reserve(config.num_vehicles);
  for (std::size_t i = 0; i < config.num_vehicles; ++i) {
    std::vector<double> f(n);
    for (auto& c : f) c = std::clamp(interest(rng), 0.0, 1.0);
    // The angular metric needs a nonzero profile.
    if (std::all_of(f.begin(), f.end(), [](double c) { return c == 0.0; })) {
      f[0] = 1e-6;
    }
    pop.vehicles.push_back(
        {VehicleId{static_cast<std::uint32_t>(i)}, FeatureVector(std::move(f))});
  }

  const auto locals = static_cast<std::size_t>(std::llround(
      (1.0 - config.global_fraction) * static_cast<double>(config.num_ads)));
  std::vector<std::size_t> order(config.num_ads);
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> is_local(config.num_ads, 0);
  for (std::size_t i = 0; i < locals; ++i) is_local[order[i]] = 1;

  pop.ads.reserve(config.num_ads);
  for (std::size_t i = 0; i < config.num_ads; ++i) {
    std::vector<double> f(n);
    for (auto& c : f) c = open_unit();
    const double value = open_unit();
    AdScope scope;
    if (is_local[i]) {
      std::uniform_int_distribution<std::size_t> pick(0, poas.size() - 1);
      scope = AdScope::local(poas[pick(rng)].id);
    }
    pop.ads.emplace_back(AdId{static_cast<std::uint32_t>(i)},
                         FeatureVector(std::move(f)), value, scope);
  }
  return pop;
}

std::optional<PoAId> coverage(std::span<const PoA> poas, double x_m,
                              double y_m) {
  std::optional<PoAId> best;
  double best_d = 0.0;
  for (const PoA& p : poas) {
    const double d = std::hypot(p.x_m - x_m, p.y_m - y_m);
    if (d > p.range_m) continue;
    if (!best || d < best_d || (d == best_d && p.id < *best)) {
      best = p.id;
      best_d = d;
    }
  }
  return best;
}

Scenario build_scenario(const SimConfig& config) {
  validate(config);
  Scenario s;
  s.poas = gen_poas(config.num_poas, config.area_width_m, config.area_height_m,
                    config.poa_range_m,
                    derive_seed(config.seed, RngStream::kPoAs));
  auto pop = gen_population(config, s.poas,
                            derive_seed(config.seed, RngStream::kPopulation));
  s.ads = std::move(pop.ads);
  s.vehicles = std::move(pop.vehicles);
  s.trace = gen_synthetic(
      {config.area_width_m, config.area_height_m, config.num_vehicles,
       config.steps, config.speed_mps, config.step_seconds},
      derive_seed(config.seed, RngStream::kTrace));
  if (config.use_sparse) {
    s.sparse = std::make_shared<const SparseCatalog>(s.ads, s.poas,
                                                     config.sparse_params());
  }
  return s;
}

namespace {

class Simulation {
 public:
  Simulation(const SimConfig& config, const Scenario& scenario)
      : config_(config),
        sc_(scenario),
        selection_(config.selection()),
        display_{config.m, config.cache_capacity, config.d_max, config.metric},
        estimator_(config.metric, config.d_max),
        detect_rng_(make_rng(config.seed, RngStream::kDetection)),
        random_rng_(make_rng(config.seed, RngStream::kRandomSelection)) {
    validate(config);
    if (config.use_sparse && !scenario.sparse) {
      throw std::invalid_argument("use_sparse requires prebuilt sparse sets");
    }
    for (std::size_t i = 0; i < sc_.ads.size(); ++i) {
      ad_index_.emplace(sc_.ads[i].id, static_cast<std::uint32_t>(i));
    }
    for (const PoA& p : sc_.poas) {
      std::vector<char> member(sc_.ads.size(), 0);
      if (config.use_sparse) {
        for (const Ad& a : sc_.sparse->for_poa(p.id).ads) {
          member[ad_index_.at(a.id)] = 1;
        }
      } else {
        for (std::size_t i = 0; i < sc_.ads.size(); ++i) {
          member[i] = ad_value(sc_.ads[i], p.id) > 0.0;
        }
      }
      members_.emplace(p.id, std::move(member));
    }
    for (const auto& v : sc_.vehicles) {
      vehicles_.emplace(v.id, Vehicle{VehicleState(v), std::nullopt, {}, false});
    }
  }

  RunResult run() {
    RunResult result;
    const std::size_t steps = std::min(config_.steps, sc_.trace.steps.size());
    double revenue = 0.0;
    double distance_sum = 0.0;
    std::uint64_t impressions = 0;
    std::uint64_t broadcasts = 0;
    std::vector<VehicleId> present_prev;

    for (std::size_t t = 0; t < steps; ++t) {
      const auto& records = sc_.trace.steps[t];

      // (1) Coverage and enter/exit events.
      std::vector<VehicleId> present;
      present.reserve(records.size());
      for (const auto& r : records) present.push_back(r.vehicle);
      std::sort(present.begin(), present.end());
      for (VehicleId id : present_prev) {
        if (!std::binary_search(present.begin(), present.end(), id)) {
          move_to(id, std::nullopt, result);
        }
      }
      for (const auto& r : records) {
        Vehicle& v = vehicle(r.vehicle);
        v.state.x_m = r.x_m;
        v.state.y_m = r.y_m;
        move_to(r.vehicle, coverage(sc_.poas, r.x_m, r.y_m), result);
      }
      present_prev = present;

      // (2)-(3) Selection and registry update per PoA.
      std::map<PoAId, std::vector<const Ad*>> sent;
      for (const PoA& p : sc_.poas) {
        auto ids = select(p.id);
        if (ids.empty()) continue;
        estimator_.on_broadcast(p.id, ids);
        broadcasts += ids.size();
        auto& list = sent[p.id];
        for (AdId id : ids) list.push_back(&sc_.ads[ad_index_.at(id)]);
      }

      // (4) Reception and display, covered or not.
      for (VehicleId id : present) {
        Vehicle& v = vehicle(id);
        std::span<const Ad* const> received;
        if (v.poa) {
          auto it = sent.find(*v.poa);
          if (it != sent.end()) received = it->second;
        }
        for (const auto& imp : v.state.step_display(received, v.poa, display_)) {
          revenue += imp.value;
          distance_sum += imp.distance;
          ++impressions;
        }
      }

      // (5) Metrics.
      StepMetrics row;
      row.step = t;
      row.strategy = config_.strategy;
      row.revenue_cum = revenue;
      row.impressions_cum = impressions;
      row.avg_distance_cum =
          impressions ? distance_sum / static_cast<double>(impressions) : 0.0;
      row.broadcasts_cum = broadcasts;
      result.steps.push_back(row);
    }
    return result;
  }

 private:
  struct Vehicle {
    VehicleState state;
    std::optional<PoAId> poa;
    std::vector<std::uint32_t> relevant;  // catalog indices within d_max
    bool indexed;
  };

  Vehicle& vehicle(VehicleId id) {
    auto it = vehicles_.find(id);
    if (it == vehicles_.end()) {
      throw std::invalid_argument(
          fmt::format("trace vehicle {} has no profile", id.value));
    }
    return it->second;
  }

  void move_to(VehicleId id, std::optional<PoAId> poa, RunResult& result) {
    Vehicle& v = vehicle(id);
    if (v.poa == poa) return;
    if (v.poa) {
      estimator_.on_vehicle_exit(*v.poa, id);
      note_event(result);
    }
    v.poa = poa;
    if (!poa) return;

    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool detected = unit(detect_rng_) < config_.detection_accuracy;
    std::vector<const Ad*> candidates;
    if (detected) {
      if (!v.indexed) {
        const auto& f = v.state.profile().interests;
        for (std::size_t i = 0; i < sc_.ads.size(); ++i) {
          if (distance(config_.metric, sc_.ads[i].features, f) <= config_.d_max) {
            v.relevant.push_back(static_cast<std::uint32_t>(i));
          }
        }
        v.indexed = true;
      }
      const auto& member = members_.at(*poa);
      for (auto i : v.relevant) {
        if (member[i]) candidates.push_back(&sc_.ads[i]);
      }
    }
    estimator_.on_vehicle_enter(*poa, v.state.profile(), detected, candidates);
    note_event(result);
  }

  void note_event(RunResult& result) {
    ++result.events;
    result.max_event_work =
        std::max(result.max_event_work, estimator_.last_event_ads_examined());
  }

  std::vector<AdId> select(PoAId poa) {
    switch (config_.strategy) {
      case Strategy::kVolfied:
        return select_volfied(estimator_, poa, selection_);
      case Strategy::kTopK:
        return select_topk(estimator_, poa, selection_);
      case Strategy::kRandom:
        return select_random(estimator_, poa, selection_, random_rng_);
    }
    return {};
  }

  const SimConfig& config_;
  const Scenario& sc_;
  SelectionParams selection_;
  DisplayParams display_;
  RevenueEstimator estimator_;
  std::mt19937_64 detect_rng_;
  std::mt19937_64 random_rng_;
  std::unordered_map<AdId, std::uint32_t> ad_index_;
  std::map<PoAId, std::vector<char>> members_;
  std::unordered_map<VehicleId, Vehicle> vehicles_;
};

}  // namespace

RunResult run(const SimConfig& config, const Scenario& scenario) {
  Simulation sim(config, scenario);
  return sim.run();
}

std::string format_metrics_csv(std::span<const StepMetrics> rows) {
  std::string out =
      "step,strategy,revenue_cum,impressions_cum,avg_distance_cum,"
      "broadcasts_cum\n";
  for (const auto& r : rows) {
    fmt::format_to(std::back_inserter(out), "{},{},{:.6f},{},{:.6f},{}\n",
                   r.step, strategy_name(r.strategy), r.revenue_cum,
                   r.impressions_cum, r.avg_distance_cum, r.broadcasts_cum);
  }
  return out;
}

}  // namespace volfied
