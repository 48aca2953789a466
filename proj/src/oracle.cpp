#include "volfied/oracle.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>
#include <unordered_map>

#include <fmt/format.h>

namespace volfied {
namespace {

using AdIndex = std::unordered_map<AdId, const Ad*>;

AdIndex index_ads(const std::vector<Ad>& ads) {
  AdIndex idx;
  for (const Ad& a : ads) {
    if (!idx.emplace(a.id, &a).second) {
      throw std::invalid_argument(fmt::format("duplicate ad id {}", a.id.value));
    }
  }
  return idx;
}

DisplayParams display_params(const SelectionParams& p) {
  return {p.m, 0, p.d_max, p.metric};
}

// Revenue at one PoA if it broadcasts `chosen`.
double poa_revenue(const std::vector<const OracleVehicle*>& covered,
                   PoAId poa, std::span<const Ad* const> chosen,
                   const DisplayParams& params) {
  double revenue = 0.0;
  for (const OracleVehicle* v : covered) {
    VehicleState state(v->profile, v->displayed);
    for (const auto& imp : state.step_display(chosen, poa, params)) {
      revenue += imp.value;
    }
  }
  return revenue;
}

}  // namespace

DisplayOutcome simulate_display(const BroadcastPlan& plan,
                                const OracleInstance& instance) {
  const AdIndex idx = index_ads(instance.ads);
  std::map<PoAId, std::vector<const Ad*>> received;
  for (const auto& [poa, ids] : plan) {
    if (ids.size() > static_cast<std::size_t>(instance.params.k)) {
      throw std::invalid_argument(fmt::format(
          "PoA {} broadcasts {} ads, k = {}", poa.value, ids.size(),
          instance.params.k));
    }
    auto& list = received[poa];
    for (AdId id : ids) {
      auto it = idx.find(id);
      if (it == idx.end()) {
        throw std::invalid_argument(fmt::format("unknown ad {}", id.value));
      }
      list.push_back(it->second);
    }
  }

  DisplayOutcome out;
  const auto params = display_params(instance.params);
  for (const OracleVehicle& v : instance.vehicles) {
    std::span<const Ad* const> got;
    if (v.poa) {
      auto it = received.find(*v.poa);
      if (it != received.end()) got = it->second;
    }
    VehicleState state(v.profile, v.displayed);
    auto shown = state.step_display(got, v.poa, params);
    for (const auto& imp : shown) out.revenue += imp.value;
    out.impressions[v.profile.id] = std::move(shown);
  }
  return out;
}

OracleSolution solve_exact(const OracleInstance& instance) {
  validate(instance.params);
  if (instance.params.k > kOracleMaxK) {
    throw std::length_error(fmt::format(
        "oracle enumeration supports k <= {}, got {}", kOracleMaxK,
        instance.params.k));
  }
  index_ads(instance.ads);
  const auto params = display_params(instance.params);

  std::map<PoAId, std::vector<const OracleVehicle*>> covered;
  for (const auto& v : instance.vehicles) {
    if (v.poa) covered[*v.poa].push_back(&v);
  }

  OracleSolution sol;
  for (const auto& [poa, vehicles] : covered) {
    std::vector<const Ad*> valued;
    for (const Ad& a : instance.ads) {
      if (ad_value(a, poa) > 0.0) valued.push_back(&a);
    }
    if (valued.size() > kOracleMaxCandidatesPerPoA) {
      throw std::length_error(fmt::format(
          "oracle enumeration supports at most {} candidate ads per PoA; PoA "
          "{} has {}",
          kOracleMaxCandidatesPerPoA, poa.value, valued.size()));
    }
    // An ad no covered vehicle could display never changes any display.
    std::vector<const Ad*> useful;
    for (const Ad* a : valued) {
      const bool someone = std::any_of(
          vehicles.begin(), vehicles.end(), [&](const OracleVehicle* v) {
            return !v->displayed.contains(a->id) &&
                   is_relevant(params.metric, *a, v->profile, params.d_max, poa);
          });
      if (someone) useful.push_back(a);
    }
    std::sort(useful.begin(), useful.end(),
              [](const Ad* a, const Ad* b) { return a->id < b->id; });

    std::vector<AdId> best_ids;
    double best = 0.0;
    std::vector<const Ad*> chosen;
    auto consider = [&]() {
      const double r = poa_revenue(vehicles, poa, chosen, params);
      std::vector<AdId> ids;
      for (const Ad* a : chosen) ids.push_back(a->id);
      const bool better = r > best + 1e-12;
      const bool tie = !better && r >= best - 1e-12 &&
                       std::lexicographical_compare(ids.begin(), ids.end(),
                                                    best_ids.begin(),
                                                    best_ids.end());
      if (better || tie) {
        best = r;
        best_ids = std::move(ids);
      }
    };
    const std::size_t k = static_cast<std::size_t>(instance.params.k);
    auto enumerate = [&](auto&& self, std::size_t from) -> void {
      consider();
      if (chosen.size() == k) return;
      for (std::size_t i = from; i < useful.size(); ++i) {
        chosen.push_back(useful[i]);
        self(self, i + 1);
        chosen.pop_back();
      }
    };
    enumerate(enumerate, 0);

    sol.broadcast[poa] = best_ids;
    sol.revenue_per_poa[poa] = best;
    sol.revenue += best;
  }
  return sol;
}

namespace {

template <typename T>
T required(const nlohmann::json& obj, const char* field,
           const std::string& where) {
  if (!obj.is_object() || !obj.contains(field)) {
    throw std::invalid_argument(
        fmt::format("{}: missing field '{}'", where, field));
  }
  try {
    return obj.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument(
        fmt::format("{}: field '{}' has the wrong type", where, field));
  }
}

}  // namespace

OracleInstance oracle_instance_from_json(const nlohmann::json& j) {
  OracleInstance inst;
  const auto& p = j.contains("params") ? j.at("params") : nlohmann::json();
  inst.params.k = required<int>(p, "k", "params");
  inst.params.m = required<int>(p, "m", "params");
  inst.params.d_max = required<double>(p, "d_max", "params");
  inst.params.metric =
      parse_metric(p.value("metric", std::string("euclidean")));

  const auto ads = required<nlohmann::json>(j, "ads", "instance");
  for (std::size_t i = 0; i < ads.size(); ++i) {
    const auto& a = ads[i];
    const std::string where = fmt::format("ads[{}]", i);
    AdScope scope;
    const auto kind = a.value("scope", std::string("G"));
    if (kind == "L") {
      scope = AdScope::local(
          PoAId{required<std::uint32_t>(a, "target_poa", where)});
    } else if (kind != "G") {
      throw std::invalid_argument(where + ": scope must be G or L");
    }
    inst.ads.emplace_back(
        AdId{required<std::uint32_t>(a, "id", where)},
        FeatureVector(required<std::vector<double>>(a, "features", where)),
        required<double>(a, "value", where), scope);
  }

  const auto vehicles = required<nlohmann::json>(j, "vehicles", "instance");
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    const auto& v = vehicles[i];
    const std::string where = fmt::format("vehicles[{}]", i);
    OracleVehicle ov{
        {VehicleId{required<std::uint32_t>(v, "id", where)},
         FeatureVector(required<std::vector<double>>(v, "interests", where))},
        std::nullopt,
        {}};
    if (v.contains("poa") && !v.at("poa").is_null()) {
      if (v.at("poa").is_array()) {
        throw std::invalid_argument(
            where + ": a vehicle is covered by at most one PoA");
      }
      ov.poa = PoAId{required<std::uint32_t>(v, "poa", where)};
    }
    if (v.contains("displayed")) {
      for (auto id : required<std::vector<std::uint32_t>>(v, "displayed", where)) {
        ov.displayed.insert(AdId{id});
      }
    }
    inst.vehicles.push_back(std::move(ov));
  }
  return inst;
}

nlohmann::json oracle_instance_to_json(const OracleInstance& instance) {
  nlohmann::json j;
  j["params"] = {{"k", instance.params.k},
                 {"m", instance.params.m},
                 {"d_max", instance.params.d_max},
                 {"metric", std::string(metric_name(instance.params.metric))}};
  j["ads"] = nlohmann::json::array();
  for (const Ad& a : instance.ads) {
    nlohmann::json ja = {
        {"id", a.id.value},
        {"features", std::vector<double>(a.features.coords().begin(),
                                         a.features.coords().end())},
        {"value", a.base_value},
        {"scope", a.scope.is_global() ? "G" : "L"}};
    if (!a.scope.is_global()) ja["target_poa"] = a.scope.target->value;
    j["ads"].push_back(std::move(ja));
  }
  j["vehicles"] = nlohmann::json::array();
  for (const auto& v : instance.vehicles) {
    std::set<std::uint32_t> shown;
    for (AdId id : v.displayed) shown.insert(id.value);
    nlohmann::json jv = {
        {"id", v.profile.id.value},
        {"interests", std::vector<double>(v.profile.interests.coords().begin(),
                                          v.profile.interests.coords().end())},
        {"displayed", shown}};
    jv["poa"] = v.poa ? nlohmann::json(v.poa->value) : nlohmann::json(nullptr);
    j["vehicles"].push_back(std::move(jv));
  }
  return j;
}

nlohmann::json to_json(const OracleSolution& solution) {
  nlohmann::json j;
  j["revenue"] = solution.revenue;
  j["broadcast"] = nlohmann::json::array();
  for (const auto& [poa, ids] : solution.broadcast) {
    std::vector<std::uint32_t> raw;
    for (AdId id : ids) raw.push_back(id.value);
    j["broadcast"].push_back({{"poa", poa.value},
                              {"ads", raw},
                              {"revenue", solution.revenue_per_poa.at(poa)}});
  }
  return j;
}

}  // namespace volfied
