#include "volfied/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "volfied/csv_io.hpp"
#include "volfied/oracle.hpp"
#include "volfied/rng.hpp"
#include "volfied/sparse_approx.hpp"

namespace volfied::cli {
namespace {

using nlohmann::json;

struct Field {
  const char* name;
  std::function<void(SimConfig&, const json&)> set;
  std::function<json(const SimConfig&)> get;
};

template <typename T, typename M>
Field plain(const char* name, M SimConfig::*member) {
  return {name,
          [member](SimConfig& c, const json& v) { c.*member = v.get<T>(); },
          [member](const SimConfig& c) { return json(c.*member); }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      plain<int>("k", &SimConfig::k),
      plain<int>("m", &SimConfig::m),
      plain<double>("d_max", &SimConfig::d_max),
      plain<double>("epsilon", &SimConfig::epsilon),
      plain<int>("n", &SimConfig::n),
      {"metric",
       [](SimConfig& c, const json& v) {
         c.metric = parse_metric(v.get<std::string>());
       },
       [](const SimConfig& c) { return json(std::string(metric_name(c.metric))); }},
      plain<std::size_t>("cache_capacity", &SimConfig::cache_capacity),
      plain<double>("detection_accuracy", &SimConfig::detection_accuracy),
      plain<std::size_t>("num_ads", &SimConfig::num_ads),
      plain<double>("global_fraction", &SimConfig::global_fraction),
      plain<std::size_t>("steps", &SimConfig::steps),
      plain<std::uint64_t>("seed", &SimConfig::seed),
      {"strategy",
       [](SimConfig& c, const json& v) {
         c.strategy = parse_strategy(v.get<std::string>());
       },
       [](const SimConfig& c) {
         return json(std::string(strategy_name(c.strategy)));
       }},
      plain<bool>("use_sparse", &SimConfig::use_sparse),
      plain<std::size_t>("num_poas", &SimConfig::num_poas),
      plain<double>("area_width_m", &SimConfig::area_width_m),
      plain<double>("area_height_m", &SimConfig::area_height_m),
      plain<double>("poa_range_m", &SimConfig::poa_range_m),
      plain<std::size_t>("num_vehicles", &SimConfig::num_vehicles),
      plain<double>("speed_mps", &SimConfig::speed_mps),
      plain<double>("step_seconds", &SimConfig::step_seconds),
  };
  return table;
}

std::string flag_name(std::string_view field) {
  std::string s(field);
  std::replace(s.begin(), s.end(), '_', '-');
  return "--" + s;
}

// Flag text as JSON when it parses (numbers, booleans), else as a string.
json flag_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (v.is_discarded()) return json(text);
  return v;
}

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  for (auto part : split_csv_line(text)) {
    if (!part.empty()) out.emplace_back(part);
  }
  return out;
}

std::string format_value(double v) { return fmt::format("{}", v); }

unsigned worker_count(std::size_t jobs) {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("VOLFIED_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) cap = static_cast<unsigned>(n);
  }
  return static_cast<unsigned>(std::min<std::size_t>(cap, std::max<std::size_t>(jobs, 1)));
}

Scenario load_or_build(const RunSpec& spec, const SimConfig& config) {
  const bool any_input = spec.ads_path || spec.poas_path || spec.trace_path ||
                         spec.profiles_path;
  if (!any_input) return build_scenario(config);

  Scenario s;
  s.poas = spec.poas_path
               ? read_poas_csv(*spec.poas_path)
               : gen_poas(config.num_poas, config.area_width_m,
                          config.area_height_m, config.poa_range_m,
                          derive_seed(config.seed, RngStream::kPoAs));
  if (spec.ads_path && spec.profiles_path) {
    s.ads = read_ads_csv(*spec.ads_path);
    s.vehicles = read_profiles_csv(*spec.profiles_path);
  } else {
    auto pop = gen_population(config, s.poas,
                              derive_seed(config.seed, RngStream::kPopulation));
    s.ads = spec.ads_path ? read_ads_csv(*spec.ads_path) : std::move(pop.ads);
    s.vehicles = spec.profiles_path ? read_profiles_csv(*spec.profiles_path)
                                    : std::move(pop.vehicles);
  }
  s.trace = spec.trace_path
                ? load_trace(*spec.trace_path)
                : gen_synthetic({config.area_width_m, config.area_height_m,
                                 config.num_vehicles, config.steps,
                                 config.speed_mps, config.step_seconds},
                                derive_seed(config.seed, RngStream::kTrace));
  if (config.use_sparse) {
    s.sparse = std::make_shared<const SparseCatalog>(s.ads, s.poas,
                                                     config.sparse_params());
  }
  return s;
}

}  // namespace

SimConfig config_from_json(const json& j, bool strict, const SimConfig& base) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    const bool known = std::any_of(fields().begin(), fields().end(),
                                   [&](const Field& f) { return key == f.name; });
    if (!known) {
      throw std::invalid_argument(fmt::format("unknown config field '{}'", key));
    }
  }
  SimConfig c = base;
  for (const Field& f : fields()) {
    if (!j.contains(f.name)) {
      if (strict) {
        throw std::invalid_argument(
            fmt::format("missing config field '{}'", f.name));
      }
      continue;
    }
    try {
      f.set(c, j.at(f.name));
    } catch (const json::exception&) {
      throw std::invalid_argument(
          fmt::format("config field '{}' has the wrong type", f.name));
    }
  }
  validate(c);
  return c;
}

json config_to_json(const SimConfig& config) {
  json j = json::object();
  for (const Field& f : fields()) j[f.name] = f.get(config);
  return j;
}

std::vector<std::string> config_field_names() {
  std::vector<std::string> names;
  for (const Field& f : fields()) names.emplace_back(f.name);
  return names;
}

SweepSpec parse_sweep(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw std::invalid_argument("--sweep expects PARAM=V1,V2,...");
  }
  std::string param(text.substr(0, eq));
  if (param == "A") param = "num_ads";
  if (param == "C") param = "cache_capacity";
  if (param == "p") param = "detection_accuracy";
  if (param == "eps") param = "epsilon";
  static const std::vector<std::string> allowed = {
      "k", "m", "num_ads", "epsilon", "d_max", "cache_capacity",
      "detection_accuracy"};
  if (std::find(allowed.begin(), allowed.end(), param) == allowed.end()) {
    throw std::invalid_argument(fmt::format(
        "cannot sweep '{}' (allowed: k, m, num_ads, epsilon, d_max, "
        "cache_capacity, detection_accuracy)",
        param));
  }
  SweepSpec spec{param, {}};
  for (const auto& item : split_list(text.substr(eq + 1))) {
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw std::invalid_argument(
          fmt::format("sweep value '{}' is not a number", item));
    }
    SimConfig probe;
    apply_sweep_value(probe, param, v);
    spec.values.push_back(v);
  }
  if (spec.values.empty()) throw std::invalid_argument("sweep has no values");
  return spec;
}

void apply_sweep_value(SimConfig& c, std::string_view param, double v) {
  auto whole = [&](double lo) {
    if (v != std::floor(v) || v < lo) {
      throw std::invalid_argument(fmt::format(
          "sweep value {} out of domain for '{}'", v, param));
    }
    return v;
  };
  if (param == "k") {
    c.k = static_cast<int>(whole(1));
  } else if (param == "m") {
    c.m = static_cast<int>(whole(1));
  } else if (param == "num_ads") {
    c.num_ads = static_cast<std::size_t>(whole(0));
  } else if (param == "cache_capacity") {
    c.cache_capacity = static_cast<std::size_t>(whole(0));
  } else if (param == "epsilon") {
    c.epsilon = v;
  } else if (param == "d_max") {
    c.d_max = v;
  } else if (param == "detection_accuracy") {
    c.detection_accuracy = v;
  } else {
    throw std::invalid_argument(fmt::format("cannot sweep '{}'", param));
  }
  try {
    validate(c);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(
        fmt::format("sweep value {} out of domain: {}", v, e.what()));
  }
}

RunReport cmd_run(const RunSpec& spec) {
  if (spec.strategies.empty()) throw std::invalid_argument("no strategies given");
  if (spec.seeds.empty()) throw std::invalid_argument("no seeds given");
  std::filesystem::create_directories(spec.out_dir);

  struct Group {
    std::optional<double> value;
    std::uint64_t seed;
  };
  std::vector<Group> groups;
  const std::vector<std::optional<double>> values =
      spec.sweep ? std::vector<std::optional<double>>(spec.sweep->values.begin(),
                                                      spec.sweep->values.end())
                 : std::vector<std::optional<double>>{std::nullopt};
  for (const auto& v : values) {
    for (auto seed : spec.seeds) groups.push_back({v, seed});
  }

  struct Row {
    bool ok = false;
    std::string line;
  };
  std::vector<std::vector<Row>> rows(groups.size(),
                                     std::vector<Row>(spec.strategies.size()));
  std::vector<std::string> failures;
  std::mutex failures_mu;
  std::atomic<std::size_t> next{0};

  auto combo_name = [&](const Group& g, Strategy s) {
    std::string name = fmt::format("strategy={} seed={}", strategy_name(s), g.seed);
    if (g.value) name += fmt::format(" {}={}", spec.sweep->param, format_value(*g.value));
    return name;
  };

  auto worker = [&]() {
    for (std::size_t gi = next++; gi < groups.size(); gi = next++) {
      const Group& g = groups[gi];
      SimConfig config = spec.config;
      config.seed = g.seed;
      std::optional<Scenario> scenario;
      std::string scenario_error;
      try {
        if (g.value) apply_sweep_value(config, spec.sweep->param, *g.value);
        scenario = load_or_build(spec, config);
      } catch (const std::exception& e) {
        scenario_error = e.what();
      }
      for (std::size_t si = 0; si < spec.strategies.size(); ++si) {
        const Strategy s = spec.strategies[si];
        try {
          if (!scenario) throw std::runtime_error(scenario_error);
          config.strategy = s;
          const auto result = run(config, *scenario);
          std::string file = fmt::format("metrics_{}_seed{}", strategy_name(s), g.seed);
          if (g.value) {
            file += fmt::format("_{}-{}", spec.sweep->param, format_value(*g.value));
          }
          write_file_atomic(spec.out_dir / (file + ".csv"),
                            format_metrics_csv(result.steps));
          const StepMetrics last =
              result.steps.empty() ? StepMetrics{0, s} : result.steps.back();
          rows[gi][si] = {
              true, fmt::format("{},{},{},{:.6f},{},{:.6f}\n", strategy_name(s),
                                g.seed, g.value ? format_value(*g.value) : "",
                                last.revenue_cum, last.impressions_cum,
                                last.avg_distance_cum)};
        } catch (const std::exception& e) {
          std::lock_guard lock(failures_mu);
          failures.push_back(fmt::format("{}: {}", combo_name(g, s), e.what()));
        }
      }
    }
  };

  {
    std::vector<std::jthread> pool;
    const unsigned n = worker_count(groups.size());
    for (unsigned i = 0; i < n; ++i) pool.emplace_back(worker);
  }

  RunReport report;
  std::string summary =
      "strategy,seed,param_value,final_revenue,final_impressions,"
      "final_avg_distance\n";
  for (const auto& group_rows : rows) {
    for (const auto& r : group_rows) {
      if (!r.ok) continue;
      summary += r.line;
      ++report.completed;
    }
  }
  write_file_atomic(spec.out_dir / "summary.csv", summary);
  std::sort(failures.begin(), failures.end());
  report.failures = std::move(failures);
  return report;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Targeted ad scheduling simulator for vehicular networks"};
  app.require_subcommand(1);

  struct Common {
    std::string config;
    std::string out = ".";
    std::string seeds;
    std::string strategies;
    std::string sweep;
    std::map<std::string, std::string> overrides;
  };
  Common common;

  auto add_config_flags = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "JSON config (all fields required)");
    sub->add_option("--out", common.out, "output directory");
    sub->add_option("--seed", common.seeds, "seed or comma-separated seed list");
    for (const auto& f : fields()) {
      // --seed and --strategy take lists and are handled separately.
      if (std::string_view(f.name) == "seed" ||
          std::string_view(f.name) == "strategy") {
        continue;
      }
      sub->add_option_function<std::string>(
          flag_name(f.name),
          [&common, name = std::string(f.name)](const std::string& v) {
            common.overrides[name] = v;
          },
          fmt::format("override config field '{}'", f.name));
    }
  };

  auto* gen_ads = app.add_subcommand("gen-ads", "write ads.csv");
  auto* gen_poas_cmd = app.add_subcommand("gen-poas", "write poas.csv");
  auto* gen_trace = app.add_subcommand("gen-trace", "write trace.csv");
  auto* gen_profiles = app.add_subcommand("gen-profiles", "write profiles.csv");
  for (auto* sub : {gen_ads, gen_poas_cmd, gen_trace, gen_profiles}) {
    add_config_flags(sub);
  }

  std::string ads_in;
  std::optional<std::uint32_t> sparsify_poa;
  auto* sparsify = app.add_subcommand(
      "sparsify", "write the sparse ad set and its removal mapping");
  add_config_flags(sparsify);
  sparsify->add_option("--ads", ads_in, "input ads CSV")->required();
  sparsify->add_option("--poa", sparsify_poa,
                       "value ads as seen from this PoA (default: all ads)");

  std::string in_ads, in_poas, in_trace, in_profiles;
  auto* run_cmd = app.add_subcommand("run", "simulate strategies x seeds");
  auto* sweep_cmd = app.add_subcommand("sweep", "run over a parameter sweep");
  for (auto* sub : {run_cmd, sweep_cmd}) {
    add_config_flags(sub);
    sub->add_option("--strategy", common.strategies,
                    "volfied,topk,random (comma-separated)");
    sub->add_option("--ads", in_ads, "ads CSV instead of generated ads");
    sub->add_option("--poas", in_poas, "PoA CSV instead of generated PoAs");
    sub->add_option("--trace", in_trace, "trace CSV instead of synthetic mobility");
    sub->add_option("--profiles", in_profiles, "profiles CSV");
  }
  run_cmd->add_option("--sweep", common.sweep, "PARAM=V1,V2,...");
  sweep_cmd->add_option("--sweep", common.sweep, "PARAM=V1,V2,...")->required();

  std::string instance_path;
  std::string oracle_out;
  auto* oracle = app.add_subcommand("oracle", "exact single-step optimum");
  oracle->add_option("--instance", instance_path, "instance JSON")->required();
  oracle->add_option("--out", oracle_out, "write the result JSON here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    auto resolve_config = [&]() {
      SimConfig c;
      bool d_max_given = false;
      if (!common.config.empty()) {
        std::ifstream in(common.config);
        if (!in) throw std::runtime_error("cannot open " + common.config);
        json j;
        try {
          in >> j;
        } catch (const json::exception& e) {
          throw std::invalid_argument(common.config + ": " + e.what());
        }
        c = config_from_json(j, /*strict=*/true);
        d_max_given = true;
      }
      json patch = json::object();
      for (const auto& [name, text] : common.overrides) {
        patch[name] = flag_value(text);
      }
      d_max_given = d_max_given || patch.contains("d_max");
      c = config_from_json(patch, /*strict=*/false, c);
      if (c.metric == DistanceMetric::kAngular && !d_max_given) {
        c.d_max = kCalibratedAngularDMax;
      }
      return c;
    };
    auto seed_list = [&](const SimConfig& c) {
      std::vector<std::uint64_t> seeds;
      for (const auto& s : split_list(common.seeds)) {
        seeds.push_back(std::stoull(s));
      }
      if (seeds.empty()) seeds.push_back(c.seed);
      return seeds;
    };
    auto single_seed = [&](SimConfig& c) {
      const auto seeds = seed_list(c);
      if (seeds.size() != 1) throw std::invalid_argument("expects one seed");
      c.seed = seeds.front();
    };
    const std::filesystem::path out_dir = common.out;

    if (gen_ads->parsed() || gen_profiles->parsed() || gen_poas_cmd->parsed() ||
        gen_trace->parsed()) {
      SimConfig c = resolve_config();
      single_seed(c);
      std::filesystem::create_directories(out_dir);
      const auto poas =
          gen_poas(c.num_poas, c.area_width_m, c.area_height_m, c.poa_range_m,
                   derive_seed(c.seed, RngStream::kPoAs));
      if (gen_poas_cmd->parsed()) {
        write_file_atomic(out_dir / "poas.csv", format_poas_csv(poas));
      } else if (gen_trace->parsed()) {
        const auto trace = gen_synthetic(
            {c.area_width_m, c.area_height_m, c.num_vehicles, c.steps,
             c.speed_mps, c.step_seconds},
            derive_seed(c.seed, RngStream::kTrace));
        write_file_atomic(out_dir / "trace.csv", format_trace_csv(trace));
      } else {
        const auto pop = gen_population(
            c, poas, derive_seed(c.seed, RngStream::kPopulation));
        if (gen_ads->parsed()) {
          write_file_atomic(out_dir / "ads.csv", format_ads_csv(pop.ads));
        } else {
          write_file_atomic(out_dir / "profiles.csv",
                            format_profiles_csv(pop.vehicles));
        }
      }
      return 0;
    }

    if (sparsify->parsed()) {
      const SimConfig c = resolve_config();
      const auto ads = read_ads_csv(ads_in);
      std::vector<Ad> subset;
      AdValueFn value_of = [](const Ad& a) { return a.base_value; };
      if (sparsify_poa) {
        const PoAId poa{*sparsify_poa};
        value_of = [poa](const Ad& a) { return ad_value(a, poa); };
        for (const Ad& a : ads) {
          if (ad_value(a, poa) > 0.0) subset.push_back(a);
        }
      } else {
        subset = ads;
      }
      const auto set = m_sparse_set(subset, c.epsilon, c.m, c.metric, value_of);
      std::filesystem::create_directories(out_dir);
      write_file_atomic(out_dir / "sparse_ads.csv", format_ads_csv(set.ads));
      std::string mapping = "removed_ad_id,representative_ad_id,distance\n";
      for (const auto& [removed, rep] : set.mapping) {
        mapping += fmt::format("{},{},{}\n", removed.value, rep.ad.value,
                               rep.distance);
      }
      write_file_atomic(out_dir / "mapping.csv", mapping);
      out << fmt::format("{} ads -> {} sparse ads\n", subset.size(),
                         set.ads.size());
      return 0;
    }

    if (run_cmd->parsed() || sweep_cmd->parsed()) {
      RunSpec spec;
      spec.config = resolve_config();
      spec.out_dir = out_dir;
      spec.seeds = seed_list(spec.config);
      for (const auto& s : split_list(common.strategies)) {
        spec.strategies.push_back(parse_strategy(s));
      }
      if (spec.strategies.empty()) spec.strategies.push_back(spec.config.strategy);
      if (!common.sweep.empty()) spec.sweep = parse_sweep(common.sweep);
      if (!in_ads.empty()) spec.ads_path = in_ads;
      if (!in_poas.empty()) spec.poas_path = in_poas;
      if (!in_trace.empty()) spec.trace_path = in_trace;
      if (!in_profiles.empty()) spec.profiles_path = in_profiles;
      const auto report = cmd_run(spec);
      for (const auto& f : report.failures) err << "failed: " << f << '\n';
      out << fmt::format("{} runs completed, {} failed\n", report.completed,
                         report.failures.size());
      return report.failures.empty() ? 0 : 1;
    }

    if (oracle->parsed()) {
      std::ifstream in(instance_path);
      if (!in) throw std::runtime_error("cannot open " + instance_path);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw std::invalid_argument(instance_path + ": " + e.what());
      }
      const auto result = to_json(solve_exact(oracle_instance_from_json(j)));
      const std::string text = result.dump(2) + "\n";
      if (oracle_out.empty()) {
        out << text;
      } else {
        write_file_atomic(oracle_out, text);
      }
      return 0;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace volfied::cli
