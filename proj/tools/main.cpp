#include <CLI11.hpp>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>

#include "fedtime/config.hpp"

namespace fs = std::filesystem;
using namespace fedtime;

namespace {

constexpr const char* kVersion = "fedtime 0.1.0";

enum ExitCode : int {
  kOk = 0,
  kRuntime = 1,
  kDivergence = 2,
  kBadConfig = 3,
  kRankDeficient = 4,
  kInfeasible = 5,
};

struct Args {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
};

std::string out_dir_for(const Args& args, const json& cfg) {
  if (!args.out_dir.empty()) return args.out_dir;
  if (cfg.contains("out")) return cfg.at("out").get<std::string>();
  return ".";
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);  // keep \n endings everywhere
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << content;
}

json base_meta(const json& cfg, std::uint64_t seed) {
  return json{{"version", kVersion},
              {"config_hash", config_hash(cfg)},
              {"seed", seed},
              {"config", cfg}};
}

void write_meta(const fs::path& dir, json meta, const std::vector<std::string>& outputs) {
  meta["outputs"] = outputs;
  write_text(dir / "meta.json", meta.dump(2) + "\n");
}

std::string trace_to_string(const RunTrace& trace) {
  std::ostringstream os;
  write_trace_csv(trace, os);
  return os.str();
}

int cmd_simulate(const Args& args) {
  const json cfg = load_config_file(args.config_path);
  const std::string base_dir = fs::path(args.config_path).parent_path().string();
  Experiment ex = load_experiment(cfg, base_dir, args.seed);
  const fs::path dir = out_dir_for(args, ex.cfg);
  fs::create_directories(dir);

  json meta = base_meta(ex.cfg, ex.seed);
  try {
    const RunTrace trace = run(ex.run_cfg, ex.sys, ex.part, ex.ds);
    write_text(dir / "trace.csv", trace_to_string(trace));
    meta["reached_target"] = trace.reached_target;
    write_meta(dir, meta, {"trace.csv"});
  } catch (const DivergenceError& e) {
    write_text(dir / "trace.csv", trace_to_string(e.partial));
    meta["diverged"] = true;
    write_meta(dir, meta, {"trace.csv"});
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  }
  return kOk;
}

int cmd_estimate(const Args& args) {
  const json cfg = load_config_file(args.config_path);
  const std::string base_dir = fs::path(args.config_path).parent_path().string();
  Experiment ex = load_experiment(cfg, base_dir, args.seed);
  const ProbeSettings settings = parse_probe(ex.cfg);
  const fs::path dir = out_dir_for(args, ex.cfg);
  fs::create_directories(dir);

  const auto observations = probe(ex.run_cfg, ex.sys, ex.part, ex.ds, settings);

  const json& pj = ex.cfg.at("probe");
  double loss_star = 0.0;
  if (pj.contains("loss_star")) {
    loss_star = pj.at("loss_star").get<double>();
  } else {
    double lo = observations.front().min_loss;
    for (const auto& ob : observations) lo = std::min(lo, ob.min_loss);
    loss_star = lo - (pj.contains("slack") ? pj.at("slack").get<double>() : 0.01);
  }

  const auto variant = ex.run_cfg.mode == RunConfig::Mode::async
                           ? BoundParams::Variant::async
                           : BoundParams::Variant::sync;
  const BoundParams bound =
      fit_bound(observations, settings.loss_a, settings.loss_b, loss_star, variant);
  std::optional<double> pin_zeta, pin_u;
  if (pj.contains("pin_zeta")) pin_zeta = pj.at("pin_zeta").get<double>();
  if (pj.contains("pin_u")) pin_u = pj.at("pin_u").get<double>();
  const TimingFit timing = fit_timing(observations, ex.run_cfg.plan.selected, pin_zeta, pin_u);

  std::ostringstream obs_csv;
  write_observations_csv(observations, ex.run_cfg.plan.selected, obs_csv);
  write_text(dir / "observations.csv", obs_csv.str());
  const json fragment{{"fit", json{{"bound", bound_to_json(bound)},
                                   {"timing", timing_to_json(timing)},
                                   {"loss_star", loss_star}}}};
  write_text(dir / "fitted.json", fragment.dump(2) + "\n");
  write_meta(dir, base_meta(ex.cfg, ex.seed), {"observations.csv", "fitted.json"});
  return kOk;
}

int cmd_plan(const Args& args) {
  json cfg = load_config_file(args.config_path);
  const std::string base_dir = fs::path(args.config_path).parent_path().string();
  SystemProfile sys = parse_system(cfg);
  if (cfg.contains("dataset") && cfg.contains("partition")) {
    const std::uint64_t seed =
        args.seed ? *args.seed
                  : (cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0);
    const Dataset ds = make_dataset(cfg, base_dir);
    const Partition part = make_partition(ds, parse_partition(cfg, sys, seed));
    apply_weighting(sys, part, cfg);
  }
  sys.validate();
  const PlanInputs in = parse_plan(cfg);
  const fs::path dir = out_dir_for(args, cfg);
  fs::create_directories(dir);

  const PlanResult result = select_servers(sys, in.timing, in.per_drop, in.epsilon, in.e_dom,
                                           in.n_dom, in.theta, in.with_pairs);
  write_text(dir / "plan.json", plan_result_to_json(result).dump(2) + "\n");

  // Ready-to-run simulate config with the planned decision variables.
  json runj = cfg.contains("run") ? cfg.at("run") : json::object();
  runj["mode"] = in.mode == BoundParams::Variant::async ? "async" : "sync";
  runj["selected"] = result.selected;
  runj["epochs"] = result.e_star;
  runj["batch"] = result.n_star;
  if (!result.pairs.empty()) {
    json pairs = json::array();
    for (const auto& p : result.pairs)
      pairs.push_back({{"slow", p.slow_id}, {"fast", p.fast_id}, {"alpha", p.alpha}});
    runj["pairs"] = pairs;
  }
  json next = cfg;
  next.erase("plan");
  next.erase("probe");
  next.erase("fit");
  next["run"] = runj;
  write_text(dir / "planned_run.json", next.dump(2) + "\n");

  const std::uint64_t seed =
      args.seed ? *args.seed : (cfg.contains("seed") ? cfg.at("seed").get<std::uint64_t>() : 0);
  write_meta(dir, base_meta(cfg, seed), {"plan.json", "planned_run.json"});
  return kOk;
}

struct SweepPoint {
  double value = 0.0;
  std::optional<double> seconds;
  std::optional<long long> rounds;
  RunTrace trace;
  std::string error;
  int error_code = kOk;
};

int cmd_sweep(const Args& args) {
  const json cfg = load_config_file(args.config_path);
  const std::string base_dir = fs::path(args.config_path).parent_path().string();
  Experiment ex = load_experiment(cfg, base_dir, args.seed);
  if (!cfg.contains("sweep")) throw ConfigError("config has no 'sweep' block");
  const json& sj = cfg.at("sweep");
  const std::string axis = sj.contains("axis") ? sj.at("axis").get<std::string>() : "";
  if (axis != "e" && axis != "n" && axis != "drop")
    throw ConfigError("sweep: axis must be one of \"e\", \"n\", \"drop\"");
  if (!sj.contains("values") || !sj.at("values").is_array() || sj.at("values").empty())
    throw ConfigError("sweep: 'values' must be a non-empty array");
  if (!ex.run_cfg.stop.target_loss)
    throw ConfigError("sweep needs run.stop.target_loss to measure time-to-target");
  std::vector<double> values;
  for (const auto& v : sj.at("values")) values.push_back(v.get<double>());

  // Slowest-first order for the drop axis, ranked by configured round cost.
  std::vector<std::string> order = ex.run_cfg.plan.selected;
  {
    const auto cost = [&](const std::string& id) {
      return round_cost(ex.sys, ex.sys.device(id), ex.run_cfg.plan.batch_of(id),
                        ex.run_cfg.plan.epochs_of(id));
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](const std::string& l, const std::string& r) {
                       return cost(l) > cost(r) || (cost(l) == cost(r) && l < r);
                     });
  }

  std::vector<SweepPoint> points(values.size());
  std::atomic<std::size_t> cursor{0};
  const int jobs = std::max(1, args.jobs);
  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= values.size()) return;
      SweepPoint& pt = points[i];
      pt.value = values[i];
      try {
        RunConfig rc = ex.run_cfg;
        if (axis == "e") {
          for (auto& [id, e] : rc.plan.epochs) e = static_cast<int>(values[i]);
        } else if (axis == "n") {
          for (auto& [id, n] : rc.plan.batch) n = static_cast<int>(values[i]);
        } else {
          const auto drops = static_cast<std::size_t>(values[i]);
          if (drops >= order.size())
            throw ConfigError("sweep: cannot drop " + std::to_string(drops) + " of " +
                              std::to_string(order.size()) + " servers");
          rc.plan.selected.assign(order.begin() + static_cast<std::ptrdiff_t>(drops),
                                  order.end());
          rc.plan.pairs.clear();
        }
        pt.trace = run(rc, ex.sys, ex.part, ex.ds);
        pt.seconds = time_to_target_loss(pt.trace, *rc.stop.target_loss);
        pt.rounds = rounds_to_target_loss(pt.trace, *rc.stop.target_loss);
      } catch (const DivergenceError& e) {
        pt.trace = e.partial;
        pt.error = e.what();
        pt.error_code = kDivergence;
      } catch (const std::exception& e) {
        pt.error = e.what();
        pt.error_code = kBadConfig;
      }
    }
  };
  std::vector<std::thread> threads;
  for (int t = 0; t < jobs; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();

  const fs::path dir = out_dir_for(args, ex.cfg);
  fs::create_directories(dir);
  std::string summary = "axis_value,time_to_target_s,rounds_to_target\n";
  std::vector<std::string> outputs{"summary.csv"};
  char buf[128];
  for (const auto& pt : points) {
    if (!pt.error.empty()) {
      std::cerr << "error at " << axis << "=" << pt.value << ": " << pt.error << "\n";
      return pt.error_code;
    }
    std::snprintf(buf, sizeof(buf), "%.12g,", pt.value);
    summary += buf;
    if (pt.seconds) {
      std::snprintf(buf, sizeof(buf), "%.9f", *pt.seconds);
      summary += buf;
    }
    summary += ",";
    if (pt.rounds) summary += std::to_string(*pt.rounds);
    summary += "\n";
    std::snprintf(buf, sizeof(buf), "trace_%s_%.12g.csv", axis.c_str(), pt.value);
    write_text(dir / buf, trace_to_string(pt.trace));
    outputs.emplace_back(buf);
  }
  write_text(dir / "summary.csv", summary);
  write_meta(dir, base_meta(ex.cfg, ex.seed), outputs);
  return kOk;
}

int dispatch(int (*fn)(const Args&), const Args& args) {
  try {
    return fn(args);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const RankDeficientError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRankDeficient;
  } catch (const InfeasibleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic time-to-target simulator and planner for federated learning "
               "over heterogeneous edge servers"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Args args;
  std::uint64_t seed_value = 0;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", args.config_path, "Experiment config (JSON)")->required();
    sub->add_option("--out", args.out_dir, "Output directory (overrides config)");
    sub->add_option("--seed", seed_value, "Seed override");
    sub->add_option("--jobs", args.jobs, "Worker pool size for sweeps");
  };

  auto* simulate = app.add_subcommand("simulate", "Run one training simulation");
  auto* estimate = app.add_subcommand("estimate", "Probe the system and fit constants");
  auto* plan = app.add_subcommand("plan", "Optimize subset, epochs and batch size");
  auto* sweep = app.add_subcommand("sweep", "Sweep one axis and tabulate time-to-target");
  for (auto* sub : {simulate, estimate, plan, sweep}) add_common(sub);

  CLI11_PARSE(app, argc, argv);

  for (auto* sub : {simulate, estimate, plan, sweep})
    if (sub->parsed() && sub->count("--seed") > 0) args.seed = seed_value;

  if (simulate->parsed()) return dispatch(cmd_simulate, args);
  if (estimate->parsed()) return dispatch(cmd_estimate, args);
  if (plan->parsed()) return dispatch(cmd_plan, args);
  return dispatch(cmd_sweep, args);
}
