#include "fedtime/config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

namespace fedtime {

namespace fs = std::filesystem;

namespace {

double need_num(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_number())
    throw ConfigError(where + ": missing numeric field '" + key + "'");
  return j.at(key).get<double>();
}

double num_or(const json& j, const std::string& key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError("field '" + key + "' must be a number");
  return j.at(key).get<double>();
}

std::string need_str(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string())
    throw ConfigError(where + ": missing string field '" + key + "'");
  return j.at(key).get<std::string>();
}

std::string resolve(const std::string& path, const std::string& base_dir) {
  fs::path p(path);
  if (p.is_absolute() || base_dir.empty()) return path;
  return (fs::path(base_dir) / p).string();
}

}  // namespace

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json cfg;
  try {
    cfg = json::parse(in, nullptr, true, true);  // allow comments
  } catch (const json::exception& e) {
    throw ConfigError("failed to parse '" + path + "': " + e.what());
  }
  if (!cfg.is_object()) throw ConfigError("'" + path + "': config root must be an object");
  if (!cfg.contains("include")) return cfg;

  const json includes = cfg.at("include");
  if (!includes.is_array()) throw ConfigError("'include' must be an array of paths");
  const std::string dir = fs::path(path).parent_path().string();
  json merged = json::object();
  for (const auto& inc : includes) {
    if (!inc.is_string()) throw ConfigError("'include' entries must be strings");
    merged.update(load_config_file(resolve(inc.get<std::string>(), dir)));
  }
  cfg.erase("include");
  merged.update(cfg);
  return merged;
}

std::string config_hash(const json& cfg) {
  const std::string dump = cfg.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : dump) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SystemProfile parse_system(const json& cfg) {
  if (!cfg.contains("system")) throw ConfigError("config has no 'system' block");
  const json& sysj = cfg.at("system");
  SystemProfile sys;
  sys.model_distribute_s = need_num(sysj, "zeta", "system");
  sys.model_upload_s = need_num(sysj, "u", "system");
  if (!sysj.contains("devices") || !sysj.at("devices").is_array() ||
      sysj.at("devices").empty())
    throw ConfigError("system: 'devices' must be a non-empty array");
  for (const auto& dj : sysj.at("devices")) {
    DeviceProfile dev;
    dev.id = need_str(dj, "id", "device");
    if (dj.contains("a")) {
      dev.sample_upload_s = need_num(dj, "a", "device " + dev.id);
    } else {
      // a_k derives from a byte rate and the per-sample byte size.
      const double rate = need_num(dj, "byte_rate", "device " + dev.id);
      const double bytes = num_or(dj, "bytes_per_sample", 784.0);
      if (!(rate > 0.0)) throw ConfigError("device " + dev.id + ": byte_rate must be > 0");
      dev.sample_upload_s = bytes / rate;
    }
    dev.sample_compute_s = need_num(dj, "b", "device " + dev.id);
    dev.step_overhead_s = need_num(dj, "beta", "device " + dev.id);
    dev.sample_forward_s = num_or(dj, "lambda", 0.0);
    dev.weight = num_or(dj, "p", 0.0);
    if (dj.contains("kind")) dev.dataset_kind = dj.at("kind").get<std::string>();
    sys.devices.push_back(std::move(dev));
  }
  return sys;
}

Dataset make_dataset(const json& cfg, const std::string& base_dir) {
  if (!cfg.contains("dataset")) throw ConfigError("config has no 'dataset' block");
  const json& dj = cfg.at("dataset");
  const std::string source = need_str(dj, "source", "dataset");
  if (source == "synthetic") {
    return synth_classification(
        static_cast<int>(need_num(dj, "classes", "dataset")),
        static_cast<int>(need_num(dj, "dim", "dataset")),
        static_cast<int>(need_num(dj, "per_class", "dataset")),
        num_or(dj, "margin", 4.0),
        static_cast<std::uint64_t>(num_or(dj, "seed", 0)));
  }
  if (source == "idx") {
    const std::string images = resolve(need_str(dj, "images", "dataset"), base_dir);
    const std::string labels = resolve(need_str(dj, "labels", "dataset"), base_dir);
    if (!fs::exists(images)) throw ConfigError("dataset images file not found: " + images);
    if (!fs::exists(labels)) throw ConfigError("dataset labels file not found: " + labels);
    return load_idx(images, labels);
  }
  if (source == "ftds") {
    const std::string path = resolve(need_str(dj, "path", "dataset"), base_dir);
    if (!fs::exists(path)) throw ConfigError("dataset file not found: " + path);
    return load_dataset(path);
  }
  throw ConfigError("dataset: unknown source '" + source + "'");
}

PartitionSpec parse_partition(const json& cfg, const SystemProfile& sys,
                              std::uint64_t default_seed) {
  PartitionSpec spec;
  spec.num_servers = static_cast<int>(sys.devices.size());
  spec.seed = default_seed;
  if (!cfg.contains("partition")) throw ConfigError("config has no 'partition' block");
  const json& pj = cfg.at("partition");
  spec.labels_per_server = static_cast<int>(num_or(pj, "labels_per_server", 1));
  if (pj.contains("unique_on_slow")) spec.unique_on_slow = pj.at("unique_on_slow").get<bool>();
  if (pj.contains("seed")) spec.seed = static_cast<std::uint64_t>(num_or(pj, "seed", 0));
  if (pj.contains("slow_servers")) {
    for (const auto& s : pj.at("slow_servers")) {
      const int idx = sys.device_index(s.get<std::string>());
      if (idx < 0)
        throw ConfigError("partition: unknown slow server '" + s.get<std::string>() + "'");
      spec.slow_servers.push_back(idx);
    }
  }
  return spec;
}

void apply_weighting(SystemProfile& sys, const Partition& part, const json& cfg) {
  std::string mode = "by_partition_size";
  if (cfg.contains("weighting")) mode = cfg.at("weighting").get<std::string>();
  if (mode == "explicit") {
    return;  // weights came with the device entries
  }
  if (mode == "uniform") {
    const double w = 1.0 / static_cast<double>(sys.devices.size());
    for (auto& d : sys.devices) d.weight = w;
    sys.devices.back().weight = 1.0 - w * static_cast<double>(sys.devices.size() - 1);
    return;
  }
  if (mode == "by_partition_size") {
    const auto w = size_weights(part);
    if (w.size() != sys.devices.size())
      throw ConfigError("partition does not cover the device list");
    for (std::size_t i = 0; i < w.size(); ++i) sys.devices[i].weight = w[i];
    return;
  }
  throw ConfigError("unknown weighting mode '" + mode + "'");
}

namespace {

LRSchedule parse_schedule(const json& rj) {
  LRSchedule sched;
  if (!rj.contains("schedule")) return sched;  // Table-style default
  const json& sj = rj.at("schedule");
  const std::string mode = sj.contains("mode") ? sj.at("mode").get<std::string>()
                                               : std::string("experimental");
  if (mode == "experimental") {
    sched.mode = LRSchedule::Mode::experimental;
    sched.eta0 = num_or(sj, "eta0", 0.01);
    sched.decay = num_or(sj, "decay", 0.995);
  } else if (mode == "theoretical") {
    sched.mode = LRSchedule::Mode::theoretical;
    sched.mu = need_num(sj, "mu", "schedule");
    sched.gamma = need_num(sj, "gamma", "schedule");
  } else {
    throw ConfigError("schedule: unknown mode '" + mode + "'");
  }
  return sched;
}

void parse_counts(const json& rj, const std::string& key,
                  const std::vector<std::string>& ids, int fallback,
                  std::unordered_map<std::string, int>& out) {
  if (!rj.contains(key)) {
    for (const auto& id : ids) out[id] = fallback;
    return;
  }
  const json& v = rj.at(key);
  if (v.is_number()) {
    for (const auto& id : ids) out[id] = v.get<int>();
    return;
  }
  if (v.is_object()) {
    for (const auto& id : ids) {
      if (!v.contains(id)) throw ConfigError("run: '" + key + "' has no entry for '" + id + "'");
      out[id] = v.at(id).get<int>();
    }
    return;
  }
  throw ConfigError("run: '" + key + "' must be a number or an object");
}

}  // namespace

RunConfig parse_run(const json& cfg, const SystemProfile& sys, std::uint64_t seed) {
  if (!cfg.contains("run")) throw ConfigError("config has no 'run' block");
  const json& rj = cfg.at("run");
  RunConfig rc;
  rc.seed = seed;
  const std::string mode = rj.contains("mode") ? rj.at("mode").get<std::string>()
                                               : std::string("sync");
  if (mode == "sync")
    rc.mode = RunConfig::Mode::sync;
  else if (mode == "async")
    rc.mode = RunConfig::Mode::async;
  else
    throw ConfigError("run: unknown mode '" + mode + "'");

  if (!rj.contains("selected") ||
      (rj.at("selected").is_string() && rj.at("selected").get<std::string>() == "all")) {
    for (const auto& d : sys.devices) rc.plan.selected.push_back(d.id);
  } else if (rj.at("selected").is_array()) {
    for (const auto& s : rj.at("selected")) rc.plan.selected.push_back(s.get<std::string>());
  } else {
    throw ConfigError("run: 'selected' must be \"all\" or an array of device ids");
  }

  parse_counts(rj, "epochs", rc.plan.selected, 1, rc.plan.epochs);
  parse_counts(rj, "batch", rc.plan.selected, 32, rc.plan.batch);
  rc.plan.staleness_cap = static_cast<int>(num_or(rj, "tau", 0));
  rc.schedule = parse_schedule(rj);

  if (rj.contains("pairs")) {
    const json& pj = rj.at("pairs");
    if (pj.is_string() && pj.get<std::string>() == "auto") {
      // Rank by own round cost at the configured (e, n); pair slowest with
      // fastest and set the branch-equalizing fraction.
      std::vector<std::string> order = rc.plan.selected;
      const auto cost = [&](const std::string& id) {
        return round_cost(sys, sys.device(id), rc.plan.batch_of(id), rc.plan.epochs_of(id));
      };
      std::stable_sort(order.begin(), order.end(),
                       [&](const std::string& l, const std::string& r) {
                         return cost(l) > cost(r) || (cost(l) == cost(r) && l < r);
                       });
      for (std::size_t i = 0; i < order.size() / 2; ++i) {
        ForwardPair pr{order[i], order[order.size() - 1 - i], 0.0};
        const auto& slow = sys.device(pr.slow_id);
        const auto& fast = sys.device(pr.fast_id);
        const double c_pair = pair_round_cost(sys, slow, fast, rc.plan.batch_of(pr.slow_id),
                                              rc.plan.epochs_of(pr.slow_id));
        pr.alpha = optimal_alpha(1.0, cost(pr.slow_id), 1.0, cost(pr.fast_id), c_pair);
        if (pr.alpha > 0.0) rc.plan.pairs.push_back(pr);
      }
    } else if (pj.is_array()) {
      for (const auto& p : pj) {
        ForwardPair pr;
        pr.slow_id = need_str(p, "slow", "pair");
        pr.fast_id = need_str(p, "fast", "pair");
        pr.alpha = num_or(p, "alpha", 0.0);
        rc.plan.pairs.push_back(pr);
      }
    } else {
      throw ConfigError("run: 'pairs' must be \"auto\" or an array");
    }
  }

  if (rj.contains("stop")) {
    const json& stj = rj.at("stop");
    if (stj.contains("target_loss")) rc.stop.target_loss = stj.at("target_loss").get<double>();
    if (stj.contains("max_rounds")) rc.stop.max_rounds = stj.at("max_rounds").get<long long>();
    if (stj.contains("max_wallclock_s"))
      rc.stop.max_wallclock_s = stj.at("max_wallclock_s").get<double>();
  }
  rc.eval_every = static_cast<int>(num_or(rj, "eval_every", 1));
  rc.eval_grid_s = num_or(rj, "eval_grid_s", 1.0);
  return rc;
}

ProbeSettings parse_probe(const json& cfg) {
  if (!cfg.contains("probe")) throw ConfigError("config has no 'probe' block");
  const json& pj = cfg.at("probe");
  ProbeSettings s;
  if (!pj.contains("pairs") || !pj.at("pairs").is_array())
    throw ConfigError("probe: 'pairs' must be an array of [e,n] entries");
  for (const auto& p : pj.at("pairs")) {
    if (!p.is_array() || p.size() != 2)
      throw ConfigError("probe: each entry must be a two-element [e,n] array");
    s.probes.emplace_back(p.at(0).get<int>(), p.at(1).get<int>());
  }
  s.loss_a = need_num(pj, "loss_a", "probe");
  s.loss_b = need_num(pj, "loss_b", "probe");
  s.max_rounds = static_cast<long long>(num_or(pj, "max_rounds", 10000));
  return s;
}

PlanInputs parse_plan(const json& cfg) {
  if (!cfg.contains("plan")) throw ConfigError("config has no 'plan' block");
  const json& pj = cfg.at("plan");
  PlanInputs in;
  in.epsilon = need_num(pj, "epsilon", "plan");
  const std::string mode = pj.contains("mode") ? pj.at("mode").get<std::string>()
                                               : std::string("sync");
  if (mode == "async")
    in.mode = BoundParams::Variant::async;
  else if (mode != "sync")
    throw ConfigError("plan: unknown mode '" + mode + "'");
  in.with_pairs = pj.contains("with_pairs") ? pj.at("with_pairs").get<bool>()
                                            : in.mode == BoundParams::Variant::async;

  if (pj.contains("timing"))
    in.timing = timing_from_json(pj.at("timing"));
  else if (cfg.contains("fit") && cfg.at("fit").contains("timing"))
    in.timing = timing_from_json(cfg.at("fit").at("timing"));
  else
    throw ConfigError("plan: no timing fit (plan.timing or fit.timing)");

  if (pj.contains("candidates")) {
    for (const auto& c : pj.at("candidates")) {
      BoundParams b = bound_from_json(c.at("bound"));
      b.variant = in.mode;
      in.per_drop.push_back(b);
    }
  } else if (cfg.contains("fit") && cfg.at("fit").contains("bound")) {
    BoundParams b = bound_from_json(cfg.at("fit").at("bound"));
    b.variant = in.mode;
    in.per_drop.push_back(b);
  } else {
    throw ConfigError("plan: no bound candidates (plan.candidates or fit.bound)");
  }

  const auto domain = [&](const char* key, IntDomain fallback) {
    if (!pj.contains(key)) return fallback;
    const json& d = pj.at(key);
    if (!d.is_array() || d.size() != 2)
      throw ConfigError(std::string("plan: '") + key + "' must be [lo, hi]");
    return IntDomain{d.at(0).get<int>(), d.at(1).get<int>()};
  };
  in.e_dom = domain("e_domain", IntDomain{1, 200});
  in.n_dom = domain("n_domain", IntDomain{1, 2000});
  in.theta = num_or(pj, "theta", 1e-9);
  return in;
}

json timing_to_json(const TimingFit& fit) {
  json alpha = json::object(), beta = json::object();
  for (std::size_t i = 0; i < fit.ids.size(); ++i) {
    alpha[fit.ids[i]] = fit.alpha[i];
    beta[fit.ids[i]] = fit.beta[i];
  }
  return json{{"zeta", fit.zeta}, {"u", fit.u}, {"ids", fit.ids},
              {"alpha", alpha}, {"beta", beta}};
}

TimingFit timing_from_json(const json& j) {
  TimingFit fit;
  fit.zeta = need_num(j, "zeta", "timing");
  fit.u = need_num(j, "u", "timing");
  if (!j.contains("ids") || !j.at("ids").is_array())
    throw ConfigError("timing: missing 'ids' array");
  for (const auto& id : j.at("ids")) fit.ids.push_back(id.get<std::string>());
  for (const auto& id : fit.ids) {
    fit.alpha.push_back(need_num(j.at("alpha"), id, "timing.alpha"));
    fit.beta.push_back(need_num(j.at("beta"), id, "timing.beta"));
  }
  return fit;
}

json bound_to_json(const BoundParams& b) {
  return json{{"A", b.A}, {"B", b.B}, {"C", b.C}, {"D", b.D},
              {"variant", b.variant == BoundParams::Variant::sync ? "sync" : "async"}};
}

BoundParams bound_from_json(const json& j) {
  BoundParams b;
  b.A = need_num(j, "A", "bound");
  b.B = need_num(j, "B", "bound");
  b.C = need_num(j, "C", "bound");
  b.D = need_num(j, "D", "bound");
  if (j.contains("variant"))
    b.variant = j.at("variant").get<std::string>() == "async" ? BoundParams::Variant::async
                                                              : BoundParams::Variant::sync;
  return b;
}

json plan_result_to_json(const PlanResult& r) {
  json pairs = json::array();
  for (const auto& p : r.pairs)
    pairs.push_back({{"slow", p.slow_id}, {"fast", p.fast_id}, {"alpha", p.alpha}});
  json candidates = json::array();
  for (const auto& c : r.candidates) {
    json cj{{"drops", c.drops}, {"members", c.members}, {"feasible", c.feasible},
            {"D", c.bound_d}};
    if (c.feasible) {
      cj["e"] = c.acs.e_star;
      cj["n"] = c.acs.n_star;
      cj["predicted_s"] = c.acs.predicted_s;
    }
    candidates.push_back(std::move(cj));
  }
  return json{{"e", r.e_star},
              {"n", r.n_star},
              {"selected", r.selected},
              {"pairs", pairs},
              {"predicted_s", r.predicted_s},
              {"acs_sweeps", r.acs_sweeps},
              {"trajectory", r.trajectory},
              {"candidates", candidates}};
}

Experiment load_experiment(const json& cfg, const std::string& base_dir,
                           std::optional<std::uint64_t> seed_override) {
  Experiment ex;
  ex.cfg = cfg;
  if (seed_override)
    ex.seed = *seed_override;
  else if (cfg.contains("seed"))
    ex.seed = cfg.at("seed").get<std::uint64_t>();
  else
    throw ConfigError("config has no 'seed' (mandatory for reproducibility)");
  ex.cfg["seed"] = ex.seed;

  ex.sys = parse_system(ex.cfg);
  ex.ds = make_dataset(ex.cfg, base_dir);
  const PartitionSpec spec = parse_partition(ex.cfg, ex.sys, ex.seed);
  ex.part = make_partition(ex.ds, spec);
  apply_weighting(ex.sys, ex.part, ex.cfg);
  ex.sys.validate();
  ex.run_cfg = parse_run(ex.cfg, ex.sys, ex.seed);
  return ex;
}

}  // namespace fedtime
