#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "fedtime/estimate.hpp"
#include "fedtime/fedsim.hpp"
#include "fedtime/plan.hpp"

namespace fedtime {

using json = nlohmann::json;

/// Parses a config file, resolving its "include" list (paths relative to the
/// including file) by shallow merge; the including file's keys win.
json load_config_file(const std::string& path);

/// FNV-1a 64-bit hash of the canonical (sorted-key) dump, as hex.
std::string config_hash(const json& cfg);

SystemProfile parse_system(const json& cfg);

/// Builds the dataset from the "dataset" block (synthetic / idx / ftds);
/// relative paths resolve against base_dir.
Dataset make_dataset(const json& cfg, const std::string& base_dir);

PartitionSpec parse_partition(const json& cfg, const SystemProfile& sys,
                              std::uint64_t default_seed);

/// Applies the configured weighting mode ("by_partition_size" default,
/// "uniform", or "explicit") to the device weights.
void apply_weighting(SystemProfile& sys, const Partition& part, const json& cfg);

RunConfig parse_run(const json& cfg, const SystemProfile& sys, std::uint64_t seed);

ProbeSettings parse_probe(const json& cfg);

struct PlanInputs {
  double epsilon = 0.0;
  BoundParams::Variant mode = BoundParams::Variant::sync;
  TimingFit timing;
  std::vector<BoundParams> per_drop;
  IntDomain e_dom{1, 200};
  IntDomain n_dom{1, 2000};
  double theta = 1e-9;
  bool with_pairs = false;
};
PlanInputs parse_plan(const json& cfg);

json timing_to_json(const TimingFit& fit);
TimingFit timing_from_json(const json& j);
json bound_to_json(const BoundParams& b);
BoundParams bound_from_json(const json& j);
json plan_result_to_json(const PlanResult& r);

/// Everything needed to execute one run.
struct Experiment {
  json cfg;
  std::uint64_t seed = 0;
  SystemProfile sys;
  Dataset ds;
  Partition part;
  RunConfig run_cfg;
};
Experiment load_experiment(const json& cfg, const std::string& base_dir,
                           std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace fedtime
