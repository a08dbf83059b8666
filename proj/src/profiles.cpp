#include "fedtime/profiles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedtime {

void DeviceProfile::validate() const {
  if (id.empty()) throw ConfigError("device profile with empty id");
  if (sample_upload_s < 0 || sample_compute_s < 0 || step_overhead_s < 0 ||
      sample_forward_s < 0)
    throw ConfigError("device '" + id + "': timing coefficients must be >= 0");
  if (!(weight >= 0.0 && weight <= 1.0))
    throw ConfigError("device '" + id + "': weight must be in [0,1]");
}

int SystemProfile::device_index(const std::string& id) const {
  for (std::size_t i = 0; i < devices.size(); ++i)
    if (devices[i].id == id) return static_cast<int>(i);
  return -1;
}

const DeviceProfile& SystemProfile::device(const std::string& id) const {
  const int i = device_index(id);
  if (i < 0) throw ConfigError("unknown device id '" + id + "'");
  return devices[static_cast<std::size_t>(i)];
}

void SystemProfile::validate() const {
  if (model_distribute_s < 0 || model_upload_s < 0)
    throw ConfigError("zeta and u must be >= 0");
  if (devices.empty()) throw ConfigError("system profile has no devices");
  double sum = 0.0;
  for (const auto& d : devices) {
    d.validate();
    sum += d.weight;
  }
  for (std::size_t i = 0; i < devices.size(); ++i)
    for (std::size_t j = i + 1; j < devices.size(); ++j)
      if (devices[i].id == devices[j].id)
        throw ConfigError("duplicate device id '" + devices[i].id + "'");
  if (std::abs(sum - 1.0) > 1e-12)
    throw ConfigError("device weights must sum to 1 (got " + std::to_string(sum) + ")");
}

TrainPlan TrainPlan::uniform(std::vector<std::string> ids, int e, int n) {
  TrainPlan plan;
  plan.selected = std::move(ids);
  for (const auto& id : plan.selected) {
    plan.epochs[id] = e;
    plan.batch[id] = n;
  }
  return plan;
}

int TrainPlan::epochs_of(const std::string& id) const {
  const auto it = epochs.find(id);
  if (it == epochs.end()) throw ConfigError("no epoch count for device '" + id + "'");
  return it->second;
}

int TrainPlan::batch_of(const std::string& id) const {
  const auto it = batch.find(id);
  if (it == batch.end()) throw ConfigError("no batch size for device '" + id + "'");
  return it->second;
}

long long TrainPlan::rounds_of(const std::string& id) const {
  const auto it = rounds.find(id);
  return it == rounds.end() ? 0 : it->second;
}

bool TrainPlan::is_selected(const std::string& id) const {
  return std::find(selected.begin(), selected.end(), id) != selected.end();
}

void TrainPlan::validate(const SystemProfile& sys) const {
  if (selected.empty()) throw ConfigError("no participating servers");
  for (const auto& id : selected) {
    if (sys.device_index(id) < 0) throw ConfigError("selected unknown device '" + id + "'");
    if (epochs_of(id) < 1) throw ConfigError("device '" + id + "': epochs must be >= 1");
    if (batch_of(id) < 1) throw ConfigError("device '" + id + "': batch size must be >= 1");
  }
  for (const auto& p : pairs) {
    if (p.slow_id == p.fast_id)
      throw ConfigError("forwarding pair must reference two distinct servers");
    if (!is_selected(p.slow_id) || !is_selected(p.fast_id))
      throw ConfigError("forwarding pair (" + p.slow_id + "," + p.fast_id +
                        ") references unselected servers");
    if (!(p.alpha >= 0.0 && p.alpha <= 1.0))
      throw ConfigError("forwarding fraction must be in [0,1]");
  }
  if (staleness_cap < 0) throw ConfigError("staleness cap must be >= 0");
}

double upload_time(const DeviceProfile& dev, long long n, long long e) {
  return dev.sample_upload_s * static_cast<double>(n) * static_cast<double>(e);
}

double compute_time(const DeviceProfile& dev, long long n, long long e) {
  return static_cast<double>(e) *
         (dev.sample_compute_s * static_cast<double>(n) + dev.step_overhead_s);
}

double forward_time(const DeviceProfile& dev, long long n, long long e) {
  return dev.sample_forward_s * static_cast<double>(n) * static_cast<double>(e);
}

double round_cost(const SystemProfile& sys, const DeviceProfile& dev, int n, int e) {
  return sys.model_distribute_s + sys.model_upload_s + upload_time(dev, n, e) +
         compute_time(dev, n, e);
}

double pair_round_cost(const SystemProfile& sys, const DeviceProfile& slow,
                       const DeviceProfile& fast, int n, int e) {
  return sys.model_distribute_s + upload_time(slow, n, e) + forward_time(slow, n, e) +
         compute_time(fast, n, e) + sys.model_upload_s;
}

SyncRoundTime round_time_sync(const SystemProfile& sys, const TrainPlan& plan) {
  if (plan.selected.empty()) throw SimError("no participating servers");
  SyncRoundTime out;
  out.seconds = -1.0;
  for (const auto& id : plan.selected) {
    const auto& dev = sys.device(id);
    const double c = round_cost(sys, dev, plan.batch_of(id), plan.epochs_of(id));
    if (c > out.seconds || (c == out.seconds && id < out.slowest_id)) {
      out.seconds = c;
      out.slowest_id = id;
    }
  }
  return out;
}

PairTimes pair_times(const SystemProfile& sys, const TrainPlan& plan, const ForwardPair& pair,
                     long long rounds_slow, long long rounds_fast) {
  if (!plan.is_selected(pair.slow_id) || !plan.is_selected(pair.fast_id))
    throw SimError("forwarding pair (" + pair.slow_id + "," + pair.fast_id +
                   ") not in the selected set");
  const auto& slow = sys.device(pair.slow_id);
  const auto& fast = sys.device(pair.fast_id);
  const double c_slow = round_cost(sys, slow, plan.batch_of(pair.slow_id),
                                   plan.epochs_of(pair.slow_id));
  const double c_fast = round_cost(sys, fast, plan.batch_of(pair.fast_id),
                                   plan.epochs_of(pair.fast_id));
  const double c_pair = pair_round_cost(sys, slow, fast, plan.batch_of(pair.slow_id),
                                        plan.epochs_of(pair.slow_id));
  PairTimes out;
  out.slow_branch = static_cast<double>(rounds_slow) * (1.0 - pair.alpha) * c_slow;
  out.fast_branch = static_cast<double>(rounds_fast) * c_fast +
                    static_cast<double>(rounds_slow) * pair.alpha * c_pair;
  return out;
}

double optimal_alpha(double rounds_slow, double c_slow, double rounds_fast, double c_fast,
                     double c_pair) {
  const double denom = rounds_slow * (c_slow + c_pair);
  if (!(denom > 0.0)) return 0.0;
  const double alpha = (rounds_slow * c_slow - rounds_fast * c_fast) / denom;
  return std::clamp(alpha, 0.0, 1.0);
}

}  // namespace fedtime
