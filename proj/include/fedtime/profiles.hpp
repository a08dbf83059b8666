#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "fedtime/errors.hpp"

namespace fedtime {

/// Per-server timing coefficients and aggregation weight. All times in
/// SI seconds.
struct DeviceProfile {
  std::string id;
  double sample_upload_s = 0.0;   // data-uploading seconds per sample (a_k)
  double sample_compute_s = 0.0;  // per-sample processing seconds per iteration (b_k)
  double step_overhead_s = 0.0;   // per-iteration SGD overhead seconds (beta_k)
  double sample_forward_s = 0.0;  // forwarding seconds per sample (lambda_k)
  double weight = 0.0;            // aggregation weight p_k, in [0,1]
  std::string dataset_kind;       // tag selecting the (b, beta) pair

  void validate() const;
};

/// System-wide timing constants plus the ordered device list.
struct SystemProfile {
  double model_distribute_s = 0.0;  // zeta
  double model_upload_s = 0.0;      // u
  std::vector<DeviceProfile> devices;

  int device_index(const std::string& id) const;  // -1 if unknown
  const DeviceProfile& device(const std::string& id) const;
  void validate() const;  // weights sum to 1 within 1e-12, all fields sane
};

struct ForwardPair {
  std::string slow_id;
  std::string fast_id;
  double alpha = 0.0;  // fraction of the slow server's rounds taken over
};

/// Decision variables of a training run: participating subset, per-server
/// epochs/batch sizes, forwarding pairs, staleness cap, round budgets.
struct TrainPlan {
  std::vector<std::string> selected;
  std::unordered_map<std::string, int> epochs;  // e_k
  std::unordered_map<std::string, int> batch;   // n_k
  std::vector<ForwardPair> pairs;
  int staleness_cap = 0;  // tau; 0 means unbounded
  std::unordered_map<std::string, long long> rounds;  // Gamma_k budgets (planning)

  static TrainPlan uniform(std::vector<std::string> ids, int e, int n);

  int epochs_of(const std::string& id) const;
  int batch_of(const std::string& id) const;
  long long rounds_of(const std::string& id) const;  // 0 if unset
  bool is_selected(const std::string& id) const;

  void validate(const SystemProfile& sys) const;
};

// Closed-form per-step costs of the four-phase coordination round.

/// Data-uploading time: a_k * n * e.
double upload_time(const DeviceProfile& dev, long long n, long long e);

/// Local training time: e * (b_k * n + beta_k).
double compute_time(const DeviceProfile& dev, long long n, long long e);

/// Batch forwarding time to a paired server: lambda_k * n * e.
double forward_time(const DeviceProfile& dev, long long n, long long e);

/// One full coordination round on one server: zeta + u + upload + compute.
double round_cost(const SystemProfile& sys, const DeviceProfile& dev, int n, int e);

/// Round cost when `fast` takes over `slow`'s training: zeta + q_slow +
/// forwarding + compute on the fast server's coefficients (with the slow
/// server's e, n) + u.
double pair_round_cost(const SystemProfile& sys, const DeviceProfile& slow,
                       const DeviceProfile& fast, int n, int e);

struct SyncRoundTime {
  double seconds = 0.0;
  std::string slowest_id;  // ties broken toward the lowest id
};

/// Synchronous round time: the slowest selected server dominates.
SyncRoundTime round_time_sync(const SystemProfile& sys, const TrainPlan& plan);

struct PairTimes {
  double slow_branch = 0.0;  // Gamma_k (1-alpha) c_k
  double fast_branch = 0.0;  // Gamma_k' c_k' + Gamma_k alpha c_{k,k'}
  double overall() const { return slow_branch > fast_branch ? slow_branch : fast_branch; }
};

/// Branch completion times of one forwarding pair under given round budgets.
PairTimes pair_times(const SystemProfile& sys, const TrainPlan& plan, const ForwardPair& pair,
                     long long rounds_slow, long long rounds_fast);

/// Closed-form forwarding fraction that equalizes the two branches,
/// clamped to [0,1].
double optimal_alpha(double rounds_slow, double c_slow, double rounds_fast, double c_fast,
                     double c_pair);

}  // namespace fedtime
