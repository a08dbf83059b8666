#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "fedtime/datagen.hpp"
#include "fedtime/learner.hpp"
#include "fedtime/profiles.hpp"

namespace fedtime {

/// Run termination rules. At most one of the three may be left unbounded.
struct StopRule {
  std::optional<double> target_loss;       // epsilon
  std::optional<long long> max_rounds;
  std::optional<double> max_wallclock_s;

  void validate() const;
};

struct RunConfig {
  enum class Mode { sync, async };
  Mode mode = Mode::sync;
  TrainPlan plan;
  LRSchedule schedule;
  StopRule stop;
  std::uint64_t seed = 0;
  int eval_every = 1;        // sync: rounds between global evaluations
  double eval_grid_s = 1.0;  // async: wall-clock seconds between evaluations

  void validate(const SystemProfile& sys) const;
};

struct TraceRecord {
  long long round = 0;       // coordination round (sync) / aggregation count (async)
  double wallclock_s = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
  std::string slowest;       // sync: slowest server this round; async: least-aggregated server
};

struct RunTrace {
  std::vector<TraceRecord> records;
  ModelParams final_model;
  std::unordered_map<std::string, long long> rounds_completed;  // Gamma_k
  std::unordered_map<std::string, double> mean_round_s;         // measured mean own-round time
  int max_ledger_gap = 0;  // async: largest observed aggregation-count gap
  bool reached_target = false;
};

/// Thrown when the global loss turns non-finite; carries the partial trace.
struct DivergenceError : SimError {
  explicit DivergenceError(RunTrace trace)
      : SimError("divergence: global loss is non-finite"), partial(std::move(trace)) {}
  RunTrace partial;
};

/// Per-server aggregation counters of the asynchronous coordinator.
struct AggregationLedger {
  std::vector<long long> uploads;  // Lambda per selected server
  int cap = 0;                     // tau; 0 means unbounded

  long long min_uploads() const;
  long long max_uploads() const;
  int gap() const { return static_cast<int>(max_uploads() - min_uploads()); }
  bool would_violate(int server) const;
  void record(int server) { ++uploads[static_cast<std::size_t>(server)]; }
};

/// Called after every synchronous aggregation with the per-server local
/// models, their renormalized weights, and the aggregated model.
using SyncRoundObserver =
    std::function<void(long long round, const std::vector<ModelParams>& locals,
                       const std::vector<double>& weights, const ModelParams& aggregated)>;

RunTrace run_sync(const RunConfig& config, const SystemProfile& sys, const Partition& part,
                  const Dataset& ds, const SyncRoundObserver& observer = nullptr);

RunTrace run_async(const RunConfig& config, const SystemProfile& sys, const Partition& part,
                   const Dataset& ds);

RunTrace run(const RunConfig& config, const SystemProfile& sys, const Partition& part,
             const Dataset& ds);

/// First recorded wall-clock at which the loss (accuracy) reaches the target.
std::optional<double> time_to_target_loss(const RunTrace& trace, double epsilon);
std::optional<double> time_to_target_accuracy(const RunTrace& trace, double target);
std::optional<long long> rounds_to_target_loss(const RunTrace& trace, double epsilon);

/// CSV with header `round,wallclock_s,loss,accuracy,slowest_server`.
void write_trace_csv(const RunTrace& trace, std::ostream& out);

}  // namespace fedtime
