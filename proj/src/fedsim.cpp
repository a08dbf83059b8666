#include "fedtime/fedsim.hpp"

#include <algorithm>
#include <cassert>
#include <climits>
#include <cmath>
#include <cstdio>
#include <queue>

#include "fedtime/rng.hpp"

namespace fedtime {

void StopRule::validate() const {
  int unbounded = 0;
  unbounded += target_loss ? 0 : 1;
  unbounded += max_rounds ? 0 : 1;
  unbounded += max_wallclock_s ? 0 : 1;
  if (unbounded > 1)
    throw ConfigError("at most one stop criterion may be left unbounded");
  if (target_loss && !(*target_loss > 0.0))
    throw ConfigError("target loss must be positive");
  if (max_rounds && *max_rounds < 1) throw ConfigError("max_rounds must be >= 1");
  if (max_wallclock_s && !(*max_wallclock_s > 0.0))
    throw ConfigError("max_wallclock_s must be positive");
}

void RunConfig::validate(const SystemProfile& sys) const {
  plan.validate(sys);
  schedule.validate();
  stop.validate();
  if (eval_every < 1) throw ConfigError("eval_every must be >= 1");
  if (mode == Mode::async) {
    if (!(eval_grid_s > 0.0)) throw ConfigError("eval_grid_s must be positive");
    int max_e = 0;
    for (const auto& id : plan.selected) max_e = std::max(max_e, plan.epochs_of(id));
    if (!schedule.staleness_compatible(max_e, plan.staleness_cap))
      throw ConfigError("schedule violates eta_t <= 2 eta_{t+H+tau} for the configured H, tau");
  }
}

long long AggregationLedger::min_uploads() const {
  long long m = LLONG_MAX;
  for (const long long v : uploads) m = std::min(m, v);
  return uploads.empty() ? 0 : m;
}

long long AggregationLedger::max_uploads() const {
  long long m = 0;
  for (const long long v : uploads) m = std::max(m, v);
  return m;
}

bool AggregationLedger::would_violate(int server) const {
  if (cap <= 0) return false;
  return uploads[static_cast<std::size_t>(server)] + 1 - min_uploads() > cap;
}

namespace {

struct EvalView {
  std::vector<int> devices;          // device indices with data
  std::vector<double> weights;       // renormalized p over those devices
  const Partition* part = nullptr;
  const Dataset* ds = nullptr;
};

EvalView make_eval_view(const SystemProfile& sys, const Partition& part, const Dataset& ds) {
  if (part.indices.size() != sys.devices.size())
    throw ConfigError("partition does not cover the device list");
  EvalView view;
  view.part = &part;
  view.ds = &ds;
  double total = 0.0;
  for (std::size_t i = 0; i < sys.devices.size(); ++i) {
    if (part.indices[i].empty()) continue;
    view.devices.push_back(static_cast<int>(i));
    view.weights.push_back(sys.devices[i].weight);
    total += sys.devices[i].weight;
  }
  if (view.devices.empty() || !(total > 0.0))
    throw ConfigError("no device holds any evaluation data");
  for (auto& w : view.weights) w /= total;
  return view;
}

// p_k-weighted global objective and accuracy, evaluated blockwise with a
// fixed accumulation order.
std::pair<double, double> evaluate_global(const EvalView& view, const ModelParams& model) {
  constexpr int kBlock = 4096;
  double total_loss = 0.0, total_acc = 0.0;
  for (std::size_t d = 0; d < view.devices.size(); ++d) {
    const auto& idxs = view.part->indices[static_cast<std::size_t>(view.devices[d])];
    double dev_loss = 0.0;
    long long correct = 0;
    for (std::size_t at = 0; at < idxs.size(); at += kBlock) {
      const std::size_t hi = std::min(idxs.size(), at + kBlock);
      const std::vector<int> block(idxs.begin() + static_cast<std::ptrdiff_t>(at),
                                   idxs.begin() + static_cast<std::ptrdiff_t>(hi));
      auto [x, y] = gather(*view.ds, block);
      dev_loss += loss(model, x, y) * static_cast<double>(block.size());
      correct += llround(accuracy(model, x, y) * static_cast<double>(block.size()));
    }
    const double n = static_cast<double>(idxs.size());
    total_loss += view.weights[d] * (dev_loss / n);
    total_acc += view.weights[d] * (static_cast<double>(correct) / n);
  }
  return {total_loss, total_acc};
}

// One coordination round of local SGD. The batch stream is keyed by
// (seed, device, round) so replay does not depend on event order.
ModelParams local_round(const ModelParams& start, const Dataset& ds,
                        const std::vector<int>& part_idx, int epochs, int batch,
                        const LRSchedule& sched, std::uint64_t seed, int dev_index,
                        long long seq) {
  Rng rng = round_stream(seed, dev_index, seq);
  ModelParams w = start;
  std::vector<int> draw(static_cast<std::size_t>(batch));
  for (int j = 0; j < epochs; ++j) {
    for (auto& b : draw) b = part_idx[rng.uniform_below(part_idx.size())];
    const double eta = sched.at(seq * epochs + j, seq);
    w = sgd_step(w, gradient(w, ds, draw), eta);
  }
  return w;
}

std::vector<double> renormalized_weights(const SystemProfile& sys,
                                         const std::vector<std::string>& selected) {
  std::vector<double> w;
  double total = 0.0;
  for (const auto& id : selected) {
    w.push_back(sys.device(id).weight);
    total += w.back();
  }
  if (!(total > 0.0)) throw ConfigError("selected servers carry zero total weight");
  for (auto& v : w) v /= total;
  return w;
}

void check_partitions_cover(const SystemProfile& sys, const Partition& part,
                            const std::vector<std::string>& selected) {
  if (part.indices.size() != sys.devices.size())
    throw ConfigError("partition does not cover the device list");
  for (const auto& id : selected)
    if (part.indices[static_cast<std::size_t>(sys.device_index(id))].empty())
      throw ConfigError("selected device '" + id + "' has an empty partition");
}

}  // namespace

RunTrace run_sync(const RunConfig& config, const SystemProfile& sys, const Partition& part,
                  const Dataset& ds, const SyncRoundObserver& observer) {
  config.validate(sys);
  sys.validate();
  check_partitions_cover(sys, part, config.plan.selected);
  const auto view = make_eval_view(sys, part, ds);
  const auto weights = renormalized_weights(sys, config.plan.selected);
  const auto& plan = config.plan;
  if (!(round_time_sync(sys, plan).seconds > 0.0))
    throw ConfigError("per-round time must be positive");

  RunTrace trace;
  ModelParams global = ModelParams::zeros(ds.dim(), ds.num_classes);
  double clock = 0.0;

  const auto eval_and_record = [&](long long round, const std::string& slowest) {
    const auto [l, a] = evaluate_global(view, global);
    trace.records.push_back({round, clock, l, a, slowest});
    if (!std::isfinite(l)) {
      trace.final_model = global;
      throw DivergenceError(std::move(trace));
    }
    return l;
  };

  double current = eval_and_record(0, "");
  if (config.stop.target_loss && current <= *config.stop.target_loss) {
    trace.reached_target = true;
    trace.final_model = global;
    return trace;
  }

  std::vector<ModelParams> locals(plan.selected.size());
  for (long long r = 1;; ++r) {
    for (std::size_t k = 0; k < plan.selected.size(); ++k) {
      const auto& id = plan.selected[k];
      const int dev = sys.device_index(id);
      locals[k] = local_round(global, ds, part.indices[static_cast<std::size_t>(dev)],
                              plan.epochs_of(id), plan.batch_of(id), config.schedule,
                              config.seed, dev, r - 1);
    }
    ModelParams agg = ModelParams::zeros(ds.dim(), ds.num_classes);
    for (std::size_t k = 0; k < locals.size(); ++k) {
      agg.weights += weights[k] * locals[k].weights;
      agg.bias += weights[k] * locals[k].bias;
    }
    global = std::move(agg);
    if (observer) observer(r, locals, weights, global);

    const auto rt = round_time_sync(sys, plan);
    clock += rt.seconds;
    for (const auto& id : plan.selected) {
      ++trace.rounds_completed[id];
      trace.mean_round_s[id] += round_cost(sys, sys.device(id), plan.batch_of(id),
                                           plan.epochs_of(id));
    }

    const bool out_of_rounds = config.stop.max_rounds && r >= *config.stop.max_rounds;
    const bool out_of_time =
        config.stop.max_wallclock_s && clock >= *config.stop.max_wallclock_s;
    const bool eval_now = (r % config.eval_every == 0) || out_of_rounds || out_of_time;
    if (!eval_now) continue;

    current = eval_and_record(r, rt.slowest_id);
    if (config.stop.target_loss && current <= *config.stop.target_loss) {
      trace.reached_target = true;
      break;
    }
    if (out_of_rounds || out_of_time) break;
  }

  for (auto& [id, total] : trace.mean_round_s)
    total /= static_cast<double>(trace.rounds_completed[id]);
  trace.final_model = global;
  return trace;
}

namespace {

// Forwarding pattern: 1-based round r of a slow server is executed by its
// helper iff floor(r a) - floor((r-1) a) >= 1, giving floor(R a) forwarded
// rounds among the first R.
bool is_forwarded_round(long long seq0, double alpha) {
  if (alpha <= 0.0) return false;
  if (alpha >= 1.0) return true;
  const double r = static_cast<double>(seq0 + 1);
  return std::floor(r * alpha) > std::floor((r - 1.0) * alpha);
}

struct AsyncActor {
  int dev = -1;
  std::string id;
  int tie = 0;  // rank of id, for deterministic tie-breaks
  int epochs = 0, batch = 0;
  double c_own = 0.0;
  const std::vector<int>* part = nullptr;

  // pair wiring
  int helper = -1;   // actor executing this actor's forwarded rounds
  int client = -1;   // actor whose forwarded rounds this actor executes
  double alpha = 0.0;
  double c_fwd = 0.0;  // round cost when the helper takes over

  // stream cursors (owner role)
  long long local_cursor = 0;
  long long fwd_cursor = 0;
  long long frontier = 0;  // forwarded seq < frontier may be claimed

  // executor state
  bool busy = false;
  bool own_outstanding = false;
  bool last_was_fwd = false;

  // in-flight work
  int work_origin = -1;
  long long work_seq = 0;
  bool work_own = false;
  ModelParams work_delta;

  // stats
  long long own_rounds_done = 0;
  double own_seconds = 0.0;
  long long outstanding = 0;  // computed-but-unapplied updates of this stream
};

long long advance_cursor(long long cursor, double alpha, bool want_forwarded) {
  long long s = cursor;
  while (is_forwarded_round(s, alpha) != want_forwarded) ++s;
  return s;
}

}  // namespace

RunTrace run_async(const RunConfig& config, const SystemProfile& sys, const Partition& part,
                   const Dataset& ds) {
  config.validate(sys);
  sys.validate();
  check_partitions_cover(sys, part, config.plan.selected);
  const auto view = make_eval_view(sys, part, ds);
  const auto weights = renormalized_weights(sys, config.plan.selected);
  const auto& plan = config.plan;

  std::vector<AsyncActor> actors(plan.selected.size());
  for (std::size_t k = 0; k < plan.selected.size(); ++k) {
    auto& a = actors[k];
    a.id = plan.selected[k];
    a.dev = sys.device_index(a.id);
    a.epochs = plan.epochs_of(a.id);
    a.batch = plan.batch_of(a.id);
    a.c_own = round_cost(sys, sys.devices[static_cast<std::size_t>(a.dev)], a.batch, a.epochs);
    a.part = &part.indices[static_cast<std::size_t>(a.dev)];
    if (!(a.c_own > 0.0)) throw ConfigError("per-round time must be positive");
  }
  {  // lexicographic tie ranks
    std::vector<int> order(actors.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(),
              [&](int l, int r) { return actors[static_cast<std::size_t>(l)].id <
                                         actors[static_cast<std::size_t>(r)].id; });
    for (std::size_t rank = 0; rank < order.size(); ++rank)
      actors[static_cast<std::size_t>(order[rank])].tie = static_cast<int>(rank);
  }
  const auto actor_of = [&](const std::string& id) {
    for (std::size_t i = 0; i < actors.size(); ++i)
      if (actors[i].id == id) return static_cast<int>(i);
    return -1;
  };
  for (const auto& p : plan.pairs) {
    const int slow = actor_of(p.slow_id);
    const int fast = actor_of(p.fast_id);
    auto& s = actors[static_cast<std::size_t>(slow)];
    auto& f = actors[static_cast<std::size_t>(fast)];
    if (s.helper >= 0 || s.client >= 0 || f.helper >= 0 || f.client >= 0)
      throw ConfigError("a server may appear in at most one forwarding pair");
    s.helper = fast;
    s.alpha = p.alpha;
    s.c_fwd = pair_round_cost(sys, sys.devices[static_cast<std::size_t>(s.dev)],
                              sys.devices[static_cast<std::size_t>(f.dev)], s.batch, s.epochs);
    if (p.alpha > 0.0 && !(s.c_fwd > 0.0))
      throw ConfigError("forwarded round time must be positive");
    if (s.alpha >= 1.0) s.frontier = LLONG_MAX;  // no local rounds gate the stream
    f.client = slow;
  }

  AggregationLedger ledger;
  ledger.uploads.assign(actors.size(), 0);
  ledger.cap = plan.staleness_cap;

  RunTrace trace;
  ModelParams global = ModelParams::zeros(ds.dim(), ds.num_classes);
  long long total_aggregations = 0;

  // Event queue keyed by (time, id rank). Each actor has at most one event.
  using Event = std::pair<double, int>;  // (completion time, tie rank)
  const auto event_less = [](const Event& l, const Event& r) {
    return l.first > r.first || (l.first == r.first && l.second > r.second);
  };
  std::priority_queue<Event, std::vector<Event>, decltype(event_less)> events(event_less);
  std::vector<int> by_tie(actors.size());
  for (std::size_t i = 0; i < actors.size(); ++i) by_tie[static_cast<std::size_t>(actors[i].tie)] = static_cast<int>(i);

  struct Pending {
    double ready = 0.0;
    int origin = -1;
    long long seq = 0;
    bool own = false;
    ModelParams delta;
  };
  std::vector<Pending> pending;

  const auto stream_gate_open = [&](int origin, long long extra) {
    if (ledger.cap <= 0) return true;
    const auto& a = actors[static_cast<std::size_t>(origin)];
    return ledger.uploads[static_cast<std::size_t>(origin)] + a.outstanding + extra + 1 -
               ledger.min_uploads() <=
           ledger.cap;
  };

  const auto start_work = [&](int idx, double now) {
    auto& a = actors[static_cast<std::size_t>(idx)];
    if (a.busy) return;
    const bool fwd_ok = a.client >= 0 && [&] {
      auto& c = actors[static_cast<std::size_t>(a.client)];
      if (!(c.alpha > 0.0)) return false;
      const long long s = advance_cursor(c.fwd_cursor, c.alpha, true);
      return s < c.frontier && stream_gate_open(a.client, 0);
    }();
    const bool own_ok = !a.own_outstanding && !(a.helper >= 0 && a.alpha >= 1.0);
    bool do_fwd = false;
    if (fwd_ok && own_ok)
      do_fwd = !a.last_was_fwd;
    else if (fwd_ok)
      do_fwd = true;
    else if (!own_ok)
      return;  // blocked

    if (do_fwd) {
      auto& c = actors[static_cast<std::size_t>(a.client)];
      const long long s = advance_cursor(c.fwd_cursor, c.alpha, true);
      c.fwd_cursor = s + 1;
      const ModelParams w_end = local_round(global, ds, *c.part, c.epochs, c.batch,
                                            config.schedule, config.seed, c.dev, s);
      a.work_origin = a.client;
      a.work_seq = s;
      a.work_own = false;
      a.work_delta.weights = w_end.weights - global.weights;
      a.work_delta.bias = w_end.bias - global.bias;
      a.last_was_fwd = true;
      ++c.outstanding;
      a.busy = true;
      events.push({now + c.c_fwd, a.tie});
    } else {
      const long long s = advance_cursor(a.local_cursor, a.alpha, false);
      a.local_cursor = s + 1;
      if (a.frontier != LLONG_MAX) a.frontier = std::max(a.frontier, s);
      const ModelParams w_end = local_round(global, ds, *a.part, a.epochs, a.batch,
                                            config.schedule, config.seed, a.dev, s);
      a.work_origin = idx;
      a.work_seq = s;
      a.work_own = true;
      a.work_delta.weights = w_end.weights - global.weights;
      a.work_delta.bias = w_end.bias - global.bias;
      a.last_was_fwd = false;
      a.own_outstanding = true;
      ++a.outstanding;
      ++a.own_rounds_done;
      a.own_seconds += a.c_own;
      a.busy = true;
      events.push({now + a.c_own, a.tie});
    }
  };

  // Applies every pending update whose gate is open, oldest first; returns
  // the number applied.
  const auto drain_pending = [&](double now) {
    long long applied = 0;
    for (;;) {
      int best = -1;
      for (std::size_t i = 0; i < pending.size(); ++i) {
        if (ledger.cap > 0 &&
            ledger.uploads[static_cast<std::size_t>(pending[i].origin)] + 1 -
                    ledger.min_uploads() >
                ledger.cap)
          continue;
        if (best < 0) {
          best = static_cast<int>(i);
          continue;
        }
        const auto& p = pending[static_cast<std::size_t>(i)];
        const auto& b = pending[static_cast<std::size_t>(best)];
        const int pt = actors[static_cast<std::size_t>(p.origin)].tie;
        const int bt = actors[static_cast<std::size_t>(b.origin)].tie;
        if (p.ready < b.ready || (p.ready == b.ready && (pt < bt || (pt == bt && p.seq < b.seq))))
          best = static_cast<int>(i);
      }
      if (best < 0) break;
      Pending item = std::move(pending[static_cast<std::size_t>(best)]);
      pending.erase(pending.begin() + best);
      auto& origin = actors[static_cast<std::size_t>(item.origin)];
      const double w = weights[static_cast<std::size_t>(item.origin)];
      global.weights += w * item.delta.weights;
      global.bias += w * item.delta.bias;
      ledger.record(item.origin);
      --origin.outstanding;
      ++trace.rounds_completed[origin.id];
      ++total_aggregations;
      ++applied;
      trace.max_ledger_gap = std::max(trace.max_ledger_gap, ledger.gap());
      if (ledger.cap > 0 && ledger.gap() > ledger.cap)
        throw SimError("staleness ledger gap exceeded tau");  // engine invariant
      if (item.own) {
        origin.own_outstanding = false;
        start_work(item.origin, now);
      }
    }
    return applied;
  };

  const auto least_aggregated_id = [&]() {
    int best = -1;
    for (const int idx : by_tie) {
      if (best < 0 ||
          ledger.uploads[static_cast<std::size_t>(idx)] < ledger.uploads[static_cast<std::size_t>(best)])
        best = idx;
    }
    return actors[static_cast<std::size_t>(best)].id;
  };

  const auto eval_and_record = [&](double at) {
    const auto [l, a] = evaluate_global(view, global);
    trace.records.push_back({total_aggregations, at, l, a, least_aggregated_id()});
    if (!std::isfinite(l)) {
      trace.final_model = global;
      throw DivergenceError(std::move(trace));
    }
    return l;
  };

  const auto finalize = [&](bool reached) {
    for (const auto& a : actors)
      if (a.own_rounds_done > 0)
        trace.mean_round_s[a.id] = a.own_seconds / static_cast<double>(a.own_rounds_done);
    trace.reached_target = reached;
    trace.final_model = global;
  };

  double current = eval_and_record(0.0);
  if (config.stop.target_loss && current <= *config.stop.target_loss) {
    finalize(true);
    return trace;
  }

  for (const int idx : by_tie) start_work(idx, 0.0);
  double next_eval = config.eval_grid_s;

  for (;;) {
    if (events.empty()) {
      if (!pending.empty()) throw SimError("staleness deadlock: every server is blocked");
      throw SimError("no runnable server");
    }
    const auto [t, rank] = events.top();
    events.pop();

    // Grid evaluations strictly before this event see the pre-event state.
    while (next_eval < t) {
      if (config.stop.max_wallclock_s && next_eval >= *config.stop.max_wallclock_s) break;
      current = eval_and_record(next_eval);
      next_eval += config.eval_grid_s;
      if (config.stop.target_loss && current <= *config.stop.target_loss) {
        finalize(true);
        return trace;
      }
    }
    if (config.stop.max_wallclock_s && t > *config.stop.max_wallclock_s) {
      const double limit = *config.stop.max_wallclock_s;
      if (trace.records.empty() || trace.records.back().wallclock_s < limit)
        eval_and_record(limit);
      finalize(false);
      return trace;
    }

    const int idx = by_tie[static_cast<std::size_t>(rank)];
    auto& a = actors[static_cast<std::size_t>(idx)];
    assert(a.busy);
    a.busy = false;
    pending.push_back({t, a.work_origin, a.work_seq, a.work_own, std::move(a.work_delta)});
    a.work_origin = -1;
    drain_pending(t);

    if (config.stop.max_rounds && total_aggregations >= *config.stop.max_rounds) {
      if (trace.records.empty() || trace.records.back().wallclock_s < t) eval_and_record(t);
      finalize(false);
      return trace;
    }

    // Completion or unblocking may free any idle actor (gates moved).
    for (const int i : by_tie)
      if (!actors[static_cast<std::size_t>(i)].busy) start_work(i, t);
  }
}

RunTrace run(const RunConfig& config, const SystemProfile& sys, const Partition& part,
             const Dataset& ds) {
  return config.mode == RunConfig::Mode::sync ? run_sync(config, sys, part, ds)
                                              : run_async(config, sys, part, ds);
}

std::optional<double> time_to_target_loss(const RunTrace& trace, double epsilon) {
  for (const auto& r : trace.records)
    if (r.loss <= epsilon) return r.wallclock_s;
  return std::nullopt;
}

std::optional<double> time_to_target_accuracy(const RunTrace& trace, double target) {
  for (const auto& r : trace.records)
    if (r.accuracy >= target) return r.wallclock_s;
  return std::nullopt;
}

std::optional<long long> rounds_to_target_loss(const RunTrace& trace, double epsilon) {
  for (const auto& r : trace.records)
    if (r.loss <= epsilon) return r.round;
  return std::nullopt;
}

void write_trace_csv(const RunTrace& trace, std::ostream& out) {
  out << "round,wallclock_s,loss,accuracy,slowest_server\n";
  char line[256];
  for (const auto& r : trace.records) {
    std::snprintf(line, sizeof(line), "%lld,%.9f,%.12g,%.6f,%s\n", r.round, r.wallclock_s,
                  r.loss, r.accuracy, r.slowest.c_str());
    out << line;
  }
}

}  // namespace fedtime
