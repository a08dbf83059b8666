// Acceptance suite: one pass/fail line per criterion, exit nonzero on any
// failure. Each criterion pins its tolerance in code.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "fedtime/estimate.hpp"
#include "fedtime/fedsim.hpp"
#include "fedtime/plan.hpp"
#include "fedtime/rng.hpp"

using namespace fedtime;

namespace {

struct Check {
  std::string name;
  std::function<std::string()> body;  // returns detail text; throws on failure
};

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

DeviceProfile dev(const std::string& id, double a, double b, double beta, double p,
                  double lambda = 0.0) {
  DeviceProfile d;
  d.id = id;
  d.sample_upload_s = a;
  d.sample_compute_s = b;
  d.step_overhead_s = beta;
  d.sample_forward_s = lambda;
  d.weight = p;
  return d;
}

// ---------------------------------------------------------------- criterion 1

std::string timing_model_fidelity() {
  struct Row {
    double b, beta, n, e, recorded;
  };
  const Row rows[] = {
      {1.4e-5, 5.2e-4, 400, 10, 0.0618},  {1.4e-5, 5.2e-4, 400, 20, 0.1236},
      {1.4e-5, 5.2e-4, 400, 30, 0.1856},  {1.4e-5, 5.2e-4, 1000, 10, 0.1472},
      {1.4e-5, 5.2e-4, 1000, 20, 0.2908}, {1.4e-5, 5.2e-4, 1000, 30, 0.4377},
      {7e-5, 0.01, 400, 10, 0.3815},      {7e-5, 0.01, 400, 20, 0.7615},
      {7e-5, 0.01, 400, 30, 1.1408},      {7e-5, 0.01, 1000, 10, 0.8013},
      {7e-5, 0.01, 1000, 20, 1.6003},     {7e-5, 0.01, 1000, 30, 2.4014},
  };
  int within_2 = 0;
  double worst = 0.0;
  for (const auto& r : rows) {
    const auto d = dev("pi", 0, r.b, r.beta, 1);
    const double predicted =
        compute_time(d, static_cast<long long>(r.n), static_cast<long long>(r.e));
    const double rel = std::abs(predicted - r.recorded) / r.recorded;
    worst = std::max(worst, rel);
    if (rel < 0.02) ++within_2;
    require(rel < 0.10, "entry (n=" + std::to_string(r.n) + ", e=" + std::to_string(r.e) +
                            ") off by " + std::to_string(100 * rel) + "%");
  }
  char buf[128];
  std::snprintf(buf, sizeof(buf), "12/12 entries within 10%%, %d/12 within 2%%, worst %.2f%%",
                within_2, 100 * worst);
  return buf;
}

// ---------------------------------------------------------------- criterion 2

std::string gradient_correctness() {
  Rng rng(101);
  const double h = 1e-5;
  double worst = 0.0;
  for (int draw = 0; draw < 100; ++draw) {
    const int dim = rng.uniform_int(2, 6);
    const int classes = rng.uniform_int(2, 5);
    const int batch = rng.uniform_int(1, 8);
    ModelParams p = ModelParams::zeros(dim, classes);
    for (int i = 0; i < dim; ++i)
      for (int c = 0; c < classes; ++c) p.weights(i, c) = rng.normal();
    for (int c = 0; c < classes; ++c) p.bias(c) = rng.normal();
    Eigen::MatrixXd x(batch, dim);
    std::vector<int> y(static_cast<std::size_t>(batch));
    for (int i = 0; i < batch; ++i) {
      for (int j = 0; j < dim; ++j) x(i, j) = rng.uniform01();
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_below(classes));
    }
    const ModelParams g = gradient(p, x, y);
    const auto check_coord = [&](double analytic, double fd) {
      const double rel = std::abs(analytic - fd) / std::max(std::abs(fd), 1e-6);
      worst = std::max(worst, rel);
      require(rel <= 1e-5, "gradient coordinate off by relative " + std::to_string(rel));
    };
    for (int i = 0; i < dim; ++i)
      for (int c = 0; c < classes; ++c) {
        ModelParams up = p, dn = p;
        up.weights(i, c) += h;
        dn.weights(i, c) -= h;
        check_coord(g.weights(i, c), (loss(up, x, y) - loss(dn, x, y)) / (2 * h));
      }
    for (int c = 0; c < classes; ++c) {
      ModelParams up = p, dn = p;
      up.bias(c) += h;
      dn.bias(c) -= h;
      check_coord(g.bias(c), (loss(up, x, y) - loss(dn, x, y)) / (2 * h));
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "100 draws, worst relative error %.2e", worst);
  return buf;
}

// ---------------------------------------------------------------- criterion 3

struct RandomFed {
  SystemProfile sys;
  Dataset ds;
  Partition part;
  RunConfig rc;
};

RandomFed random_fed(Rng& rng, int max_servers, long long rounds, bool async_mode) {
  RandomFed f;
  const int k = rng.uniform_int(1, max_servers);
  f.sys.model_distribute_s = rng.uniform(0.01, 0.2);
  f.sys.model_upload_s = rng.uniform(0.01, 0.2);
  std::vector<std::string> ids;
  std::vector<double> raw;
  for (int i = 0; i < k; ++i) raw.push_back(rng.uniform(0.2, 1.0));
  double total = 0.0;
  for (const double w : raw) total += w;
  for (int i = 0; i < k; ++i) {
    ids.push_back("r" + std::to_string(i));
    f.sys.devices.push_back(dev(ids.back(), rng.uniform(0, 1e-4), rng.uniform(0, 1e-5),
                                rng.uniform(0.005, 0.3), raw[static_cast<std::size_t>(i)] / total));
  }
  f.ds = synth_classification(rng.uniform_int(2, 5), rng.uniform_int(3, 8),
                              rng.uniform_int(10, 30), 4.0, rng.next_u64());
  f.part.indices.resize(static_cast<std::size_t>(k));
  f.part.labels.resize(static_cast<std::size_t>(k));
  for (int i = 0; i < f.ds.size(); ++i)
    f.part.indices[static_cast<std::size_t>(i % k)].push_back(i);
  f.rc.mode = async_mode ? RunConfig::Mode::async : RunConfig::Mode::sync;
  f.rc.plan = TrainPlan::uniform(ids, rng.uniform_int(1, 4), rng.uniform_int(2, 12));
  f.rc.schedule.eta0 = rng.uniform(0.05, 0.5);
  f.rc.schedule.decay = rng.uniform(0.97, 1.0);
  f.rc.stop.max_rounds = rounds;
  f.rc.stop.max_wallclock_s = 1e9;
  f.rc.seed = rng.next_u64();
  f.rc.eval_grid_s = 0.5;
  return f;
}

std::string virtual_sequence_identity() {
  Rng rng(202);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    RandomFed f = random_fed(rng, 5, rng.uniform_int(3, 20), false);
    long long rounds_seen = 0;
    const SyncRoundObserver observer = [&](long long, const std::vector<ModelParams>& locals,
                                           const std::vector<double>& weights,
                                           const ModelParams& aggregated) {
      ModelParams sum = ModelParams::zeros(locals[0].input_dim(), locals[0].num_classes());
      for (std::size_t i = locals.size(); i-- > 0;) {
        sum.weights += weights[i] * locals[i].weights;
        sum.bias += weights[i] * locals[i].bias;
      }
      const double diff =
          std::max((sum.weights - aggregated.weights).cwiseAbs().maxCoeff(),
                   (sum.bias - aggregated.bias).cwiseAbs().maxCoeff());
      worst = std::max(worst, diff);
      require(diff <= 1e-12, "virtual-sequence gap " + std::to_string(diff));
      ++rounds_seen;
    };
    run_sync(f.rc, f.sys, f.part, f.ds, observer);
    require(rounds_seen > 0, "observer never fired");
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "50 runs, worst coordinate gap %.2e", worst);
  return buf;
}

// ---------------------------------------------------------------- criterion 4

std::string staleness_invariant() {
  Rng rng(303);
  const int taus[] = {1, 2, 4};
  for (int trial = 0; trial < 50; ++trial) {
    RandomFed f = random_fed(rng, 5, rng.uniform_int(10, 40), true);
    if (f.rc.plan.selected.size() < 2) f = random_fed(rng, 5, 25, true);
    f.rc.plan.staleness_cap = taus[trial % 3];
    const RunTrace trace = run_async(f.rc, f.sys, f.part, f.ds);
    require(trace.max_ledger_gap <= f.rc.plan.staleness_cap,
            "ledger gap " + std::to_string(trace.max_ledger_gap) + " exceeded tau " +
                std::to_string(f.rc.plan.staleness_cap));
  }

  // Unbounded tau: the gap grows with simulated time on a heterogeneous pair.
  SystemProfile sys;
  sys.model_distribute_s = 0.02;
  sys.model_upload_s = 0.02;
  sys.devices = {dev("fast", 0, 0, 0.02, 0.5), dev("slow", 0, 0, 0.7, 0.5)};
  const Dataset ds = synth_classification(3, 5, 20, 4.0, 7);
  Partition part;
  part.indices.resize(2);
  part.labels.resize(2);
  for (int i = 0; i < ds.size(); ++i)
    part.indices[static_cast<std::size_t>(i % 2)].push_back(i);
  RunConfig rc;
  rc.mode = RunConfig::Mode::async;
  rc.plan = TrainPlan::uniform({"fast", "slow"}, 1, 4);
  rc.schedule.eta0 = 0.1;
  rc.seed = 5;
  rc.eval_grid_s = 5.0;
  rc.stop.max_wallclock_s = 20.0;
  rc.stop.max_rounds = 1000000;
  const int gap_short = run_async(rc, sys, part, ds).max_ledger_gap;
  rc.stop.max_wallclock_s = 100.0;
  const int gap_long = run_async(rc, sys, part, ds).max_ledger_gap;
  require(gap_long > gap_short,
          "gap did not grow: " + std::to_string(gap_short) + " -> " + std::to_string(gap_long));
  char buf[96];
  std::snprintf(buf, sizeof(buf), "50 capped runs clean; unbounded gap %d -> %d", gap_short,
                gap_long);
  return buf;
}

// ---------------------------------------------------------------- criterion 5

double bound_rounds(double loss_target, double e, double n, double a, double b, double c,
                    double d, double f_star) {
  return (a / n + b * e * e + c) / (e * (loss_target - f_star - d));
}

std::string estimation_recovery() {
  const std::vector<std::pair<double, double>> probes = {{5, 20},  {10, 50},  {20, 200},
                                                         {40, 500}, {60, 1000}, {8, 2000}};
  const double a = 5.0, b = 0.001, c = 40.0, f_star = 0.0;

  // Noise-free: 1e-6 relative on both fits.
  {
    const double d = 0.002;
    std::vector<ProbeObservation> obs;
    for (const auto& [e, n] : probes) {
      ProbeObservation ob;
      ob.epochs = e;
      ob.batch = n;
      ob.rounds_to_a = bound_rounds(0.1, e, n, a, b, c, d, f_star);
      ob.rounds_to_b = bound_rounds(0.05, e, n, a, b, c, d, f_star);
      ob.mean_round_s = {0.4 + 1.708e-4 * e * n + 5.2e-4 * e};
      obs.push_back(ob);
    }
    const BoundParams fit = fit_bound(obs, 0.1, 0.05, f_star);
    require(std::abs(fit.A - a) / a < 1e-6 && std::abs(fit.B - b) / b < 1e-6 &&
                std::abs(fit.C - c) / c < 1e-6 && std::abs(fit.D - d) / d < 1e-6,
            "noise-free bound recovery off");
    const TimingFit tf = fit_timing(obs, {"pi"});
    require(std::abs(tf.overhead_s() - 0.4) < 1e-6 * 0.4 &&
                std::abs(tf.alpha[0] - 1.708e-4) < 1e-6 * 1.708e-4 &&
                std::abs(tf.beta[0] - 5.2e-4) < 1e-6 * 5.2e-4,
            "noise-free timing recovery off");
  }

  // 1% multiplicative noise on the round counts: 15% relative over 20 seeds.
  // Probe design spans both axes so every constant contributes comparably.
  const std::vector<std::pair<double, double>> noise_probes = {
      {1, 1},  {2, 32},    {4, 4},   {8, 512},  {16, 8},
      {32, 2}, {48, 1024}, {64, 64}, {56, 128}, {40, 16}};
  const double na = 10.0, nb = 0.01, nc = 10.0, nd = 0.01;
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng noise(seed);
    std::vector<ProbeObservation> obs;
    for (const auto& [e, n] : noise_probes) {
      ProbeObservation ob;
      ob.epochs = e;
      ob.batch = n;
      ob.rounds_to_a = bound_rounds(0.3, e, n, na, nb, nc, nd, f_star) *
                       (1.0 + 0.01 * (2 * noise.uniform01() - 1));
      ob.rounds_to_b = bound_rounds(0.05, e, n, na, nb, nc, nd, f_star) *
                       (1.0 + 0.01 * (2 * noise.uniform01() - 1));
      obs.push_back(ob);
    }
    const BoundParams fit = fit_bound(obs, 0.3, 0.05, f_star);
    const double rel = std::max({std::abs(fit.A - na) / na, std::abs(fit.B - nb) / nb,
                                 std::abs(fit.C - nc) / nc, std::abs(fit.D - nd) / nd});
    worst = std::max(worst, rel);
    require(rel < 0.15, "seed " + std::to_string(seed) + " recovery off by " +
                            std::to_string(100 * rel) + "%");
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "exact to 1e-6; noisy worst error %.1f%% over 20 seeds",
                100 * worst);
  return buf;
}

// ---------------------------------------------------------------- criterion 6

std::string acs_optimality() {
  Rng rng(404);
  const IntDomain e_dom{1, 200}, n_dom{1, 2000};
  long long grid_evals = 0;
  for (int trial = 0; trial < 25; ++trial) {
    Objective obj;
    obj.bound.A = rng.uniform(0.0, 10.0);
    obj.bound.B = rng.uniform(0.0, 0.01);
    obj.bound.C = rng.uniform(0.0, 100.0);
    obj.bound.D = rng.uniform(0.0, 0.004);
    obj.epsilon = obj.bound.D + rng.uniform(0.001, 0.02);
    obj.timing.zeta = rng.uniform(0.005, 0.5);
    obj.timing.u = rng.uniform(0.005, 0.5);
    const bool async_variant = trial % 5 == 2;
    if (async_variant) {
      obj.bound.variant = BoundParams::Variant::async;
      obj.members = {"slow", "fast"};
      obj.member_weight = {0.5, 0.5};
      obj.timing.ids = obj.members;
      obj.timing.alpha = {rng.uniform(1e-5, 1e-3), rng.uniform(1e-6, 1e-4)};
      obj.timing.beta = {rng.uniform(1e-3, 0.05), rng.uniform(1e-4, 1e-2)};
      obj.pairs = {{"slow", "fast", 0.0}};
      obj.pair_en_coeff = {rng.uniform(1e-6, 5e-4)};
      obj.pair_e_coeff = {rng.uniform(1e-5, 1e-2)};
    } else {
      obj.members = {"m0"};
      obj.member_weight = {1.0};
      obj.timing.ids = obj.members;
      obj.timing.alpha = {rng.uniform(0.0, 1e-3)};
      obj.timing.beta = {rng.uniform(0.0, 0.02)};
    }
    // Fixed forwarding fraction per instance: alpha is a decision variable of
    // the surrounding problem, not of the (e, n) search.
    const std::vector<double> alphas(obj.pairs.size(), rng.uniform(0.0, 1.0));
    const auto value = [&](int e, int n) {
      return async_variant ? predicted_time_async(e, n, obj, alphas)
                           : predicted_time_sync(e, n, obj);
    };

    const AcsResult res = acs_search(value, e_dom, n_dom, 1e-12);
    for (std::size_t i = 1; i < res.trajectory.size(); ++i)
      require(res.trajectory[i] <= res.trajectory[i - 1] + 1e-12,
              "trajectory increased at half-step " + std::to_string(i));

    double best = 0.0;
    int best_e = 0, best_n = 0;
    bool first = true;
    for (int e = e_dom.lo; e <= e_dom.hi; ++e)
      for (int n = n_dom.lo; n <= n_dom.hi; ++n) {
        const double v = value(e, n);
        ++grid_evals;
        if (first || v < best) {
          first = false;
          best = v;
          best_e = e;
          best_n = n;
        }
      }
    require(res.predicted_s == best,
            "trial " + std::to_string(trial) + ": ACS " + std::to_string(res.predicted_s) +
                " vs grid " + std::to_string(best));
    require(res.e_star == best_e && res.n_star == best_n,
            "trial " + std::to_string(trial) + ": ACS argmin (" +
                std::to_string(res.e_star) + "," + std::to_string(res.n_star) +
                ") vs grid (" + std::to_string(best_e) + "," + std::to_string(best_n) + ")");
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "25 instances exact vs %lld-point grids", grid_evals / 25);
  return buf;
}

// ---------------------------------------------------------------- criterion 7

std::string alpha_star_correctness() {
  Rng rng(505);
  int interior = 0;
  double worst = 0.0;
  while (interior < 100) {
    SystemProfile sys;
    sys.model_distribute_s = rng.uniform(0.0, 0.3);
    sys.model_upload_s = rng.uniform(0.0, 0.3);
    sys.devices = {dev("s", rng.uniform(0, 1e-4), rng.uniform(0, 1e-4), rng.uniform(0.05, 2.0),
                       0.5, rng.uniform(0, 1e-3)),
                   dev("f", rng.uniform(0, 1e-5), rng.uniform(0, 1e-5), rng.uniform(0.001, 0.3),
                       0.5)};
    const int e = rng.uniform_int(1, 30);
    const int n = rng.uniform_int(1, 400);
    const long long rs = rng.uniform_int(1, 50);
    const long long rf = rng.uniform_int(1, 50);
    const double c_slow = round_cost(sys, sys.devices[0], n, e);
    const double c_fast = round_cost(sys, sys.devices[1], n, e);
    const double c_pair = pair_round_cost(sys, sys.devices[0], sys.devices[1], n, e);
    const double alpha = optimal_alpha(static_cast<double>(rs), c_slow,
                                       static_cast<double>(rf), c_fast, c_pair);
    if (!(alpha > 0.0 && alpha < 1.0)) continue;
    ++interior;
    TrainPlan plan = TrainPlan::uniform({"s", "f"}, e, n);
    const auto at = [&](double a) {
      return pair_times(sys, plan, ForwardPair{"s", "f", a}, rs, rf);
    };
    const PairTimes balanced = at(alpha);
    const double rel = std::abs(balanced.slow_branch - balanced.fast_branch) /
                       std::max(balanced.slow_branch, balanced.fast_branch);
    worst = std::max(worst, rel);
    require(rel <= 1e-9, "branch mismatch " + std::to_string(rel));
    require(balanced.overall() <= at(0.0).overall() + 1e-12,
            "alpha* worse than no forwarding");
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "100 interior pairs, worst branch mismatch %.2e", worst);
  return buf;
}

// ---------------------------------------------------------------- criterion 8

struct TrendFixture {
  SystemProfile sys;
  Dataset ds;
  Partition part;
};

RunConfig trend_config(const std::vector<std::string>& ids, int e, int n, double target,
                       long long max_rounds) {
  RunConfig rc;
  rc.plan = TrainPlan::uniform(ids, e, n);
  rc.schedule.eta0 = 0.5;
  rc.schedule.decay = 0.995;
  rc.stop.target_loss = target;
  rc.stop.max_rounds = max_rounds;
  rc.stop.max_wallclock_s = 1e9;
  rc.seed = 20;
  return rc;
}

std::string fig1_phenomenon() {
  // One server whose data-upload cost scales with n*e: big batches buy
  // fewer rounds but cost more seconds per round.
  TrendFixture f;
  f.sys.model_distribute_s = 0.2;
  f.sys.model_upload_s = 0.2;
  f.sys.devices = {dev("edge", 2e-3, 1e-5, 1e-3, 1.0)};
  f.ds = synth_classification(5, 8, 60, 4.0, 31);
  f.part.indices.resize(1);
  f.part.labels.resize(1);
  for (int i = 0; i < f.ds.size(); ++i) f.part.indices[0].push_back(i);

  const double target = 0.30;
  const RunTrace scheme1 = run_sync(trend_config({"edge"}, 1, 6, target, 4000), f.sys, f.part, f.ds);
  const RunTrace scheme2 = run_sync(trend_config({"edge"}, 6, 48, target, 4000), f.sys, f.part, f.ds);
  require(scheme1.reached_target && scheme2.reached_target, "a scheme missed the target");
  const long long r1 = *rounds_to_target_loss(scheme1, target);
  const long long r2 = *rounds_to_target_loss(scheme2, target);
  const double t1 = *time_to_target_loss(scheme1, target);
  const double t2 = *time_to_target_loss(scheme2, target);
  require(r2 < r1, "scheme 2 rounds " + std::to_string(r2) + " !< scheme 1 rounds " +
                       std::to_string(r1));
  require(t2 > t1, "scheme 2 seconds " + std::to_string(t2) + " !> scheme 1 seconds " +
                       std::to_string(t1));
  char buf[128];
  std::snprintf(buf, sizeof(buf), "rounds %lld < %lld while seconds %.1f > %.1f", r2, r1, t2,
                t1);
  return buf;
}

// ---------------------------------------------------------------- criterion 9

TrendFixture ten_server_fixture(bool unique_on_slow, std::uint64_t seed) {
  TrendFixture f;
  f.sys.model_distribute_s = 0.1;
  f.sys.model_upload_s = 0.1;
  for (int i = 0; i < 7; ++i)
    f.sys.devices.push_back(dev("fast" + std::to_string(i), 1.568e-5, 1.4e-5, 5.2e-4, 0.0));
  for (int i = 0; i < 3; ++i)
    f.sys.devices.push_back(dev("slow" + std::to_string(i), 1.568e-4, 7e-5, 0.7, 0.0));
  f.ds = synth_classification(10, 12, 80, 4.0, seed);
  PartitionSpec spec;
  spec.num_servers = 10;
  spec.labels_per_server = unique_on_slow ? 1 : 5;
  spec.unique_on_slow = unique_on_slow;
  spec.slow_servers = {7, 8, 9};
  spec.seed = seed + 1;
  f.part = make_partition(f.ds, spec);
  const auto w = size_weights(f.part);
  for (std::size_t i = 0; i < w.size(); ++i) f.sys.devices[i].weight = w[i];
  return f;
}

std::vector<std::string> drop_order(const TrendFixture& f, int e, int n) {
  std::vector<std::string> order;
  for (const auto& d : f.sys.devices) order.push_back(d.id);
  std::stable_sort(order.begin(), order.end(), [&](const std::string& l, const std::string& r) {
    const double cl = round_cost(f.sys, f.sys.device(l), n, e);
    const double cr = round_cost(f.sys, f.sys.device(r), n, e);
    return cl > cr || (cl == cr && l < r);
  });
  return order;
}

std::string fig4_u_shape() {
  TrendFixture f = ten_server_fixture(false, 41);
  const int e = 2, n = 16;
  const double target = 0.32;
  const auto order = drop_order(f, e, n);

  std::vector<double> seconds;
  std::vector<long long> rounds;
  for (int drops = 0; drops <= 7; ++drops) {
    RunConfig rc = trend_config({}, e, n, target, 3000);
    rc.plan = TrainPlan::uniform(
        std::vector<std::string>(order.begin() + drops, order.end()), e, n);
    const RunTrace trace = run_sync(rc, f.sys, f.part, f.ds);
    require(trace.reached_target, "drop count " + std::to_string(drops) + " missed target");
    seconds.push_back(*time_to_target_loss(trace, target));
    rounds.push_back(*rounds_to_target_loss(trace, target));
  }
  require(seconds[1] < seconds[0], "first drop did not reduce time-to-target");
  require(seconds[7] > seconds[1], "time-to-target failed to rise by seven drops");
  for (std::size_t i = 1; i < rounds.size(); ++i)
    require(rounds[i] >= rounds[i - 1],
            "rounds-to-target decreased at drop " + std::to_string(i));
  char buf[160];
  std::snprintf(buf, sizeof(buf), "seconds %.0f -> %.0f (1 drop) -> %.0f (7 drops); rounds %lld..%lld",
                seconds[0], seconds[1], seconds[7], rounds[0], rounds[7]);
  return buf;
}

// --------------------------------------------------------------- criterion 10

std::string scenario_b_guard() {
  TrendFixture f = ten_server_fixture(true, 59);
  const int e = 2, n = 16;
  const double target = 0.45;
  const long long budget = 1500;

  RunConfig full = trend_config({}, e, n, target, budget);
  std::vector<std::string> all;
  for (const auto& d : f.sys.devices) all.push_back(d.id);
  full.plan = TrainPlan::uniform(all, e, n);
  const RunTrace full_trace = run_sync(full, f.sys, f.part, f.ds);
  require(full_trace.reached_target, "full participation missed the target");

  std::vector<std::string> kept;
  for (const auto& id : all)
    if (id.rfind("slow", 0) != 0) kept.push_back(id);
  RunConfig dropped = trend_config({}, e, n, target, budget);
  dropped.plan = TrainPlan::uniform(kept, e, n);
  const RunTrace dropped_trace = run_sync(dropped, f.sys, f.part, f.ds);
  require(!dropped_trace.reached_target,
          "dropping unique-label servers still reached the target");
  char buf[128];
  std::snprintf(buf, sizeof(buf), "full reaches %.2f in %lld rounds; dropped floor %.3f > %.2f",
                target, full_trace.records.back().round, dropped_trace.records.back().loss,
                target);
  return buf;
}

// --------------------------------------------------------------- criterion 11

std::string async_benefit() {
  TrendFixture f = ten_server_fixture(false, 73);
  const int e = 2, n = 16;
  const double target = 0.32;
  const auto order = drop_order(f, e, n);

  const auto measure = [&](bool async_mode, int drops) {
    RunConfig rc = trend_config({}, e, n, target, 4000);
    rc.plan = TrainPlan::uniform(
        std::vector<std::string>(order.begin() + drops, order.end()), e, n);
    if (async_mode) {
      rc.mode = RunConfig::Mode::async;
      rc.plan.staleness_cap = 4;
      rc.eval_grid_s = 0.25;
      rc.stop.max_rounds = 100000;
      rc.stop.max_wallclock_s = 1e7;
    }
    const RunTrace trace = run(rc, f.sys, f.part, f.ds);
    require(trace.reached_target, std::string(async_mode ? "async" : "sync") + " with " +
                                      std::to_string(drops) + " drops missed the target");
    return *time_to_target_loss(trace, target);
  };

  const double sync_full = measure(false, 0);
  const double async_full = measure(true, 0);
  require(async_full < sync_full, "async " + std::to_string(async_full) +
                                      " not faster than sync " + std::to_string(sync_full));
  const double sync_drop = measure(false, 3);
  const double async_drop = measure(true, 3);
  const double ratio_full = sync_full / async_full;
  const double ratio_drop = sync_drop / async_drop;
  require(ratio_drop < ratio_full, "advantage did not shrink: ratio " +
                                       std::to_string(ratio_full) + " -> " +
                                       std::to_string(ratio_drop));
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "full: %.0fs sync vs %.0fs async (x%.2f); dropped: x%.2f", sync_full,
                async_full, ratio_full, ratio_drop);
  return buf;
}

}  // namespace

int main() {
  const std::vector<Check> checks = {
      {"1. timing-model fidelity", timing_model_fidelity},
      {"2. gradient correctness", gradient_correctness},
      {"3. virtual-sequence identity", virtual_sequence_identity},
      {"4. staleness invariant", staleness_invariant},
      {"5. estimation recovery", estimation_recovery},
      {"6. acs optimality", acs_optimality},
      {"7. alpha-star correctness", alpha_star_correctness},
      {"8. fewer rounds vs more seconds", fig1_phenomenon},
      {"9. drop-count u-shape", fig4_u_shape},
      {"10. unique-label drop guard", scenario_b_guard},
      {"11. async benefit shrinks without stragglers", async_benefit},
  };
  int failures = 0;
  for (const auto& check : checks) {
    const auto start = std::chrono::steady_clock::now();
    try {
      const std::string detail = check.body();
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("[PASS] %-45s %s (%.1fs)\n", check.name.c_str(), detail.c_str(), secs);
    } catch (const std::exception& e) {
      const double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::printf("[FAIL] %-45s %s (%.1fs)\n", check.name.c_str(), e.what(), secs);
      ++failures;
    }
    std::fflush(stdout);
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures == 0 ? 0 : 1;
}
