#include <doctest.h>

#include <cmath>

#include "fedtime/plan.hpp"
#include "fedtime/rng.hpp"

using namespace fedtime;

namespace {

TimingFit single_timing(double overhead, double alpha, double beta) {
  TimingFit t;
  t.zeta = overhead / 2;
  t.u = overhead / 2;
  t.ids = {"m0"};
  t.alpha = {alpha};
  t.beta = {beta};
  return t;
}

Objective single_objective(double eps = 0.01) {
  Objective obj;
  obj.bound = {5.0, 0.001, 40.0, 0.002, BoundParams::Variant::sync};
  obj.timing = single_timing(0.4, 1e-4, 5e-4);
  obj.epsilon = eps;
  obj.members = {"m0"};
  obj.member_weight = {1.0};
  return obj;
}

// Exhaustive minimum with the same lowest-(e,n) tie preference as the search.
struct GridMin {
  int e = 0, n = 0;
  double value = 0;
};
GridMin grid_minimum(const Objective& obj, IntDomain e_dom, IntDomain n_dom) {
  GridMin best;
  bool first = true;
  for (int e = e_dom.lo; e <= e_dom.hi; ++e)
    for (int n = n_dom.lo; n <= n_dom.hi; ++n) {
      const double v = predicted_time(e, n, obj);
      if (first || v < best.value) {
        first = false;
        best = {e, n, v};
      }
    }
  return best;
}

}  // namespace

TEST_CASE("predicted sync time matches the hand-evaluated instance") {
  const Objective obj = single_objective();
  // c = 0.4 + 1e-4*20*400 + 5e-4*20 = 1.21; factor = 1.21 / (20 * 0.008);
  // sum = 5/400 + 0.001*400 + 40 = 40.4125.
  CHECK(predicted_time_sync(20, 400, obj) ==
        doctest::Approx(305.61953125).epsilon(1e-12));
}

TEST_CASE("prediction diverges as epsilon approaches D from above") {
  double prev = 0.0;
  for (const double eps : {0.012, 0.0052, 0.00282, 0.002082, 0.0020082}) {
    const Objective obj = single_objective(eps);
    const double t = predicted_time_sync(20, 400, obj);
    CHECK(t > prev);
    prev = t;
  }
  CHECK(prev > 1e5);
  CHECK_THROWS_AS(predicted_time_sync(20, 400, single_objective(0.002)), InfeasibleError);
  CHECK_THROWS_AS(predicted_time_sync(20, 400, single_objective(0.001)), InfeasibleError);
}

TEST_CASE("doubling the round overhead strictly increases the prediction") {
  Objective obj = single_objective();
  const double base = predicted_time_sync(20, 400, obj);
  obj.timing.zeta *= 2;
  obj.timing.u *= 2;
  CHECK(predicted_time_sync(20, 400, obj) > base);
}

namespace {

Objective paired_objective() {
  Objective obj;
  obj.bound = {5.0, 0.001, 40.0, 0.002, BoundParams::Variant::async};
  TimingFit t;
  t.zeta = 0.2;
  t.u = 0.2;
  t.ids = {"slow", "fast"};
  t.alpha = {3e-4, 5e-5};
  t.beta = {5e-3, 5e-4};
  obj.timing = t;
  obj.epsilon = 0.01;
  obj.members = {"slow", "fast"};
  obj.member_weight = {0.5, 0.5};
  obj.pairs = {{"slow", "fast", 0.0}};
  obj.pair_en_coeff = {1.5e-4};  // a_slow + lambda_slow + b_fast
  obj.pair_e_coeff = {5e-4};     // beta_fast
  return obj;
}

}  // namespace

TEST_CASE("async prediction at alpha zero reduces to the unforwarded expression") {
  const Objective obj = paired_objective();
  const double with_pair = predicted_time_async(20, 400, obj, {0.0});
  Objective bare = obj;
  bare.pairs.clear();
  bare.pair_en_coeff.clear();
  bare.pair_e_coeff.clear();
  const double without = predicted_time_async(20, 400, bare, {});
  CHECK(with_pair == doctest::Approx(without).epsilon(1e-12));
}

TEST_CASE("the closed-form alpha never predicts worse than no forwarding") {
  const Objective obj = paired_objective();
  for (int e = 5; e <= 60; e += 5)
    for (int n = 50; n <= 1000; n += 150) {
      const auto alphas = optimal_alphas(obj, e, n);
      CHECK(alphas[0] >= 0.0);
      CHECK(alphas[0] <= 1.0);
      CHECK(predicted_time_async(e, n, obj, alphas) <=
            predicted_time_async(e, n, obj, {0.0}) + 1e-12);
    }
}

TEST_CASE("a symmetric pair gets zero forwarding") {
  Objective obj = paired_objective();
  obj.timing.alpha = {5e-5, 5e-5};
  obj.timing.beta = {5e-4, 5e-4};
  const auto alphas = optimal_alphas(obj, 20, 400);
  CHECK(alphas[0] == 0.0);
  CHECK(predicted_time_async(20, 400, obj, alphas) ==
        doctest::Approx(predicted_time_async(20, 400, obj, {0.0})));
}

TEST_CASE("acs on a separable convex objective lands in one sweep") {
  const auto f = [](int e, int n) {
    return static_cast<double>((e - 5) * (e - 5) + (n - 7) * (n - 7));
  };
  const AcsResult res = acs_search(f, {1, 50}, {1, 60}, 1e-9);
  CHECK(res.e_star == 5);
  CHECK(res.n_star == 7);
  CHECK(res.predicted_s == 0.0);
  CHECK(res.sweeps <= 2);  // one improving sweep plus the stationary check
}

TEST_CASE("acs matches exhaustive grid search on the fitted objective") {
  const Objective obj = single_objective();
  const IntDomain e_dom{1, 100}, n_dom{1, 600};
  const AcsResult res = acs_optimize(obj, e_dom, n_dom, 1e-12);
  const GridMin grid = grid_minimum(obj, e_dom, n_dom);
  CHECK(res.predicted_s == grid.value);
  CHECK(res.e_star == grid.e);
  CHECK(res.n_star == grid.n);
}

TEST_CASE("acs trajectory is non-increasing and a huge theta stops after one sweep") {
  const Objective obj = single_objective();
  const AcsResult res = acs_optimize(obj, {1, 100}, {1, 600}, 1e12);
  CHECK(res.sweeps == 1);
  for (std::size_t i = 1; i < res.trajectory.size(); ++i)
    CHECK(res.trajectory[i] <= res.trajectory[i - 1] + 1e-12);
}

TEST_CASE("acs result is a local optimum against axis neighbors") {
  const Objective obj = single_objective();
  const AcsResult res = acs_optimize(obj, {1, 100}, {1, 600}, 1e-12);
  const double v = res.predicted_s;
  if (res.e_star > 1) CHECK(predicted_time(res.e_star - 1, res.n_star, obj) >= v);
  if (res.e_star < 100) CHECK(predicted_time(res.e_star + 1, res.n_star, obj) >= v);
  if (res.n_star > 1) CHECK(predicted_time(res.e_star, res.n_star - 1, obj) >= v);
  if (res.n_star < 600) CHECK(predicted_time(res.e_star, res.n_star + 1, obj) >= v);
}

TEST_CASE("per-axis second differences of the fitted objective are non-negative") {
  Rng rng(55);
  for (int trial = 0; trial < 20; ++trial) {
    Objective obj = single_objective();
    obj.bound.A = rng.uniform(0.0, 10.0);
    obj.bound.B = rng.uniform(0.0, 0.01);
    obj.bound.C = rng.uniform(0.0, 100.0);
    obj.bound.D = rng.uniform(0.0, 0.005);
    obj.epsilon = obj.bound.D + rng.uniform(0.001, 0.02);
    obj.timing.alpha = {rng.uniform(0.0, 1e-3)};
    obj.timing.beta = {rng.uniform(0.0, 0.01)};
    for (int e = 2; e < 60; e += 3) {
      const double d2 = predicted_time(e + 1, 100, obj) - 2 * predicted_time(e, 100, obj) +
                        predicted_time(e - 1, 100, obj);
      CHECK(d2 >= -1e-9);
    }
    for (int n = 2; n < 500; n += 29) {
      const double d2 = predicted_time(20, n + 1, obj) - 2 * predicted_time(20, n, obj) +
                        predicted_time(20, n - 1, obj);
      CHECK(d2 >= -1e-9);
    }
  }
}

namespace {

SystemProfile grid_system(const std::vector<double>& betas) {
  SystemProfile sys;
  sys.model_distribute_s = 0.1;
  sys.model_upload_s = 0.1;
  for (std::size_t i = 0; i < betas.size(); ++i) {
    DeviceProfile d;
    d.id = "g" + std::to_string(i);
    d.step_overhead_s = betas[i];
    d.sample_compute_s = 1e-5;
    d.weight = 1.0 / static_cast<double>(betas.size());
    sys.devices.push_back(d);
  }
  return sys;
}

TimingFit grid_timing(const SystemProfile& sys) {
  TimingFit t;
  t.zeta = sys.model_distribute_s;
  t.u = sys.model_upload_s;
  for (const auto& d : sys.devices) {
    t.ids.push_back(d.id);
    t.alpha.push_back(d.sample_upload_s + d.sample_compute_s);
    t.beta.push_back(d.step_overhead_s);
  }
  return t;
}

}  // namespace

TEST_CASE("server selection keeps the full set when dropping only hurts") {
  const SystemProfile sys = grid_system({0.01, 0.01, 0.01, 0.01});
  const TimingFit timing = grid_timing(sys);
  std::vector<BoundParams> per_drop;
  for (int d = 0; d < 4; ++d)
    per_drop.push_back({5.0, 0.001, 40.0, 0.001 * (d + 1), BoundParams::Variant::sync});
  const PlanResult res = select_servers(sys, timing, per_drop, 0.02, {1, 60}, {1, 400}, 1e-9);
  CHECK(res.selected.size() == 4);
  CHECK(res.candidates.size() == 4);
  CHECK(res.candidates[0].feasible);
}

TEST_CASE("server selection prefers dropping stragglers when D allows it") {
  // Three very slow servers in front of seven fast ones.
  std::vector<double> betas(10, 0.01);
  betas[7] = betas[8] = betas[9] = 2.0;
  const SystemProfile sys = grid_system(betas);
  const TimingFit timing = grid_timing(sys);
  std::vector<BoundParams> per_drop;
  for (int d = 0; d <= 6; ++d) {
    // Dropping data grows D gently at first, then steeply.
    const double grow = d <= 3 ? 0.0004 * d : 0.0004 * 3 + 0.004 * (d - 3);
    per_drop.push_back({5.0, 0.001, 40.0, grow, BoundParams::Variant::sync});
  }
  const PlanResult res =
      select_servers(sys, timing, per_drop, 0.02, {1, 60}, {1, 400}, 1e-9);
  const int drops = 10 - static_cast<int>(res.selected.size());
  CHECK(drops >= 1);
  CHECK(drops <= 3);
  // The full drop curve is exposed for U-shape inspection.
  CHECK(res.candidates.size() == 7);
  CHECK(res.candidates[0].acs.predicted_s > res.candidates[static_cast<std::size_t>(drops)]
                                                .acs.predicted_s);
}

TEST_CASE("selection fails loudly when every subset is infeasible") {
  const SystemProfile sys = grid_system({0.01, 0.5});
  const TimingFit timing = grid_timing(sys);
  std::vector<BoundParams> per_drop = {{5, 0.001, 40, 0.05, BoundParams::Variant::sync},
                                       {5, 0.001, 40, 0.09, BoundParams::Variant::sync}};
  CHECK_THROWS_WITH_AS(select_servers(sys, timing, per_drop, 0.01, {1, 60}, {1, 400}, 1e-9),
                       doctest::Contains("D"), InfeasibleError);
}

TEST_CASE("unique-data stragglers forbid dropping") {
  std::vector<double> betas(4, 0.01);
  betas[3] = 1.0;
  const SystemProfile sys = grid_system(betas);
  const TimingFit timing = grid_timing(sys);
  // Any drop pushes D past epsilon (scenario-(b) style).
  std::vector<BoundParams> per_drop = {{5, 0.001, 40, 0.0, BoundParams::Variant::sync},
                                       {5, 0.001, 40, 0.5, BoundParams::Variant::sync},
                                       {5, 0.001, 40, 0.6, BoundParams::Variant::sync}};
  const PlanResult res = select_servers(sys, timing, per_drop, 0.01, {1, 60}, {1, 400}, 1e-9);
  CHECK(res.selected.size() == 4);
  CHECK_FALSE(res.candidates[1].feasible);
  CHECK_FALSE(res.candidates[2].feasible);
}

TEST_CASE("pair construction matches the sorted greedy scheme") {
  SUBCASE("two servers") {
    TimingFit t;
    t.zeta = t.u = 0.0;
    t.ids = {"s0", "s1"};
    t.alpha = {0, 0};
    t.beta = {5.0, 1.0};
    const auto pairs = build_pairs(t, t.ids, 1, 1);
    REQUIRE(pairs.size() == 1);
    CHECK(pairs[0].slow_id == "s0");
    CHECK(pairs[0].fast_id == "s1");
  }
  SUBCASE("four servers pair outside-in") {
    TimingFit t;
    t.zeta = t.u = 0.0;
    t.ids = {"s0", "s1", "s2", "s3"};
    t.alpha = {0, 0, 0, 0};
    t.beta = {5.0, 4.0, 2.0, 1.0};
    const auto pairs = build_pairs(t, t.ids, 1, 1);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].slow_id == "s0");
    CHECK(pairs[0].fast_id == "s3");
    CHECK(pairs[1].slow_id == "s1");
    CHECK(pairs[1].fast_id == "s2");
  }
  SUBCASE("identical costs leave no useful forwarding") {
    TimingFit t;
    t.zeta = t.u = 0.1;
    t.ids = {"s0", "s1", "s2", "s3"};
    t.alpha = {1e-4, 1e-4, 1e-4, 1e-4};
    t.beta = {0.01, 0.01, 0.01, 0.01};
    Objective obj;
    obj.bound = {5, 0.001, 40, 0.0, BoundParams::Variant::async};
    obj.timing = t;
    obj.epsilon = 0.01;
    obj.members = t.ids;
    obj.member_weight = {0.25, 0.25, 0.25, 0.25};
    obj.pairs = build_pairs(t, t.ids, 1, 1);
    obj.pair_en_coeff = {1e-4, 1e-4};
    obj.pair_e_coeff = {0.01, 0.01};
    const auto alphas = optimal_alphas(obj, 10, 100);
    for (const double a : alphas) CHECK(a == 0.0);
  }
}
