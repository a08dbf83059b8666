#pragma once

#include <functional>
#include <string>
#include <vector>

#include "fedtime/estimate.hpp"
#include "fedtime/profiles.hpp"

namespace fedtime {

/// Approximated time-to-target objective built from fitted constants.
struct Objective {
  BoundParams bound;
  TimingFit timing;
  double epsilon = 0.0;
  std::vector<std::string> members;  // participating subset M
  std::vector<double> member_weight; // p_k, aligned with members (async B' term)
  std::vector<ForwardPair> pairs;    // async; alpha recomputed per (e,n)
  // Affine coefficients of the forwarded-round cost per pair:
  // c_pair(e,n) = zeta + u + pair_en_coeff*e*n + pair_e_coeff*e. They come
  // from the device profiles because the timing fit cannot separate a_k
  // from b_k or supply lambda_k.
  std::vector<double> pair_en_coeff;
  std::vector<double> pair_e_coeff;

  void validate() const;  // bound.D < epsilon, members nonempty
};

/// Predicted seconds to reach the target precision with uniform (e, n),
/// synchronous coordination (round time set by the slowest member).
double predicted_time_sync(int e, int n, const Objective& obj);

/// Asynchronous variant at the slowest forwarding pair; `alphas` aligns with
/// obj.pairs (unpaired members behave as singleton pairs with alpha 0).
double predicted_time_async(int e, int n, const Objective& obj,
                            const std::vector<double>& alphas);

/// Branch-equalizing forwarding fractions at (e, n), equal round budgets.
std::vector<double> optimal_alphas(const Objective& obj, int e, int n);

/// Objective value dispatching on the bound variant (async uses optimal
/// alphas at each (e, n)).
double predicted_time(int e, int n, const Objective& obj);

struct IntDomain {
  int lo = 1;
  int hi = 1;
};

struct AcsResult {
  int e_star = 0;
  int n_star = 0;
  double predicted_s = 0.0;
  int sweeps = 0;
  std::vector<double> trajectory;  // objective after every half-step
};

/// Alternate convex search over an arbitrary per-axis-convex integer
/// objective: exact integer axis minimizations until the improvement drops
/// below theta.
AcsResult acs_search(const std::function<double(int, int)>& f, IntDomain e_dom,
                     IntDomain n_dom, double theta);

/// acs_search applied to the fitted time-to-target objective.
AcsResult acs_optimize(const Objective& obj, IntDomain e_dom, IntDomain n_dom, double theta);

struct CandidateResult {
  int drops = 0;
  std::vector<std::string> members;
  bool feasible = false;
  double bound_d = 0.0;
  AcsResult acs;  // meaningful when feasible
};

struct PlanResult {
  int e_star = 0;
  int n_star = 0;
  std::vector<std::string> selected;
  std::vector<ForwardPair> pairs;  // alphas evaluated at (e*, n*)
  double predicted_s = 0.0;
  int acs_sweeps = 0;
  std::vector<double> trajectory;
  std::vector<CandidateResult> candidates;  // full drop curve, slowest-first
};

/// Ranks members slowest-first by their fitted round time at the domain's
/// upper corner; used for both dropping order and pair construction.
std::vector<std::string> slowest_first(const TimingFit& timing,
                                       const std::vector<std::string>& members, int e_ref,
                                       int n_ref);

/// Greedy slowest-with-fastest pairing over the selected set.
std::vector<ForwardPair> build_pairs(const TimingFit& timing,
                                     const std::vector<std::string>& selected, int e_ref,
                                     int n_ref);

/// Evaluates slowest-first prefixes (drop 0, 1, 2, ... slowest servers), runs
/// ACS on every feasible one, and returns the fastest plan. `per_drop`
/// supplies the fitted bound for each drop count, in order.
PlanResult select_servers(const SystemProfile& sys, const TimingFit& timing,
                          const std::vector<BoundParams>& per_drop, double epsilon,
                          IntDomain e_dom, IntDomain n_dom, double theta,
                          bool with_pairs = false);

}  // namespace fedtime
