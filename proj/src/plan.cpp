#include "fedtime/plan.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace fedtime {

void Objective::validate() const {
  if (members.empty()) throw ConfigError("objective has no participating servers");
  if (!(epsilon > 0.0)) throw ConfigError("objective epsilon must be positive");
  if (!(bound.D < epsilon))
    throw InfeasibleError("bound constant D = " + std::to_string(bound.D) +
                          " is not below epsilon = " + std::to_string(epsilon));
  if (member_weight.size() != members.size())
    throw ConfigError("objective member weights not aligned with members");
  if (pair_en_coeff.size() != pairs.size() || pair_e_coeff.size() != pairs.size())
    throw ConfigError("objective pair cost coefficients not aligned with pairs");
}

namespace {

double bound_sum_sync(int e, int n, const Objective& obj) {
  const double m = static_cast<double>(obj.members.size());
  return m * obj.bound.A / static_cast<double>(n) +
         obj.bound.B * static_cast<double>(e) * static_cast<double>(e) + obj.bound.C;
}

double slowest_member_cost(int e, int n, const Objective& obj) {
  double worst = -1.0;
  for (const auto& id : obj.members)
    worst = std::max(worst, obj.timing.round_seconds(id, e, n));
  return worst;
}

double pair_cost(std::size_t p, int e, int n, const Objective& obj) {
  return obj.timing.overhead_s() +
         obj.pair_en_coeff[p] * static_cast<double>(e) * static_cast<double>(n) +
         obj.pair_e_coeff[p] * static_cast<double>(e);
}

}  // namespace

double predicted_time_sync(int e, int n, const Objective& obj) {
  if (e < 1 || n < 1) throw ConfigError("e and n must be >= 1");
  obj.validate();
  const double c = slowest_member_cost(e, n, obj);
  return c / (static_cast<double>(e) * (obj.epsilon - obj.bound.D)) * bound_sum_sync(e, n, obj);
}

double predicted_time_async(int e, int n, const Objective& obj,
                            const std::vector<double>& alphas) {
  if (e < 1 || n < 1) throw ConfigError("e and n must be >= 1");
  obj.validate();
  if (alphas.size() != obj.pairs.size())
    throw ConfigError("alpha vector not aligned with the pair list");

  double weight_sum = 0.0;
  for (const double w : obj.member_weight) weight_sum += w;
  const double m = static_cast<double>(obj.members.size());
  const double e2 = static_cast<double>(e) * static_cast<double>(e);
  const double numer = m * obj.bound.A / static_cast<double>(n) +
                       obj.bound.B * e2 * weight_sum + obj.bound.C;

  // Per-iteration load of the slowest unit: paired members contribute their
  // forwarding mix, everyone else a plain c_k / e.
  std::vector<bool> paired(obj.members.size(), false);
  double worst = -1.0;
  for (std::size_t p = 0; p < obj.pairs.size(); ++p) {
    const auto& pr = obj.pairs[p];
    const double a = std::clamp(alphas[p], 0.0, 1.0);
    const double c_slow = obj.timing.round_seconds(pr.slow_id, e, n);
    const double mix = (1.0 - a) * c_slow + a * pair_cost(p, e, n, obj);
    worst = std::max(worst, mix / static_cast<double>(e));
    for (std::size_t k = 0; k < obj.members.size(); ++k)
      if (obj.members[k] == pr.slow_id || obj.members[k] == pr.fast_id) paired[k] = true;
  }
  for (std::size_t k = 0; k < obj.members.size(); ++k) {
    if (paired[k]) continue;
    worst = std::max(worst,
                     obj.timing.round_seconds(obj.members[k], e, n) / static_cast<double>(e));
  }
  return numer / (obj.epsilon - obj.bound.D) * worst;
}

std::vector<double> optimal_alphas(const Objective& obj, int e, int n) {
  std::vector<double> out;
  out.reserve(obj.pairs.size());
  for (std::size_t p = 0; p < obj.pairs.size(); ++p) {
    const double c_slow = obj.timing.round_seconds(obj.pairs[p].slow_id, e, n);
    const double c_fast = obj.timing.round_seconds(obj.pairs[p].fast_id, e, n);
    out.push_back(optimal_alpha(1.0, c_slow, 1.0, c_fast, pair_cost(p, e, n, obj)));
  }
  return out;
}

double predicted_time(int e, int n, const Objective& obj) {
  if (obj.bound.variant == BoundParams::Variant::sync) return predicted_time_sync(e, n, obj);
  return predicted_time_async(e, n, obj, optimal_alphas(obj, e, n));
}

namespace {

// Exact integer minimizer of a discretely convex axis function: the forward
// difference is non-decreasing, so the first non-negative step marks the
// lowest-index minimum. Falls back to a linear scan when the convexity
// assumption turns out to be violated at the solution.
template <typename F>
int axis_minimize(F&& f, int lo, int hi) {
  int a = lo, b = hi;
  while (a < b) {
    const int mid = a + (b - a) / 2;
    if (f(mid + 1) >= f(mid))
      b = mid;
    else
      a = mid + 1;
  }
  const double fa = f(a);
  const bool left_ok = (a == lo) || f(a - 1) >= fa;
  const bool right_ok = (a == hi) || f(a + 1) >= fa;
  if (left_ok && right_ok) return a;
  int best = lo;
  double best_v = f(lo);
  for (int x = lo + 1; x <= hi; ++x) {
    const double v = f(x);
    if (v < best_v) {
      best_v = v;
      best = x;
    }
  }
  return best;
}

}  // namespace

AcsResult acs_search(const std::function<double(int, int)>& f, IntDomain e_dom,
                     IntDomain n_dom, double theta) {
  if (e_dom.lo < 1 || e_dom.hi < e_dom.lo || n_dom.lo < 1 || n_dom.hi < n_dom.lo)
    throw ConfigError("ACS domains must be non-empty integer intervals with lo >= 1");
  if (!(theta > 0.0)) throw ConfigError("ACS stopping threshold must be positive");

  AcsResult res;
  res.e_star = e_dom.lo;
  res.n_star = n_dom.lo;
  double current = f(res.e_star, res.n_star);
  res.trajectory.push_back(current);

  constexpr int kMaxSweeps = 200;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    const double before = current;
    res.e_star =
        axis_minimize([&](int e) { return f(e, res.n_star); }, e_dom.lo, e_dom.hi);
    current = f(res.e_star, res.n_star);
    res.trajectory.push_back(current);
    res.n_star =
        axis_minimize([&](int n) { return f(res.e_star, n); }, n_dom.lo, n_dom.hi);
    current = f(res.e_star, res.n_star);
    res.trajectory.push_back(current);
    ++res.sweeps;
    if (before - current < theta) break;
  }
  res.predicted_s = current;
  return res;
}

AcsResult acs_optimize(const Objective& obj, IntDomain e_dom, IntDomain n_dom, double theta) {
  obj.validate();
  return acs_search([&](int e, int n) { return predicted_time(e, n, obj); }, e_dom, n_dom,
                    theta);
}

std::vector<std::string> slowest_first(const TimingFit& timing,
                                       const std::vector<std::string>& members, int e_ref,
                                       int n_ref) {
  std::vector<std::string> order = members;
  std::stable_sort(order.begin(), order.end(), [&](const std::string& l, const std::string& r) {
    const double cl = timing.round_seconds(l, e_ref, n_ref);
    const double cr = timing.round_seconds(r, e_ref, n_ref);
    return cl > cr || (cl == cr && l < r);
  });
  return order;
}

std::vector<ForwardPair> build_pairs(const TimingFit& timing,
                                     const std::vector<std::string>& selected, int e_ref,
                                     int n_ref) {
  if (selected.empty()) throw ConfigError("build_pairs: selected set is empty");
  const auto order = slowest_first(timing, selected, e_ref, n_ref);
  std::vector<ForwardPair> pairs;
  const std::size_t m = order.size();
  for (std::size_t i = 0; i < m / 2; ++i)
    pairs.push_back({order[i], order[m - 1 - i], 0.0});
  return pairs;
}

namespace {

Objective make_objective(const SystemProfile& sys, const TimingFit& timing,
                         const BoundParams& bound, double epsilon,
                         std::vector<std::string> members, bool with_pairs, int e_ref,
                         int n_ref) {
  Objective obj;
  obj.bound = bound;
  obj.timing = timing;
  obj.epsilon = epsilon;
  obj.members = std::move(members);
  for (const auto& id : obj.members) obj.member_weight.push_back(sys.device(id).weight);
  if (with_pairs) {
    obj.pairs = build_pairs(timing, obj.members, e_ref, n_ref);
    for (const auto& pr : obj.pairs) {
      const auto& slow = sys.device(pr.slow_id);
      const auto& fast = sys.device(pr.fast_id);
      // c_{k,k'} is affine in (e*n, e): the slow server's upload and
      // forwarding rates plus the fast server's compute coefficients.
      obj.pair_en_coeff.push_back(slow.sample_upload_s + slow.sample_forward_s +
                                  fast.sample_compute_s);
      obj.pair_e_coeff.push_back(fast.step_overhead_s);
    }
  }
  return obj;
}

}  // namespace

PlanResult select_servers(const SystemProfile& sys, const TimingFit& timing,
                          const std::vector<BoundParams>& per_drop, double epsilon,
                          IntDomain e_dom, IntDomain n_dom, double theta, bool with_pairs) {
  if (per_drop.empty()) throw ConfigError("select_servers: no candidate bounds supplied");
  const auto order = slowest_first(timing, timing.ids, e_dom.hi, n_dom.hi);

  PlanResult result;
  bool have_best = false;
  std::string infeasible_note;
  for (std::size_t d = 0; d < per_drop.size() && d < order.size(); ++d) {
    CandidateResult cand;
    cand.drops = static_cast<int>(d);
    cand.members.assign(order.begin() + static_cast<std::ptrdiff_t>(d), order.end());
    cand.bound_d = per_drop[d].D;
    cand.feasible = per_drop[d].D < epsilon;
    if (!cand.feasible) {
      infeasible_note += (infeasible_note.empty() ? "" : ", ") + std::to_string(d) +
                         " drops: D=" + std::to_string(per_drop[d].D);
      result.candidates.push_back(std::move(cand));
      continue;
    }
    const Objective obj = make_objective(sys, timing, per_drop[d], epsilon, cand.members,
                                         with_pairs, e_dom.hi, n_dom.hi);
    cand.acs = acs_optimize(obj, e_dom, n_dom, theta);
    if (!have_best || cand.acs.predicted_s < result.predicted_s) {
      have_best = true;
      result.e_star = cand.acs.e_star;
      result.n_star = cand.acs.n_star;
      result.predicted_s = cand.acs.predicted_s;
      result.acs_sweeps = cand.acs.sweeps;
      result.trajectory = cand.acs.trajectory;
      result.selected = cand.members;
      result.pairs = obj.pairs;
      if (!obj.pairs.empty()) {
        const auto alphas = optimal_alphas(obj, cand.acs.e_star, cand.acs.n_star);
        for (std::size_t p = 0; p < result.pairs.size(); ++p)
          result.pairs[p].alpha = alphas[p];
      }
    }
    result.candidates.push_back(std::move(cand));
  }
  if (!have_best)
    throw InfeasibleError("no feasible subset: every candidate has D >= epsilon (" +
                          infeasible_note + "; epsilon=" + std::to_string(epsilon) + ")");
  return result;
}

}  // namespace fedtime
