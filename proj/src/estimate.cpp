#include "fedtime/estimate.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace fedtime {

int TimingFit::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (ids[i] == id) return static_cast<int>(i);
  throw ConfigError("timing fit has no entry for device '" + id + "'");
}

double TimingFit::round_seconds(const std::string& id, double e, double n) const {
  const int i = index_of(id);
  return zeta + u + alpha[static_cast<std::size_t>(i)] * e * n +
         beta[static_cast<std::size_t>(i)] * e;
}

void ProbeSettings::validate() const {
  if (probes.size() < 3)
    throw RankDeficientError("need at least 3 probe (e,n) pairs, got " +
                             std::to_string(probes.size()));
  for (const auto& [e, n] : probes)
    if (e < 1 || n < 1) throw ConfigError("probe (e,n) values must be >= 1");
  if (!(loss_a > loss_b)) throw ConfigError("probe targets need F_a > F_b");
  if (max_rounds < 1) throw ConfigError("probe max_rounds must be >= 1");
}

std::vector<ProbeObservation> probe(const RunConfig& base, const SystemProfile& sys,
                                    const Partition& part, const Dataset& ds,
                                    const ProbeSettings& settings) {
  settings.validate();
  std::vector<ProbeObservation> out;
  out.reserve(settings.probes.size());
  const double servers = static_cast<double>(base.plan.selected.size());
  for (const auto& [e, n] : settings.probes) {
    RunConfig cfg = base;
    cfg.plan = TrainPlan::uniform(base.plan.selected, e, n);
    cfg.plan.staleness_cap = base.plan.staleness_cap;
    cfg.stop = StopRule{};
    cfg.stop.target_loss = settings.loss_b;
    cfg.stop.max_rounds = settings.max_rounds;
    cfg.eval_every = 1;

    const RunTrace trace = run(cfg, sys, part, ds);
    if (!trace.reached_target)
      throw SimError("probe (e=" + std::to_string(e) + ", n=" + std::to_string(n) +
                     ") never reached F_b within " + std::to_string(settings.max_rounds) +
                     " rounds");

    ProbeObservation ob;
    ob.epochs = e;
    ob.batch = n;
    // Round counts: in async mode a "round" is one aggregation, so divide by
    // the server count to get the per-server coordination-round equivalent.
    const double scale = base.mode == RunConfig::Mode::async ? servers : 1.0;
    std::optional<double> ra, rb;
    ob.min_loss = trace.records.front().loss;
    for (const auto& rec : trace.records) {
      ob.min_loss = std::min(ob.min_loss, rec.loss);
      if (!ra && rec.loss <= settings.loss_a) ra = std::max(1.0, static_cast<double>(rec.round) / scale);
      if (!rb && rec.loss <= settings.loss_b) rb = std::max(1.0, static_cast<double>(rec.round) / scale);
    }
    ob.rounds_to_a = *ra;  // reached by construction: loss_b <= loss_a
    ob.rounds_to_b = *rb;
    if (ob.rounds_to_b <= ob.rounds_to_a)
      ob.rounds_to_b = ob.rounds_to_a + 1.0;  // R_b > R_a >= 1 by convention
    for (const auto& id : base.plan.selected) {
      const auto it = trace.mean_round_s.find(id);
      ob.mean_round_s.push_back(it == trace.mean_round_s.end() ? 0.0 : it->second);
    }
    out.push_back(std::move(ob));
  }
  return out;
}

namespace {

double denom_rounds(const ProbeObservation& ob) {
  return ob.epochs * (ob.rounds_to_b - ob.rounds_to_a);
}

}  // namespace

BoundParams fit_bound(const std::vector<ProbeObservation>& obs, double loss_a, double loss_b,
                      double loss_star, BoundParams::Variant variant) {
  if (obs.size() < 3)
    throw RankDeficientError("probe set not informative: need at least 3 observations");
  if (!(loss_a > loss_b) || !(loss_b > loss_star))
    throw ConfigError("fit_bound requires F_a > F_b > F*");
  for (const auto& ob : obs)
    if (!(denom_rounds(ob) > 0.0))
      throw ConfigError("fit_bound: observations need R_b > R_a >= 1");

  // Pairwise ratio equations: chi = e_i(R_b_i - R_a_i) / (e_j(R_b_j - R_a_j)),
  // A (1/n_i - chi/n_j) + B (e_i^2 - chi e_j^2) + C (1 - chi) = 0.
  const std::size_t m = obs.size();
  std::vector<Eigen::RowVector3d> rows;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      if (i == j) continue;
      const double chi = denom_rounds(obs[i]) / denom_rounds(obs[j]);
      rows.emplace_back(1.0 / obs[i].batch - chi / obs[j].batch,
                        obs[i].epochs * obs[i].epochs - chi * obs[j].epochs * obs[j].epochs,
                        1.0 - chi);
    }
  Eigen::MatrixXd design(static_cast<Eigen::Index>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    // Unit-normalized rows keep large-chi pairs from dominating the fit.
    const double norm = rows[r].norm();
    design.row(static_cast<Eigen::Index>(r)) = norm > 0.0 ? (rows[r] / norm).eval() : rows[r];
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  // The homogeneous system fixes (A,B,C) up to scale; that needs rank 2.
  if (!(sv(1) > 1e-9 * sv(0)))
    throw RankDeficientError(
        "probe set not informative: ratio system is rank deficient, use more diverse (e,n)");
  Eigen::Vector3d dir = svd.matrixV().col(2);
  if (dir.sum() < 0.0) dir = -dir;
  dir = dir.cwiseMax(0.0);  // Theorem constants are non-negative by construction
  if (!(dir.norm() > 0.0))
    throw RankDeficientError("probe set not informative: degenerate direction");

  // Absolute scale s and offset D from F_x - F* = s * psi + D over both
  // target levels.
  Eigen::MatrixXd lhs(static_cast<Eigen::Index>(2 * m), 2);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(2 * m));
  for (std::size_t i = 0; i < m; ++i) {
    const double sum_i =
        dir(0) / obs[i].batch + dir(1) * obs[i].epochs * obs[i].epochs + dir(2);
    lhs(static_cast<Eigen::Index>(2 * i), 0) = sum_i / (obs[i].epochs * obs[i].rounds_to_a);
    lhs(static_cast<Eigen::Index>(2 * i), 1) = 1.0;
    rhs(static_cast<Eigen::Index>(2 * i)) = loss_a - loss_star;
    lhs(static_cast<Eigen::Index>(2 * i + 1), 0) = sum_i / (obs[i].epochs * obs[i].rounds_to_b);
    lhs(static_cast<Eigen::Index>(2 * i + 1), 1) = 1.0;
    rhs(static_cast<Eigen::Index>(2 * i + 1)) = loss_b - loss_star;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lhs);
  if (qr.rank() < 2)
    throw RankDeficientError("probe set not informative: scale system is rank deficient");
  const Eigen::Vector2d sd = qr.solve(rhs);
  const double scale = std::max(0.0, sd(0));

  BoundParams fit;
  fit.variant = variant;
  fit.A = scale * dir(0);
  fit.B = scale * dir(1);
  fit.C = scale * dir(2);
  // D recovered from the F_b equations, averaged over probes.
  double d_sum = 0.0;
  for (const auto& ob : obs) {
    const double s = fit.A / ob.batch + fit.B * ob.epochs * ob.epochs + fit.C;
    d_sum += loss_b - loss_star - s / (ob.epochs * ob.rounds_to_b);
  }
  fit.D = std::max(0.0, d_sum / static_cast<double>(m));
  return fit;
}

TimingFit fit_timing(const std::vector<ProbeObservation>& obs,
                     const std::vector<std::string>& ids, std::optional<double> pinned_zeta,
                     std::optional<double> pinned_u) {
  if (obs.size() < 3)
    throw RankDeficientError("timing fit needs at least 3 probe observations");
  const std::size_t servers = ids.size();
  for (const auto& ob : obs)
    if (ob.mean_round_s.size() != servers)
      throw ConfigError("observation round times do not cover every probed server");

  // Unknowns: [zeta+u, alpha_0, beta_0, alpha_1, beta_1, ...].
  const Eigen::Index unknowns = 1 + 2 * static_cast<Eigen::Index>(servers);
  Eigen::MatrixXd lhs = Eigen::MatrixXd::Zero(
      static_cast<Eigen::Index>(obs.size() * servers), unknowns);
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(obs.size() * servers));
  Eigen::Index row = 0;
  for (const auto& ob : obs)
    for (std::size_t k = 0; k < servers; ++k, ++row) {
      lhs(row, 0) = 1.0;
      lhs(row, 1 + 2 * static_cast<Eigen::Index>(k)) = ob.epochs * ob.batch;
      lhs(row, 2 + 2 * static_cast<Eigen::Index>(k)) = ob.epochs;
      rhs(row) = ob.mean_round_s[k];
    }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(lhs);
  if (qr.rank() < unknowns)
    throw RankDeficientError(
        "timing fit is rank deficient: probes must vary both e and e*n per server");
  Eigen::VectorXd x = qr.solve(rhs);
  x = x.cwiseMax(0.0);

  TimingFit fit;
  fit.ids = ids;
  const double overhead = x(0);
  if (pinned_zeta) {
    fit.zeta = std::clamp(*pinned_zeta, 0.0, overhead);
    fit.u = overhead - fit.zeta;
  } else if (pinned_u) {
    fit.u = std::clamp(*pinned_u, 0.0, overhead);
    fit.zeta = overhead - fit.u;
  } else {
    fit.zeta = overhead / 2.0;
    fit.u = overhead / 2.0;
  }
  for (std::size_t k = 0; k < servers; ++k) {
    fit.alpha.push_back(x(1 + 2 * static_cast<Eigen::Index>(k)));
    fit.beta.push_back(x(2 + 2 * static_cast<Eigen::Index>(k)));
  }
  return fit;
}

void write_observations_csv(const std::vector<ProbeObservation>& obs,
                            const std::vector<std::string>& ids, std::ostream& out) {
  out << "probe_id,e,n,R_a,R_b";
  for (const auto& id : ids) out << ",cbar_" << id;
  out << "\n";
  char buf[128];
  for (std::size_t i = 0; i < obs.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.12g,%.12g,%.12g,%.12g", i, obs[i].epochs,
                  obs[i].batch, obs[i].rounds_to_a, obs[i].rounds_to_b);
    out << buf;
    for (const double c : obs[i].mean_round_s) {
      std::snprintf(buf, sizeof(buf), ",%.12g", c);
      out << buf;
    }
    out << "\n";
  }
}

}  // namespace fedtime
