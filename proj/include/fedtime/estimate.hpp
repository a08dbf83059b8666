#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fedtime/fedsim.hpp"

namespace fedtime {

/// One pre-training run at an empirically chosen (e, n) pair.
struct ProbeObservation {
  double epochs = 0;        // e^(i)
  double batch = 0;         // n^(i)
  double rounds_to_a = 0;   // R_a: rounds until the loss first reaches loss_a
  double rounds_to_b = 0;   // R_b: rounds until the loss first reaches loss_b
  double min_loss = 0;      // lowest global loss seen, feeds the F* default
  std::vector<double> mean_round_s;  // per probed server, selection order
};

/// Fitted convergence-bound constants. The async variant carries the primed
/// constants of the staleness-aware bound; the algebraic form is shared.
struct BoundParams {
  enum class Variant { sync, async };
  double A = 0.0, B = 0.0, C = 0.0, D = 0.0;
  Variant variant = Variant::sync;
};

/// Fitted timing constants: shared round overheads plus per-server
/// alpha_k (= a_k + b_k) and beta_k.
struct TimingFit {
  double zeta = 0.0;
  double u = 0.0;
  std::vector<std::string> ids;
  std::vector<double> alpha;  // seconds per (sample x epoch)
  std::vector<double> beta;   // seconds per epoch

  double overhead_s() const { return zeta + u; }
  int index_of(const std::string& id) const;
  double round_seconds(const std::string& id, double e, double n) const;
};

struct ProbeSettings {
  std::vector<std::pair<int, int>> probes;  // (e, n) pairs
  double loss_a = 0.0;                      // F_a
  double loss_b = 0.0;                      // F_b, with F_b < F_a
  long long max_rounds = 0;

  void validate() const;
};

/// Runs one pre-training simulation per (e, n) pair under `base` (selection,
/// schedule, mode, seed) and records the coordination rounds at which the
/// global loss first reaches loss_a and loss_b, plus per-server mean round
/// times.
std::vector<ProbeObservation> probe(const RunConfig& base, const SystemProfile& sys,
                                    const Partition& part, const Dataset& ds,
                                    const ProbeSettings& settings);

/// Least-squares fit of the bound constants from the pairwise round-ratio
/// equations, followed by the residual-mean recovery of D.
BoundParams fit_bound(const std::vector<ProbeObservation>& obs, double loss_a, double loss_b,
                      double loss_star, BoundParams::Variant variant = BoundParams::Variant::sync);

/// Joint least-squares fit of zeta+u (shared) and per-server alpha_k, beta_k
/// from mean round times. Only the sum zeta+u is identifiable; it is split
/// evenly unless one side is pinned.
TimingFit fit_timing(const std::vector<ProbeObservation>& obs,
                     const std::vector<std::string>& ids,
                     std::optional<double> pinned_zeta = std::nullopt,
                     std::optional<double> pinned_u = std::nullopt);

/// CSV with header `probe_id,e,n,R_a,R_b,cbar_<id>,...`.
void write_observations_csv(const std::vector<ProbeObservation>& obs,
                            const std::vector<std::string>& ids, std::ostream& out);

}  // namespace fedtime
