#pragma once

#include <stdexcept>
#include <string>

namespace fedtime {

/// Bad or inconsistent configuration / input files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Simulation-level failure (empty selection, unreachable probe target, deadlock).
struct SimError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Least-squares system does not pin down the unknowns.
struct RankDeficientError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// No candidate satisfies the planning feasibility constraint.
struct InfeasibleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fedtime
