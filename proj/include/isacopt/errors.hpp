#pragma once

#include <stdexcept>
#include <string>

namespace isacopt {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Schema or invariant violation while loading/validating a mission.
struct ScenarioError : Error {
  explicit ScenarioError(const std::string& msg) : Error(msg) {}
};

// A convex subproblem was reported infeasible by the solver.
struct InfeasibleError : Error {
  std::string constraint_family;
  InfeasibleError(const std::string& family, const std::string& msg)
      : Error(msg), constraint_family(family) {}
};

// Backend could not reach the requested accuracy.
struct NumericalFailure : Error {
  explicit NumericalFailure(const std::string& msg) : Error(msg) {}
};

// Mission cannot be time-parameterized (tour plus hovering exceeds T).
struct TimingInfeasible : Error {
  explicit TimingInfeasible(const std::string& msg) : Error(msg) {}
};

// Rounded sensing schedule cannot meet the sensing SNR requirement.
struct SensingInfeasible : Error {
  explicit SensingInfeasible(const std::string& msg) : Error(msg) {}
};

// Trajectory trust region shrank below its floor with the audit still failing.
struct TrustRegionCollapse : Error {
  explicit TrustRegionCollapse(const std::string& msg) : Error(msg) {}
};

}  // namespace isacopt
