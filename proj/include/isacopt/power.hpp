#pragma once

// Rotary-wing propulsion power: hover power, velocity-dependent flight power
// in two variants, the induced-power slack identity, and the power-minimizing
// speed search.

#include <Eigen/Dense>

#include <cmath>

#include "isacopt/errors.hpp"

namespace isacopt {

enum class PowerVariant {
  // Full rotary-wing model: equals hover power at v = 0 and has an interior
  // power-minimizing speed.
  StandardRotaryWing,
  // The same expression minus the constant P_o + P_i (zero at v = 0).
  PaperAsWritten,
};

struct PowerModelParams {
  double blade_angular_velocity = 300.0;  // Omega [rad/s]
  double rotor_radius = 0.4;              // r [m]
  double air_density = 1.225;             // rho [kg/m^3]
  double rotor_solidity = 0.05;           // s
  double rotor_disc_area = 0.503;         // A_r [m^2]
  double blade_profile_power = 80.0;      // P_o [W]
  double induced_power = 88.6;            // P_i [W]
  double induced_velocity = 4.03;         // v0 [m/s]
  double fuselage_drag_ratio = 0.6;       // r0
  PowerVariant variant = PowerVariant::StandardRotaryWing;

  void validate() const {
    if (blade_angular_velocity <= 0 || rotor_radius <= 0 || air_density <= 0 ||
        rotor_solidity <= 0 || rotor_disc_area <= 0 ||
        blade_profile_power <= 0 || induced_power <= 0 ||
        induced_velocity <= 0 || fuselage_drag_ratio <= 0)
      throw ScenarioError("power_model: all parameters must be positive");
  }

  double parasite_coefficient() const {
    return 0.5 * fuselage_drag_ratio * air_density * rotor_solidity *
           rotor_disc_area;
  }
  double blade_drag_coefficient() const {
    return 3.0 / (blade_angular_velocity * blade_angular_velocity *
                  rotor_radius * rotor_radius);
  }
};

struct PowerEval {
  double blade_profile = 0.0;
  double induced = 0.0;
  double parasite = 0.0;
  double total = 0.0;
};

inline double hover_power(const PowerModelParams& p) {
  return p.blade_profile_power + p.induced_power;
}

// Exact induced-speed slack: y(v)^2 = sqrt(1 + ||v||^4/(4 v0^4)) - ||v||^2/(2 v0^2).
inline double induced_slack_exact(double speed, const PowerModelParams& p) {
  const double u = speed * speed / (2.0 * p.induced_velocity * p.induced_velocity);
  return std::sqrt(std::sqrt(1.0 + u * u) - u);
}

// 1/y^2 - y^2 - ||v||^2 / v0^2; zero at the exact slack.
inline double induced_slack_residual(double y, const Eigen::Vector2d& v,
                                     const PowerModelParams& p) {
  if (y <= 0.0) throw Error("induced_slack_residual: y must be positive");
  const double sp2 = v.squaredNorm();
  return 1.0 / (y * y) - y * y - sp2 / (p.induced_velocity * p.induced_velocity);
}

inline PowerEval flight_power_speed(double speed, const PowerModelParams& p) {
  PowerEval e;
  const double v2 = speed * speed;
  e.blade_profile = p.blade_profile_power * (1.0 + p.blade_drag_coefficient() * v2);
  e.induced = p.induced_power * induced_slack_exact(speed, p);
  e.parasite = p.parasite_coefficient() * v2 * speed;
  if (p.variant == PowerVariant::PaperAsWritten) {
    e.blade_profile -= p.blade_profile_power;
    e.induced -= p.induced_power;
  }
  e.total = e.blade_profile + e.induced + e.parasite;
  return e;
}

inline PowerEval flight_power(const Eigen::Vector2d& v,
                              const PowerModelParams& p) {
  return flight_power_speed(v.norm(), p);
}

// Propulsion power of one slot: hover while sensing, flight otherwise.
inline double slot_propulsion_power(double sensing_fraction,
                                    const Eigen::Vector2d& v,
                                    const PowerModelParams& p) {
  return sensing_fraction * hover_power(p) +
         (1.0 - sensing_fraction) * flight_power(v, p).total;
}

// argmin over speed in [0, v_max] of the flight power, to 0.01 m/s.
inline double min_power_speed(const PowerModelParams& p, double v_max) {
  double best_v = 0.0;
  double best_p = flight_power_speed(0.0, p).total;
  const double coarse = 0.1;
  for (double v = 0.0; v <= v_max + 1e-12; v += coarse) {
    const double pw = flight_power_speed(v, p).total;
    if (pw < best_p) {
      best_p = pw;
      best_v = v;
    }
  }
  const double lo = std::max(0.0, best_v - coarse);
  const double hi = std::min(v_max, best_v + coarse);
  for (double v = lo; v <= hi + 1e-12; v += 0.01) {
    const double pw = flight_power_speed(v, p).total;
    if (pw < best_p) {
      best_p = pw;
      best_v = v;
    }
  }
  return best_v;
}

}  // namespace isacopt
