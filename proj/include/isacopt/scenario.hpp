#pragma once

// Mission description: loading, validation, normalization.  Every physical
// constant lives here and all dB/dBm values are converted to linear SI units
// exactly once, at the parsing boundary; everything downstream is linear.
//
// Schema (JSON object): top-level keys `users`, `targets`, `platform`,
// `power_model`, `timing`, `solver`.  Power-like fields accept either a
// linear SI spelling (`*_w`, plain ratio) or a dB spelling (`*_dbm`, `*_db`).
// See default_scenario() for a complete populated example.

#include <json.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "isacopt/errors.hpp"
#include "isacopt/geometry.hpp"
#include "isacopt/power.hpp"

namespace isacopt {

using nlohmann::json;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double linear_to_db(double x) { return 10.0 * std::log10(x); }

struct CommUser {
  Vec2 position = Vec2::Zero();  // [m]
  double min_rate = 1.0;         // R_min [bps/Hz]
  double noise_power = 1e-14;    // sigma_k^2 [W]
};

struct SensingTarget {
  Vec2 position = Vec2::Zero();   // [m]
  double rcs = 1.0;               // theta_e [m^2]
  double snr_threshold = 1.0;     // linear
  double echo_noise = 1e-14;      // sigma_e^2 [W]
  double error_budget = 0.0;      // epsilon, squared-Frobenius units [W^2]
  CMat desired_covariance;        // R_d, M x M Hermitian PSD [W]
};

struct UavPlatform {
  int antennas = 6;          // M
  double altitude = 40.0;    // H [m]
  double wavelength = 0.1;   // lambda [m]
  double spacing = 0.05;     // d_hat [m]
  double p_max = 10.0;       // [W]
  double v_max = 15.0;       // [m/s]
  double a_max = 5.0;        // [m/s^2]
  double hover_radius = 5.0; // D [m]
  Vec2 start_pos = Vec2::Zero();
  Vec2 end_pos = Vec2::Zero();

  ArrayGeometry geometry() const {
    return ArrayGeometry{antennas, altitude, spacing, wavelength};
  }
};

struct MissionTiming {
  double total_time = 55.0;    // T [s]
  double slot_duration = 1.0;  // delta_t [s]
  int slots = 55;              // N
  int max_sensing_slots = 5;   // N_s^max per target
  double beta0 = 1e-3;         // channel power gain at 1 m, linear
};

struct SolverConfig {
  double penalty_weight = 10.0;  // tau, scaled by the typical objective
  double ao_tol = 1e-3;         // epsilon_AO
  int max_ao_iters = 10;
  int max_sca_iters = 6;
  double trust_region = 25.0;   // rho_tr [m^2]
  double binary_tol = 1e-3;
  double rank_tol = 1e-4;
  // conic backend knobs
  double admm_eps = 1e-7;
  int admm_max_iters = 150000;
};

struct Scenario {
  std::vector<CommUser> users;
  std::vector<SensingTarget> targets;
  UavPlatform platform;
  PowerModelParams power;
  MissionTiming timing;
  SolverConfig solver;

  int num_users() const { return static_cast<int>(users.size()); }
  int num_targets() const { return static_cast<int>(targets.size()); }
  int num_slots() const { return timing.slots; }

  void validate() const;
};

// ---- desired sensing covariance -------------------------------------------

enum class CovarianceMode { FocusedRankOne, LeastSquaresFit };

namespace detail {

inline CVec steering_at_cos(const UavPlatform& p, double cos_theta) {
  CVec a(p.antennas);
  const double step =
      2.0 * std::numbers::pi * (p.spacing / p.wavelength) * cos_theta;
  for (int m = 0; m < p.antennas; ++m)
    a[m] = std::polar(1.0, step * static_cast<double>(m));
  return a;
}

// Euclidean projection of eigenvalues onto {l >= 0, sum l = budget}.
inline Eigen::VectorXd simplex_project(Eigen::VectorXd lam, double budget) {
  const int n = static_cast<int>(lam.size());
  Eigen::VectorXd sorted = lam;
  std::sort(sorted.data(), sorted.data() + n, std::greater<double>());
  double cum = 0.0;
  double theta = 0.0;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    cum += sorted[i];
    const double t = (cum - budget) / (i + 1);
    if (t < sorted[i]) {
      theta = t;
      k = i + 1;
    }
  }
  (void)k;
  for (int i = 0; i < n; ++i) lam[i] = std::max(lam[i] - theta, 0.0);
  return lam;
}

}  // namespace detail

inline CMat build_desired_covariance(const UavPlatform& platform,
                                     double power_budget, CovarianceMode mode,
                                     double mainlobe_halfwidth_deg = 10.0) {
  const int M = platform.antennas;
  if (power_budget > platform.p_max * (1.0 + 1e-9))
    throw ScenarioError("desired_covariance: power budget exceeds p_max");

  if (mode == CovarianceMode::FocusedRankOne) {
    // boresight: UAV directly above the target, cos(theta) = 1
    const CVec a0 = detail::steering_at_cos(platform, 1.0);
    return (power_budget / M) * (a0 * a0.adjoint());
  }

  // Least-squares fit of a mainlobe mask over a uniform angular grid,
  // trace-pinned to the budget, by projected gradient descent.
  if (mainlobe_halfwidth_deg <= 0.0 || mainlobe_halfwidth_deg >= 90.0)
    throw ScenarioError("desired_covariance: mainlobe width out of range");
  const int G = 181;
  std::vector<CVec> grid(G);
  Eigen::VectorXd mask(G);
  for (int g = 0; g < G; ++g) {
    const double theta_deg = 90.0 * g / (G - 1);
    grid[g] = detail::steering_at_cos(
        platform, std::cos(theta_deg * std::numbers::pi / 180.0));
    mask[g] = (theta_deg <= mainlobe_halfwidth_deg) ? power_budget * M : 0.0;
  }
  if (mask.maxCoeff() > power_budget * M * (1.0 + 1e-9))
    throw ScenarioError("desired_covariance: mask unattainable at M antennas");

  CMat R = (power_budget / M) * CMat::Identity(M, M);
  const double step = 1.0 / (2.0 * G * M * M);
  for (int it = 0; it < 800; ++it) {
    CMat grad = CMat::Zero(M, M);
    for (int g = 0; g < G; ++g) {
      const double r = beampattern_gain(R, grid[g]) - mask[g];
      grad += (2.0 * r) * (grid[g] * grid[g].adjoint());
    }
    R -= step * grad;
    // project: Hermitian part, eigenvalues onto the scaled simplex
    R = 0.5 * (R + R.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<CMat> es(R);
    const Eigen::VectorXd lam =
        detail::simplex_project(es.eigenvalues(), power_budget);
    R = es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().adjoint();
  }
  double resid = 0.0, mask_energy = 0.0;
  for (int g = 0; g < G; ++g) {
    const double r = beampattern_gain(R, grid[g]) - mask[g];
    resid += r * r;
    mask_energy += mask[g] * mask[g];
  }
  if (resid > 0.999 * mask_energy)
    throw ScenarioError("desired_covariance: least-squares fit failed");
  return R;
}

// ---- validation -------------------------------------------------------------

inline void Scenario::validate() const {
  if (users.empty()) throw ScenarioError("scenario: needs at least one user (K >= 1)");
  const int M = platform.antennas;
  if (M < 2) throw ScenarioError("platform.antennas: M >= 2 required");
  if (platform.altitude <= 0) throw ScenarioError("platform.altitude_m: must be > 0");
  if (platform.spacing <= 0 || platform.wavelength <= 0)
    throw ScenarioError("platform: element spacing and wavelength must be > 0");
  if (platform.p_max <= 0) throw ScenarioError("platform.p_max: must be > 0");
  if (platform.v_max <= 0 || platform.a_max <= 0)
    throw ScenarioError("platform: v_max and a_max must be > 0");
  if (platform.hover_radius <= 0) throw ScenarioError("platform.hover_radius_m: must be > 0");
  if (!platform.start_pos.allFinite() || !platform.end_pos.allFinite())
    throw ScenarioError("platform: start/end positions must be finite");

  for (size_t k = 0; k < users.size(); ++k) {
    const auto& u = users[k];
    const std::string at = "users[" + std::to_string(k) + "]";
    if (!u.position.allFinite()) throw ScenarioError(at + ".position_m: not finite");
    if (u.min_rate <= 0) throw ScenarioError(at + ".min_rate: R_min > 0 required");
    if (u.noise_power <= 0) throw ScenarioError(at + ".noise: sigma^2 > 0 required");
  }
  for (size_t e = 0; e < targets.size(); ++e) {
    const auto& t = targets[e];
    const std::string at = "targets[" + std::to_string(e) + "]";
    if (!t.position.allFinite()) throw ScenarioError(at + ".position_m: not finite");
    if (t.rcs <= 0) throw ScenarioError(at + ".rcs_m2: must be > 0");
    if (t.snr_threshold <= 0) throw ScenarioError(at + ".snr_threshold: must be > 0");
    if (t.echo_noise <= 0) throw ScenarioError(at + ".echo_noise: must be > 0");
    if (t.error_budget <= 0) throw ScenarioError(at + ".beampattern_error_budget: must be > 0");
    const CMat& R = t.desired_covariance;
    if (R.rows() != M || R.cols() != M)
      throw ScenarioError(at + ".desired_covariance: must be M x M");
    if ((R - R.adjoint()).norm() > 1e-9 * std::max(1.0, R.norm()))
      throw ScenarioError(at + ".desired_covariance: not Hermitian");
    Eigen::SelfAdjointEigenSolver<CMat> es(R);
    if (es.eigenvalues().minCoeff() < -1e-9 * std::max(1.0, R.trace().real()))
      throw ScenarioError(at + ".desired_covariance: not PSD");
    if (R.trace().real() > platform.p_max * (1.0 + 1e-9))
      throw ScenarioError(at + ".desired_covariance: trace exceeds p_max");
  }

  power.validate();

  if (timing.slot_duration <= 0) throw ScenarioError("timing.slot_duration_s: must be > 0");
  if (timing.slots < 2) throw ScenarioError("timing: at least 2 slots required");
  if (std::abs(timing.slots * timing.slot_duration - timing.total_time) > 1e-9)
    throw ScenarioError("timing: N * slot_duration must equal total_time exactly");
  if (timing.max_sensing_slots < 1)
    throw ScenarioError("timing.max_sensing_slots_per_target: must be >= 1");
  if (timing.beta0 <= 0) throw ScenarioError("timing.beta0: must be > 0");

  if (solver.penalty_weight < 1.0) throw ScenarioError("solver.penalty_weight: tau >= 1 required");
  if (solver.ao_tol <= 0 || solver.binary_tol <= 0 || solver.rank_tol <= 0 ||
      solver.trust_region <= 0 || solver.admm_eps <= 0)
    throw ScenarioError("solver: tolerances must be > 0");

  // straight-line feasibility of the endpoints
  const double reach = timing.slots * timing.slot_duration * platform.v_max;
  const double dist = (platform.end_pos - platform.start_pos).norm();
  if (dist > reach)
    throw ScenarioError("platform: end position unreachable within N*dt at v_max (needs " +
                        std::to_string(dist) + " m, reach " + std::to_string(reach) + " m)");
}

// ---- JSON parsing ------------------------------------------------------------

namespace detail {

inline const json& require(const json& obj, const std::string& key,
                           const std::string& at) {
  auto it = obj.find(key);
  if (it == obj.end())
    throw ScenarioError(at + ": missing field '" + key + "'");
  return *it;
}

inline double num(const json& j, const std::string& at) {
  if (!j.is_number()) throw ScenarioError(at + ": expected a number");
  return j.get<double>();
}

inline double get_num(const json& obj, const std::string& key,
                      const std::string& at) {
  return num(require(obj, key, at), at + "." + key);
}

inline double get_num_or(const json& obj, const std::string& key, double dflt) {
  auto it = obj.find(key);
  return (it == obj.end()) ? dflt : num(*it, key);
}

// Power in Watt given either `<base>_w` or `<base>_dbm`.
inline double get_power(const json& obj, const std::string& base,
                        const std::string& at) {
  const bool has_w = obj.contains(base + "_w");
  const bool has_dbm = obj.contains(base + "_dbm");
  if (has_w && has_dbm)
    throw ScenarioError(at + ": give either " + base + "_w or " + base + "_dbm, not both");
  if (has_w) return get_num(obj, base + "_w", at);
  if (has_dbm) return dbm_to_watt(get_num(obj, base + "_dbm", at));
  throw ScenarioError(at + ": missing field '" + base + "_w' (or '" + base + "_dbm')");
}

// Linear ratio given either `<base>` or `<base>_db`.
inline double get_ratio(const json& obj, const std::string& base,
                        const std::string& at) {
  const bool has_lin = obj.contains(base);
  const bool has_db = obj.contains(base + "_db");
  if (has_lin && has_db)
    throw ScenarioError(at + ": give either " + base + " or " + base + "_db, not both");
  if (has_lin) return get_num(obj, base, at);
  if (has_db) return db_to_linear(get_num(obj, base + "_db", at));
  throw ScenarioError(at + ": missing field '" + base + "' (or '" + base + "_db')");
}

inline Vec2 get_vec2(const json& obj, const std::string& key,
                     const std::string& at) {
  const json& j = require(obj, key, at);
  if (!j.is_array() || j.size() != 2)
    throw ScenarioError(at + "." + key + ": expected [x, y]");
  return Vec2(num(j[0], at), num(j[1], at));
}

inline CMat parse_matrix(const json& j, int M, const std::string& at) {
  const json& re = require(j, "re", at);
  CMat R = CMat::Zero(M, M);
  if (!re.is_array() || static_cast<int>(re.size()) != M)
    throw ScenarioError(at + ".re: expected M rows");
  for (int i = 0; i < M; ++i)
    for (int c = 0; c < M; ++c) R(i, c) = num(re[i][c], at);
  if (j.contains("im")) {
    const json& im = j["im"];
    for (int i = 0; i < M; ++i)
      for (int c = 0; c < M; ++c)
        R(i, c) += std::complex<double>(0.0, num(im[i][c], at));
  }
  return R;
}

inline json dump_matrix(const CMat& R) {
  json re = json::array(), im = json::array();
  for (int i = 0; i < R.rows(); ++i) {
    json r_row = json::array(), i_row = json::array();
    for (int c = 0; c < R.cols(); ++c) {
      r_row.push_back(R(i, c).real());
      i_row.push_back(R(i, c).imag());
    }
    re.push_back(r_row);
    im.push_back(i_row);
  }
  return json{{"re", re}, {"im", im}};
}

}  // namespace detail

inline Scenario load_scenario(const json& doc) {
  using namespace detail;
  if (!doc.is_object()) throw ScenarioError("scenario: expected a JSON object");
  Scenario s;

  const json& plat = require(doc, "platform", "scenario");
  s.platform.antennas = static_cast<int>(get_num(plat, "antennas", "platform"));
  s.platform.altitude = get_num(plat, "altitude_m", "platform");
  s.platform.wavelength = get_num(plat, "wavelength_m", "platform");
  s.platform.spacing = get_num(plat, "element_spacing_m", "platform");
  s.platform.p_max = get_power(plat, "p_max", "platform");
  s.platform.v_max = get_num(plat, "v_max_mps", "platform");
  s.platform.a_max = get_num(plat, "a_max_mps2", "platform");
  s.platform.hover_radius = get_num(plat, "hover_radius_m", "platform");
  s.platform.start_pos = get_vec2(plat, "start_pos_m", "platform");
  s.platform.end_pos = get_vec2(plat, "end_pos_m", "platform");

  const json& users = require(doc, "users", "scenario");
  if (!users.is_array()) throw ScenarioError("users: expected an array");
  for (size_t k = 0; k < users.size(); ++k) {
    const std::string at = "users[" + std::to_string(k) + "]";
    const json& ju = users[k];
    CommUser u;
    u.position = get_vec2(ju, "position_m", at);
    u.min_rate = get_num(ju, "min_rate_bps_hz", at);
    u.noise_power = get_power(ju, "noise", at);
    s.users.push_back(u);
  }

  const json& targets = require(doc, "targets", "scenario");
  if (!targets.is_array()) throw ScenarioError("targets: expected an array");
  for (size_t e = 0; e < targets.size(); ++e) {
    const std::string at = "targets[" + std::to_string(e) + "]";
    const json& jt = targets[e];
    SensingTarget t;
    t.position = get_vec2(jt, "position_m", at);
    t.rcs = get_num_or(jt, "rcs_m2", 1.0);
    t.snr_threshold = get_ratio(jt, "snr_threshold", at);
    t.echo_noise = get_power(jt, "echo_noise", at);
    const json& cov = require(jt, "desired_covariance", at);
    if (cov.contains("re")) {
      t.desired_covariance =
          parse_matrix(cov, s.platform.antennas, at + ".desired_covariance");
    } else {
      const std::string mode =
          require(cov, "mode", at + ".desired_covariance").get<std::string>();
      const double budget = get_power(cov, "power_budget", at + ".desired_covariance");
      CovarianceMode cm;
      if (mode == "focused_rank_one") cm = CovarianceMode::FocusedRankOne;
      else if (mode == "least_squares_fit") cm = CovarianceMode::LeastSquaresFit;
      else throw ScenarioError(at + ".desired_covariance.mode: unknown mode '" + mode + "'");
      t.desired_covariance = build_desired_covariance(
          s.platform, budget, cm,
          get_num_or(cov, "mainlobe_halfwidth_deg", 10.0));
    }
    if (jt.contains("beampattern_error_budget")) {
      t.error_budget = get_num(jt, "beampattern_error_budget", at);
    } else {
      const double fro2 = t.desired_covariance.squaredNorm();
      t.error_budget = 0.1 * fro2;
    }
    s.targets.push_back(t);
  }

  const json& pm = require(doc, "power_model", "scenario");
  s.power.blade_angular_velocity = get_num(pm, "omega_rad_s", "power_model");
  s.power.rotor_radius = get_num(pm, "rotor_radius_m", "power_model");
  s.power.air_density = get_num(pm, "air_density_kg_m3", "power_model");
  s.power.rotor_solidity = get_num(pm, "rotor_solidity", "power_model");
  s.power.rotor_disc_area = get_num(pm, "rotor_disc_area_m2", "power_model");
  s.power.blade_profile_power = get_num(pm, "blade_profile_power_w", "power_model");
  s.power.induced_power = get_num(pm, "induced_power_w", "power_model");
  s.power.induced_velocity = get_num(pm, "induced_velocity_mps", "power_model");
  s.power.fuselage_drag_ratio = get_num(pm, "fuselage_drag_ratio", "power_model");
  if (pm.contains("variant")) {
    const std::string v = pm["variant"].get<std::string>();
    if (v == "standard_rotary_wing") s.power.variant = PowerVariant::StandardRotaryWing;
    else if (v == "paper_as_written") s.power.variant = PowerVariant::PaperAsWritten;
    else throw ScenarioError("power_model.variant: unknown variant '" + v + "'");
  }

  const json& tm = require(doc, "timing", "scenario");
  s.timing.total_time = get_num(tm, "total_time_s", "timing");
  s.timing.slot_duration = get_num(tm, "slot_duration_s", "timing");
  s.timing.slots = static_cast<int>(
      std::llround(s.timing.total_time / s.timing.slot_duration));
  s.timing.max_sensing_slots =
      static_cast<int>(get_num(tm, "max_sensing_slots_per_target", "timing"));
  s.timing.beta0 = get_ratio(tm, "beta0", "timing");

  if (doc.contains("solver")) {
    const json& so = doc["solver"];
    s.solver.penalty_weight = get_num_or(so, "penalty_weight", s.solver.penalty_weight);
    s.solver.ao_tol = get_num_or(so, "ao_tolerance", s.solver.ao_tol);
    s.solver.max_ao_iters = static_cast<int>(get_num_or(so, "max_ao_iters", s.solver.max_ao_iters));
    s.solver.max_sca_iters = static_cast<int>(get_num_or(so, "max_sca_iters", s.solver.max_sca_iters));
    s.solver.trust_region = get_num_or(so, "trust_region_m2", s.solver.trust_region);
    s.solver.binary_tol = get_num_or(so, "binary_tol", s.solver.binary_tol);
    s.solver.rank_tol = get_num_or(so, "rank_tol", s.solver.rank_tol);
    s.solver.admm_eps = get_num_or(so, "admm_eps", s.solver.admm_eps);
    s.solver.admm_max_iters = static_cast<int>(get_num_or(so, "admm_max_iters", s.solver.admm_max_iters));
  }

  s.validate();
  return s;
}

inline Scenario load_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ScenarioError(std::string("scenario: JSON parse error: ") + e.what());
  }
  return load_scenario(doc);
}

// SI-units-only serialization; load_scenario(serialize(s)) is field-exact.
inline json serialize(const Scenario& s) {
  json doc;
  doc["platform"] = {
      {"antennas", s.platform.antennas},
      {"altitude_m", s.platform.altitude},
      {"wavelength_m", s.platform.wavelength},
      {"element_spacing_m", s.platform.spacing},
      {"p_max_w", s.platform.p_max},
      {"v_max_mps", s.platform.v_max},
      {"a_max_mps2", s.platform.a_max},
      {"hover_radius_m", s.platform.hover_radius},
      {"start_pos_m", {s.platform.start_pos.x(), s.platform.start_pos.y()}},
      {"end_pos_m", {s.platform.end_pos.x(), s.platform.end_pos.y()}},
  };
  doc["users"] = json::array();
  for (const auto& u : s.users)
    doc["users"].push_back({{"position_m", {u.position.x(), u.position.y()}},
                            {"min_rate_bps_hz", u.min_rate},
                            {"noise_w", u.noise_power}});
  doc["targets"] = json::array();
  for (const auto& t : s.targets)
    doc["targets"].push_back(
        {{"position_m", {t.position.x(), t.position.y()}},
         {"rcs_m2", t.rcs},
         {"snr_threshold", t.snr_threshold},
         {"echo_noise_w", t.echo_noise},
         {"beampattern_error_budget", t.error_budget},
         {"desired_covariance", detail::dump_matrix(t.desired_covariance)}});
  doc["power_model"] = {
      {"omega_rad_s", s.power.blade_angular_velocity},
      {"rotor_radius_m", s.power.rotor_radius},
      {"air_density_kg_m3", s.power.air_density},
      {"rotor_solidity", s.power.rotor_solidity},
      {"rotor_disc_area_m2", s.power.rotor_disc_area},
      {"blade_profile_power_w", s.power.blade_profile_power},
      {"induced_power_w", s.power.induced_power},
      {"induced_velocity_mps", s.power.induced_velocity},
      {"fuselage_drag_ratio", s.power.fuselage_drag_ratio},
      {"variant", s.power.variant == PowerVariant::StandardRotaryWing
                      ? "standard_rotary_wing"
                      : "paper_as_written"},
  };
  doc["timing"] = {{"total_time_s", s.timing.total_time},
                   {"slot_duration_s", s.timing.slot_duration},
                   {"max_sensing_slots_per_target", s.timing.max_sensing_slots},
                   {"beta0", s.timing.beta0}};
  doc["solver"] = {{"penalty_weight", s.solver.penalty_weight},
                   {"ao_tolerance", s.solver.ao_tol},
                   {"max_ao_iters", s.solver.max_ao_iters},
                   {"max_sca_iters", s.solver.max_sca_iters},
                   {"trust_region_m2", s.solver.trust_region},
                   {"binary_tol", s.solver.binary_tol},
                   {"rank_tol", s.solver.rank_tol},
                   {"admm_eps", s.solver.admm_eps},
                   {"admm_max_iters", s.solver.admm_max_iters}};
  return doc;
}

// The evaluation setup: 0.5 km x 0.5 km area, two users, two targets, corner
// to corner mission.  Node placements are a documented choice; everything is
// overridable through the schema.
inline Scenario default_scenario() {
  Scenario s;
  s.platform.antennas = 6;
  s.platform.altitude = 40.0;
  s.platform.wavelength = 0.1;   // 3 GHz carrier
  s.platform.spacing = 0.05;     // half wavelength
  s.platform.p_max = 10.0;       // 40 dBm
  s.platform.v_max = 15.0;
  s.platform.a_max = 5.0;
  s.platform.hover_radius = 5.0;
  s.platform.start_pos = Vec2(0.0, 0.0);
  s.platform.end_pos = Vec2(500.0, 500.0);

  s.timing.total_time = 55.0;
  s.timing.slot_duration = 1.0;
  s.timing.slots = 55;
  s.timing.max_sensing_slots = 5;
  s.timing.beta0 = 1e-3;  // -30 dB

  CommUser u1, u2;
  u1.position = Vec2(100.0, 400.0);
  u2.position = Vec2(400.0, 100.0);
  u1.min_rate = u2.min_rate = 1.0;
  u1.noise_power = u2.noise_power = 1e-14;  // -110 dBm
  s.users = {u1, u2};

  SensingTarget t1, t2;
  t1.position = Vec2(150.0, 200.0);
  t2.position = Vec2(350.0, 300.0);
  for (SensingTarget* t : {&t1, &t2}) {
    t->rcs = 1.0;
    t->snr_threshold = 1.0;  // 0 dB
    t->echo_noise = 1e-14;
    t->desired_covariance = build_desired_covariance(
        s.platform, s.platform.p_max, CovarianceMode::FocusedRankOne);
    t->error_budget = 0.1 * t->desired_covariance.squaredNorm();
  }
  s.targets = {t1, t2};

  s.power = PowerModelParams{};  // Table-I constants are the defaults
  s.validate();
  return s;
}

inline uint64_t scenario_digest(const Scenario& s) {
  const std::string text = serialize(s).dump();
  uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace isacopt
