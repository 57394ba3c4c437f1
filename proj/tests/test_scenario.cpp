#include <catch2/catch_amalgamated.hpp>

#include "isacopt/scenario.hpp"

using namespace isacopt;
using Catch::Approx;

TEST_CASE("db conversions happen once at the boundary") {
  CHECK(dbm_to_watt(-110.0) == Approx(1e-14).epsilon(1e-12));
  CHECK(dbm_to_watt(40.0) == Approx(10.0).epsilon(1e-12));
  CHECK(db_to_linear(-30.0) == Approx(1e-3).epsilon(1e-12));

  json doc = serialize(default_scenario());
  doc["users"][0].erase("noise_w");
  doc["users"][0]["noise_dbm"] = -110.0;
  doc["platform"].erase("p_max_w");
  doc["platform"]["p_max_dbm"] = 40.0;
  doc["timing"].erase("beta0");
  doc["timing"]["beta0_db"] = -30.0;
  const Scenario s = load_scenario(doc);
  CHECK(s.users[0].noise_power == Approx(1e-14).epsilon(1e-12));
  CHECK(s.platform.p_max == Approx(10.0).epsilon(1e-12));
  CHECK(s.timing.beta0 == Approx(1e-3).epsilon(1e-12));
}

TEST_CASE("default scenario matches the evaluation setup") {
  const Scenario s = default_scenario();
  CHECK(s.num_slots() == 55);
  CHECK(s.num_users() == 2);
  CHECK(s.num_targets() == 2);
  CHECK(s.platform.antennas == 6);
  CHECK(s.platform.altitude == 40.0);
  CHECK(s.platform.v_max == 15.0);
  CHECK(hover_power(s.power) == Approx(168.6));
  CHECK(s.targets[0].rcs == 1.0);
  CHECK(s.targets[0].snr_threshold == Approx(1.0));
  // per-target sensing remains feasible across a spread of radar cross
  // sections at the 0 dB threshold (single-slot best case)
  for (double rcs : {0.1, 1.0, 10.0}) {
    const double gain = s.platform.p_max * s.platform.antennas;
    const double H = s.platform.altitude;
    const double best = rcs * s.timing.beta0 * s.timing.beta0 * gain /
                        (16.0 * std::numbers::pi * std::pow(H, 4) *
                         s.targets[0].echo_noise);
    CHECK(best >= 1.0);
  }
}

TEST_CASE("serialize/load round-trip is field-exact") {
  const Scenario s = default_scenario();
  const std::string text = serialize(s).dump();
  const Scenario r = load_scenario(text);

  CHECK(r.platform.p_max == s.platform.p_max);
  CHECK(r.platform.start_pos == s.platform.start_pos);
  CHECK(r.platform.end_pos == s.platform.end_pos);
  REQUIRE(r.users.size() == s.users.size());
  for (size_t k = 0; k < s.users.size(); ++k) {
    CHECK(r.users[k].position == s.users[k].position);
    CHECK(r.users[k].min_rate == s.users[k].min_rate);
    CHECK(r.users[k].noise_power == s.users[k].noise_power);
  }
  REQUIRE(r.targets.size() == s.targets.size());
  for (size_t e = 0; e < s.targets.size(); ++e) {
    CHECK(r.targets[e].position == s.targets[e].position);
    CHECK(r.targets[e].rcs == s.targets[e].rcs);
    CHECK(r.targets[e].snr_threshold == s.targets[e].snr_threshold);
    CHECK(r.targets[e].echo_noise == s.targets[e].echo_noise);
    CHECK(r.targets[e].error_budget == s.targets[e].error_budget);
    CHECK(r.targets[e].desired_covariance == s.targets[e].desired_covariance);
  }
  CHECK(r.power.induced_power == s.power.induced_power);
  CHECK(r.timing.beta0 == s.timing.beta0);
  CHECK(r.timing.slots == s.timing.slots);
  CHECK(r.solver.penalty_weight == s.solver.penalty_weight);
  CHECK(scenario_digest(r) == scenario_digest(s));
}

TEST_CASE("schema violations name the offending field") {
  json doc = serialize(default_scenario());
  SECTION("missing user position") {
    doc["users"][0].erase("position_m");
    CHECK_THROWS_WITH(load_scenario(doc),
                      Catch::Matchers::ContainsSubstring("position_m"));
  }
  SECTION("missing platform power") {
    doc["platform"].erase("p_max_w");
    CHECK_THROWS_WITH(load_scenario(doc),
                      Catch::Matchers::ContainsSubstring("p_max"));
  }
  SECTION("negative noise names the invariant") {
    doc["users"][0]["noise_w"] = -1.0;
    CHECK_THROWS_WITH(load_scenario(doc),
                      Catch::Matchers::ContainsSubstring("sigma^2 > 0"));
  }
  SECTION("unreachable end position") {
    doc["platform"]["v_max_mps"] = 0.5;
    CHECK_THROWS_WITH(load_scenario(doc),
                      Catch::Matchers::ContainsSubstring("unreachable"));
  }
  SECTION("slot grid must tile the horizon") {
    doc["timing"]["slot_duration_s"] = 0.7;
    CHECK_THROWS_AS(load_scenario(doc), ScenarioError);
  }
}

TEST_CASE("focused rank-one desired covariance") {
  const Scenario s = default_scenario();
  const CMat R = build_desired_covariance(s.platform, 10.0,
                                          CovarianceMode::FocusedRankOne);
  CHECK(R.trace().real() == Approx(10.0).epsilon(1e-12));

  Eigen::SelfAdjointEigenSolver<CMat> es(R);
  const auto& lam = es.eigenvalues();
  CHECK(lam[5] == Approx(10.0).epsilon(1e-9));   // single nonzero eigenvalue
  CHECK(std::abs(lam[4]) < 1e-9);

  // boresight gain equals budget * M
  const CVec a0 = detail::steering_at_cos(s.platform, 1.0);
  CHECK(beampattern_gain(R, a0) == Approx(60.0).epsilon(1e-9));

  // Hermitian + PSD within the published tolerances
  CHECK((R - R.adjoint()).norm() <= 1e-12 * R.norm());
  CHECK(lam.minCoeff() >= -1e-9 * R.trace().real());
}

TEST_CASE("least-squares fit beats the focused beam against a wide mask") {
  const Scenario s = default_scenario();
  const double budget = 10.0;
  const double halfwidth = 10.0;
  const CMat Rls = build_desired_covariance(
      s.platform, budget, CovarianceMode::LeastSquaresFit, halfwidth);
  const CMat Rfo = build_desired_covariance(
      s.platform, budget, CovarianceMode::FocusedRankOne);

  CHECK(Rls.trace().real() == Approx(budget).epsilon(1e-6));
  CHECK((Rls - Rls.adjoint()).norm() <= 1e-10 * std::max(1.0, Rls.norm()));
  Eigen::SelfAdjointEigenSolver<CMat> es(Rls);
  CHECK(es.eigenvalues().minCoeff() >= -1e-9 * Rls.trace().real());

  auto residual = [&](const CMat& R) {
    double out = 0.0;
    for (int g = 0; g < 181; ++g) {
      const double theta_deg = 90.0 * g / 180.0;
      const CVec a = detail::steering_at_cos(
          s.platform, std::cos(theta_deg * std::numbers::pi / 180.0));
      const double mask =
          (theta_deg <= halfwidth) ? budget * s.platform.antennas : 0.0;
      const double r = beampattern_gain(R, a) - mask;
      out += r * r;
    }
    return out;
  };
  CHECK(residual(Rls) < residual(Rfo));
}

TEST_CASE("validation accepts sensing-free missions") {
  Scenario s = default_scenario();
  s.targets.clear();
  CHECK_NOTHROW(s.validate());
  s.users.clear();
  CHECK_THROWS_AS(s.validate(), ScenarioError);
}
