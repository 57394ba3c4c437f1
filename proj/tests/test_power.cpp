#include <catch2/catch_amalgamated.hpp>

#include "isacopt/power.hpp"

using namespace isacopt;
using Catch::Approx;

namespace {

// independent evaluation used as the oracle: same physics, separate algebra
double oracle_flight_power(double v, const PowerModelParams& p) {
  const double blade =
      p.blade_profile_power *
      (1.0 + 3.0 * v * v /
                 (p.blade_angular_velocity * p.blade_angular_velocity *
                  p.rotor_radius * p.rotor_radius));
  const double u = v * v / (2.0 * p.induced_velocity * p.induced_velocity);
  // y = 1 / sqrt(sqrt(1 + u^2) + u), the rationalized form
  const double y = 1.0 / std::sqrt(std::sqrt(1.0 + u * u) + u);
  const double induced = p.induced_power * y;
  const double parasite = 0.5 * p.fuselage_drag_ratio * p.air_density *
                          p.rotor_solidity * p.rotor_disc_area * v * v * v;
  return blade + induced + parasite;
}

}  // namespace

TEST_CASE("hover power is P_o + P_i") {
  PowerModelParams p;
  CHECK(hover_power(p) == Approx(168.6).epsilon(1e-12));
  PowerModelParams zero = p;
  zero.blade_profile_power = 1e-30;
  zero.induced_power = 1e-30;
  CHECK(hover_power(zero) == Approx(0.0).margin(1e-12));
}

TEST_CASE("flight power at zero speed") {
  PowerModelParams p;
  CHECK(flight_power(Eigen::Vector2d::Zero(), p).total ==
        Approx(hover_power(p)).margin(1e-9));
  p.variant = PowerVariant::PaperAsWritten;
  CHECK(flight_power(Eigen::Vector2d::Zero(), p).total == Approx(0.0).margin(1e-12));
}

TEST_CASE("flight power at 10 m/s matches the closed-form oracle") {
  PowerModelParams p;
  const PowerEval e = flight_power(Eigen::Vector2d(10.0, 0.0), p);
  CHECK(e.blade_profile == Approx(81.6667).epsilon(1e-4));
  CHECK(e.induced == Approx(35.258).epsilon(1e-3));
  CHECK(e.parasite == Approx(9.2426).epsilon(1e-4));
  CHECK(e.total == Approx(126.2).epsilon(2e-3));
  CHECK(e.total == Approx(oracle_flight_power(10.0, p)).epsilon(1e-12));
}

TEST_CASE("variant offset identity") {
  PowerModelParams std_p;
  PowerModelParams paper = std_p;
  paper.variant = PowerVariant::PaperAsWritten;
  const double offset = hover_power(std_p);
  for (int i = 0; i < 50; ++i) {
    const double v = 15.0 * i / 49.0;
    const double a = flight_power_speed(v, std_p).total;
    const double b = flight_power_speed(v, paper).total;
    CHECK(a - b == Approx(offset).epsilon(1e-9));
  }
}

TEST_CASE("induced slack identity") {
  PowerModelParams p;
  SECTION("zero speed gives y = 1") {
    CHECK(induced_slack_exact(0.0, p) == Approx(1.0));
    CHECK(induced_slack_residual(1.0, Eigen::Vector2d::Zero(), p) ==
          Approx(0.0).margin(1e-15));
  }
  SECTION("closed form zeroes the residual across a speed grid") {
    for (int i = 0; i < 50; ++i) {
      const double v = 0.3 * (i + 1);
      const double y = induced_slack_exact(v, p);
      CHECK(induced_slack_residual(y, Eigen::Vector2d(v, 0.0), p) ==
            Approx(0.0).margin(1e-9));
    }
  }
  SECTION("documented value at 10 m/s") {
    const double y = induced_slack_exact(10.0, p);
    CHECK(y == Approx(0.3979).epsilon(1e-3));
  }
  SECTION("residual decreases in y") {
    const Eigen::Vector2d v(4.0, 3.0);
    double prev = induced_slack_residual(0.1, v, p);
    for (double y = 0.2; y < 2.0; y += 0.1) {
      const double r = induced_slack_residual(y, v, p);
      CHECK(r < prev);
      prev = r;
    }
  }
  SECTION("rejects non-positive y") {
    CHECK_THROWS_AS(induced_slack_residual(0.0, Eigen::Vector2d::Zero(), p), Error);
  }
}

TEST_CASE("slack reproduces the induced power term") {
  PowerModelParams p;
  for (int i = 0; i <= 50; ++i) {
    const double v = 15.0 * i / 50.0;
    const double via_slack = p.induced_power * induced_slack_exact(v, p);
    const double direct =
        p.induced_power *
        std::sqrt(std::sqrt(1.0 + std::pow(v, 4) / (4.0 * std::pow(p.induced_velocity, 4))) -
                  v * v / (2.0 * p.induced_velocity * p.induced_velocity));
    CHECK(via_slack == Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("power-minimizing speed") {
  PowerModelParams p;
  const double v_star = min_power_speed(p, 15.0);
  CHECK(v_star >= 9.0);
  CHECK(v_star <= 11.5);
  CHECK(v_star == Approx(10.2).margin(0.3));

  // 0.01 m/s grid oracle
  double best_v = 0.0, best_p = 1e12;
  for (double v = 0.0; v <= 15.0; v += 0.01) {
    const double pw = oracle_flight_power(v, p);
    if (pw < best_p) { best_p = pw; best_v = v; }
  }
  CHECK(v_star == Approx(best_v).margin(0.02));

  SECTION("doubling induced power raises the minimizer") {
    PowerModelParams heavy = p;
    heavy.induced_power *= 2.0;
    CHECK(min_power_speed(heavy, 15.0) > v_star);
  }
  SECTION("printed variant differs only by a constant offset") {
    // a constant offset cannot move the argmin
    PowerModelParams paper = p;
    paper.variant = PowerVariant::PaperAsWritten;
    CHECK(min_power_speed(paper, 15.0) == Approx(v_star).margin(0.02));
    CHECK(flight_power_speed(0.0, paper).total == Approx(0.0).margin(1e-12));
  }
}
