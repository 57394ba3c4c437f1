#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "isacopt/geometry.hpp"

using namespace isacopt;
using Catch::Approx;

namespace {

ArrayGeometry half_wave_array(int M, double H) {
  return ArrayGeometry{M, H, 0.05, 0.1};
}

CMat random_hermitian(std::mt19937_64& rng, int M) {
  std::normal_distribution<double> g(0.0, 1.0);
  CMat A(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) A(i, j) = std::complex<double>(g(rng), g(rng));
  return 0.5 * (A + A.adjoint());
}

// independent brute-force quadratic form at cos(theta) = H / sqrt(s)
double direct_quadratic_form(const CMat& W, double s, const ArrayGeometry& geom,
                             double beta0) {
  const int M = static_cast<int>(W.rows());
  CVec a(M);
  const double step = 2.0 * std::numbers::pi * (geom.spacing / geom.wavelength) *
                      geom.altitude / std::sqrt(s);
  for (int m = 0; m < M; ++m) a[m] = std::polar(1.0, step * m);
  return beta0 * beta0 * (a.dot(W * a)).real();
}

}  // namespace

TEST_CASE("steering vector overhead alternates sign at half-wave spacing") {
  SteeringContext ctx;
  ctx.uav = Vec2(10.0, 20.0);
  ctx.ground = Vec2(10.0, 20.0);
  ctx.array = half_wave_array(6, 40.0);
  const CVec a = steering_vector(ctx);
  REQUIRE(ctx.cos_theta() == Approx(1.0));
  for (int m = 0; m < 6; ++m) {
    const double expected = (m % 2 == 0) ? 1.0 : -1.0;
    CHECK(a[m].real() == Approx(expected).margin(1e-12));
    CHECK(a[m].imag() == Approx(0.0).margin(1e-12));
  }
}

TEST_CASE("steering vector phases follow the 3-4-5 geometry") {
  SteeringContext ctx;
  ctx.uav = Vec2(0.0, 0.0);
  ctx.ground = Vec2(30.0, 0.0);
  ctx.array = half_wave_array(6, 40.0);
  REQUIRE(ctx.slant() == Approx(50.0));
  REQUIRE(ctx.cos_theta() == Approx(0.8));
  const CVec a = steering_vector(ctx);
  for (int m = 0; m < 6; ++m) {
    const double phase = 2.0 * std::numbers::pi * 0.5 * 0.8 * m;
    CHECK(a[m].real() == Approx(std::cos(phase)).margin(1e-12));
    CHECK(a[m].imag() == Approx(std::sin(phase)).margin(1e-12));
  }
}

TEST_CASE("steering vector norm is M for random geometry") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-300.0, 300.0);
  for (int trial = 0; trial < 20; ++trial) {
    SteeringContext ctx;
    ctx.uav = Vec2(pos(rng), pos(rng));
    ctx.ground = Vec2(pos(rng), pos(rng));
    ctx.array = half_wave_array(2 + trial % 7, 40.0);
    const CVec a = steering_vector(ctx);
    CHECK(a.squaredNorm() == Approx(ctx.array.antennas).epsilon(1e-12));
  }
}

TEST_CASE("free-space channel magnitudes") {
  SteeringContext ctx;
  ctx.uav = Vec2(0.0, 0.0);
  ctx.ground = Vec2(0.0, 0.0);
  ctx.array = half_wave_array(6, 40.0);
  const double beta0 = 1e-3;
  const CVec h = comm_channel(ctx, beta0);
  CHECK(h.squaredNorm() == Approx(3.75e-9).epsilon(1e-12));
  for (int m = 0; m < 6; ++m)
    CHECK(std::abs(h[m]) == Approx(beta0 / 40.0).epsilon(1e-12));

  // doubling the slant range divides the gain by four
  SteeringContext far = ctx;
  far.ground = Vec2(std::sqrt(80.0 * 80.0 - 40.0 * 40.0), 0.0);
  REQUIRE(far.slant() == Approx(80.0));
  const CVec h2 = comm_channel(far, beta0);
  CHECK(h.squaredNorm() / h2.squaredNorm() == Approx(4.0).epsilon(1e-12));
}

TEST_CASE("sinr closed forms") {
  SteeringContext ctx;
  ctx.uav = Vec2(5.0, -3.0);
  ctx.ground = Vec2(17.0, 40.0);
  ctx.array = half_wave_array(6, 40.0);
  const CVec h = comm_channel(ctx, 1e-3);
  const double sigma2 = 1e-14;

  SECTION("single user has no interference") {
    CMat W = CMat::Identity(6, 6) * 0.5;
    const double val = sinr({W}, h, 0, sigma2);
    const double expected = (h.dot(W * h)).real() / sigma2;
    CHECK(val == Approx(expected).epsilon(1e-9));
  }
  SECTION("all-zero covariances give zero") {
    CMat Z = CMat::Zero(6, 6);
    CHECK(sinr({Z, Z}, h, 0, sigma2) == 0.0);
  }
  SECTION("symmetric equal-power split matches the closed form") {
    const double P = 10.0;
    CMat W = (P / (2.0 * 6)) * CMat::Identity(6, 6);
    const double g = h.squaredNorm();
    const double expected = (g * P / 12.0) / (g * P / 12.0 + sigma2);
    CHECK(sinr({W, W}, h, 0, sigma2) == Approx(expected).epsilon(1e-9));
    CHECK(sinr({W, W}, h, 0, sigma2) < 1.0);
  }
  SECTION("scaling covariances and noise together leaves sinr unchanged") {
    std::mt19937_64 rng(3);
    CMat A = random_hermitian(rng, 6);
    CMat W1 = A * A.adjoint();
    CMat B = random_hermitian(rng, 6);
    CMat W2 = B * B.adjoint();
    const double base = sinr({W1, W2}, h, 0, sigma2);
    const double c = 37.5;
    CHECK(sinr({CMat(c * W1), CMat(c * W2)}, h, 0, c * sigma2) ==
          Approx(base).epsilon(1e-12));
  }
}

TEST_CASE("beampattern gain basics") {
  SteeringContext ctx;
  ctx.uav = Vec2(0.0, 0.0);
  ctx.ground = Vec2(0.0, 0.0);
  ctx.array = half_wave_array(6, 40.0);
  const CVec a = steering_vector(ctx);

  CHECK(beampattern_gain(CMat::Identity(6, 6), a) == Approx(6.0));

  const double P = 10.0;
  CMat focused = (P / 6.0) * (a * a.adjoint());
  CHECK(beampattern_gain(focused, a) == Approx(P * 6.0).epsilon(1e-12));

  std::mt19937_64 rng(11);
  for (int t = 0; t < 10; ++t) {
    CMat A = random_hermitian(rng, 6);
    CMat psd = A * A.adjoint();
    CHECK(beampattern_gain(psd, a) >= -1e-9 * psd.real().trace());
  }
}

TEST_CASE("single-slot sensing snr at overhead hover") {
  SteeringContext ctx;
  ctx.uav = Vec2(100.0, 100.0);
  ctx.ground = Vec2(100.0, 100.0);
  ctx.array = half_wave_array(6, 40.0);
  const double beta0 = 1e-3, rcs = 1.0, sigma_e2 = 1e-14;
  const CVec a0 = steering_vector(ctx);
  const CMat Wsum = (10.0 / 6.0) * (a0 * a0.adjoint());  // full focused power

  const double got = sensing_snr_slot(ctx, Wsum, rcs, beta0, sigma_e2);

  // independent oracle: plug the numbers into the formula from scratch
  const double psi = 40.0;
  const double gain = 60.0;  // (P/M) * M^2
  const double oracle = rcs * beta0 * beta0 * gain /
                        (16.0 * std::numbers::pi * std::pow(psi, 4) * sigma_e2);
  CHECK(got == Approx(oracle).epsilon(1e-12));
  CHECK(got == Approx(46.6).epsilon(2e-3));

  // slant doubling costs a factor of 16
  SteeringContext far = ctx;
  far.ground = Vec2(100.0 + std::sqrt(80.0 * 80.0 - 40.0 * 40.0), 100.0);
  const CVec afar = steering_vector(far);
  const CMat Wfar = (10.0 / 6.0) * (afar * afar.adjoint());
  CHECK(got / sensing_snr_slot(far, Wfar, rcs, beta0, sigma_e2) ==
        Approx(16.0).epsilon(1e-9));

  CHECK(sensing_snr_slot(ctx, CMat::Zero(6, 6), rcs, beta0, sigma_e2) == 0.0);
}

TEST_CASE("expansion identity U + J equals the quadratic form") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> hdist(10.0, 100.0);
  std::uniform_real_distribution<double> sdist(1.0, 50.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int M = 2 + trial % 7;
    ArrayGeometry geom;
    geom.antennas = M;
    geom.altitude = hdist(rng);
    geom.wavelength = 0.1;
    geom.spacing = 0.05 * (0.5 + 0.001 * (trial % 100));
    const double s = geom.altitude * geom.altitude * (1.0 + sdist(rng));
    const CMat W = random_hermitian(rng, M);
    const double beta0 = 1e-3;

    const ExpansionTerms t = quadratic_form_expansion(W, s, geom, beta0);
    const double direct = direct_quadratic_form(W, s, geom, beta0);
    CHECK(t.U + t.J == Approx(direct).epsilon(1e-9).margin(1e-18));
  }
}

TEST_CASE("expansion for diagonal covariance has no off-diagonal part") {
  ArrayGeometry geom{4, 40.0, 0.05, 0.1};
  CMat W = CMat::Zero(4, 4);
  W(0, 0) = 2.0;
  W(1, 1) = 1.0;
  W(3, 3) = 0.5;
  const double beta0 = 1e-3;
  const ExpansionTerms t = quadratic_form_expansion(W, 2500.0, geom, beta0);
  CHECK(t.J == 0.0);
  CHECK(t.U == Approx(beta0 * beta0 * 3.5).epsilon(1e-12));
  CHECK(expansion_gradient(W, 2500.0, geom, beta0) == 0.0);
}

TEST_CASE("expansion of a coherent rank-one covariance is fully coherent") {
  ArrayGeometry geom{6, 40.0, 0.05, 0.1};
  const double s = 3000.0;
  const double beta0 = 1e-3;
  CVec a(6);
  const double step = 2.0 * std::numbers::pi * 0.5 * geom.altitude / std::sqrt(s);
  for (int m = 0; m < 6; ++m) a[m] = std::polar(1.0, step * m);
  const CMat W = a * a.adjoint();
  const ExpansionTerms t = quadratic_form_expansion(W, s, geom, beta0);
  CHECK(t.U + t.J == Approx(beta0 * beta0 * 36.0).epsilon(1e-9));
}

namespace {

// magnitude scale of the gradient's terms; guards the relative comparison
// against accidental phase cancellation in the term sum
double gradient_term_scale(const CMat& W, double s, const ArrayGeometry& geom,
                           double beta0) {
  const double kappa = 2.0 * std::numbers::pi *
                       (geom.spacing / geom.wavelength) * geom.altitude;
  double scale = 0.0;
  const int M = static_cast<int>(W.rows());
  for (int m = 0; m < M; ++m)
    for (int mp = m + 1; mp < M; ++mp)
      scale += std::abs(W(m, mp)) * kappa * (mp - m) / std::pow(s, 1.5);
  return beta0 * beta0 * scale;
}

}  // namespace

TEST_CASE("expansion gradient matches central finite differences") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    const int M = 2 + trial % 5;
    // mildly oscillatory regime so the h = 1e-3 s step is inside the
    // quadratic regime of the central difference
    ArrayGeometry geom{M, 30.0 + trial, 0.01, 0.1};
    const double s = geom.altitude * geom.altitude * (2.0 + 0.5 * (trial % 8));
    const CMat W = random_hermitian(rng, M);
    const double beta0 = 1e-3;

    const double h = 1e-3 * s;
    const double jp = quadratic_form_expansion(W, s + h, geom, beta0).J;
    const double jm = quadratic_form_expansion(W, s - h, geom, beta0).J;
    const double fd = (jp - jm) / (2.0 * h);
    const double an = expansion_gradient(W, s, geom, beta0);
    const double scale =
        std::max(std::abs(fd), gradient_term_scale(W, s, geom, beta0));
    CHECK(std::abs(an - fd) / std::max(scale, 1e-300) < 1e-6);
  }
}

TEST_CASE("expansion gradient sign follows the sine term") {
  ArrayGeometry geom{2, 10.0, 0.05, 0.1};
  // kappa = 2 pi (d/lambda) H = 10 pi; at s = 400 the angle is pi/2
  const double s = 400.0;
  CMat Wplus = CMat::Zero(2, 2);
  Wplus(0, 1) = 1.0;
  Wplus(1, 0) = 1.0;  // phase 0 -> sin(pi/2) = +1
  CHECK(expansion_gradient(Wplus, s, geom, 1.0) > 0.0);
  CMat Wminus = CMat::Zero(2, 2);
  Wminus(0, 1) = -1.0;
  Wminus(1, 0) = -1.0;  // phase pi -> sin(3 pi/2) = -1
  CHECK(expansion_gradient(Wminus, s, geom, 1.0) < 0.0);
}

TEST_CASE("expansion rejects slack below the altitude floor") {
  ArrayGeometry geom{4, 40.0, 0.05, 0.1};
  CMat W = CMat::Identity(4, 4);
  CHECK_THROWS_AS(quadratic_form_expansion(W, 1599.0, geom, 1e-3), Error);
  CHECK_THROWS_AS(expansion_gradient(W, 1600.0, geom, 1e-3), Error);
}
