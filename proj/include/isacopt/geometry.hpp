#pragma once

// Array geometry, channels, SINR, beampattern and sensing-SNR formulas for a
// fixed-altitude UAV carrying a uniform linear array, plus the trace
// expansion of the array quadratic form (and its slack gradient) that the
// trajectory subproblem linearizes.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "isacopt/errors.hpp"

namespace isacopt {

using Vec2 = Eigen::Vector2d;
using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

struct ArrayGeometry {
  int antennas = 0;        // M
  double altitude = 0.0;   // H [m]
  double spacing = 0.0;    // element spacing d_hat [m]
  double wavelength = 0.0; // lambda [m]
};

// Geometry between the UAV at horizontal position q and a ground node at d.
struct SteeringContext {
  Vec2 uav = Vec2::Zero();
  Vec2 ground = Vec2::Zero();
  ArrayGeometry array;

  // slant range Psi = sqrt(||q - d||^2 + H^2)
  double slant() const {
    return std::sqrt((uav - ground).squaredNorm() +
                     array.altitude * array.altitude);
  }
  // cos of the departure angle, H / Psi in (0, 1]
  double cos_theta() const { return array.altitude / slant(); }
};

// a_m = exp(j 2 pi (d_hat / lambda) m cos(theta)), m = 0..M-1; ||a||^2 = M.
inline CVec steering_vector(const SteeringContext& ctx) {
  const int M = ctx.array.antennas;
  const double phase_step = 2.0 * std::numbers::pi *
                            (ctx.array.spacing / ctx.array.wavelength) *
                            ctx.cos_theta();
  CVec a(M);
  for (int m = 0; m < M; ++m)
    a[m] = std::polar(1.0, phase_step * static_cast<double>(m));
  return a;
}

// Free-space channel h = beta0 * a / Psi.
inline CVec comm_channel(const SteeringContext& ctx, double beta0) {
  return (beta0 / ctx.slant()) * steering_vector(ctx);
}

// real(a^H W a); W Hermitian.
inline double beampattern_gain(const CMat& Wsum, const CVec& a) {
  const std::complex<double> g = a.dot(Wsum * a);  // Eigen dot conjugates lhs
  return g.real();
}

// SINR of user k given per-user transmit covariances.
inline double sinr(const std::vector<CMat>& W, const CVec& h, int k,
                   double noise_power) {
  const int K = static_cast<int>(W.size());
  if (k < 0 || k >= K) throw Error("sinr: user index out of range");
  double sig = 0.0, interf = 0.0;
  for (int i = 0; i < K; ++i) {
    const double p = beampattern_gain(W[i], h);
    if (p < -1e-9 * std::max(1.0, W[i].norm()))
      throw Error("sinr: negative quadratic form, covariance not PSD");
    if (i == k)
      sig = p;
    else
      interf += p;
  }
  return std::max(sig, 0.0) / (std::max(interf, 0.0) + noise_power);
}

// Single-slot sensing SNR: rcs * beta0^2 * a^H W a / (16 pi Psi^4 sigma_e^2).
// The accumulated SNR is the schedule-weighted sum of these over slots.
inline double sensing_snr_slot(const SteeringContext& ctx, const CMat& Wsum,
                               double rcs, double beta0, double echo_noise) {
  const double psi = ctx.slant();
  const double gain = beampattern_gain(Wsum, steering_vector(ctx));
  return rcs * beta0 * beta0 * gain /
         (16.0 * std::numbers::pi * psi * psi * psi * psi * echo_noise);
}

// ---- trace expansion of beta0^2 a^H W a in the squared-slant slack s ------

struct ExpansionTerms {
  double U = 0.0;  // diagonal part, independent of s
  double J = 0.0;  // off-diagonal part, evaluated at cos(theta) = H / sqrt(s)
};

namespace detail {
inline double phase_of(const std::complex<double>& z) {
  // zero-modulus convention: phase(0) = 0
  if (z == std::complex<double>(0.0, 0.0)) return 0.0;
  return std::arg(z);
}
}  // namespace detail

// U = beta0^2 sum_m W_mm;
// J = beta0^2 sum_{m < m'} 2 |W_mm'| cos(2 pi (d/lambda)(m'-m) H/sqrt(s) + arg W_mm').
// U + J equals beta0^2 a^H W a at cos(theta) = H / sqrt(s); the factor 2
// collects each conjugate-symmetric pair once.
inline ExpansionTerms quadratic_form_expansion(const CMat& W, double s,
                                               const ArrayGeometry& geom,
                                               double beta0) {
  const double H2 = geom.altitude * geom.altitude;
  if (s < H2) throw Error("quadratic_form_expansion: slack below H^2");
  const int M = static_cast<int>(W.rows());
  const double b2 = beta0 * beta0;
  const double kappa =
      2.0 * std::numbers::pi * (geom.spacing / geom.wavelength) * geom.altitude;
  const double inv_sqrt_s = 1.0 / std::sqrt(s);

  ExpansionTerms out;
  for (int m = 0; m < M; ++m) out.U += W(m, m).real();
  out.U *= b2;
  for (int m = 0; m < M; ++m)
    for (int mp = m + 1; mp < M; ++mp) {
      const std::complex<double> w = W(m, mp);
      const double mag = std::abs(w);
      if (mag == 0.0) continue;
      const double ang =
          kappa * static_cast<double>(mp - m) * inv_sqrt_s + detail::phase_of(w);
      out.J += 2.0 * mag * std::cos(ang);
    }
  out.J *= b2;
  return out;
}

// dJ/ds.  Per term: d/ds [2|W| cos(kappa (m'-m) / sqrt(s) + phi)]
//   = |W| kappa (m'-m) sin(kappa (m'-m)/sqrt(s) + phi) s^{-3/2}.
inline double expansion_gradient(const CMat& W, double s,
                                 const ArrayGeometry& geom, double beta0) {
  const double H2 = geom.altitude * geom.altitude;
  if (s <= H2 * (1.0 + 1e-12))
    throw Error("expansion_gradient: slack at or below H^2");
  const int M = static_cast<int>(W.rows());
  const double b2 = beta0 * beta0;
  const double kappa =
      2.0 * std::numbers::pi * (geom.spacing / geom.wavelength) * geom.altitude;
  const double inv_sqrt_s = 1.0 / std::sqrt(s);
  const double s32 = inv_sqrt_s / s;  // s^{-3/2}

  double g = 0.0;
  for (int m = 0; m < M; ++m)
    for (int mp = m + 1; mp < M; ++mp) {
      const std::complex<double> w = W(m, mp);
      const double mag = std::abs(w);
      if (mag == 0.0) continue;
      const double dm = static_cast<double>(mp - m);
      const double ang = kappa * dm * inv_sqrt_s + detail::phase_of(w);
      g += mag * kappa * dm * std::sin(ang) * s32;
    }
  return b2 * g;
}

}  // namespace isacopt
