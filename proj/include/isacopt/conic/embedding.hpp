#pragma once

// Complex-Hermitian to real-symmetric embedding and the scaled vectorization
// (svec) used to map symmetric matrices onto flat solver coordinates.

#include <Eigen/Dense>

#include <cmath>
#include <complex>

#include "isacopt/errors.hpp"

namespace isacopt::conic {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

inline int svec_size(int d) { return d * (d + 1) / 2; }

// Column-major lower-triangle index of (i, j), i >= j, in a d x d svec.
inline int svec_index(int i, int j, int d) {
  // offset of column j plus position within the column
  return j * d - j * (j - 1) / 2 + (i - j);
}

// svec(X): diagonal kept, off-diagonal scaled by sqrt(2) so that
// svec(X) . svec(Y) = <X, Y>_F for symmetric X, Y.
inline VectorXd svec(const MatrixXd& X) {
  const int d = static_cast<int>(X.rows());
  VectorXd v(svec_size(d));
  const double rt2 = std::sqrt(2.0);
  int idx = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i)
      v[idx++] = (i == j) ? X(i, j) : rt2 * 0.5 * (X(i, j) + X(j, i));
  return v;
}

inline MatrixXd unsvec(const VectorXd& v, int d) {
  MatrixXd X(d, d);
  const double inv_rt2 = 1.0 / std::sqrt(2.0);
  int idx = 0;
  for (int j = 0; j < d; ++j)
    for (int i = j; i < d; ++i) {
      const double val = v[idx++];
      if (i == j) {
        X(i, j) = val;
      } else {
        X(i, j) = val * inv_rt2;
        X(j, i) = val * inv_rt2;
      }
    }
  return X;
}

// [[Re Z, -Im Z], [Im Z, Re Z]].  Z PSD iff the embedding is PSD; traces and
// inner products pick up a factor of two.
inline MatrixXd hermitian_embed(const MatrixXcd& Z, double herm_tol = 1e-10) {
  const int m = static_cast<int>(Z.rows());
  const double dev = (Z - Z.adjoint()).norm();
  if (dev > herm_tol * std::max(1.0, Z.norm()))
    throw Error("hermitian_embed: input deviates from Hermitian by " +
                std::to_string(dev));
  MatrixXd E(2 * m, 2 * m);
  const MatrixXd re = Z.real();
  const MatrixXd im = 0.5 * (Z.imag() - Z.imag().transpose());
  E.topLeftCorner(m, m) = re;
  E.bottomRightCorner(m, m) = re;
  E.topRightCorner(m, m) = -im;
  E.bottomLeftCorner(m, m) = im;
  return E;
}

// Inverse of hermitian_embed up to symmetrization.  Structure deviations are
// averaged out: Re Z = (A + D)/2, Im Z = (C - B)/2 for block [[A, B], [C, D]].
inline MatrixXcd extract_hermitian(const MatrixXd& block,
                                   double* structure_dev = nullptr) {
  const int two_m = static_cast<int>(block.rows());
  const int m = two_m / 2;
  if (two_m != 2 * m) throw Error("extract_hermitian: odd dimension");
  const MatrixXd A = block.topLeftCorner(m, m);
  const MatrixXd B = block.topRightCorner(m, m);
  const MatrixXd C = block.bottomLeftCorner(m, m);
  const MatrixXd D = block.bottomRightCorner(m, m);
  MatrixXd re = 0.5 * (A + D);
  MatrixXd im = 0.5 * (C - B);
  if (structure_dev) {
    *structure_dev = std::max((A - D).norm(), (B + C).norm());
  }
  MatrixXcd Z(m, m);
  Z.real() = re;
  Z.imag() = im;
  // Hermitian-symmetrize: averages residual asymmetry from the solver.
  Z = 0.5 * (Z + Z.adjoint()).eval();
  return Z;
}

}  // namespace isacopt::conic
