#pragma once

// First-order conic solver over the homogeneous self-dual embedding
// (operator splitting in the style of SCS).  Handles Zero, Nonneg,
// SecondOrder and PSD cones, which is exactly what the subproblems here
// need.  The KKT-style matrix [[I, A'], [A, -I]] is factorized once per
// sparsity pattern; warm starts carry over between related solves.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "isacopt/conic/program.hpp"
#include "isacopt/errors.hpp"

namespace isacopt::conic {

enum class SolveStatus { Optimal, Infeasible, Unbounded, NumericalFailure };

struct SolverSettings {
  double eps = 1e-7;            // primal/dual residual and gap target
  double eps_infeasible = 1e-9; // certificate quality
  int max_iters = 120000;
  int check_every = 50;
  double over_relax = 1.5;
  int ruiz_iters = 12;
  double time_limit_s = 0.0;    // 0: none
  bool verbose = false;
};

struct Solution {
  SolveStatus status = SolveStatus::NumericalFailure;
  Eigen::VectorXd x, y, s;
  double objective = 0.0;   // c'x + objective constant
  int iterations = 0;
  double runtime_s = 0.0;
  double pres = 0.0, dres = 0.0, gap = 0.0;
  std::string message;
};

class AdmmConeSolver {
 public:
  using SpMat = Eigen::SparseMatrix<double>;
  using Vec = Eigen::VectorXd;

  // `reuse_pattern` skips the symbolic analysis when A keeps its sparsity.
  void setup(const Program::Lowered& L, const SolverSettings& settings,
             bool reuse_pattern = false) {
    settings_ = settings;
    A_ = L.A;
    b_ = L.b;
    c_ = L.c;
    cones_ = L.cones;
    obj_const_ = L.obj_constant;
    n_ = static_cast<int>(A_.cols());
    m_ = static_cast<int>(A_.rows());

    equilibrate();
    build_kkt(reuse_pattern);

    // g = M^{-1} h with h = (c_s, b_s); reused in every (I+Q) solve.
    h_.resize(n_ + m_);
    h_.head(n_) = cs_;
    h_.tail(m_) = bs_;
    g_ = msolve(h_);
    ghsq_ = 1.0 + h_.dot(g_);
    if (!std::isfinite(ghsq_) || ghsq_ <= 0.0)
      throw NumericalFailure("conic solver: KKT factorization failed");
    warm_ = false;
  }

  // Optional warm start (unscaled primal/dual/slack of a related problem).
  void warm_start(const Vec& x0, const Vec& y0, const Vec& s0) {
    wx_ = x0;
    wy_ = y0;
    ws_ = s0;
    warm_ = (x0.size() == n_ && y0.size() == m_ && s0.size() == m_);
  }

  // Refresh b and c without touching A (same pattern, same scaling of A).
  void update_linear(const Vec& b, const Vec& c, double obj_const) {
    b_ = b;
    c_ = c;
    obj_const_ = obj_const;
    bs_ = (rowscale_.asDiagonal() * b_) / sigma_b_;
    cs_ = (colscale_.asDiagonal() * c_) / sigma_c_;
    // keep sigma normalization consistent with the new data
    rescale_bc();
    h_.head(n_) = cs_;
    h_.tail(m_) = bs_;
    g_ = msolve(h_);
    ghsq_ = 1.0 + h_.dot(g_);
  }

  Solution solve() {
    const auto t0 = std::chrono::steady_clock::now();
    Solution out;
    rescales_ = 0;

    const int N = n_ + m_ + 1;
    Vec u = Vec::Zero(N), v = Vec::Zero(N);
    u[N - 1] = 1.0;
    v[N - 1] = 1.0;
    if (warm_) {
      u.head(n_) = colscale_.cwiseInverse().asDiagonal() * wx_ / sigma_b_;
      u.segment(n_, m_) = rowscale_.cwiseInverse().asDiagonal() * wy_ / sigma_c_;
      v.segment(n_, m_) = rowscale_.asDiagonal() * ws_ / sigma_b_;
      u[N - 1] = 1.0;
      v[N - 1] = 0.0;
    }

    Vec uv(N), ut(N), rhs(n_ + m_), p(n_ + m_), candidate_x(n_), candidate_y(m_),
        candidate_s(m_);
    double best_max_res = std::numeric_limits<double>::infinity();

    for (int it = 1; it <= settings_.max_iters; ++it) {
      // linear step: ut = (I+Q)^{-1} (u + v)
      // With r = M^{-1} z_xy:  tau = (z_tau + h'r) / (1 + h'g),  w = r - tau g.
      uv = u + v;
      rhs = uv.head(n_ + m_);
      p = msolve(rhs);
      const double tau_t = (uv[N - 1] + h_.dot(p)) / ghsq_;
      ut.head(n_ + m_) = p - tau_t * g_;
      ut[N - 1] = tau_t;

      // over-relaxation
      const double a = settings_.over_relax;
      ut = a * ut + (1.0 - a) * u;

      // cone step: u = Pi_C(ut - v); v = v - ut + u
      u = ut - v;
      project_dual_cone(u.segment(n_, m_));
      u[N - 1] = std::max(u[N - 1], 0.0);
      v += u - ut;

      if (it % settings_.check_every == 0 || it == settings_.max_iters) {
        const double tau = u[N - 1];
        if (settings_.verbose && it % (settings_.check_every * 100) == 0)
          std::printf("  admm %7d: tau %.3e kappa %.3e |u| %.3e |v| %.3e\n", it,
                      tau, v[N - 1], u.norm(), v.norm());
        // keep the embedding balanced: when the scaled solution drifts far
        // from unit magnitude the residual thresholds lose their meaning, so
        // fold the drift into the b/c normalization and warm-restart
        if (tau > 1e-12 && rescales_ < 8 && it % 1000 == 0 &&
            it < settings_.max_iters / 2) {
          const double xs = u.head(n_).norm() / tau;
          const double ys = u.segment(n_, m_).norm() / tau;
          if (xs > 10.0 || (xs < 0.1 && xs > 0.0) || ys > 10.0 ||
              (ys < 0.1 && ys > 0.0)) {
            const double rp = std::clamp(xs, 1e-4, 1e8);
            const double rd = std::clamp(ys, 1e-4, 1e8);
            sigma_b_ *= rp;
            bs_ /= rp;
            sigma_c_ *= rd;
            cs_ /= rd;
            h_.head(n_) = cs_;
            h_.tail(m_) = bs_;
            g_ = msolve(h_);
            ghsq_ = 1.0 + h_.dot(g_);
            Vec xh = u.head(n_) / (tau * rp);
            Vec yh = u.segment(n_, m_) / (tau * rd);
            Vec sh = v.segment(n_, m_) / (tau * rp);
            u.setZero();
            v.setZero();
            u.head(n_) = xh;
            u.segment(n_, m_) = yh;
            u[N - 1] = 1.0;
            v.segment(n_, m_) = sh;
            ++rescales_;
            best_max_res = std::numeric_limits<double>::infinity();
            continue;
          }
        }
        if (tau > 1e-12) {
          // residuals on the equilibrated, normalized data: with badly
          // scaled inputs (penalty weights versus per-slot powers) global
          // relative tests on the raw data would mask the small entries
          candidate_x = u.head(n_) / tau;
          candidate_y = u.segment(n_, m_) / tau;
          candidate_s = v.segment(n_, m_) / tau;
          const double pres = (As_ * candidate_x + candidate_s - bs_).norm() /
                              (1.0 + bs_.norm());
          const double dres = (As_.transpose() * candidate_y + cs_).norm() /
                              (1.0 + cs_.norm());
          const double px = cs_.dot(candidate_x);
          const double dy = bs_.dot(candidate_y);
          const double gap =
              std::abs(px + dy) / (1.0 + std::abs(px) + std::abs(dy));
          const double worst = std::max({pres, dres, gap});
          if (worst < best_max_res) {
            best_max_res = worst;
            unscale(u, v, out.x, out.y, out.s);
            out.pres = pres;
            out.dres = dres;
            out.gap = gap;
          }
          if (settings_.verbose && it % (settings_.check_every * 100) == 0)
            std::printf("  admm %7d: pres %.2e dres %.2e gap %.2e obj %.6f\n",
                        it, pres, dres, gap,
                        sigma_b_ * sigma_c_ * px + obj_const_);
          if (pres <= settings_.eps && dres <= settings_.eps &&
              gap <= settings_.eps) {
            out.status = SolveStatus::Optimal;
            out.iterations = it;
            if (settings_.verbose) {
              const double up = (A_ * out.x + out.s - b_).norm() / (1.0 + b_.norm());
              const double ud = (A_.transpose() * out.y + c_).norm() / (1.0 + c_.norm());
              std::printf("  admm done %d: scaled %.1e/%.1e/%.1e unscaled %.1e/%.1e\n",
                          it, pres, dres, gap, up, ud);
            }
            finish(out, t0);
            return out;
          }
        }
        // certificates of primal infeasibility / unboundedness
        if (check_certificates(u, v, out)) {
          out.iterations = it;
          finish(out, t0);
          return out;
        }
        if (settings_.time_limit_s > 0.0) {
          const double el = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0)
                                .count();
          if (el > settings_.time_limit_s) break;
        }
      }
    }

    out.status = SolveStatus::NumericalFailure;
    out.iterations = settings_.max_iters;
    out.message = "iteration limit; residuals p=" + std::to_string(out.pres) +
                  " d=" + std::to_string(out.dres) + " g=" + std::to_string(out.gap);
    finish(out, t0);
    return out;
  }

  int rows() const { return m_; }
  int cols() const { return n_; }

 private:
  void finish(Solution& out, std::chrono::steady_clock::time_point t0) {
    if (out.x.size() == n_)
      out.objective = c_.dot(out.x) + obj_const_;
    out.runtime_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
  }

  // ---- scaling -------------------------------------------------------------

  void equilibrate() {
    rowscale_ = Vec::Ones(m_);
    colscale_ = Vec::Ones(n_);
    As_ = A_;

    Vec rmax(m_), cmax(n_);
    for (int pass = 0; pass < settings_.ruiz_iters; ++pass) {
      rmax.setZero();
      cmax.setZero();
      for (int k = 0; k < As_.outerSize(); ++k)
        for (SpMat::InnerIterator itr(As_, k); itr; ++itr) {
          const double a = std::abs(itr.value());
          rmax[itr.row()] = std::max(rmax[itr.row()], a);
          cmax[itr.col()] = std::max(cmax[itr.col()], a);
        }
      // rows of one cone block share a scale so the cone geometry survives
      Vec rfac(m_);
      for (const auto& cone : cones_) {
        double g = 0.0;
        for (int r = cone.offset; r < cone.offset + cone.dim; ++r)
          g = std::max(g, rmax[r]);
        const bool grouped =
            cone.kind == ConeKind::SecondOrder || cone.kind == ConeKind::Psd;
        for (int r = cone.offset; r < cone.offset + cone.dim; ++r) {
          double base = grouped ? g : rmax[r];
          rfac[r] = (base > 1e-12) ? 1.0 / std::sqrt(base) : 1.0;
        }
      }
      Vec cfac(n_);
      for (int j = 0; j < n_; ++j)
        cfac[j] = (cmax[j] > 1e-12) ? 1.0 / std::sqrt(cmax[j]) : 1.0;

      for (int k = 0; k < As_.outerSize(); ++k)
        for (SpMat::InnerIterator itr(As_, k); itr; ++itr)
          itr.valueRef() *= rfac[itr.row()] * cfac[itr.col()];
      rowscale_.array() *= rfac.array();
      colscale_.array() *= cfac.array();
    }

    bs_ = rowscale_.asDiagonal() * b_;
    cs_ = colscale_.asDiagonal() * c_;
    sigma_b_ = 1.0;
    sigma_c_ = 1.0;
    rescale_bc();
  }

  void rescale_bc() {
    bs_ *= sigma_b_;
    cs_ *= sigma_c_;  // undo previous normalization
    const double nb = bs_.norm();
    const double nc = cs_.norm();
    sigma_b_ = std::clamp(nb, 1e-6, 1e12);
    sigma_c_ = std::clamp(nc, 1e-6, 1e12);
    bs_ /= sigma_b_;
    cs_ /= sigma_c_;
  }

  void unscale(const Vec& u, const Vec& v, Vec& x, Vec& y, Vec& s) const {
    const double tau = u[n_ + m_];
    x = sigma_b_ * (colscale_.asDiagonal() * u.head(n_)) / tau;
    y = sigma_c_ * (rowscale_.asDiagonal() * u.segment(n_, m_)) / tau;
    s = sigma_b_ * (rowscale_.cwiseInverse().asDiagonal() * v.segment(n_, m_)) / tau;
  }

  // ---- KKT -----------------------------------------------------------------

  void build_kkt(bool reuse_pattern) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(As_.nonZeros()) + n_ + m_);
    for (int j = 0; j < n_; ++j) trips.emplace_back(j, j, 1.0);
    for (int j = 0; j < m_; ++j) trips.emplace_back(n_ + j, n_ + j, -1.0);
    for (int k = 0; k < As_.outerSize(); ++k)
      for (SpMat::InnerIterator itr(As_, k); itr; ++itr)
        trips.emplace_back(n_ + itr.row(), itr.col(), itr.value());
    SpMat K(n_ + m_, n_ + m_);
    K.setFromTriplets(trips.begin(), trips.end());
    K.makeCompressed();
    if (reuse_pattern && kkt_analyzed_) {
      ldlt_.factorize(K);
    } else {
      ldlt_.analyzePattern(K);
      ldlt_.factorize(K);
      kkt_analyzed_ = true;
    }
    if (ldlt_.info() != Eigen::Success)
      throw NumericalFailure("conic solver: LDL^T factorization failed");
  }

  // Solve (I + [[0, A'], [-A, 0]]) p = z via the quasi-definite system.
  Vec msolve(const Vec& z) const {
    Vec rhs(n_ + m_);
    rhs.head(n_) = z.head(n_);
    rhs.tail(m_) = -z.tail(m_);
    return ldlt_.solve(rhs);
  }

  // ---- cones -----------------------------------------------------------------

  // Projects the dual-variable segment onto K^*.  Zero rows are free (dual of
  // {0}); the remaining cones are self-dual.
  template <typename Seg>
  void project_dual_cone(Seg seg) const {
    for (const auto& cone : cones_) {
      switch (cone.kind) {
        case ConeKind::Zero:
          break;  // free
        case ConeKind::Nonneg:
          for (int r = 0; r < cone.dim; ++r)
            seg[cone.offset + r] = std::max(seg[cone.offset + r], 0.0);
          break;
        case ConeKind::SecondOrder: {
          const int off = cone.offset;
          const int d = cone.dim;
          double t = seg[off];
          double zn = 0.0;
          for (int r = 1; r < d; ++r) zn += seg[off + r] * seg[off + r];
          zn = std::sqrt(zn);
          if (zn <= t) break;
          if (zn <= -t) {
            for (int r = 0; r < d; ++r) seg[off + r] = 0.0;
            break;
          }
          const double rho = 0.5 * (t + zn);
          seg[off] = rho;
          const double fac = rho / zn;
          for (int r = 1; r < d; ++r) seg[off + r] *= fac;
          break;
        }
        case ConeKind::Psd: {
          const int d = mat_dim_of(cone.dim);
          Eigen::MatrixXd X(d, d);
          {
            const double inv_rt2 = 1.0 / std::sqrt(2.0);
            int idx = cone.offset;
            for (int j = 0; j < d; ++j)
              for (int i = j; i < d; ++i) {
                const double val = seg[idx++];
                if (i == j) X(i, j) = val;
                else { X(i, j) = val * inv_rt2; X(j, i) = val * inv_rt2; }
              }
          }
          Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(X);
          const auto& lam = es.eigenvalues();
          const auto& V = es.eigenvectors();
          X.setZero();
          for (int q = 0; q < d; ++q)
            if (lam[q] > 0.0) X.noalias() += lam[q] * V.col(q) * V.col(q).transpose();
          {
            const double rt2 = std::sqrt(2.0);
            int idx = cone.offset;
            for (int j = 0; j < d; ++j)
              for (int i = j; i < d; ++i)
                seg[idx++] = (i == j) ? X(i, j) : rt2 * X(i, j);
          }
          break;
        }
      }
    }
  }

  static int mat_dim_of(int svec_dim) {
    const int d = static_cast<int>((std::sqrt(8.0 * svec_dim + 1.0) - 1.0) / 2.0 + 0.5);
    return d;
  }

  bool check_certificates(const Vec& u, const Vec& v, Solution& out) const {
    // primal infeasibility: A'y = 0, b'y < 0 with y in K^*
    Vec y = sigma_c_ * (rowscale_.asDiagonal() * u.segment(n_, m_));
    const double bty = b_.dot(y);
    if (bty < -1e-12) {
      const double lhs = (A_.transpose() * y).norm() * std::max(1.0, b_.norm());
      if (lhs <= settings_.eps_infeasible * (-bty) * 1e3 + 1e-14) {
        out.status = SolveStatus::Infeasible;
        out.y = y / (-bty);
        out.message = "primal infeasibility certificate";
        return true;
      }
    }
    // unboundedness: Ax + s = 0, s in K, c'x < 0
    Vec x = sigma_b_ * (colscale_.asDiagonal() * u.head(n_));
    Vec s = sigma_b_ * (rowscale_.cwiseInverse().asDiagonal() * v.segment(n_, m_));
    const double ctx = c_.dot(x);
    if (ctx < -1e-12) {
      const double lhs = (A_ * x + s).norm() * std::max(1.0, c_.norm());
      if (lhs <= settings_.eps_infeasible * (-ctx) * 1e3 + 1e-14) {
        out.status = SolveStatus::Unbounded;
        out.x = x / (-ctx);
        out.message = "dual infeasibility certificate";
        return true;
      }
    }
    return false;
  }

  SolverSettings settings_;
  SpMat A_, As_;
  Vec b_, c_, bs_, cs_;
  std::vector<ConeSpec> cones_;
  double obj_const_ = 0.0;
  int n_ = 0, m_ = 0;

  Vec rowscale_, colscale_;
  double sigma_b_ = 1.0, sigma_c_ = 1.0;

  Eigen::SimplicialLDLT<SpMat, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt_;
  bool kkt_analyzed_ = false;
  Vec h_, g_;
  double ghsq_ = 1.0;

  Vec wx_, wy_, ws_;
  bool warm_ = false;
  mutable int rescales_ = 0;
};

// One-call convenience used by tests and small subproblems.
inline Solution solve(const Program& prog, const SolverSettings& settings = {}) {
  AdmmConeSolver solver;
  solver.setup(prog.lower(), settings);
  return solver.solve();
}

}  // namespace isacopt::conic
