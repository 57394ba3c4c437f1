#pragma once

// Beamformer / sensing-indicator subproblem for a fixed trajectory: SDP
// relaxation with big-M coupling of the indicator to the covariances, a DC
// bound on the SINR slack product, a penalty pushing the relaxed indicators
// to binary values, and rank-one recovery of the beamformers.
//
// The rate constraint is handled with an outer tangent refinement of the
// concave per-slot log: a fixed budget of cut rows per (user, slot) keeps the
// sparsity pattern stable, so the KKT factorization and warm starts carry
// across the inner SCA loop.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include "isacopt/conic/program.hpp"
#include "isacopt/conic/solver.hpp"
#include "isacopt/errors.hpp"
#include "isacopt/plan.hpp"
#include "isacopt/power.hpp"
#include "isacopt/scenario.hpp"

namespace isacopt {

// Convex global over-estimator of the product mu * phi around the expansion
// point: 0.5 (mu + phi)^2 - mu_t mu - phi_t phi + 0.5 (mu_t^2 + phi_t^2).
// Equals mu_t phi_t at the expansion point; the gap is
// 0.5 (mu - mu_t)^2 + 0.5 (phi - phi_t)^2 >= 0.
inline double dc_product_majorizer(double mu, double phi, double mu_t,
                                   double phi_t) {
  return 0.5 * (mu + phi) * (mu + phi) - mu_t * mu - phi_t * phi +
         0.5 * (mu_t * mu_t + phi_t * phi_t);
}

// Principal-eigenpair beamformer recovery.  `tight` reports whether the
// eigenvalue ratio certifies an (almost) rank-one covariance.
struct RankOneResult {
  CVec w;
  bool tight = false;
  double eig_ratio = 0.0;  // lambda_2 / lambda_1
};

inline RankOneResult extract_rank_one(const CMat& W, double rank_tol) {
  const int M = static_cast<int>(W.rows());
  RankOneResult out;
  Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (W + W.adjoint()));
  const auto& lam = es.eigenvalues();
  const double l1 = lam[M - 1];
  const double l2 = (M >= 2) ? std::max(lam[M - 2], 0.0) : 0.0;
  if (l1 <= 1e-14 * std::max(1.0, W.trace().real())) {
    out.w = CVec::Zero(M);
    out.tight = true;
    out.eig_ratio = 0.0;
    return out;
  }
  CVec u = es.eigenvectors().col(M - 1);
  // fix the global phase: first component with meaningful modulus made real
  for (int i = 0; i < M; ++i)
    if (std::abs(u[i]) > 1e-9) {
      u *= std::conj(u[i]) / std::abs(u[i]);
      break;
    }
  out.w = std::sqrt(l1) * u;
  out.eig_ratio = l2 / l1;
  out.tight = (out.eig_ratio <= rank_tol);
  return out;
}

namespace beam_detail {

struct CutTable {
  // tangency points of the rate hypograph cuts, per (user, slot)
  std::vector<std::vector<double>> points;  // [k*N + n] -> fixed-size list
  int budget = 24;

  void init(int K, int N) {
    const std::vector<double> grid = {0.25, 1.0,    3.0,    7.0,    15.0,
                                      63.0, 255.0,  1023.0, 4095.0, 16383.0,
                                      65535.0, 1048575.0};
    points.assign(static_cast<size_t>(K) * N, grid);
  }
  // returns false when the budget for this (k, n) is exhausted
  bool add(int k, int N, int n, double mu) {
    auto& list = points[static_cast<size_t>(k) * N + n];
    if (static_cast<int>(list.size()) >= budget) return false;
    list.push_back(std::max(mu, 1e-9));
    return true;
  }
};

inline double log2_1p(double mu) { return std::log2(1.0 + mu); }
inline double log2_slope(double mu) { return 1.0 / ((1.0 + mu) * std::numbers::ln2); }

}  // namespace beam_detail

class BeamformingStage {
 public:
  BeamformingStage(const Scenario& sc, uint64_t seed = 1)
      : sc_(sc), rng_(seed) {
    cuts_.init(sc.num_users(), sc.num_slots());
  }

  // Fix the trajectory for the subsequent solves and (re)derive channels and
  // the indicator couplings implied by the frozen dynamics.
  void set_trajectory(const Trajectory& traj) {
    traj_ = traj;
    channels_ = user_channels(sc_, traj_);
    pattern_fresh_ = false;
  }

  // Expansion state for the inner SCA; callers seed it from a warm start.
  void set_expansion(const Eigen::MatrixXd& mu, const Eigen::MatrixXd& phi,
                     const Eigen::MatrixXd& alpha) {
    mu_t_ = mu;
    phi_t_ = phi;
    alpha_t_ = alpha;
  }

  const Eigen::MatrixXd& expansion_alpha() const { return alpha_t_; }

  // Inner SCA with penalty escalation; returns the converged relaxed plan.
  BeamformingPlan solve(double tau) {
    BeamformingPlan plan;
    int escalations = 0;
    while (true) {
      plan = run_sca(tau, /*frozen_alpha=*/nullptr);
      double worst = 0.0;
      for (int e = 0; e < sc_.num_targets(); ++e)
        for (int n = 0; n < sc_.num_slots(); ++n)
          worst = std::max(worst,
                           std::min(plan.alpha(e, n), 1.0 - plan.alpha(e, n)));
      if (worst <= sc_.solver.binary_tol || escalations >= 3) break;
      tau *= 5.0;
      ++escalations;
      set_expansion(plan.mu, plan.phi, plan.alpha);
    }
    plan.tau = tau;
    return plan;
  }

  // Re-solve with the sensing schedule frozen to binary values (the coupled
  // copies collapse to alpha * W, so they are substituted out).
  BeamformingPlan solve_frozen(const Eigen::MatrixXd& alpha_binary) {
    return run_sca(0.0, &alpha_binary);
  }

  // Rank-one recovery for a whole plan, with seeded Gaussian randomization
  // as the fallback for non-tight covariances.
  void recover_beamformers(BeamformingPlan& plan) {
    const int N = sc_.num_slots();
    const int K = sc_.num_users();
    plan.w.assign(N, std::vector<CVec>(K));
    plan.tight.assign(N, std::vector<char>(K, 0));
    for (int n = 0; n < N; ++n) {
      bool all_tight = true;
      for (int k = 0; k < K; ++k) {
        const RankOneResult r = extract_rank_one(plan.W[n][k], sc_.solver.rank_tol);
        plan.w[n][k] = r.w;
        plan.tight[n][k] = r.tight ? 1 : 0;
        all_tight = all_tight && r.tight;
      }
      if (!all_tight) randomize_slot(plan, n);
    }
  }

 private:
  // ---- model assembly -------------------------------------------------------

  struct Handles {
    std::vector<conic::HermHandle> W;        // [n*K + k]
    std::vector<conic::HermHandle> Wc;       // [((n*E)+e)*K + k]
    std::vector<int> alpha;                  // [e*N + n] flat var index
    std::vector<int> mu, phi, rate;          // [k*N + n]
    Eigen::MatrixXd rho;                     // balanced-coordinate scales
    double obj_const = 0.0;
  };

  conic::Program build(const Eigen::MatrixXd* frozen_alpha, Handles& h) const {
    using conic::LinExpr;
    using conic::var_expr;
    const int N = sc_.num_slots();
    const int K = sc_.num_users();
    const int E = sc_.num_targets();
    const int M = sc_.platform.antennas;
    const double pmax = sc_.platform.p_max;
    const double hover = hover_power(sc_.power);
    const bool relaxed = (frozen_alpha == nullptr);

    conic::Program prog;
    h = Handles{};
    h.W.reserve(static_cast<size_t>(N) * K);
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k)
        h.W.push_back(prog.add_hermitian("W" + std::to_string(n) + "_" + std::to_string(k), M));
    if (relaxed) {
      h.Wc.reserve(static_cast<size_t>(N) * E * K);
      for (int n = 0; n < N; ++n)
        for (int e = 0; e < E; ++e)
          for (int k = 0; k < K; ++k)
            h.Wc.push_back(prog.add_hermitian("Wc" + std::to_string(n), M));
      h.alpha.resize(static_cast<size_t>(E) * N);
      for (int e = 0; e < E; ++e)
        for (int n = 0; n < N; ++n)
          h.alpha[static_cast<size_t>(e) * N + n] = prog.add_scalar("a");
    }
    h.mu.resize(static_cast<size_t>(K) * N);
    h.phi.resize(static_cast<size_t>(K) * N);
    h.rate.resize(static_cast<size_t>(K) * N);
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        h.mu[static_cast<size_t>(k) * N + n] = prog.add_scalar("mu");
        h.phi[static_cast<size_t>(k) * N + n] = prog.add_scalar("phi");
        h.rate[static_cast<size_t>(k) * N + n] = prog.add_scalar("r");
      }

    h.rho.resize(K, N);
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n)
        h.rho(k, n) = std::clamp(
            std::sqrt(std::max(mu_t_(k, n), 0.25) /
                      std::max(phi_t_(k, n), 0.25)),
            1e-6, 1e6);

    auto alpha_expr = [&](int e, int n) -> LinExpr {
      if (relaxed) return var_expr(h.alpha[static_cast<size_t>(e) * N + n]);
      return LinExpr((*frozen_alpha)(e, n));
    };

    // objective: average transmit power + schedule-weighted propulsion +
    // binary-violation penalty (tight DC majorizer of sum alpha - alpha^2)
    const double invN = 1.0 / N;
    for (int n = 0; n < N; ++n) {
      const double pfly = flight_power(traj_.v.col(n), sc_.power).total;
      h.obj_const += invN * pfly;
      for (int k = 0; k < K; ++k)
        prog.minimize_term(invN * prog.herm_trace(h.W[idxW(n, k)]));
      for (int e = 0; e < E; ++e) {
        if (relaxed) {
          const double coef = invN * (hover - pfly) +
                              tau_cur_ * (1.0 - 2.0 * alpha_t_(e, n));
          prog.minimize_term(var_expr(h.alpha[static_cast<size_t>(e) * N + n], coef));
          h.obj_const += tau_cur_ * alpha_t_(e, n) * alpha_t_(e, n);
        } else {
          h.obj_const += invN * (hover - pfly) * (*frozen_alpha)(e, n);
        }
      }
    }

    // C1: per-slot transmit power budget
    for (int n = 0; n < N; ++n) {
      LinExpr total(pmax);
      for (int k = 0; k < K; ++k) total += -1.0 * prog.herm_trace(h.W[idxW(n, k)]);
      prog.nonneg(total);
    }

    // SINR slack system, noise-normalized (phi lower-bounded by
    // interference-over-noise plus one) and carried in balanced coordinates
    // (mu / rho, phi * rho) so the DC-majorizer constants stay at the scale
    // of the product rather than mu_t^2
    for (int k = 0; k < K; ++k) {
      const double sigma2 = sc_.users[k].noise_power;
      for (int n = 0; n < N; ++n) {
        const CMat Hk = (channels_[n][k] * channels_[n][k].adjoint()) / sigma2;
        const int mu = h.mu[idxU(k, n)];
        const int phi = h.phi[idxU(k, n)];
        const double rho = h.rho(k, n);
        const double mt = mu_t_(k, n) / rho;
        const double ft = phi_t_(k, n) * rho;

        // C2a (DC restriction): 0.5 (m + f)^2 <= Tr(W H) + m_t m + f_t f
        //                        - 0.5 (m_t^2 + f_t^2)
        LinExpr p = prog.herm_inner(h.W[idxW(n, k)], Hk);
        p.add_keep(mu, mt);
        p.add_keep(phi, ft);
        p.constant += -0.5 * (mt * mt + ft * ft);
        LinExpr z;
        z.add(mu, 1.0);
        z.add(phi, 1.0);
        prog.rotated_soc(p, LinExpr(1.0), {z});

        // C2b: interference-plus-noise bound, scaled by rho
        LinExpr interf = var_expr(phi);
        interf.constant -= rho;
        for (int i = 0; i < K; ++i)
          if (i != k)
            interf += -rho * prog.herm_inner(h.W[idxW(n, i)], Hk);
        prog.nonneg(interf);

        prog.nonneg(var_expr(mu));

        // rate hypograph cuts: r <= log2(1 + mu_hat) + slope (rho m - mu_hat)
        const auto& pts = cuts_.points[static_cast<size_t>(k) * N + n];
        for (int j = 0; j < cuts_.budget; ++j) {
          LinExpr cut;
          if (j < static_cast<int>(pts.size())) {
            const double mh = pts[j];
            cut.constant = beam_detail::log2_1p(mh) -
                           beam_detail::log2_slope(mh) * mh;
            cut.add_keep(mu, beam_detail::log2_slope(mh) * rho);
          } else {
            cut.constant = 64.0;  // vacuous slot, keeps the pattern fixed
            cut.add_keep(mu, 0.0);
          }
          cut.add_keep(h.rate[idxU(k, n)], -1.0);
          prog.nonneg(cut);
        }
      }
      // C2c: average rate demand
      LinExpr avg(-static_cast<double>(N) * sc_.users[k].min_rate);
      for (int n = 0; n < N; ++n) avg.add(h.rate[idxU(k, n)], 1.0);
      prog.nonneg(avg);
    }

    // schedule structure and coupling to the frozen dynamics
    if (relaxed) {
      for (int n = 0; n < N; ++n) {
        LinExpr one_target(1.0);
        for (int e = 0; e < E; ++e) one_target += -1.0 * alpha_expr(e, n);
        prog.nonneg(one_target);

        // C7 at fixed q: hovering mass only near a target
        LinExpr near(sc_.platform.hover_radius * sc_.platform.hover_radius);
        for (int e = 0; e < E; ++e) {
          const double d2 = (traj_.q.col(n) - sc_.targets[e].position).squaredNorm();
          near += -d2 * alpha_expr(e, n);
        }
        if (E > 0) prog.nonneg(near);

        // C10 at fixed v: sensing budget limited by the frozen speed
        const double speed = traj_.v.col(n).norm();
        if (E > 0) {
          LinExpr cap(std::max(1.0 - speed / sc_.platform.v_max, 0.0));
          for (int e = 0; e < E; ++e) cap += -1.0 * alpha_expr(e, n);
          prog.nonneg(cap);
        }

        // C8 at fixed (q, v): a moving slot's hover budget is pinned by the
        // frozen step length, q[n+1] - q[n] = (1 - sum_e alpha) v dt
        if (n + 1 < N && speed > 1e-9) {
          const Vec2 step = traj_.q.col(n + 1) - traj_.q.col(n);
          const double implied =
              1.0 - step.dot(traj_.v.col(n)) /
                        (traj_.v.col(n).squaredNorm() * traj_.dt);
          LinExpr pin(-std::clamp(implied, 0.0, 1.0));
          for (int e = 0; e < E; ++e) pin += alpha_expr(e, n);
          prog.zero(pin);
        }

        for (int e = 0; e < E; ++e) {
          prog.nonneg(alpha_expr(e, n));
          prog.nonneg(LinExpr(1.0) - alpha_expr(e, n));
        }
      }
      for (int e = 0; e < E; ++e) {
        LinExpr budget(static_cast<double>(sc_.timing.max_sensing_slots));
        for (int n = 0; n < N; ++n) budget += -1.0 * alpha_expr(e, n);
        prog.nonneg(budget);
      }
    }

    // C3 / C4 on the coupled covariances (or directly on W when frozen)
    for (int e = 0; e < E; ++e) {
      const auto& tgt = sc_.targets[e];
      LinExpr snr(-1.0);  // accumulated sensing SNR over its threshold
      for (int n = 0; n < N; ++n) {
        SteeringContext ctx{traj_.q.col(n), tgt.position, sc_.platform.geometry()};
        const double psi = ctx.slant();
        const double coef = tgt.rcs * sc_.timing.beta0 * sc_.timing.beta0 /
                            (16.0 * std::numbers::pi * psi * psi * psi * psi *
                             tgt.echo_noise * tgt.snr_threshold);
        const CVec a = steering_vector(ctx);
        const CMat A = a * a.adjoint();

        const bool active_frozen = !relaxed && (*frozen_alpha)(e, n) > 0.5;
        if (relaxed) {
          for (int k = 0; k < K; ++k)
            snr += coef * prog.herm_inner(h.Wc[idxWc(n, e, k)], A);
        } else if (active_frozen) {
          for (int k = 0; k < K; ++k)
            snr += coef * prog.herm_inner(h.W[idxW(n, k)], A);
        }

        // C3: beampattern match while sensing
        if (relaxed || active_frozen) {
          const Eigen::VectorXd rd = conic::svec(conic::hermitian_embed(tgt.desired_covariance));
          const int dim = conic::svec_size(2 * M);
          std::vector<LinExpr> rows(1 + dim);
          rows[0] = LinExpr(std::sqrt(2.0 * tgt.error_budget));
          for (int i = 0; i < dim; ++i) {
            LinExpr row;
            if (relaxed) {
              for (int k = 0; k < K; ++k)
                row.add(h.Wc[idxWc(n, e, k)].offset + i, 1.0);
              row += -rd[i] * alpha_expr(e, n);
            } else {
              for (int k = 0; k < K; ++k)
                row.add(h.W[idxW(n, k)].offset + i, 1.0);
              row.constant -= rd[i];
            }
            rows[1 + i] = std::move(row);
          }
          prog.soc(std::move(rows));
        }
      }
      prog.nonneg(snr);
    }

    // PSD cones and big-M sandwich
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k)
        prog.psd_herm_combo(M, {{h.W[idxW(n, k)], 1.0}});
    if (relaxed) {
      for (int n = 0; n < N; ++n)
        for (int e = 0; e < E; ++e)
          for (int k = 0; k < K; ++k) {
            const auto& Wc = h.Wc[idxWc(n, e, k)];
            const auto& W = h.W[idxW(n, k)];
            prog.psd_herm_combo(M, {{Wc, 1.0}});                       // C14
            prog.psd_herm_combo(M, {{Wc, -1.0}}, pmax * alpha_expr(e, n));  // C12
            prog.psd_herm_combo(M, {{W, 1.0}, {Wc, -1.0}});            // C13
            prog.psd_herm_combo(M, {{Wc, 1.0}, {W, -1.0}},
                                LinExpr(pmax) - pmax * alpha_expr(e, n));  // C15
          }
    }

    return prog;
  }

  int idxW(int n, int k) const { return n * sc_.num_users() + k; }
  int idxWc(int n, int e, int k) const {
    return (n * sc_.num_targets() + e) * sc_.num_users() + k;
  }
  int idxU(int k, int n) const { return k * sc_.num_slots() + n; }

  // ---- inner loop ------------------------------------------------------------

  BeamformingPlan run_sca(double tau, const Eigen::MatrixXd* frozen_alpha) {
    const int N = sc_.num_slots();
    const int K = sc_.num_users();
    const int E = sc_.num_targets();
    tau_cur_ = tau;

    BeamformingPlan best;
    std::vector<double> trace;
    double prev_obj = std::numeric_limits<double>::infinity();
    long admm_total = 0;

    conic::SolverSettings settings;
    settings.eps = sc_.solver.admm_eps;
    settings.max_iters = sc_.solver.admm_max_iters;
    settings.verbose = std::getenv("ISACOPT_VERBOSE") != nullptr;

    const int max_iters = std::max(1, sc_.solver.max_sca_iters);
    for (int it = 0; it < max_iters; ++it) {
      Handles h;
      conic::Program prog = build(frozen_alpha, h);
      conic::Program::Lowered low = prog.lower();

      const bool same_shape = pattern_fresh_ && low.A.rows() == last_rows_ &&
                              low.A.cols() == last_cols_ &&
                              low.A.nonZeros() == last_nnz_;
      solver_.setup(low, settings, same_shape);
      last_rows_ = low.A.rows();
      last_cols_ = low.A.cols();
      last_nnz_ = low.A.nonZeros();
      pattern_fresh_ = true;
      if (same_shape && warm_x_.size() == low.A.cols()) {
        solver_.warm_start(warm_x_, warm_y_, warm_s_);
      }

      conic::Solution sol = solver_.solve();
      admm_total += sol.iterations;
      if (sol.status == conic::SolveStatus::Infeasible)
        throw InfeasibleError("P2", "beamforming subproblem infeasible");
      if (sol.status != conic::SolveStatus::Optimal) {
        const double worst = std::max({sol.pres, sol.dres, sol.gap});
        if (!(worst < 50.0 * settings.eps) || sol.x.size() == 0)
          throw NumericalFailure("beamforming stage: " + sol.message);
      }
      warm_x_ = sol.x;
      warm_y_ = sol.y;
      warm_s_ = sol.s;

      // rate-cut refinement: claimed hypograph value vs the true log
      double excess = 0.0;
      bool added = false;
      for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
          const double mu = sol.x[h.mu[idxU(k, n)]] * h.rho(k, n);
          const double r = sol.x[h.rate[idxU(k, n)]];
          const double gap = r - beam_detail::log2_1p(std::max(mu, 0.0));
          if (gap > 1e-4 / 2.0) {
            excess = std::max(excess, gap);
            added = cuts_.add(k, N, n, std::max(mu, 0.0)) || added;
          }
        }
      if (added && excess > 1e-4) {
        --it;  // re-solve at the same expansion with the tightened hypograph
        continue;
      }

      const double obj = sol.objective + h.obj_const;
      BeamformingPlan plan = read_plan(prog, h, sol, frozen_alpha);
      plan.admm_iterations = admm_total;

      if (obj <= prev_obj * (1.0 + 1e-9) + 1e-12) {
        trace.push_back(obj);
        best = std::move(plan);
        best.sca_trace = trace;
        best.admm_iterations = admm_total;
        // SCA expansion update
        mu_t_ = best.mu;
        phi_t_ = best.phi;
        if (frozen_alpha == nullptr && E > 0) alpha_t_ = best.alpha;
        if (prev_obj - obj <= sc_.solver.ao_tol * std::max(1.0, std::abs(prev_obj)) &&
            it > 0)
          break;
        prev_obj = obj;
      } else {
        break;  // solver noise; keep the previous accepted iterate
      }
    }
    if (best.W.empty())
      throw NumericalFailure("beamforming stage: no accepted iterate");
    best.tau = tau;
    return best;
  }

  BeamformingPlan read_plan(const conic::Program& prog, const Handles& h,
                            const conic::Solution& sol,
                            const Eigen::MatrixXd* frozen_alpha) const {
    const int N = sc_.num_slots();
    const int K = sc_.num_users();
    const int E = sc_.num_targets();
    BeamformingPlan plan;
    plan.W.assign(N, std::vector<CMat>(K));
    plan.W_coupled.assign(N, std::vector<std::vector<CMat>>(E, std::vector<CMat>(K)));
    plan.alpha.resize(E, N);
    plan.mu.resize(K, N);
    plan.phi.resize(K, N);
    for (int n = 0; n < N; ++n)
      for (int k = 0; k < K; ++k)
        plan.W[n][k] = prog.value_hermitian(h.W[idxW(n, k)], sol.x);
    for (int e = 0; e < E; ++e)
      for (int n = 0; n < N; ++n) {
        if (frozen_alpha) {
          plan.alpha(e, n) = (*frozen_alpha)(e, n);
          for (int k = 0; k < K; ++k)
            plan.W_coupled[n][e][k] = plan.alpha(e, n) * plan.W[n][k];
        } else {
          plan.alpha(e, n) =
              std::clamp(sol.x[h.alpha[static_cast<size_t>(e) * N + n]], 0.0, 1.0);
          for (int k = 0; k < K; ++k)
            plan.W_coupled[n][e][k] =
                prog.value_hermitian(h.Wc[idxWc(n, e, k)], sol.x);
        }
      }
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        plan.mu(k, n) = std::max(sol.x[h.mu[idxU(k, n)]], 0.0) * h.rho(k, n);
        plan.phi(k, n) = sol.x[h.phi[idxU(k, n)]] / h.rho(k, n);
      }

    // P1-style objective (no penalty) and the penalty value itself
    const double invN = 1.0 / N;
    double obj = 0.0, pen = 0.0;
    for (int n = 0; n < N; ++n) {
      double frac = 0.0;
      for (int e = 0; e < E; ++e) {
        frac += plan.alpha(e, n);
        pen += plan.alpha(e, n) - plan.alpha(e, n) * plan.alpha(e, n);
      }
      obj += invN * (frac * hover_power(sc_.power) +
                     (1.0 - frac) * flight_power(traj_.v.col(n), sc_.power).total);
      for (int k = 0; k < K; ++k) obj += invN * plan.W[n][k].trace().real();
    }
    plan.objective = obj;
    plan.penalty_value = pen;
    return plan;
  }

  // Gaussian randomization fallback: redraw candidate directions with the
  // covariance shape, then rescale powers to meet the claimed SINRs.
  void randomize_slot(BeamformingPlan& plan, int n) {
    const int K = sc_.num_users();
    const int M = sc_.platform.antennas;
    const int draws = 200;
    std::normal_distribution<double> gauss(0.0, 1.0);

    std::vector<Eigen::LLT<CMat>> chol;
    std::vector<CMat> shift;
    for (int k = 0; k < K; ++k) {
      CMat Wk = plan.W[n][k];
      Wk += 1e-12 * Wk.trace().real() * CMat::Identity(M, M);
      chol.emplace_back(Wk);
      shift.push_back(Wk);
    }

    double best_power = std::numeric_limits<double>::infinity();
    std::vector<CVec> best;
    for (int d = 0; d < draws; ++d) {
      std::vector<CVec> cand(K);
      for (int k = 0; k < K; ++k) {
        CVec g(M);
        for (int i = 0; i < M; ++i)
          g[i] = std::complex<double>(gauss(rng_), gauss(rng_)) / std::numbers::sqrt2;
        if (chol[k].info() == Eigen::Success)
          cand[k] = chol[k].matrixL() * g;
        else
          cand[k] = extract_rank_one(plan.W[n][k], 1.0).w;
        const double nn = cand[k].norm();
        if (nn > 1e-12) cand[k] /= nn;
      }
      // power control: match the claimed per-slot SINR targets exactly
      Eigen::MatrixXd F = Eigen::MatrixXd::Zero(K, K);
      Eigen::VectorXd rhs(K);
      bool ok = true;
      for (int k = 0; k < K; ++k) {
        const CVec& hk = channels_[n][k];
        const double target = plan.mu(k, n);
        const double sig = std::norm(hk.dot(cand[k]));
        if (sig < 1e-30) { ok = false; break; }
        for (int i = 0; i < K; ++i)
          if (i != k) F(k, i) = target * std::norm(hk.dot(cand[i])) / sig;
        rhs[k] = target * sc_.users[k].noise_power / sig;
      }
      if (!ok) continue;
      const Eigen::VectorXd p =
          (Eigen::MatrixXd::Identity(K, K) - F).partialPivLu().solve(rhs);
      if (!(p.array() >= 0.0).all()) continue;
      const double total = p.sum();
      if (total > sc_.platform.p_max * (1.0 + 1e-9) || total >= best_power) continue;
      best_power = total;
      best.assign(K, CVec());
      for (int k = 0; k < K; ++k) best[k] = std::sqrt(p[k]) * cand[k];
    }
    if (!best.empty()) {
      for (int k = 0; k < K; ++k) {
        plan.w[n][k] = best[k];
        plan.tight[n][k] = 0;  // recovered by randomization, still flagged
      }
    }
  }

  const Scenario& sc_;
  Trajectory traj_;
  std::vector<std::vector<CVec>> channels_;
  Eigen::MatrixXd mu_t_, phi_t_, alpha_t_;
  beam_detail::CutTable cuts_;
  double tau_cur_ = 0.0;

  conic::AdmmConeSolver solver_;
  Eigen::VectorXd warm_x_, warm_y_, warm_s_;
  Eigen::Index last_rows_ = -1, last_cols_ = -1, last_nnz_ = -1;
  bool pattern_fresh_ = false;

  std::mt19937_64 rng_;
};

}  // namespace isacopt
