#pragma once

// Trajectory / velocity subproblem for fixed beamformers and sensing
// schedule.  The array quadratic forms enter through the squared-slant slack
// s (per user, per slot) with the off-diagonal part linearized at the current
// point; every iterate is audited against the exact nonconvex model and the
// slack trust region shrinks on rejection.
//
// Also hosts the initial trajectory construction: a stop-to-stop tour of the
// targets with hover slots inserted, exactly feasible for the dynamics.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>
#include <optional>
#include <vector>

#include "isacopt/beam_stage.hpp"  // CutTable, dc majorizer
#include "isacopt/conic/program.hpp"
#include "isacopt/conic/solver.hpp"
#include "isacopt/errors.hpp"
#include "isacopt/plan.hpp"
#include "isacopt/power.hpp"
#include "isacopt/scenario.hpp"

namespace isacopt {

// First-order lower bound of ||q - d||^2 around q_t (supporting hyperplane).
inline double affine_f_bound(const Vec2& q, const Vec2& d, const Vec2& q_t) {
  return (q_t - d).squaredNorm() + 2.0 * (q_t - d).dot(q - q_t);
}

struct TrajSolveResult {
  Trajectory traj;
  Eigen::MatrixXd s;       // K x N accepted slack (exact slant^2)
  Eigen::MatrixXd mu_p;    // K x N claimed SINR
  Eigen::MatrixXd beta;    // K x N interference-plus-noise, beta0^2 units
  Eigen::VectorXd y;       // N induced-power slack
  double propulsion_avg = 0.0;  // F
  double objective = 0.0;       // F + average transmit power
  std::vector<double> trace;
  long admm_iterations = 0;
  int rejected_iters = 0;
  double final_trust_region = 0.0;
};

// Exact nonconvex-model audit of a candidate trajectory at fixed (W, alpha).
struct TrajAudit {
  bool pass = true;
  double worst_rate_defect = 0.0;   // relative
  double worst_gamma_defect = 0.0;  // relative
  double worst_c7 = 0.0;
  double worst_c9 = 0.0, worst_c10 = 0.0;
};

// `gamma_slack` is looser than the rate slack: at fractional indicators the
// big-M relaxation leaves a small gap between the coupled copies and
// alpha * W that only closes once the schedule turns binary.
inline TrajAudit audit_trajectory(const Scenario& sc,
                                  const std::vector<std::vector<CMat>>& W,
                                  const Eigen::MatrixXd& alpha,
                                  const Trajectory& traj,
                                  double rel_slack = 5e-4,
                                  double gamma_slack = 5e-3) {
  const int N = traj.slots();
  const int K = sc.num_users();
  const int E = sc.num_targets();
  TrajAudit out;
  const auto h = user_channels(sc, traj);
  for (int k = 0; k < K; ++k) {
    double rate = 0.0;
    for (int n = 0; n < N; ++n)
      rate += std::log2(1.0 + slot_sinr(sc, h[n], W[n], k));
    rate /= N;
    const double defect = (sc.users[k].min_rate - rate) / sc.users[k].min_rate;
    out.worst_rate_defect = std::max(out.worst_rate_defect, defect);
  }
  for (int e = 0; e < E; ++e) {
    const auto& tgt = sc.targets[e];
    double gamma = 0.0;
    for (int n = 0; n < N; ++n) {
      if (alpha(e, n) <= 1e-12) continue;
      SteeringContext ctx{traj.q.col(n), tgt.position, sc.platform.geometry()};
      CMat Wsum = CMat::Zero(sc.platform.antennas, sc.platform.antennas);
      for (const CMat& Wb : W[n]) Wsum += Wb;  // all beams, sensing included
      gamma += alpha(e, n) * sensing_snr_slot(ctx, Wsum, tgt.rcs,
                                              sc.timing.beta0, tgt.echo_noise);
    }
    const double defect = (tgt.snr_threshold - gamma) / tgt.snr_threshold;
    out.worst_gamma_defect = std::max(out.worst_gamma_defect, defect);
  }
  const double D2 = sc.platform.hover_radius * sc.platform.hover_radius;
  for (int n = 0; n < N; ++n) {
    double c7 = 0.0;
    for (int e = 0; e < E; ++e)
      c7 += alpha(e, n) * (traj.q.col(n) - sc.targets[e].position).squaredNorm();
    out.worst_c7 = std::max(out.worst_c7, (c7 - D2) / D2);
    const double frac = (E > 0) ? alpha.col(n).sum() : 0.0;
    const double cap = (1.0 - frac) * sc.platform.v_max;
    out.worst_c10 = std::max(out.worst_c10,
                             (traj.v.col(n).norm() - cap) / sc.platform.v_max);
    if (n + 1 < N) {
      const double dv = (traj.v.col(n + 1) - traj.v.col(n)).norm();
      out.worst_c9 = std::max(
          out.worst_c9, (dv - sc.platform.a_max * traj.dt) /
                            (sc.platform.a_max * traj.dt));
    }
  }
  out.pass = out.worst_rate_defect <= rel_slack &&
             out.worst_gamma_defect <= gamma_slack && out.worst_c7 <= 1e-6 &&
             out.worst_c9 <= 1e-8 && out.worst_c10 <= 1e-8;
  return out;
}

struct TrajStageOptions {
  bool omit_accel_limit = false;  // baseline 2 drops C9
  bool pin_speed = false;         // baseline 2 fixes ||v|| = v_max when moving
  // baseline 1: per-slot segment (base, span); q[n] = base + t span, t in [0,1]
  std::optional<std::vector<std::pair<Vec2, Vec2>>> path;
};

class TrajectoryStage {
 public:
  using Options = TrajStageOptions;

  TrajectoryStage(const Scenario& sc, Options opt = Options()) : sc_(sc), opt_(opt) {
    cuts_.init(sc.num_users(), sc.num_slots());
  }

  void set_plan(const std::vector<std::vector<CMat>>& W,
                const Eigen::MatrixXd& alpha) {
    W_ = &W;
    alpha_ = alpha;
    pattern_fresh_ = false;
  }

  // SCA with exact-model audit; returns the last audited-feasible trajectory.
  TrajSolveResult solve(const Trajectory& start) {
    const int N = sc_.num_slots();
    const int K = sc_.num_users();

    TrajSolveResult best;
    best.traj = start;
    refresh_expansion(best);
    {
      const TrajAudit a0 = audit_trajectory(sc_, *W_, alpha_, best.traj);
      if (!a0.pass)
        throw TrustRegionCollapse(
            "trajectory stage: starting point fails the exact-model audit");
    }
    best.propulsion_avg = exact_propulsion(best.traj);
    best.objective = best.propulsion_avg + tx_avg();
    best.trace.push_back(best.objective);

    double rho = sc_.solver.trust_region;
    conic::SolverSettings settings;
    settings.eps = sc_.solver.admm_eps;
    settings.max_iters = sc_.solver.admm_max_iters;
    settings.verbose = std::getenv("ISACOPT_VERBOSE") != nullptr;

    int it = 0;
    while (it < sc_.solver.max_sca_iters) {
      Handles h;
      conic::Program prog = build(best, rho, h);
      conic::Program::Lowered low = prog.lower();
      const bool same_shape = pattern_fresh_ && low.A.rows() == last_rows_ &&
                              low.A.cols() == last_cols_ &&
                              low.A.nonZeros() == last_nnz_;
      solver_.setup(low, settings, same_shape);
      last_rows_ = low.A.rows();
      last_cols_ = low.A.cols();
      last_nnz_ = low.A.nonZeros();
      pattern_fresh_ = true;
      if (same_shape && warm_x_.size() == low.A.cols())
        solver_.warm_start(warm_x_, warm_y_, warm_s_);

      conic::Solution sol = solver_.solve();
      best.admm_iterations += sol.iterations;
      if (sol.status == conic::SolveStatus::Infeasible)
        throw InfeasibleError("P4", "trajectory subproblem infeasible");
      if (sol.status != conic::SolveStatus::Optimal) {
        const double worst = std::max({sol.pres, sol.dres, sol.gap});
        if (!(worst < 50.0 * settings.eps) || sol.x.size() == 0)
          throw NumericalFailure("trajectory stage: " + sol.message);
      }
      warm_x_ = sol.x;
      warm_y_ = sol.y;
      warm_s_ = sol.s;

      // rate-cut refinement against the true log
      bool added = false;
      double excess = 0.0;
      for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
          const double mu =
              std::max(sol.x[h.mu[idxU(k, n)]], 0.0) * h.rho(k, n);
          const double gap = sol.x[h.rate[idxU(k, n)]] - beam_detail::log2_1p(mu);
          if (gap > 5e-5) {
            excess = std::max(excess, gap);
            added = cuts_.add(k, N, n, mu) || added;
          }
        }
      if (added && excess > 1e-4) continue;  // same expansion, tighter cuts

      ++it;
      Trajectory cand = extract_trajectory(h, sol);
      if (std::getenv("ISACOPT_VERBOSE")) {
        const conic::ConeResiduals cr = conic::check_cone_membership(low, sol.x);
        std::printf("  traj model-feas: zero %.2e nonneg %.2e soc %.2e psd %.2e\n",
                    cr.zero, cr.nonneg, cr.soc, cr.psd);
        double vmaxn = 0.0, dvmax = 0.0, c8res = 0.0;
        for (int n = 0; n < N; ++n) {
          vmaxn = std::max(vmaxn, cand.v.col(n).norm());
          if (n + 1 < N) {
            dvmax = std::max(dvmax, (cand.v.col(n + 1) - cand.v.col(n)).norm());
            c8res = std::max(
                c8res, (cand.q.col(n + 1) - cand.q.col(n) -
                        (1.0 - slot_fraction(n)) * cand.dt * cand.v.col(n))
                           .norm());
          }
        }
        std::printf(
            "  traj raw: res %.1e/%.1e/%.1e iters %d vmax %.3f dvmax %.3f "
            "c8res %.2e end %.2e\n",
            sol.pres, sol.dres, sol.gap, sol.iterations, vmaxn, dvmax, c8res,
            (cand.q.col(N - 1) - sc_.platform.end_pos).norm());
      }
      cleanup(cand);
      const TrajAudit audit = audit_trajectory(sc_, *W_, alpha_, cand);
      const double F = exact_propulsion(cand);
      if (audit.pass && F <= best.propulsion_avg * (1.0 + 1e-9) + 1e-12) {
        const double improvement = best.propulsion_avg - F;
        best.traj = cand;
        best.propulsion_avg = F;
        best.objective = F + tx_avg();
        best.trace.push_back(best.objective);
        refresh_expansion(best);
        if (improvement <= sc_.solver.ao_tol * std::max(1.0, best.propulsion_avg))
          break;
      } else {
        if (std::getenv("ISACOPT_VERBOSE"))
          std::printf(
              "  traj reject: F %.6f (best %.6f) rate %.2e gamma %.2e c7 %.2e "
              "c9 %.2e c10 %.2e rho %.3f\n",
              F, best.propulsion_avg, audit.worst_rate_defect,
              audit.worst_gamma_defect, audit.worst_c7, audit.worst_c9,
              audit.worst_c10, rho);
        ++best.rejected_iters;
        rho *= 0.5;
        if (rho < 1e-3) break;  // keep the last audited-feasible iterate
      }
    }
    best.final_trust_region = rho;
    read_slacks(best);
    return best;
  }

  // ---- initializer helpers (shared with the driver) -------------------------

  static int required_hover_slots(const Scenario& sc, int e) {
    const auto& tgt = sc.targets[e];
    const double H = sc.platform.altitude;
    const double best_gain = sc.platform.p_max * sc.platform.antennas;
    const double per_slot = tgt.rcs * sc.timing.beta0 * sc.timing.beta0 *
                            best_gain /
                            (16.0 * std::numbers::pi * std::pow(H, 4) *
                             tgt.echo_noise);
    return std::max(1, static_cast<int>(std::ceil(
                           tgt.snr_threshold / per_slot - 1e-9)));
  }

 private:
  struct Handles {
    std::vector<int> q, v;                  // [n] first of 2
    std::vector<int> y, tspd, wsq, ucub, uinv;  // [n] (absent: -1)
    std::vector<int> s, mu, beta, rate;     // [k*N + n]
    std::vector<int> tpath;                 // [n] path parameter (baseline 1)
    Eigen::MatrixXd rho;                    // balanced-coordinate scales
    double obj_const = 0.0;
  };

  int idxU(int k, int n) const { return k * sc_.num_slots() + n; }

  double slot_fraction(int n) const {
    return (alpha_.rows() > 0) ? alpha_.col(n).sum() : 0.0;
  }
  bool hover_slot(int n) const { return slot_fraction(n) >= 1.0 - 1e-9; }

  double tx_avg() const {
    double acc = 0.0;
    for (const auto& slot : *W_)
      for (const auto& Wk : slot) acc += Wk.trace().real();
    return acc / sc_.num_slots();
  }

  double exact_propulsion(const Trajectory& t) const {
    double acc = 0.0;
    for (int n = 0; n < t.slots(); ++n)
      acc += slot_propulsion_power(slot_fraction(n), t.v.col(n), sc_.power);
    return acc / t.slots();
  }

  // expansion state refreshed from an accepted trajectory (exact values)
  void refresh_expansion(TrajSolveResult& r) {
    const int N = sc_.num_slots();
    const int K = sc_.num_users();
    const double H2 = sc_.platform.altitude * sc_.platform.altitude;
    q_t_ = r.traj.q;
    v_t_ = r.traj.v;
    y_t_.resize(N);
    for (int n = 0; n < N; ++n)
      y_t_[n] = induced_slack_exact(r.traj.v.col(n).norm(), sc_.power);
    s_t_.resize(K, N);
    mu_t_.resize(K, N);
    beta_t_.resize(K, N);
    for (int k = 0; k < K; ++k) {
      const double sigma_norm = sc_.users[k].noise_power /
                                (sc_.timing.beta0 * sc_.timing.beta0);
      for (int n = 0; n < N; ++n) {
        const Vec2 q = r.traj.q.col(n);
        const double psi2 = (q - sc_.users[k].position).squaredNorm() + H2;
        s_t_(k, n) = std::max(psi2, H2 * (1.0 + 1e-9));
        // exact decomposition at the expansion point
        SteeringContext ctx{q, sc_.users[k].position, sc_.platform.geometry()};
        const CVec a = steering_vector(ctx);
        double num = 0.0, interf = 0.0;
        for (size_t i = 0; i < (*W_)[n].size(); ++i) {
          const double form = beampattern_gain((*W_)[n][i], a);
          if (static_cast<int>(i) == k) num = std::max(form, 0.0);
          else interf += std::max(form, 0.0);
        }
        beta_t_(k, n) = interf + sigma_norm * psi2;
        mu_t_(k, n) = num / beta_t_(k, n);
      }
    }
  }

  conic::Program build(const TrajSolveResult& cur, double rho, Handles& h) const {
    using conic::LinExpr;
    using conic::var_expr;
    const int N = sc_.num_slots();
    const int K = sc_.num_users();
    const int E = sc_.num_targets();
    const double dt = sc_.timing.slot_duration;
    const double H2 = sc_.platform.altitude * sc_.platform.altitude;
    const double vmax = sc_.platform.v_max;
    const double invN = 1.0 / N;
    const double speed_margin = 1e-5;
    const ArrayGeometry geom = sc_.platform.geometry();

    conic::Program prog;
    h = Handles{};
    h.q.resize(N);
    h.v.resize(N);
    h.y.assign(N, -1);
    h.tspd.assign(N, -1);
    h.wsq.assign(N, -1);
    h.ucub.assign(N, -1);
    h.uinv.assign(N, -1);
    h.tpath.assign(N, -1);
    for (int n = 0; n < N; ++n) {
      h.q[n] = prog.add_vector("q", 2);
      h.v[n] = prog.add_vector("v", 2);
      if (!hover_slot(n)) {
        h.y[n] = prog.add_scalar("y");
        h.tspd[n] = prog.add_scalar("t");
        h.wsq[n] = prog.add_scalar("w");
        h.ucub[n] = prog.add_scalar("u");
        h.uinv[n] = prog.add_scalar("ui");
      }
      if (opt_.path) h.tpath[n] = prog.add_scalar("tp");
    }
    h.s.resize(static_cast<size_t>(K) * N);
    h.mu.resize(static_cast<size_t>(K) * N);
    h.beta.resize(static_cast<size_t>(K) * N);
    h.rate.resize(static_cast<size_t>(K) * N);
    h.rho.resize(K, N);
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n)
        h.rho(k, n) = std::clamp(
            std::sqrt(std::max(mu_t_(k, n), 1e-6) /
                      std::max(beta_t_(k, n), 1e-12)),
            1e-6, 1e9);
    for (int k = 0; k < K; ++k)
      for (int n = 0; n < N; ++n) {
        h.s[idxU(k, n)] = prog.add_scalar("s");
        h.mu[idxU(k, n)] = prog.add_scalar("mu");
        h.beta[idxU(k, n)] = prog.add_scalar("b");
        h.rate[idxU(k, n)] = prog.add_scalar("r");
      }

    const PowerModelParams& pw = sc_.power;
    const bool paper_variant = (pw.variant == PowerVariant::PaperAsWritten);

    // objective and per-slot kinematic cones
    for (int n = 0; n < N; ++n) {
      const double frac = slot_fraction(n);
      h.obj_const += invN * frac * hover_power(pw);
      if (hover_slot(n)) {
        // fully sensing: velocity pinned to zero; the residual flight term
        // evaluates at v = 0 (hover power, or zero for the printed variant)
        prog.zero(var_expr(h.v[n]));
        prog.zero(var_expr(h.v[n] + 1));
        h.obj_const += invN * (1.0 - frac) *
                       (paper_variant ? 0.0 : hover_power(pw));
        continue;
      }
      const double mov = invN * (1.0 - frac);
      h.obj_const += mov * (paper_variant ? -pw.induced_power
                                          : pw.blade_profile_power);
      prog.minimize_term(var_expr(h.wsq[n],
                                  mov * pw.blade_profile_power *
                                      pw.blade_drag_coefficient()));
      prog.minimize_term(var_expr(h.y[n], mov * pw.induced_power));
      prog.minimize_term(var_expr(h.ucub[n], mov * pw.parasite_coefficient()));

      // t >= ||v||; w >= t^2; u t >= w^2 (so u >= ||v||^3)
      prog.soc({var_expr(h.tspd[n]), var_expr(h.v[n]), var_expr(h.v[n] + 1)});
      prog.rotated_soc(var_expr(h.wsq[n]), LinExpr(0.5), {var_expr(h.tspd[n])});
      prog.rotated_soc(var_expr(h.ucub[n]), var_expr(h.tspd[n]),
                       {std::numbers::sqrt2 * var_expr(h.wsq[n])});

      // induced-speed slack: ui y >= 1 and ui^2 <= g(y, v)
      prog.rotated_soc(var_expr(h.uinv[n]), var_expr(h.y[n]),
                       {LinExpr(std::numbers::sqrt2)});
      LinExpr g;
      const double yt = y_t_[n];
      const Vec2 vt = v_t_.col(n);
      const double v02 = pw.induced_velocity * pw.induced_velocity;
      g.constant = yt * yt + vt.squaredNorm() / v02 - 2.0 * yt * yt -
                   2.0 * vt.squaredNorm() / v02;
      g.add_keep(h.y[n], 2.0 * yt);
      g.add_keep(h.v[n], 2.0 * vt.x() / v02);
      g.add_keep(h.v[n] + 1, 2.0 * vt.y() / v02);
      prog.rotated_soc(g, LinExpr(0.5), {var_expr(h.uinv[n])});
      prog.nonneg(var_expr(h.y[n]));

      // C10 through the speed epigraph
      const double cap = std::max((1.0 - frac), 0.0) * vmax * (1.0 - speed_margin);
      prog.nonneg(LinExpr(cap) - var_expr(h.tspd[n]));

      if (opt_.pin_speed && vt.norm() > 0.1 * vmax) {
        // moving slots keep (linearized) full speed; direction stays free
        const double vn = vt.norm();
        LinExpr lb(-vmax * std::max(1.0 - frac, 0.0) * (1.0 - 3.0 * speed_margin));
        lb.add_keep(h.v[n], vt.x() / vn);
        lb.add_keep(h.v[n] + 1, vt.y() / vn);
        prog.nonneg(lb);
      }
    }

    // dynamics, boundary, acceleration, path pinning
    for (int n = 0; n + 1 < N; ++n) {
      const double step = (1.0 - slot_fraction(n)) * dt;
      for (int d = 0; d < 2; ++d) {
        LinExpr c8 = var_expr(h.q[n + 1] + d) - var_expr(h.q[n] + d);
        c8.add(h.v[n] + d, -step);
        prog.zero(c8);
      }
      if (!opt_.omit_accel_limit) {
        prog.soc({LinExpr(sc_.platform.a_max * dt * (1.0 - speed_margin)),
                  var_expr(h.v[n + 1]) - var_expr(h.v[n]),
                  var_expr(h.v[n + 1] + 1) - var_expr(h.v[n] + 1)});
      }
    }
    for (int d = 0; d < 2; ++d) {
      prog.zero(var_expr(h.q[0] + d) - LinExpr(sc_.platform.start_pos[d]));
      prog.zero(var_expr(h.q[N - 1] + d) - LinExpr(sc_.platform.end_pos[d]));
    }
    if (opt_.path) {
      const auto& segs = *opt_.path;
      for (int n = 0; n < N; ++n) {
        for (int d = 0; d < 2; ++d) {
          LinExpr pin = var_expr(h.q[n] + d) - LinExpr(segs[n].first[d]);
          pin.add(h.tpath[n], -segs[n].second[d]);
          prog.zero(pin);
        }
        prog.nonneg(var_expr(h.tpath[n]));
        prog.nonneg(LinExpr(1.0) - var_expr(h.tpath[n]));
      }
    }

    // C7: hover near the scheduled target
    const double D = sc_.platform.hover_radius;
    for (int n = 0; n < N; ++n) {
      if (slot_fraction(n) <= 1e-9 || E == 0) continue;
      std::vector<LinExpr> rows;
      rows.push_back(LinExpr(D));
      for (int e = 0; e < E; ++e) {
        const double w = std::sqrt(std::max(alpha_(e, n), 0.0));
        if (w < 1e-9) continue;
        rows.push_back(w * (var_expr(h.q[n]) - LinExpr(sc_.targets[e].position.x())));
        rows.push_back(w * (var_expr(h.q[n] + 1) - LinExpr(sc_.targets[e].position.y())));
      }
      if (rows.size() > 1) prog.soc(std::move(rows));
    }

    // rate machinery on the slack-parameterized quadratic forms
    for (int k = 0; k < K; ++k) {
      const double sigma_norm = sc_.users[k].noise_power /
                                (sc_.timing.beta0 * sc_.timing.beta0);
      for (int n = 0; n < N; ++n) {
        const int s_kn = h.s[idxU(k, n)];
        const int mu = h.mu[idxU(k, n)];
        const int beta = h.beta[idxU(k, n)];
        const double st = s_t_(k, n);

        // C18 (slack under the true squared slant) and the trust region
        LinExpr c18(affine_f_bound_const(k, n) + H2);
        c18.add_keep(h.q[n], f_grad_x_(k, n));
        c18.add_keep(h.q[n] + 1, f_grad_y_(k, n));
        c18.add_keep(s_kn, -1.0);
        prog.nonneg(c18);
        prog.nonneg(var_expr(s_kn) - LinExpr(H2 * (1.0 + 1e-9)));
        prog.nonneg(LinExpr(rho + st) - var_expr(s_kn));
        prog.nonneg(var_expr(s_kn) - LinExpr(st - rho));

        // C2a-hat: U + J~(s) >= chi(mu', beta), balanced coordinates
        const double rho = h.rho(k, n);
        const double mt = mu_t_(k, n) / rho;
        const double bt = beta_t_(k, n) * rho;
        const auto uj = quadratic_form_expansion((*W_)[n][k], st, geom, 1.0);
        const double grad = expansion_gradient((*W_)[n][k], st, geom, 1.0);
        LinExpr p;
        p.constant = uj.U + uj.J - grad * st - 0.5 * (mt * mt + bt * bt);
        p.add_keep(s_kn, grad);
        p.add_keep(mu, mt);
        p.add_keep(beta, bt);
        LinExpr z;
        z.add(mu, 1.0);
        z.add(beta, 1.0);
        prog.rotated_soc(p, LinExpr(1.0), {z});

        // C2b-hat: interference (linearized at s_k) plus noise below beta,
        // scaled by rho
        LinExpr c2b = var_expr(beta);
        for (size_t i = 0; i < (*W_)[n].size(); ++i) {
          if (static_cast<int>(i) == k) continue;
          const auto uji = quadratic_form_expansion((*W_)[n][i], st, geom, 1.0);
          const double gi = expansion_gradient((*W_)[n][i], st, geom, 1.0);
          c2b.constant -= rho * (uji.U + uji.J - gi * st);
          c2b.add_keep(s_kn, -rho * gi);
        }
        c2b.add_keep(s_kn, -rho * sigma_norm);
        prog.nonneg(c2b);
        prog.nonneg(var_expr(mu));

        // rate hypograph cuts
        const auto& pts = cuts_.points[static_cast<size_t>(k) * N + n];
        for (int j = 0; j < cuts_.budget; ++j) {
          LinExpr cut;
          if (j < static_cast<int>(pts.size())) {
            const double mh = pts[j];
            cut.constant = beam_detail::log2_1p(mh) - beam_detail::log2_slope(mh) * mh;
            cut.add_keep(mu, beam_detail::log2_slope(mh) * rho);
          } else {
            cut.constant = 64.0;
            cut.add_keep(mu, 0.0);
          }
          cut.add_keep(h.rate[idxU(k, n)], -1.0);
          prog.nonneg(cut);
        }
      }
      LinExpr avg(-static_cast<double>(N) * sc_.users[k].min_rate);
      for (int n = 0; n < N; ++n) avg.add(h.rate[idxU(k, n)], 1.0);
      prog.nonneg(avg);
    }

    return prog;
  }

  double affine_f_bound_const(int k, int n) const {
    const Vec2 qt = q_t_.col(n);
    const Vec2 d = sc_.users[k].position;
    return (qt - d).squaredNorm() - 2.0 * (qt - d).dot(qt);
  }
  double f_grad_x_(int k, int n) const {
    return 2.0 * (q_t_(0, n) - sc_.users[k].position.x());
  }
  double f_grad_y_(int k, int n) const {
    return 2.0 * (q_t_(1, n) - sc_.users[k].position.y());
  }

  Trajectory extract_trajectory(const Handles& h, const conic::Solution& sol) const {
    const int N = sc_.num_slots();
    Trajectory t;
    t.dt = sc_.timing.slot_duration;
    t.q.resize(2, N);
    t.v.resize(2, N);
    for (int n = 0; n < N; ++n) {
      t.q(0, n) = sol.x[h.q[n]];
      t.q(1, n) = sol.x[h.q[n] + 1];
      t.v(0, n) = sol.x[h.v[n]];
      t.v(1, n) = sol.x[h.v[n] + 1];
    }
    return t;
  }

  // Restores bit-exact dynamics: sensing velocities snapped to zero, the
  // terminal residual spread over the moving slots, q re-propagated.
  void cleanup(Trajectory& t) const {
    const int N = t.slots();
    const double dt = t.dt;
    for (int pass = 0; pass < 3; ++pass) {
      std::vector<int> movers;
      for (int n = 0; n < N; ++n) {
        if (hover_slot(n)) t.v.col(n).setZero();
        const double cap = (1.0 - slot_fraction(n)) * sc_.platform.v_max;
        const double sp = t.v.col(n).norm();
        if (sp > cap && sp > 0.0) t.v.col(n) *= cap / sp;
        // only slots with a real movement budget absorb the terminal
        // correction: near-hover slots would amplify it by 1 / (1 - fraction)
        if (n + 1 < N && slot_fraction(n) < 0.5) movers.push_back(n);
      }
      // forward propagation and terminal correction
      Vec2 qn = sc_.platform.start_pos;
      for (int n = 0; n + 1 < N; ++n)
        qn += (1.0 - slot_fraction(n)) * dt * t.v.col(n);
      const Vec2 residual = sc_.platform.end_pos - qn;
      if (!movers.empty()) {
        for (int n : movers)
          t.v.col(n) += residual /
                        (static_cast<double>(movers.size()) *
                         (1.0 - slot_fraction(n)) * dt);
      }
      t.q.col(0) = sc_.platform.start_pos;
      for (int n = 0; n + 1 < N; ++n)
        t.q.col(n + 1) =
            t.q.col(n) + (1.0 - slot_fraction(n)) * dt * t.v.col(n);
      if (residual.norm() < 1e-12) break;
    }
  }

  void read_slacks(TrajSolveResult& r) const {
    const int N = sc_.num_slots();
    const int K = sc_.num_users();
    r.s = s_t_;
    r.mu_p = mu_t_;
    r.beta = beta_t_;
    r.y.resize(N);
    for (int n = 0; n < N; ++n)
      r.y[n] = induced_slack_exact(r.traj.v.col(n).norm(), sc_.power);
  }

  const Scenario& sc_;
  Options opt_;
  const std::vector<std::vector<CMat>>* W_ = nullptr;
  Eigen::MatrixXd alpha_;

  Eigen::Matrix2Xd q_t_, v_t_;
  Eigen::VectorXd y_t_;
  Eigen::MatrixXd s_t_, mu_t_, beta_t_;
  beam_detail::CutTable cuts_;

  conic::AdmmConeSolver solver_;
  Eigen::VectorXd warm_x_, warm_y_, warm_s_;
  Eigen::Index last_rows_ = -1, last_cols_ = -1, last_nnz_ = -1;
  bool pattern_fresh_ = false;
};

// ---- initial trajectory -----------------------------------------------------

struct InitialPlan {
  Trajectory traj;
  Eigen::MatrixXd alpha;  // E x N binary hover schedule
  std::vector<Vec2> waypoints;  // visited order including start and end
};

namespace traj_detail {

// stop-to-stop discrete speed profile: speeds_i = min(i, m-i+1) ramp capped
// at c, scaled so the leg length matches exactly
inline std::vector<double> leg_profile(double length, int m, double a_step,
                                       double v_cap) {
  std::vector<double> sp(m, 0.0);
  auto dist = [&](double c) {
    double acc = 0.0;
    for (int i = 1; i <= m; ++i)
      acc += std::min({i * a_step, (m + 1 - i) * a_step, c});
    return acc;
  };
  if (length <= 0.0) return sp;
  double lo = 0.0, hi = v_cap;
  if (dist(hi) < length) return {};  // not reachable in m slots
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (dist(mid) < length ? lo : hi) = mid;
  }
  for (int i = 1; i <= m; ++i)
    sp[i - 1] = std::min({i * a_step, (m + 1 - i) * a_step, hi});
  // tiny exactness correction on the largest entry
  const double err = length - std::accumulate(sp.begin(), sp.end(), 0.0);
  auto mx = std::max_element(sp.begin(), sp.end());
  *mx = std::max(0.0, *mx + err);
  return sp;
}

inline int min_slots_for(double length, double a_step, double v_cap) {
  for (int m = 1; m < 100000; ++m) {
    double acc = 0.0;
    for (int i = 1; i <= m; ++i)
      acc += std::min({i * a_step, (m + 1 - i) * a_step, v_cap});
    if (acc >= length) return m;
  }
  throw TimingInfeasible("leg cannot be covered");
}

// exhaustive shortest visiting order for small node sets, else greedy + 2-opt
inline std::vector<int> tour_order(const Vec2& start, const Vec2& end,
                                   const std::vector<Vec2>& nodes) {
  const int n = static_cast<int>(nodes.size());
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto tour_len = [&](const std::vector<int>& ord) {
    double len = 0.0;
    Vec2 cur = start;
    for (int i : ord) {
      len += (nodes[i] - cur).norm();
      cur = nodes[i];
    }
    return len + (end - cur).norm();
  };
  if (n <= 8) {
    std::vector<int> best = order;
    double best_len = tour_len(order);
    while (std::next_permutation(order.begin(), order.end())) {
      const double len = tour_len(order);
      if (len < best_len) {
        best_len = len;
        best = order;
      }
    }
    return best;
  }
  // nearest neighbour with 2-opt polish
  std::vector<int> left = order, out;
  Vec2 cur = start;
  while (!left.empty()) {
    auto it = std::min_element(left.begin(), left.end(), [&](int a, int b) {
      return (nodes[a] - cur).norm() < (nodes[b] - cur).norm();
    });
    out.push_back(*it);
    cur = nodes[*it];
    left.erase(it);
  }
  bool improved = true;
  while (improved) {
    improved = false;
    for (size_t i = 0; i + 1 < out.size(); ++i)
      for (size_t j = i + 1; j < out.size(); ++j) {
        std::vector<int> alt = out;
        std::reverse(alt.begin() + i, alt.begin() + j + 1);
        if (tour_len(alt) < tour_len(out)) {
          out = alt;
          improved = true;
        }
      }
  }
  return out;
}

}  // namespace traj_detail

// Nearest-feasible tour over the targets with hover slots inserted; exactly
// feasible for C8/C9/C10 by construction.  `extra_nodes` lets the
// minimum-distance baseline route through the users as well.
inline InitialPlan initial_trajectory(const Scenario& sc,
                                      bool visit_users = false) {
  const int N = sc.num_slots();
  const int E = sc.num_targets();
  const double dt = sc.timing.slot_duration;
  const double a_step = 0.98 * sc.platform.a_max * dt;
  const double v_hi = 0.98 * sc.platform.v_max;

  std::vector<Vec2> nodes;
  std::vector<int> hover_count;  // per node (0 for user nodes)
  std::vector<int> node_target;  // target index or -1
  for (int e = 0; e < E; ++e) {
    const int need = TrajectoryStage::required_hover_slots(sc, e);
    if (need > sc.timing.max_sensing_slots)
      throw TimingInfeasible(
          "target " + std::to_string(e) + " needs " + std::to_string(need) +
          " sensing slots, budget is " +
          std::to_string(sc.timing.max_sensing_slots));
    nodes.push_back(sc.targets[e].position);
    hover_count.push_back(need);
    node_target.push_back(e);
  }
  if (visit_users)
    for (const auto& u : sc.users) {
      nodes.push_back(u.position);
      hover_count.push_back(0);
      node_target.push_back(-1);
    }

  const std::vector<int> order =
      traj_detail::tour_order(sc.platform.start_pos, sc.platform.end_pos, nodes);

  // leg lengths along the tour
  std::vector<double> leg_len;
  std::vector<Vec2> pts = {sc.platform.start_pos};
  for (int i : order) pts.push_back(nodes[i]);
  pts.push_back(sc.platform.end_pos);
  for (size_t j = 0; j + 1 < pts.size(); ++j)
    leg_len.push_back((pts[j + 1] - pts[j]).norm());

  int hover_total = 0;
  for (int i : order) hover_total += hover_count[i];
  const int budget = N - 1 - hover_total;  // velocity steps available
  if (budget <= 0) throw TimingInfeasible("no slots left after hovering");

  std::vector<int> leg_slots(leg_len.size());
  int used = 0;
  for (size_t j = 0; j < leg_len.size(); ++j) {
    leg_slots[j] = (leg_len[j] > 0.0)
                       ? traj_detail::min_slots_for(leg_len[j], a_step, v_hi)
                       : 0;
    used += leg_slots[j];
  }
  if (used > budget)
    throw TimingInfeasible("tour plus hovering exceeds the mission horizon");

  // spend leftover steps where they reduce cruise speed the most
  const double v_star = std::min(min_power_speed(sc.power, sc.platform.v_max), v_hi);
  int leftover = budget - used;
  while (leftover > 0) {
    double best_gain = -1.0;
    int best_leg = -1;
    for (size_t j = 0; j < leg_len.size(); ++j) {
      if (leg_len[j] <= 0.0) continue;
      const double now = leg_len[j] / leg_slots[j];
      if (now <= v_star * dt * 0.9) continue;  // already near the cheap speed
      const double gain = now - leg_len[j] / (leg_slots[j] + 1);
      if (gain > best_gain) {
        best_gain = gain;
        best_leg = static_cast<int>(j);
      }
    }
    if (best_leg < 0) break;
    ++leg_slots[best_leg];
    --leftover;
  }

  Trajectory traj;
  traj.dt = dt;
  traj.q.setZero(2, N);
  traj.v.setZero(2, N);
  Eigen::MatrixXd alpha = Eigen::MatrixXd::Zero(std::max(E, 0), N);

  int n = 0;
  traj.q.col(0) = sc.platform.start_pos;
  auto emit = [&](const Vec2& vel) {
    traj.v.col(n) = vel;
    traj.q.col(n + 1) = traj.q.col(n) + vel * dt;
    ++n;
  };
  for (size_t j = 0; j < leg_len.size(); ++j) {
    if (leg_len[j] > 0.0) {
      const Vec2 dir = (pts[j + 1] - pts[j]).normalized();
      const auto profile =
          traj_detail::leg_profile(leg_len[j], leg_slots[j], a_step, v_hi);
      if (profile.empty()) throw TimingInfeasible("leg profile infeasible");
      for (double sp : profile) emit(dir * sp);
    }
    if (j < order.size()) {
      const int tnode = order[j];
      for (int c = 0; c < hover_count[tnode]; ++c) {
        if (node_target[tnode] >= 0) alpha(node_target[tnode], n) = 1.0;
        emit(Vec2::Zero());
      }
    }
  }
  // loiter out any remaining slots at the end point
  while (n < N - 1) emit(Vec2::Zero());
  traj.q.col(N - 1) = sc.platform.end_pos;

  InitialPlan out;
  out.traj = traj;
  out.alpha = alpha;
  out.waypoints = pts;
  return out;
}

}  // namespace isacopt
