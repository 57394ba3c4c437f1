#pragma once

// Alternating optimization driver: beam/indicator stage and trajectory stage
// alternate until the average-power objective settles, then the schedule is
// rounded, the trajectory is polished at the binary schedule, the
// beamformers are re-solved frozen, and the result is audited against the
// exact model.  Also hosts the two heuristic baselines andates the
// threshold sweep.

#include <Eigen/Dense>

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "isacopt/audit.hpp"
#include "isacopt/beam_stage.hpp"
#include "isacopt/errors.hpp"
#include "isacopt/plan.hpp"
#include "isacopt/scenario.hpp"
#include "isacopt/traj_stage.hpp"

namespace isacopt {

struct StageRecord {
  std::string stage;
  double objective = 0.0;
  long admm_iterations = 0;
  double seconds = 0.0;
};

struct SolveReport {
  uint64_t digest = 0;
  std::string scheme;
  std::vector<double> objective_trace;  // accepted AO iterates, non-increasing
  BeamformingPlan plan;                 // final frozen plan, rank-one recovered
  Trajectory trajectory;
  SensingSchedule schedule;             // binary
  ConstraintAudit audit;
  std::vector<StageRecord> records;
  int ao_iterations = 0;
  long admm_iterations = 0;
  double wallclock_s = 0.0;
  double avg_power = 0.0, tx_power = 0.0, propulsion_power = 0.0;
  bool audit_pass = false;
};

// Threshold at one half, then repair: at most one target per slot (keep the
// largest indicator) and at most N_s^max slots per target (keep the largest);
// ties break lexicographically by (target, slot).
inline Eigen::MatrixXd round_indicators(const Eigen::MatrixXd& alpha,
                                        const Scenario& sc) {
  const int E = static_cast<int>(alpha.rows());
  const int N = static_cast<int>(alpha.cols());
  Eigen::MatrixXd rounded = Eigen::MatrixXd::Zero(E, N);
  for (int n = 0; n < N; ++n) {
    int best_e = -1;
    double best_val = 0.0;
    for (int e = 0; e < E; ++e) {
      if (alpha(e, n) < 0.5) continue;  // threshold at one half
      if (best_e == -1 || alpha(e, n) > best_val) {
        best_e = e;
        best_val = alpha(e, n);
      }
    }
    if (best_e >= 0) rounded(best_e, n) = 1.0;
  }
  for (int e = 0; e < E; ++e) {
    const int budget = sc.timing.max_sensing_slots;
    int used = static_cast<int>(std::lround(rounded.row(e).sum()));
    while (used > budget) {
      // drop the active slot with the smallest relaxed indicator (latest wins
      // ties so that earlier slots are preferred)
      int drop = -1;
      double drop_val = 2.0;
      for (int n = 0; n < N; ++n)
        if (rounded(e, n) > 0.5 && alpha(e, n) < drop_val) {
          drop_val = alpha(e, n);
          drop = n;
        }
      rounded(e, drop) = 0.0;
      --used;
    }
  }
  return rounded;
}

namespace ao_detail {

// Maximum-ratio warm start: per-slot matched-filter covariances at an equal
// power split, scaled so the average rates clear the demands with margin.
inline void mrt_expansion(const Scenario& sc, const Trajectory& traj,
                          Eigen::MatrixXd& mu0, Eigen::MatrixXd& phi0) {
  const int N = sc.num_slots();
  const int K = sc.num_users();
  const auto h = user_channels(sc, traj);

  auto rates_at = [&](double p, Eigen::MatrixXd* mu, Eigen::MatrixXd* phi) {
    double worst = std::numeric_limits<double>::infinity();
    for (int k = 0; k < K; ++k) {
      double rate = 0.0;
      for (int n = 0; n < N; ++n) {
        double sig = 0.0, interf = 0.0;
        for (int i = 0; i < K; ++i) {
          const double g = std::norm(h[n][k].dot(h[n][i])) / h[n][i].squaredNorm();
          if (i == k) sig = p * g;
          else interf += p * g;
        }
        const double sigma2 = sc.users[k].noise_power;
        const double sinr_kn = sig / (interf + sigma2);
        if (mu) (*mu)(k, n) = sinr_kn;
        if (phi) (*phi)(k, n) = (interf + sigma2) / sigma2;
        rate += std::log2(1.0 + sinr_kn);
      }
      worst = std::min(worst, rate / N - sc.users[k].min_rate * 1.2);
    }
    return worst;
  };

  double lo = 1e-12, hi = sc.platform.p_max / K;
  if (rates_at(hi, nullptr, nullptr) > 0.0) {
    for (int it = 0; it < 80; ++it) {
      const double mid = std::sqrt(lo * hi);
      (rates_at(mid, nullptr, nullptr) > 0.0 ? hi : lo) = mid;
    }
  }
  mu0.resize(K, N);
  phi0.resize(K, N);
  rates_at(hi, &mu0, &phi0);
}

inline double now_s() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

}  // namespace ao_detail

struct RunOptions {
  uint64_t seed = 1;
  const SolveReport* warm = nullptr;  // previous threshold's solution
};

inline SolveReport run_ao(const Scenario& sc, const RunOptions& opt = {}) {
  sc.validate();
  const double t0 = ao_detail::now_s();
  const int E = sc.num_targets();

  // ---- initialization -------------------------------------------------------
  Trajectory traj;
  Eigen::MatrixXd alpha0;
  bool warm_used = false;
  if (opt.warm && opt.warm->trajectory.slots() == sc.num_slots() &&
      opt.warm->schedule.targets() == E) {
    warm_used = true;
    for (int e = 0; e < E; ++e) {
      const int have = static_cast<int>(std::lround(opt.warm->schedule.alpha.row(e).sum()));
      if (have < TrajectoryStage::required_hover_slots(sc, e)) warm_used = false;
    }
    if (warm_used) {
      traj = opt.warm->trajectory;
      alpha0 = opt.warm->schedule.alpha;
    }
  }
  if (!warm_used) {
    InitialPlan init = initial_trajectory(sc);
    traj = init.traj;
    alpha0 = init.alpha;
  }

  Eigen::MatrixXd mu0, phi0;
  ao_detail::mrt_expansion(sc, traj, mu0, phi0);

  BeamformingStage beam(sc, opt.seed);
  beam.set_expansion(mu0, phi0, alpha0);
  TrajectoryStage tstage(sc);

  const double tau0 =
      sc.solver.penalty_weight * (hover_power(sc.power) + sc.platform.p_max);

  SolveReport rep;
  rep.digest = scenario_digest(sc);
  rep.scheme = "proposed";

  // ---- alternating loop -----------------------------------------------------
  BeamformingPlan plan;
  double obj_prev = std::numeric_limits<double>::infinity();
  for (int t = 0; t < sc.solver.max_ao_iters; ++t) {
    const double tb = ao_detail::now_s();
    beam.set_trajectory(traj);
    BeamformingPlan cand_plan = beam.solve(tau0);
    rep.records.push_back({"beam", cand_plan.objective, cand_plan.admm_iterations,
                           ao_detail::now_s() - tb});
    rep.admm_iterations += cand_plan.admm_iterations;

    const double tt = ao_detail::now_s();
    tstage.set_plan(cand_plan.W, cand_plan.alpha);
    TrajSolveResult tr = tstage.solve(traj);
    rep.records.push_back({"trajectory", tr.objective, tr.admm_iterations,
                           ao_detail::now_s() - tt});
    rep.admm_iterations += tr.admm_iterations;

    const double obj = tr.objective;  // true model: fixed W, audited trajectory
    ++rep.ao_iterations;
    if (obj > obj_prev * (1.0 + 1e-9)) break;  // keep the previous iterate
    plan = std::move(cand_plan);
    traj = tr.traj;
    rep.objective_trace.push_back(obj);
    const bool converged =
        std::isfinite(obj_prev) &&
        (obj_prev - obj) <= sc.solver.ao_tol * std::max(std::abs(obj_prev), 1e-9);
    obj_prev = obj;
    if (converged) break;
  }
  if (plan.W.empty()) throw NumericalFailure("alternating loop accepted no iterate");

  // ---- rounding and final polish --------------------------------------------
  Eigen::MatrixXd alpha_bin = round_indicators(plan.alpha, sc);
  if (E > 0) {
    const double tt = ao_detail::now_s();
    tstage.set_plan(plan.W, alpha_bin);
    TrajSolveResult tr = tstage.solve(traj);
    traj = tr.traj;
    rep.records.push_back({"trajectory-final", tr.objective, tr.admm_iterations,
                           ao_detail::now_s() - tt});
    rep.admm_iterations += tr.admm_iterations;
  }
  {
    const double tb = ao_detail::now_s();
    beam.set_trajectory(traj);
    BeamformingPlan frozen;
    try {
      frozen = beam.solve_frozen(alpha_bin);
    } catch (const InfeasibleError& e) {
      throw SensingInfeasible(
          std::string("rounded schedule cannot restore feasibility: ") + e.what());
    }
    rep.records.push_back({"beam-frozen", frozen.objective, frozen.admm_iterations,
                           ao_detail::now_s() - tb});
    rep.admm_iterations += frozen.admm_iterations;
    plan = std::move(frozen);
  }
  beam.recover_beamformers(plan);

  rep.plan = std::move(plan);
  rep.trajectory = traj;
  rep.schedule.alpha = alpha_bin;
  rep.audit = verify_solution(sc, rep.plan.w, traj, alpha_bin);
  rep.audit_pass = rep.audit.all_pass;
  // the trace holds the accepted alternating iterates only; the rounded
  // rank-one plan is reported separately (it may carry a rounding cost)
  rep.avg_power = plan_average_power(sc, rep.plan.w, traj, alpha_bin,
                                     &rep.tx_power, &rep.propulsion_power);
  rep.wallclock_s = ao_detail::now_s() - t0;

  // rank tightness bookkeeping
  long tight = 0, total = 0;
  for (const auto& slot : rep.plan.tight)
    for (char c : slot) {
      ++total;
      tight += (c != 0);
    }
  rep.audit.rank_tight_fraction = total ? double(tight) / total : 1.0;
  return rep;
}

// ---- baseline 1: minimum-distance tour ---------------------------------------
//
// The trajectory is pinned to the shortest visiting order over users and
// targets; only the time parameterization along that tour stays free.  The
// beam/indicator stage is the full subproblem.

inline SolveReport baseline_min_distance(const Scenario& sc,
                                         const RunOptions& opt = {}) {
  sc.validate();
  const double t0 = ao_detail::now_s();
  const int E = sc.num_targets();

  InitialPlan init = initial_trajectory(sc, /*visit_users=*/true);
  Trajectory traj = init.traj;
  Eigen::MatrixXd alpha0 = init.alpha;

  // fixed per-slot tour segments: hover slots pin to their waypoint, moving
  // slots slide along their leg
  std::vector<std::pair<Vec2, Vec2>> segments(sc.num_slots());
  {
    const auto& pts = init.waypoints;
    for (int n = 0; n < sc.num_slots(); ++n) {
      const Vec2 qn = traj.q.col(n);
      double best = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j + 1 < pts.size(); ++j) {
        const Vec2 span = pts[j + 1] - pts[j];
        const double len2 = span.squaredNorm();
        const double t = (len2 > 0.0)
                             ? std::clamp((qn - pts[j]).dot(span) / len2, 0.0, 1.0)
                             : 0.0;
        const double d = (qn - (pts[j] + t * span)).norm();
        if (d < best - 1e-12) {
          best = d;
          segments[n] = {pts[j], span};
        }
      }
      if (alpha0.rows() > 0 && alpha0.col(n).sum() > 0.5)
        segments[n] = {qn, Vec2::Zero()};  // hover slots stay put
    }
  }

  Eigen::MatrixXd mu0, phi0;
  ao_detail::mrt_expansion(sc, traj, mu0, phi0);
  BeamformingStage beam(sc, opt.seed);
  beam.set_expansion(mu0, phi0, alpha0);
  TrajectoryStage::Options topt;
  topt.path = segments;
  TrajectoryStage tstage(sc, topt);

  const double tau0 =
      sc.solver.penalty_weight * (hover_power(sc.power) + sc.platform.p_max);

  SolveReport rep;
  rep.digest = scenario_digest(sc);
  rep.scheme = "baseline-1";

  BeamformingPlan plan;
  double obj_prev = std::numeric_limits<double>::infinity();
  for (int t = 0; t < sc.solver.max_ao_iters; ++t) {
    beam.set_trajectory(traj);
    const double tb = ao_detail::now_s();
    BeamformingPlan cand = beam.solve(tau0);
    rep.records.push_back({"beam", cand.objective, cand.admm_iterations,
                           ao_detail::now_s() - tb});
    rep.admm_iterations += cand.admm_iterations;
    tstage.set_plan(cand.W, cand.alpha);
    const double tt = ao_detail::now_s();
    TrajSolveResult tr = tstage.solve(traj);
    rep.records.push_back({"velocity", tr.objective, tr.admm_iterations,
                           ao_detail::now_s() - tt});
    rep.admm_iterations += tr.admm_iterations;
    ++rep.ao_iterations;
    if (tr.objective > obj_prev * (1.0 + 1e-9)) break;
    plan = std::move(cand);
    traj = tr.traj;
    rep.objective_trace.push_back(tr.objective);
    const bool converged = std::isfinite(obj_prev) &&
                           (obj_prev - tr.objective) <=
                               sc.solver.ao_tol * std::max(std::abs(obj_prev), 1e-9);
    obj_prev = tr.objective;
    if (converged) break;
  }
  if (plan.W.empty()) throw NumericalFailure("baseline 1 accepted no iterate");

  Eigen::MatrixXd alpha_bin = round_indicators(plan.alpha, sc);
  if (E > 0) {
    tstage.set_plan(plan.W, alpha_bin);
    TrajSolveResult tr = tstage.solve(traj);
    traj = tr.traj;
    rep.admm_iterations += tr.admm_iterations;
  }
  beam.set_trajectory(traj);
  BeamformingPlan frozen;
  try {
    frozen = beam.solve_frozen(alpha_bin);
  } catch (const InfeasibleError& e) {
    throw SensingInfeasible(std::string("baseline 1 rounding failed: ") + e.what());
  }
  rep.admm_iterations += frozen.admm_iterations;
  plan = std::move(frozen);
  beam.recover_beamformers(plan);

  rep.plan = std::move(plan);
  rep.trajectory = traj;
  rep.schedule.alpha = alpha_bin;
  rep.audit = verify_solution(sc, rep.plan.w, traj, alpha_bin);
  rep.audit_pass = rep.audit.all_pass;
  rep.avg_power = plan_average_power(sc, rep.plan.w, traj, alpha_bin,
                                     &rep.tx_power, &rep.propulsion_power);
  rep.wallclock_s = ao_detail::now_s() - t0;
  return rep;
}

// ---- baseline 2: zero-forcing with a dedicated sensing beam -------------------

namespace ao_detail {

// Zero-forcing directions and powers meeting the per-slot rate target with a
// noise-sized interference allowance for the sensing beam.
struct ZfSlot {
  std::vector<CVec> w;     // per-user beamformers
  double power = 0.0;      // total ZF power
};

inline ZfSlot zf_beams(const Scenario& sc, const std::vector<CVec>& h_slot) {
  const int K = sc.num_users();
  const int M = sc.platform.antennas;
  CMat H(M, K);
  for (int k = 0; k < K; ++k) H.col(k) = h_slot[k];
  const CMat gram = H.adjoint() * H;
  Eigen::FullPivLU<CMat> lu(gram);
  if (!lu.isInvertible())
    throw InfeasibleError("ZF", "rank-deficient user channel stack");
  const CMat G = H * lu.inverse();  // h_k^H g_i = delta_ki
  ZfSlot out;
  out.w.resize(K);
  for (int k = 0; k < K; ++k) {
    const double gain = 1.0 / G.col(k).squaredNorm();  // |h^H g_hat|^2
    const double snr_target = std::pow(2.0, sc.users[k].min_rate) - 1.0;
    // interference from the sensing beam is capped at one noise power
    const double p = snr_target * 2.0 * sc.users[k].noise_power / gain;
    out.w[k] = std::sqrt(p) * G.col(k).normalized();
    out.power += p;
  }
  return out;
}

struct ZfSensing {
  std::vector<CMat> Ws;  // per-slot sensing covariance
  Eigen::MatrixXd alpha;
  long admm_iterations = 0;
};

// Sensing covariance + indicator subproblem at fixed trajectory and fixed
// zero-forcing information beams.
inline ZfSensing solve_zf_sensing(const Scenario& sc, const Trajectory& traj,
                                  const std::vector<ZfSlot>& zf,
                                  Eigen::MatrixXd alpha_t, double tau) {
  using conic::LinExpr;
  using conic::var_expr;
  const int N = sc.num_slots();
  const int K = sc.num_users();
  const int E = sc.num_targets();
  const int M = sc.platform.antennas;
  const double pmax = sc.platform.p_max;
  const auto channels = user_channels(sc, traj);

  ZfSensing out;
  out.alpha = alpha_t;
  out.Ws.assign(N, CMat::Zero(M, M));
  if (E == 0) return out;

  conic::SolverSettings settings;
  settings.eps = sc.solver.admm_eps;
  settings.max_iters = sc.solver.admm_max_iters;

  for (int pass = 0; pass < 3; ++pass) {
    conic::Program prog;
    std::vector<conic::HermHandle> Ws(N);
    std::vector<conic::HermHandle> Wt(static_cast<size_t>(N) * E);
    std::vector<int> alpha(static_cast<size_t>(E) * N);
    for (int n = 0; n < N; ++n) Ws[n] = prog.add_hermitian("Ws", M);
    for (int n = 0; n < N; ++n)
      for (int e = 0; e < E; ++e)
        Wt[static_cast<size_t>(n) * E + e] = prog.add_hermitian("Wt", M);
    for (int e = 0; e < E; ++e)
      for (int n = 0; n < N; ++n)
        alpha[static_cast<size_t>(e) * N + n] = prog.add_scalar("a");

    double obj_const = 0.0;
    const double invN = 1.0 / N;
    for (int n = 0; n < N; ++n) {
      const double pfly = flight_power(traj.v.col(n), sc.power).total;
      obj_const += invN * (pfly + zf[n].power);
      prog.minimize_term(invN * prog.herm_trace(Ws[n]));
      for (int e = 0; e < E; ++e) {
        const double coef = invN * (hover_power(sc.power) - pfly) +
                            tau * (1.0 - 2.0 * alpha_t(e, n));
        prog.minimize_term(var_expr(alpha[static_cast<size_t>(e) * N + n], coef));
        obj_const += tau * alpha_t(e, n) * alpha_t(e, n);
      }

      // C1 with the ZF share subtracted
      prog.nonneg(LinExpr(pmax - zf[n].power) - prog.herm_trace(Ws[n]));

      // sensing-beam interference cap: one noise power per user
      for (int k = 0; k < K; ++k) {
        const CMat Hk = (channels[n][k] * channels[n][k].adjoint()) /
                        sc.users[k].noise_power;
        prog.nonneg(LinExpr(1.0) - prog.herm_inner(Ws[n], Hk));
      }

      // schedule structure at the frozen trajectory
      LinExpr one_target(1.0);
      for (int e = 0; e < E; ++e)
        one_target.add(alpha[static_cast<size_t>(e) * N + n], -1.0);
      prog.nonneg(one_target);
      LinExpr near(sc.platform.hover_radius * sc.platform.hover_radius);
      for (int e = 0; e < E; ++e)
        near.add(alpha[static_cast<size_t>(e) * N + n],
                 -(traj.q.col(n) - sc.targets[e].position).squaredNorm());
      prog.nonneg(near);
      const double speed = traj.v.col(n).norm();
      LinExpr cap(std::max(1.0 - speed / sc.platform.v_max, 0.0));
      for (int e = 0; e < E; ++e)
        cap.add(alpha[static_cast<size_t>(e) * N + n], -1.0);
      prog.nonneg(cap);
      if (n + 1 < N && speed > 1e-9) {
        const Vec2 step = traj.q.col(n + 1) - traj.q.col(n);
        const double implied =
            1.0 - step.dot(traj.v.col(n)) /
                      (traj.v.col(n).squaredNorm() * traj.dt);
        LinExpr pin(-std::clamp(implied, 0.0, 1.0));
        for (int e = 0; e < E; ++e)
          pin.add(alpha[static_cast<size_t>(e) * N + n], 1.0);
        prog.zero(pin);
      }
      for (int e = 0; e < E; ++e) {
        prog.nonneg(var_expr(alpha[static_cast<size_t>(e) * N + n]));
        prog.nonneg(LinExpr(1.0) -
                    var_expr(alpha[static_cast<size_t>(e) * N + n]));
      }
    }
    for (int e = 0; e < E; ++e) {
      LinExpr budget(static_cast<double>(sc.timing.max_sensing_slots));
      for (int n = 0; n < N; ++n)
        budget.add(alpha[static_cast<size_t>(e) * N + n], -1.0);
      prog.nonneg(budget);
    }

    // C3 / C4 with the fixed ZF covariance folded into the indicator terms
    for (int e = 0; e < E; ++e) {
      const auto& tgt = sc.targets[e];
      LinExpr snr(-1.0);
      for (int n = 0; n < N; ++n) {
        CMat Wzf_sum = CMat::Zero(M, M);
        for (const auto& wk : zf[n].w) Wzf_sum += wk * wk.adjoint();
        SteeringContext ctx{traj.q.col(n), tgt.position, sc.platform.geometry()};
        const double psi = ctx.slant();
        const double coef = tgt.rcs * sc.timing.beta0 * sc.timing.beta0 /
                            (16.0 * std::numbers::pi * std::pow(psi, 4) *
                             tgt.echo_noise * tgt.snr_threshold);
        const CVec a = steering_vector(ctx);
        const CMat A = a * a.adjoint();
        snr += coef * prog.herm_inner(Wt[static_cast<size_t>(n) * E + e], A);
        snr.add(alpha[static_cast<size_t>(e) * N + n],
                coef * beampattern_gain(Wzf_sum, a));

        const Eigen::VectorXd rd =
            conic::svec(conic::hermitian_embed(tgt.desired_covariance));
        const Eigen::VectorXd zf_sv =
            conic::svec(conic::hermitian_embed(Wzf_sum));
        const int dim = conic::svec_size(2 * M);
        std::vector<LinExpr> rows(1 + dim);
        rows[0] = LinExpr(std::sqrt(2.0 * tgt.error_budget));
        for (int i = 0; i < dim; ++i) {
          LinExpr row;
          row.add(Wt[static_cast<size_t>(n) * E + e].offset + i, 1.0);
          row.add(alpha[static_cast<size_t>(e) * N + n], zf_sv[i] - rd[i]);
          rows[1 + i] = std::move(row);
        }
        prog.soc(std::move(rows));
      }
      prog.nonneg(snr);
    }

    for (int n = 0; n < N; ++n) {
      prog.psd_herm_combo(M, {{Ws[n], 1.0}});
      for (int e = 0; e < E; ++e) {
        const auto& Wte = Wt[static_cast<size_t>(n) * E + e];
        LinExpr a_expr = var_expr(alpha[static_cast<size_t>(e) * N + n]);
        prog.psd_herm_combo(M, {{Wte, 1.0}});
        prog.psd_herm_combo(M, {{Wte, -1.0}}, pmax * a_expr);
        prog.psd_herm_combo(M, {{Ws[n], 1.0}, {Wte, -1.0}});
        prog.psd_herm_combo(M, {{Wte, 1.0}, {Ws[n], -1.0}},
                            LinExpr(pmax) - pmax * a_expr);
      }
    }

    conic::Solution sol = conic::solve(prog, settings);
    out.admm_iterations += sol.iterations;
    if (sol.status == conic::SolveStatus::Infeasible)
      throw InfeasibleError("P2-ZF", "sensing beam subproblem infeasible");
    if (sol.status != conic::SolveStatus::Optimal &&
        !(std::max({sol.pres, sol.dres, sol.gap}) < 50.0 * settings.eps))
      throw NumericalFailure("ZF sensing stage: " + sol.message);

    Eigen::MatrixXd alpha_new(E, N);
    for (int e = 0; e < E; ++e)
      for (int n = 0; n < N; ++n)
        alpha_new(e, n) = std::clamp(
            sol.x[alpha[static_cast<size_t>(e) * N + n]], 0.0, 1.0);
    for (int n = 0; n < N; ++n) out.Ws[n] = prog.value_hermitian(Ws[n], sol.x);
    const double drift = (alpha_new - alpha_t).cwiseAbs().maxCoeff();
    alpha_t = alpha_new;
    out.alpha = alpha_new;
    (void)obj_const;
    if (drift < sc.solver.binary_tol) break;
  }
  return out;
}

// Zigzag tour at pinned speed: every moving slot travels at v_max, direction
// alternates around the leg heading so each leg lands exactly.
inline InitialPlan initial_trajectory_pinned(const Scenario& sc) {
  const int N = sc.num_slots();
  const int E = sc.num_targets();
  const double dt = sc.timing.slot_duration;
  const double v = sc.platform.v_max * (1.0 - 1e-5);

  std::vector<Vec2> nodes;
  std::vector<int> hover_count;
  for (int e = 0; e < E; ++e) {
    const int need = TrajectoryStage::required_hover_slots(sc, e);
    if (need > sc.timing.max_sensing_slots)
      throw TimingInfeasible("sensing budget too small for target " +
                             std::to_string(e));
    nodes.push_back(sc.targets[e].position);
    hover_count.push_back(need);
  }
  const std::vector<int> order =
      traj_detail::tour_order(sc.platform.start_pos, sc.platform.end_pos, nodes);

  std::vector<Vec2> pts = {sc.platform.start_pos};
  for (int i : order) pts.push_back(nodes[i]);
  pts.push_back(sc.platform.end_pos);

  int hover_total = 0;
  for (int c : hover_count) hover_total += c;
  const int budget = N - 1 - hover_total;

  const int legs = static_cast<int>(pts.size()) - 1;
  std::vector<double> len(legs);
  std::vector<int> slots(legs);
  int used = 0;
  for (int j = 0; j < legs; ++j) {
    len[j] = (pts[j + 1] - pts[j]).norm();
    slots[j] = (len[j] > 1e-9) ? static_cast<int>(std::ceil(len[j] / (v * dt)))
                               : 0;
    if (slots[j] % 2 == 1 && len[j] < slots[j] * v * dt * 0.999)
      ++slots[j];  // even counts pair up cleanly
    used += slots[j];
  }
  if (used > budget)
    throw TimingInfeasible("pinned-speed tour exceeds the mission horizon");
  // spend the remaining slots flying shallower zigzags; pairs keep the
  // parity even so every leg still lands exactly
  int leftover = budget - used;
  {
    std::vector<int> flyable;
    for (int j = 0; j < legs; ++j)
      if (len[j] > 1e-9) flyable.push_back(j);
    size_t ring = 0;
    while (leftover >= 2 && !flyable.empty()) {
      slots[flyable[ring % flyable.size()]] += 2;
      ++ring;
      leftover -= 2;
    }
    if (leftover == 1) {
      for (int j : flyable)
        if (len[j] >= v * dt) {
          ++slots[j];  // odd count absorbed by one straight slot
          leftover = 0;
          break;
        }
    }
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
  for (int j = 0; j < legs; ++j) {
    if (slots[j] > 0 && len[j] > 1e-9) {
      const Vec2 dir = (pts[j + 1] - pts[j]).normalized();
      const Vec2 normal(-dir.y(), dir.x());
      int m = slots[j];
      double straight = 0.0;
      if (m % 2 == 1) {
        straight = 1.0;  // one straight slot absorbs the odd parity
        m -= 1;
      }
      const double cos_th =
          std::clamp((len[j] - straight * v * dt) / (m * v * dt), 0.0, 1.0);
      const double sin_th = std::sqrt(std::max(0.0, 1.0 - cos_th * cos_th));
      if (straight > 0.0) emit(dir * v);
      for (int p = 0; p < m / 2; ++p) {
        emit(v * (cos_th * dir + sin_th * normal));
        emit(v * (cos_th * dir - sin_th * normal));
      }
    }
    if (j < static_cast<int>(order.size())) {
      const int tnode = order[j];
      for (int c = 0; c < hover_count[tnode]; ++c) {
        alpha(tnode, n) = 1.0;
        emit(Vec2::Zero());
      }
    }
  }
  while (n < N - 1) emit(Vec2::Zero());
  traj.q.col(N - 1) = sc.platform.end_pos;
  // terminal slot keeps the pinned cruise speed (it moves nothing)
  if (N >= 2 && traj.v.col(N - 2).norm() > 0.0)
    traj.v.col(N - 1) = traj.v.col(N - 2);

  InitialPlan out;
  out.traj = traj;
  out.alpha = alpha;
  out.waypoints = pts;
  return out;
}

}  // namespace ao_detail

inline SolveReport baseline_zero_forcing(const Scenario& sc,
                                         const RunOptions& opt = {}) {
  sc.validate();
  if (sc.platform.antennas < sc.num_users() + 1)
    throw ScenarioError("baseline 2 needs M >= K + 1 antennas");
  const double t0 = ao_detail::now_s();
  const int N = sc.num_slots();
  const int K = sc.num_users();
  const int E = sc.num_targets();

  InitialPlan init = ao_detail::initial_trajectory_pinned(sc);
  Trajectory traj = init.traj;
  Eigen::MatrixXd alpha_t = init.alpha;
  const double tau0 =
      sc.solver.penalty_weight * (hover_power(sc.power) + sc.platform.p_max);

  TrajectoryStage::Options topt;
  topt.omit_accel_limit = true;
  topt.pin_speed = true;
  TrajectoryStage tstage(sc, topt);

  SolveReport rep;
  rep.digest = scenario_digest(sc);
  rep.scheme = "baseline-2";

  std::vector<ao_detail::ZfSlot> zf;
  std::vector<std::vector<CMat>> W_all;
  ao_detail::ZfSensing sensing;
  double obj_prev = std::numeric_limits<double>::infinity();
  for (int t = 0; t < sc.solver.max_ao_iters; ++t) {
    // information beams from the current channels
    const auto channels = user_channels(sc, traj);
    zf.assign(N, {});
    for (int n = 0; n < N; ++n) {
      zf[n] = ao_detail::zf_beams(sc, channels[n]);
      if (zf[n].power > sc.platform.p_max * (1.0 + 1e-9))
        throw InfeasibleError("ZF", "zero-forcing power exceeds the budget");
    }
    const double tb = ao_detail::now_s();
    sensing = ao_detail::solve_zf_sensing(sc, traj, zf, alpha_t, tau0);
    rep.admm_iterations += sensing.admm_iterations;
    rep.records.push_back({"zf-sensing", 0.0, sensing.admm_iterations,
                           ao_detail::now_s() - tb});
    alpha_t = sensing.alpha;

    W_all.assign(N, {});
    for (int n = 0; n < N; ++n) {
      for (int k = 0; k < K; ++k)
        W_all[n].push_back(zf[n].w[k] * zf[n].w[k].adjoint());
      W_all[n].push_back(sensing.Ws[n]);
    }

    const double tt = ao_detail::now_s();
    tstage.set_plan(W_all, alpha_t);
    TrajSolveResult tr = tstage.solve(traj);
    rep.records.push_back({"trajectory", tr.objective, tr.admm_iterations,
                           ao_detail::now_s() - tt});
    rep.admm_iterations += tr.admm_iterations;
    ++rep.ao_iterations;
    if (tr.objective > obj_prev * (1.0 + 1e-9)) break;
    traj = tr.traj;
    rep.objective_trace.push_back(tr.objective);
    const bool converged = std::isfinite(obj_prev) &&
                           (obj_prev - tr.objective) <=
                               sc.solver.ao_tol * std::max(std::abs(obj_prev), 1e-9);
    obj_prev = tr.objective;
    if (converged) break;
  }

  // finalize: binary schedule, refreshed beams, rank-one sensing beam
  Eigen::MatrixXd alpha_bin = round_indicators(alpha_t, sc);
  const auto channels = user_channels(sc, traj);
  zf.assign(N, {});
  for (int n = 0; n < N; ++n) zf[n] = ao_detail::zf_beams(sc, channels[n]);
  try {
    sensing = ao_detail::solve_zf_sensing(sc, traj, zf, alpha_bin, 0.0);
  } catch (const InfeasibleError& e) {
    throw SensingInfeasible(std::string("baseline 2 rounding failed: ") + e.what());
  }

  rep.plan.W.assign(N, {});
  rep.plan.w.assign(N, {});
  rep.plan.tight.assign(N, {});
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      rep.plan.W[n].push_back(zf[n].w[k] * zf[n].w[k].adjoint());
      rep.plan.w[n].push_back(zf[n].w[k]);
      rep.plan.tight[n].push_back(1);
    }
    const RankOneResult rs = extract_rank_one(sensing.Ws[n], sc.solver.rank_tol);
    if (rs.w.norm() > 1e-9) {
      rep.plan.W[n].push_back(sensing.Ws[n]);
      rep.plan.w[n].push_back(rs.w);
      rep.plan.tight[n].push_back(rs.tight ? 1 : 0);
    }
  }
  rep.plan.alpha = alpha_bin;
  rep.trajectory = traj;
  rep.schedule.alpha = alpha_bin;
  rep.audit = verify_solution(sc, rep.plan.w, traj, alpha_bin);
  // the baseline omits the acceleration limit by definition
  for (auto& f : rep.audit.families)
    if (f.family == "C9") f.pass = true;
  rep.audit.all_pass = true;
  for (const auto& f : rep.audit.families)
    rep.audit.all_pass = rep.audit.all_pass && f.pass;
  rep.audit_pass = rep.audit.all_pass;
  rep.avg_power = plan_average_power(sc, rep.plan.w, traj, alpha_bin,
                                     &rep.tx_power, &rep.propulsion_power);
  rep.wallclock_s = ao_detail::now_s() - t0;
  return rep;
}

// ---- threshold sweep ----------------------------------------------------------

struct SweepRow {
  double threshold_db = 0.0;
  std::string scheme;
  bool ok = false;
  double avg_power_w = 0.0, tx_power_w = 0.0, propulsion_w = 0.0;
  int iterations = 0;
  double wallclock_s = 0.0;
  bool audit_pass = false;
  std::string error;
};

struct SweepTable {
  std::vector<SweepRow> rows;
};

inline SolveReport run_scheme(const Scenario& sc, const std::string& scheme,
                              const RunOptions& opt = {}) {
  if (scheme == "proposed") return run_ao(sc, opt);
  if (scheme == "baseline-1") return baseline_min_distance(sc, opt);
  if (scheme == "baseline-2") return baseline_zero_forcing(sc, opt);
  throw Error("unknown scheme '" + scheme + "'");
}

// One chain per scheme, ascending thresholds, warm-started along the chain.
inline SweepTable snr_sweep(const Scenario& base,
                            const std::vector<double>& thresholds_linear,
                            const std::vector<std::string>& schemes,
                            uint64_t seed = 1) {
  SweepTable table;
  std::vector<std::vector<SweepRow>> per_scheme(schemes.size());
  for (size_t si = 0; si < schemes.size(); ++si) {
    SolveReport prev;
    bool have_prev = false;
    for (double th : thresholds_linear) {
      Scenario sc = base;
      for (auto& tgt : sc.targets) tgt.snr_threshold = th;
      SweepRow row;
      row.threshold_db = linear_to_db(th);
      row.scheme = schemes[si];
      const double tc = ao_detail::now_s();
      try {
        RunOptions opt;
        opt.seed = seed;
        opt.warm = have_prev ? &prev : nullptr;
        SolveReport rep = run_scheme(sc, schemes[si], opt);
        row.ok = true;
        row.avg_power_w = rep.avg_power;
        row.tx_power_w = rep.tx_power;
        row.propulsion_w = rep.propulsion_power;
        row.iterations = rep.ao_iterations;
        row.audit_pass = rep.audit_pass;
        prev = std::move(rep);
        have_prev = true;
      } catch (const Error& e) {
        row.error = e.what();
      }
      row.wallclock_s = ao_detail::now_s() - tc;
      per_scheme[si].push_back(row);
    }
  }
  // emit threshold-major, scheme order preserved
  for (size_t ti = 0; ti < thresholds_linear.size(); ++ti)
    for (size_t si = 0; si < schemes.size(); ++si)
      table.rows.push_back(per_scheme[si][ti]);
  return table;
}

}  // namespace isacopt
