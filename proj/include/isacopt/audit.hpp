#pragma once

// Post-hoc verification of a finished plan against the exact nonconvex
// model: every constraint family is recomputed from the rank-one beamformers
// and raw formulas, never from solver slacks.

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "isacopt/geometry.hpp"
#include "isacopt/plan.hpp"
#include "isacopt/power.hpp"
#include "isacopt/scenario.hpp"

namespace isacopt {

struct FamilyAudit {
  std::string family;
  double worst_violation = 0.0;  // relative; <= 0 means satisfied
  int at_k = -1, at_e = -1, at_n = -1;
  bool pass = true;
};

struct ConstraintAudit {
  std::vector<FamilyAudit> families;
  Eigen::VectorXd achieved_rates;       // per user [bps/Hz]
  Eigen::VectorXd achieved_gamma;       // per target, linear
  Eigen::VectorXd beampattern_error;    // per target, worst Frobenius^2
  double rank_tight_fraction = 1.0;
  bool all_pass = true;

  const FamilyAudit* find(const std::string& name) const {
    for (const auto& f : families)
      if (f.family == name) return &f;
    return nullptr;
  }
};

// `rel_slack` is the audit acceptance band (1 percent by default).
inline ConstraintAudit verify_solution(const Scenario& sc,
                                       const std::vector<std::vector<CVec>>& w,
                                       const Trajectory& traj,
                                       const Eigen::MatrixXd& alpha,
                                       double rel_slack = 0.01) {
  const int N = traj.slots();
  const int K = sc.num_users();
  const int E = sc.num_targets();
  const int M = sc.platform.antennas;
  ConstraintAudit audit;

  auto push = [&audit](FamilyAudit f, double slack) {
    f.pass = f.worst_violation <= slack;
    audit.all_pass = audit.all_pass && f.pass;
    audit.families.push_back(std::move(f));
  };

  // C1: per-slot transmit power budget
  {
    FamilyAudit f{"C1"};
    for (int n = 0; n < N; ++n) {
      double p = 0.0;
      for (const CVec& wb : w[n]) p += wb.squaredNorm();
      const double viol = (p - sc.platform.p_max) / sc.platform.p_max;
      if (viol > f.worst_violation) {
        f.worst_violation = viol;
        f.at_n = n;
      }
    }
    push(f, rel_slack);
  }

  // C2: average achievable rate per user
  {
    FamilyAudit f{"C2"};
    audit.achieved_rates.setZero(K);
    for (int k = 0; k < K; ++k) {
      double rate = 0.0;
      for (int n = 0; n < N; ++n) {
        SteeringContext ctx{traj.q.col(n), sc.users[k].position,
                            sc.platform.geometry()};
        const CVec h = comm_channel(ctx, sc.timing.beta0);
        double sig = 0.0, interf = 0.0;
        for (size_t i = 0; i < w[n].size(); ++i) {
          const double p = std::norm(h.dot(w[n][i]));
          if (static_cast<int>(i) == k) sig = p;
          else interf += p;
        }
        rate += std::log2(1.0 + sig / (interf + sc.users[k].noise_power));
      }
      rate /= N;
      audit.achieved_rates[k] = rate;
      const double viol = (sc.users[k].min_rate - rate) / sc.users[k].min_rate;
      if (viol > f.worst_violation) {
        f.worst_violation = viol;
        f.at_k = k;
      }
    }
    push(f, rel_slack);
  }

  // C3: beampattern match while sensing; C4: accumulated sensing SNR
  {
    FamilyAudit f3{"C3"}, f4{"C4"};
    audit.achieved_gamma.setZero(std::max(E, 1));
    audit.beampattern_error.setZero(std::max(E, 1));
    for (int e = 0; e < E; ++e) {
      const auto& tgt = sc.targets[e];
      double gamma = 0.0;
      for (int n = 0; n < N; ++n) {
        if (alpha(e, n) < 0.5) continue;
        CMat Wsum = CMat::Zero(M, M);
        for (const CVec& wb : w[n]) Wsum += wb * wb.adjoint();
        const double err2 = (Wsum - tgt.desired_covariance).squaredNorm();
        audit.beampattern_error[e] = std::max(audit.beampattern_error[e], err2);
        const double viol3 = (err2 - tgt.error_budget) / tgt.error_budget;
        if (viol3 > f3.worst_violation) {
          f3.worst_violation = viol3;
          f3.at_e = e;
          f3.at_n = n;
        }
        SteeringContext ctx{traj.q.col(n), tgt.position, sc.platform.geometry()};
        gamma += sensing_snr_slot(ctx, Wsum, tgt.rcs, sc.timing.beta0,
                                  tgt.echo_noise);
      }
      audit.achieved_gamma[e] = gamma;
      const double viol4 = (tgt.snr_threshold - gamma) / tgt.snr_threshold;
      if (viol4 > f4.worst_violation) {
        f4.worst_violation = viol4;
        f4.at_e = e;
      }
    }
    push(f3, rel_slack);
    push(f4, rel_slack);
  }

  // C5 / C6 / C11: schedule structure (exact on the rounded schedule)
  {
    FamilyAudit f5{"C5"}, f6{"C6"}, f11{"C11"};
    for (int n = 0; n < N; ++n) {
      double frac = 0.0;
      for (int e = 0; e < E; ++e) {
        frac += alpha(e, n);
        const double dist = std::min(alpha(e, n), std::abs(1.0 - alpha(e, n)));
        if (dist > f11.worst_violation) {
          f11.worst_violation = dist;
          f11.at_e = e;
          f11.at_n = n;
        }
      }
      if (frac - 1.0 > f5.worst_violation) {
        f5.worst_violation = frac - 1.0;
        f5.at_n = n;
      }
    }
    for (int e = 0; e < E; ++e) {
      const double used = alpha.row(e).sum();
      const double over = (used - sc.timing.max_sensing_slots) /
                          std::max(1, sc.timing.max_sensing_slots);
      if (over > f6.worst_violation) {
        f6.worst_violation = over;
        f6.at_e = e;
      }
    }
    push(f5, 1e-9);
    push(f6, 1e-9);
    push(f11, 1e-9);
  }

  // C7: hover position above the sensed target
  {
    FamilyAudit f{"C7"};
    const double D2 = sc.platform.hover_radius * sc.platform.hover_radius;
    for (int n = 0; n < N; ++n) {
      double lhs = 0.0;
      for (int e = 0; e < E; ++e)
        lhs += alpha(e, n) *
               (traj.q.col(n) - sc.targets[e].position).squaredNorm();
      const double viol = (lhs - D2) / D2;
      if (viol > f.worst_violation) {
        f.worst_violation = viol;
        f.at_n = n;
      }
    }
    push(f, rel_slack);
  }

  // C8: dynamics residual (absolute metres)
  {
    FamilyAudit f{"C8"};
    for (int n = 0; n + 1 < N; ++n) {
      double frac = 0.0;
      for (int e = 0; e < E; ++e) frac += alpha(e, n);
      const Vec2 res = traj.q.col(n + 1) - traj.q.col(n) -
                       (1.0 - frac) * traj.dt * traj.v.col(n);
      if (res.norm() > f.worst_violation) {
        f.worst_violation = res.norm();
        f.at_n = n;
      }
    }
    const double bres = std::max(
        (traj.q.col(0) - sc.platform.start_pos).norm(),
        (traj.q.col(N - 1) - sc.platform.end_pos).norm());
    f.worst_violation = std::max(f.worst_violation, bres);
    push(f, 1e-9);
  }

  // C9 / C10: acceleration and schedule-coupled speed limits
  {
    FamilyAudit f9{"C9"}, f10{"C10"};
    for (int n = 0; n < N; ++n) {
      if (n + 1 < N) {
        const double dv = (traj.v.col(n + 1) - traj.v.col(n)).norm();
        const double viol = (dv - sc.platform.a_max * traj.dt) /
                            (sc.platform.a_max * traj.dt);
        if (viol > f9.worst_violation) {
          f9.worst_violation = viol;
          f9.at_n = n;
        }
      }
      double frac = 0.0;
      for (int e = 0; e < E; ++e) frac += alpha(e, n);
      const double cap = (1.0 - frac) * sc.platform.v_max;
      const double viol = (traj.v.col(n).norm() - cap) / sc.platform.v_max;
      if (viol > f10.worst_violation) {
        f10.worst_violation = viol;
        f10.at_n = n;
      }
    }
    push(f9, 1e-8);
    push(f10, 1e-8);
  }

  return audit;
}

// Average P1 objective of a finished plan (rank-one beamformers).
inline double plan_average_power(const Scenario& sc,
                                 const std::vector<std::vector<CVec>>& w,
                                 const Trajectory& traj,
                                 const Eigen::MatrixXd& alpha, double* tx_out,
                                 double* propulsion_out) {
  const int N = traj.slots();
  const int K = sc.num_users();
  double tx = 0.0, prop = 0.0;
  for (int n = 0; n < N; ++n) {
    for (const CVec& wb : w[n]) tx += wb.squaredNorm();
    double frac = 0.0;
    for (int e = 0; e < sc.num_targets(); ++e) frac += alpha(e, n);
    prop += slot_propulsion_power(frac, traj.v.col(n), sc.power);
  }
  tx /= N;
  prop /= N;
  if (tx_out) *tx_out = tx;
  if (propulsion_out) *propulsion_out = prop;
  return tx + prop;
}

}  // namespace isacopt
