#pragma once

// Plan data shared between the two subproblem stages and the driver.

#include <Eigen/Dense>

#include <vector>

#include "isacopt/geometry.hpp"
#include "isacopt/scenario.hpp"

namespace isacopt {

struct Trajectory {
  Eigen::Matrix2Xd q;  // 2 x N positions [m]
  Eigen::Matrix2Xd v;  // 2 x N velocities [m/s]
  double dt = 1.0;

  int slots() const { return static_cast<int>(q.cols()); }
};

// Relaxed (fractional) or rounded (binary) sensing indicators, E x N.
struct SensingSchedule {
  Eigen::MatrixXd alpha;

  int targets() const { return static_cast<int>(alpha.rows()); }
  int slots() const { return static_cast<int>(alpha.cols()); }
  double slot_fraction(int n) const {
    return alpha.rows() == 0 ? 0.0 : alpha.col(n).sum();
  }
  // index of the target sensed in slot n, or -1
  int sensed_target(int n, double tol = 0.5) const {
    for (int e = 0; e < alpha.rows(); ++e)
      if (alpha(e, n) > tol) return e;
    return -1;
  }
};

struct BeamformingPlan {
  std::vector<std::vector<CMat>> W;                       // [n][k], M x M
  std::vector<std::vector<std::vector<CMat>>> W_coupled;  // [n][e][k]
  Eigen::MatrixXd alpha;                                  // E x N relaxed
  Eigen::MatrixXd mu;   // K x N claimed SINR
  Eigen::MatrixXd phi;  // K x N interference-plus-noise over noise
  std::vector<std::vector<CVec>> w;   // rank-one beamformers [n][k]
  std::vector<std::vector<char>> tight;

  double objective = 0.0;      // average-power objective, no penalty [W]
  double penalty_value = 0.0;  // binary-violation penalty at the solution
  double tau = 0.0;
  std::vector<double> sca_trace;
  long admm_iterations = 0;

  double transmit_power_avg() const {
    double acc = 0.0;
    for (const auto& slot : W)
      for (const auto& Wk : slot) acc += Wk.trace().real();
    return W.empty() ? 0.0 : acc / static_cast<double>(W.size());
  }
};

// Per-slot user channels for a fixed trajectory.
inline std::vector<std::vector<CVec>> user_channels(const Scenario& sc,
                                                    const Trajectory& traj) {
  const int N = traj.slots();
  const int K = sc.num_users();
  std::vector<std::vector<CVec>> h(N, std::vector<CVec>(K));
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      SteeringContext ctx{traj.q.col(n), sc.users[k].position,
                          sc.platform.geometry()};
      h[n][k] = comm_channel(ctx, sc.timing.beta0);
    }
  return h;
}

// Exact per-user SINR of slot n for rank-relaxed covariances.
inline double slot_sinr(const Scenario& sc, const std::vector<CVec>& h_slot,
                        const std::vector<CMat>& W_slot, int k) {
  return sinr(W_slot, h_slot[k], k, sc.users[k].noise_power);
}

}  // namespace isacopt
