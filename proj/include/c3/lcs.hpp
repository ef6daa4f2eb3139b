#pragma once

// Linear complementarity systems:
//   x_{k+1} = A x_k + B u_k + D lambda_k + d
//   0 <= lambda_k  _|_  E x_k + F lambda_k + H u_k + c >= 0
// A system is a sequence of stages sharing dimensions; a single stage means
// time-invariant, and stage(k) clamps to the last entry otherwise.

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "c3/lcp.hpp"
#include "c3/types.hpp"

namespace c3 {

template <typename T>
struct LCSStage {
  MatX<T> A, B, D;
  VecX<T> d;
  MatX<T> E, F, H;
  VecX<T> c;
};

template <typename T>
struct LCS {
  std::vector<LCSStage<T>> stages;
  T dt{0};
  int n_x{0}, n_u{0}, n_lambda{0};

  const LCSStage<T>& stage(int k) const {
    return stages[std::min<std::size_t>(static_cast<std::size_t>(k < 0 ? 0 : k),
                                        stages.size() - 1)];
  }
  bool time_varying() const { return stages.size() > 1; }

  void validate() const {
    if (stages.empty()) throw std::invalid_argument("LCS: no stages");
    if (!(dt > T(0))) throw std::invalid_argument("LCS: dt must be positive");
    for (const auto& s : stages) {
      if (s.A.rows() != n_x || s.A.cols() != n_x || s.B.rows() != n_x ||
          s.B.cols() != n_u || s.D.rows() != n_x || s.D.cols() != n_lambda ||
          s.d.size() != n_x)
        throw std::invalid_argument("LCS: dynamics block dimensions inconsistent");
      if (s.E.rows() != n_lambda || s.E.cols() != n_x || s.F.rows() != n_lambda ||
          s.F.cols() != n_lambda || s.H.rows() != n_lambda || s.H.cols() != n_u ||
          s.c.size() != n_lambda)
        throw std::invalid_argument("LCS: complementarity block dimensions inconsistent");
    }
  }
};

template <typename T>
LCS<T> make_time_invariant_lcs(LCSStage<T> stage, T dt) {
  LCS<T> lcs;
  lcs.n_x = static_cast<int>(stage.A.rows());
  lcs.n_u = static_cast<int>(stage.B.cols());
  lcs.n_lambda = static_cast<int>(stage.F.rows());
  lcs.dt = dt;
  lcs.stages.push_back(std::move(stage));
  lcs.validate();
  return lcs;
}

template <typename T>
struct Trajectory {
  std::vector<VecX<T>> states;   // x_0 .. x_T
  std::vector<VecX<T>> inputs;   // u_0 .. u_{T-1}
  std::vector<VecX<T>> forces;   // lambda_0 .. lambda_{T-1}

  std::size_t horizon() const { return inputs.size(); }

  void validate() const {
    if (states.size() != inputs.size() + 1 || forces.size() != inputs.size())
      throw std::invalid_argument("Trajectory: length mismatch");
  }
};

template <typename T>
struct StepResult {
  VecX<T> x_next;
  VecX<T> lambda;
  LCPStatus lcp_status{LCPStatus::kInfeasible};
  bool lemke_fallback{false};  // enumeration rescued a failed pivoting solve
  bool ok() const { return lcp_status == LCPStatus::kSolved; }
};

// One step of the LCS: lambda from LCP(E x + H u + c, F), then the affine
// update. On LCP failure the offending status is carried in the result.
template <typename T>
StepResult<T> lcs_step(const LCS<T>& lcs, const VecX<T>& x, const VecX<T>& u,
                       int k = 0, T lcp_tol = T(1e-7), int max_pivots = 2000) {
  if (x.size() != lcs.n_x || u.size() != lcs.n_u)
    throw std::invalid_argument("lcs_step: state/input dimension mismatch");
  const LCSStage<T>& s = lcs.stage(k);
  StepResult<T> out;
  if (lcs.n_lambda == 0) {
    out.lambda.resize(0);
    out.lcp_status = LCPStatus::kSolved;
    out.x_next = s.A * x + s.B * u + s.d;
    return out;
  }
  LCPInstance<T> inst(s.E * x + s.H * u + s.c, s.F);
  LCPSolution<T> sol = lcp_solve_lemke(inst, lcp_tol, max_pivots);
  if (!sol.solved() && lcs.n_lambda <= 16) {
    // The pivoting path can miss solutions of degenerate contact LCPs that
    // mode enumeration still finds; fall back before reporting failure.
    sol = lcp_solve_enumerate(inst, lcp_tol);
    out.lemke_fallback = sol.solved();
  }
  out.lambda = sol.lambda;
  out.lcp_status = sol.status;
  out.x_next = s.A * x + s.B * u + s.D * sol.lambda + s.d;
  return out;
}

template <typename T>
struct RolloutResult {
  Trajectory<T> trajectory;
  bool ok{true};
  int fail_index{-1};
  LCPStatus fail_status{LCPStatus::kSolved};
};

template <typename T>
RolloutResult<T> lcs_rollout(const LCS<T>& lcs, const VecX<T>& x0,
                             const std::vector<VecX<T>>& u_seq, T lcp_tol = T(1e-7)) {
  if (u_seq.empty()) throw std::invalid_argument("lcs_rollout: empty input sequence");
  RolloutResult<T> out;
  out.trajectory.states.push_back(x0);
  for (std::size_t k = 0; k < u_seq.size(); ++k) {
    StepResult<T> step = lcs_step(lcs, out.trajectory.states.back(), u_seq[k],
                                  static_cast<int>(k), lcp_tol);
    if (!step.ok()) {
      out.ok = false;
      out.fail_index = static_cast<int>(k);
      out.fail_status = step.lcp_status;
      return out;
    }
    out.trajectory.inputs.push_back(u_seq[k]);
    out.trajectory.forces.push_back(step.lambda);
    out.trajectory.states.push_back(step.x_next);
  }
  return out;
}

}  // namespace c3
