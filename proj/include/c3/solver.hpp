#pragma once

// Consensus ADMM for hybrid MPC over an LCS. Each iteration solves a convex
// quadratic program over dynamics-feasible trajectories with a consensus
// penalty, projects per-timestep copies onto the complementarity set with
// one of three interchangeable operators (exact MIQP, LCP shooting, inner
// ADMM), updates scaled duals, and grows the penalty geometrically:
//
//   z   <- argmin_{z in D cap C} c(z) + sum_k rho (z_k - d_k + w_k)' G_k (...)
//   d_k <- project(z_k + w_k)            for every k (independent; parallel)
//   w_k <- w_k + z_k - d_k
//   rho <- rho_s * rho,  w_k <- w_k / rho_s
//
// returning u_0 of the final z. The quadratic step is condensed onto the
// (lambda_k, u_k) variables; with no convex constraints it reduces to one
// symmetric linear solve.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <chrono>
#include <cmath>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <vector>

#include "c3/lcp.hpp"
#include "c3/lcs.hpp"
#include "c3/miqp.hpp"
#include "c3/mpc_common.hpp"
#include "c3/qp.hpp"
#include "c3/types.hpp"

namespace c3 {

enum class ProjectionType : std::uint8_t { kMIQP, kLCP, kADMM };

inline const char* to_string(ProjectionType p) {
  switch (p) {
    case ProjectionType::kMIQP: return "miqp";
    case ProjectionType::kLCP: return "lcp";
    case ProjectionType::kADMM: return "admm";
  }
  return "unknown";
}

template <typename T>
struct C3Params {
  CostSpec<T> cost;
  std::vector<VecX<T>> delta0;  // empty: zeros
  std::vector<VecX<T>> w0;      // empty: zeros
  std::vector<MatX<T>> G;       // empty: identity
  int admm_steps = 10;          // s
  T rho = T(0.1);
  T rho_scale = T(1);           // rho_s
  int horizon = 10;             // N
  ProjectionType projection = ProjectionType::kMIQP;
  MatX<T> U;                    // empty: identity with u_lambda_weight on forces
  T u_lambda_weight = T(1);
  T big_m = T(1000);
  ConvexPolytope<T> constraints;
  int proj_admm_iters = 40;
  T proj_admm_rho = T(1);
  T proj_bisection_tol = T(1e-8);
  int workers = 1;
  bool warm_start_shift = false;  // reuse the previous solve's (delta, w)
  bool record_trace = false;
  T lcp_tol = T(1e-7);
  long miqp_node_limit = 100000;
  QPSettings<T> qp;

  void validate(const LCS<T>& lcs) const {
    if (admm_steps < 1) throw std::invalid_argument("C3Params: admm_steps must be >= 1");
    if (horizon < 1) throw std::invalid_argument("C3Params: horizon must be >= 1");
    if (rho < T(0)) throw std::invalid_argument("C3Params: rho must be nonnegative");
    if (!(rho_scale > T(0))) throw std::invalid_argument("C3Params: rho_scale must be > 0");
    if (!(big_m > T(0))) throw std::invalid_argument("C3Params: big_m must be > 0");
    if (workers < 1) throw std::invalid_argument("C3Params: workers must be >= 1");
    if (proj_admm_iters < 1)
      throw std::invalid_argument("C3Params: proj_admm_iters must be >= 1");
    cost.validate(horizon, lcs.n_x, lcs.n_u);
    constraints.validate(lcs.n_x, lcs.n_u, lcs.n_lambda);
    const int n_z = lcs.n_x + lcs.n_lambda + lcs.n_u;
    auto check_seq = [&](const std::vector<VecX<T>>& seq, const char* what) {
      if (seq.empty()) return;
      if (static_cast<int>(seq.size()) != horizon)
        throw std::invalid_argument(std::string("C3Params: bad length for ") + what);
      for (const auto& v : seq)
        if (v.size() != n_z)
          throw std::invalid_argument(std::string("C3Params: bad entry size for ") + what);
    };
    check_seq(delta0, "delta0");
    check_seq(w0, "w0");
    if (!G.empty()) {
      if (static_cast<int>(G.size()) != horizon)
        throw std::invalid_argument("C3Params: G must have N entries");
      for (const auto& g : G)
        if (g.rows() != n_z || g.cols() != n_z)
          throw std::invalid_argument("C3Params: G entry dimension mismatch");
    }
    if (U.size() > 0 && (U.rows() != n_z || U.cols() != n_z))
      throw std::invalid_argument("C3Params: U dimension mismatch");
  }
};

template <typename T>
struct ConsensusIterate {
  std::vector<VecX<T>> z, delta, w;
  T rho_current{0};
};

template <typename T>
struct C3Diagnostics {
  std::vector<T> primal_residual;   // ||z - delta||_2 per iteration
  std::vector<T> comp_violation;    // max_k violation of H_k by z per iteration
  std::vector<T> rho_values;        // rho after the rescale of each iteration
  std::vector<double> qp_time_us;   // per iteration
  std::vector<double> proj_time_us; // per iteration (sum over k)
  long proj_solve_count{0};         // individual projection solves
  double proj_us_sum{0};
  double proj_us_sumsq{0};
  std::vector<ConsensusIterate<T>> trace;  // populated when record_trace
};

template <typename T>
struct C3Result {
  VecX<T> u0;
  Trajectory<T> plan;
  C3Diagnostics<T> diagnostics;
  ConsensusIterate<T> final_iterate;
};

template <typename T>
struct ProjectionResult {
  VecX<T> delta;
  T comp_residual{0};  // complementarity violation of the returned point
  bool feasible{true};
  bool bisection_failure{false};
};

namespace detail {

template <typename T>
struct StageView {
  const LCSStage<T>* s;
  int n_x, n_u, n_lambda;
  int n_z() const { return n_x + n_lambda + n_u; }
};

template <typename T>
T complementarity_violation(const StageView<T>& v, const VecX<T>& z) {
  if (v.n_lambda == 0) return T(0);
  const VecX<T> x = z.head(v.n_x);
  const VecX<T> lam = z.segment(v.n_x, v.n_lambda);
  const VecX<T> u = z.tail(v.n_u);
  const VecX<T> y = v.s->E * x + v.s->F * lam + v.s->H * u + v.s->c;
  T viol = (lam.array() * y.array()).abs().maxCoeff();
  viol = std::max(viol, -lam.minCoeff());
  viol = std::max(viol, -y.minCoeff());
  return std::max(viol, T(0));
}

}  // namespace detail

// Shooting projection: x and u parts are copied from the target and the
// forces solve the induced LCP, so the result lies exactly in H_k.
template <typename T>
ProjectionResult<T> project_lcp(const VecX<T>& target, const LCSStage<T>& s, int n_x,
                                int n_u, int n_lambda, T lcp_tol = T(1e-7)) {
  ProjectionResult<T> out;
  out.delta = target;
  if (n_lambda == 0) return out;
  const VecX<T> x = target.head(n_x);
  const VecX<T> u = target.tail(n_u);
  LCPInstance<T> inst(s.E * x + s.H * u + s.c, s.F);
  LCPSolution<T> sol = lcp_solve_lemke(inst, lcp_tol, 2000);
  if (!sol.solved() && n_lambda <= 16) sol = lcp_solve_enumerate(inst, lcp_tol);
  if (!sol.solved()) {
    std::ostringstream msg;
    msg << "project_lcp: LCP solve failed (" << to_string(sol.status) << ")";
    throw std::runtime_error(msg.str());
  }
  out.delta.segment(n_x, n_lambda) = sol.lambda;
  detail::StageView<T> view{&s, n_x, n_u, n_lambda};
  out.comp_residual = detail::complementarity_violation(view, out.delta);
  return out;
}

// Exact projection: U-weighted nearest point over the big-M feasible set,
// solved by branch-and-bound over the n_lambda binaries. The LCP projection
// seeds the incumbent.
template <typename T>
ProjectionResult<T> project_miqp(const VecX<T>& target, const LCSStage<T>& s, int n_x,
                                 int n_u, int n_lambda, const MatX<T>& U, T big_m,
                                 long node_limit = 100000, const QPSettings<T>& qp = {},
                                 T lcp_tol = T(1e-7)) {
  ProjectionResult<T> out;
  if (n_lambda == 0) {
    out.delta = target;
    return out;
  }
  const int n_z = n_x + n_lambda + n_u;
  BCQP<T> p;
  p.P = T(2) * U;
  p.r = T(-2) * (U * target);
  p.constant = target.dot(U * target);
  p.A_eq.resize(0, n_z);
  p.b_eq.resize(0);
  p.A_in.resize(0, n_z);
  p.lb.resize(0);
  p.ub.resize(0);
  p.big_m = big_m;
  for (int i = 0; i < n_lambda; ++i) {
    ComplementarityPair<T> pair;
    pair.lambda_index = n_x + i;
    pair.y_row = RowX<T>::Zero(n_z);
    pair.y_row.head(n_x) = s.E.row(i);
    pair.y_row.segment(n_x, n_lambda) = s.F.row(i);
    pair.y_row.tail(n_u) = s.H.row(i);
    pair.y_offset = s.c(i);
    p.pairs.push_back(std::move(pair));
  }
  BnBOptions<T> opts;
  opts.qp = qp;
  try {
    opts.incumbent_seed = project_lcp(target, s, n_x, n_u, n_lambda, lcp_tol).delta;
  } catch (const std::exception&) {
    // LCP seeding is an optimization only.
  }
  auto res = solve_bcqp_bnb(p, T(1e-7), node_limit, opts);
  if (res.status == BnBStatus::kBigMViolated)
    throw std::runtime_error("project_miqp: solution presses against big-M bound");
  if (!res.has_solution()) throw std::runtime_error("project_miqp: infeasible");
  out.delta = res.z;
  detail::StageView<T> view{&s, n_x, n_u, n_lambda};
  out.comp_residual = detail::complementarity_violation(view, out.delta);
  return out;
}

// Approximate projection via inner consensus ADMM: the linear-inequality
// feasibility (lambda >= 0, y >= 0) is split from the scalar quadratic
// equality lambda'y = 0, which is handled per iteration by the
// single-constraint QCQP solved with bisection on its multiplier. No
// feasibility guarantee; the complementarity residual is reported.
template <typename T>
ProjectionResult<T> project_admm(const VecX<T>& target, const LCSStage<T>& s, int n_x,
                                 int n_u, int n_lambda, const MatX<T>& U,
                                 int inner_iters = 40, T inner_rho = T(1),
                                 T bisect_tol = T(1e-8), const QPSettings<T>& qp = {}) {
  if (inner_iters < 1) throw std::invalid_argument("project_admm: inner_iters must be >= 1");
  ProjectionResult<T> out;
  if (n_lambda == 0) {
    out.delta = target;
    return out;
  }
  const int n_z = n_x + n_lambda + n_u;

  // Quadratic form of lambda' (E x + F lambda + H u + c).
  MatX<T> W = MatX<T>::Zero(n_z, n_z);
  W.block(n_x, 0, n_lambda, n_x) = s.E;
  W.block(n_x, n_x, n_lambda, n_lambda) = s.F;
  W.block(n_x, n_x + n_lambda, n_lambda, n_u) = s.H;
  const MatX<T> Pq = T(0.5) * (W + W.transpose());
  VecX<T> bq = VecX<T>::Zero(n_z);
  bq.segment(n_x, n_lambda) = s.c;
  Eigen::SelfAdjointEigenSolver<MatX<T>> es(Pq);
  const VecX<T> evals = es.eigenvalues();
  const MatX<T> V = es.eigenvectors();

  auto qform = [&](const VecX<T>& v) { return v.dot(Pq * v) + bq.dot(v); };

  // min ||omega - t||^2 s.t. qform(omega) = 0. Stationarity gives
  // omega(mu) = (I + mu Pq)^-1 (t - mu b/2); the constraint value is
  // monotone decreasing in mu on the interval where I + mu Pq > 0.
  auto qcqp_step = [&](const VecX<T>& t, bool* failed) -> VecX<T> {
    const T h0 = qform(t);
    if (std::abs(h0) <= T(1e-14) * std::max(T(1), t.squaredNorm())) return t;
    const VecX<T> tt = V.transpose() * t;
    const VecX<T> bt = V.transpose() * bq;
    auto omega_tilde = [&](T mu) -> VecX<T> {
      return ((tt - T(0.5) * mu * bt).array() / (T(1) + mu * evals.array())).matrix();
    };
    auto h = [&](T mu) {
      const VecX<T> w = omega_tilde(mu);
      return (w.array().square() * evals.array()).sum() + bt.dot(w);
    };
    const T margin = T(1e-9);
    T mu_lo, mu_hi;
    const T emax = evals.maxCoeff(), emin = evals.minCoeff();
    if (h0 > T(0)) {
      // root at mu > 0; valid up to -1/emin when emin < 0
      mu_lo = T(0);
      mu_hi = (emin < T(0)) ? (T(1) / -emin) * (T(1) - margin) : T(1e12);
      T probe = std::min(T(1), mu_hi / 2);
      while (h(probe) > T(0) && probe < mu_hi * (T(1) - T(1e-12))) {
        mu_lo = probe;
        probe = std::min(mu_hi * (T(1) - T(1e-12)), probe * T(4));
        if (probe >= mu_hi * (T(1) - T(1e-12))) break;
      }
      if (h(probe) > T(0)) {
        *failed = true;
        return t;
      }
      mu_hi = probe;
    } else {
      mu_hi = T(0);
      mu_lo = (emax > T(0)) ? (T(-1) / emax) * (T(1) - margin) : T(-1e12);
      T probe = std::max(T(-1), mu_lo / 2);
      while (h(probe) < T(0) && probe > mu_lo * (T(1) - T(1e-12))) {
        mu_hi = probe;
        probe = std::max(mu_lo * (T(1) - T(1e-12)), probe * T(4));
        if (probe <= mu_lo * (T(1) - T(1e-12))) break;
      }
      if (h(probe) < T(0)) {
        *failed = true;
        return t;
      }
      mu_lo = probe;
    }
    for (int it = 0; it < 200; ++it) {
      const T mid = T(0.5) * (mu_lo + mu_hi);
      if (h(mid) > T(0))
        mu_lo = mid;
      else
        mu_hi = mid;
      if (mu_hi - mu_lo <= bisect_tol * std::max(T(1), std::abs(mid))) break;
    }
    return V * omega_tilde(T(0.5) * (mu_lo + mu_hi));
  };

  // Inequality block: delta_lambda >= 0 and E x + F lambda + H u + c >= 0.
  MatX<T> C(2 * n_lambda, n_z);
  C.setZero();
  C.block(0, n_x, n_lambda, n_lambda) = MatX<T>::Identity(n_lambda, n_lambda);
  C.block(n_lambda, 0, n_lambda, n_x) = s.E;
  C.block(n_lambda, n_x, n_lambda, n_lambda) = s.F;
  C.block(n_lambda, n_x + n_lambda, n_lambda, n_u) = s.H;
  VecX<T> l(2 * n_lambda), u(2 * n_lambda);
  l.head(n_lambda).setZero();
  l.tail(n_lambda) = -s.c;
  u.setConstant(std::numeric_limits<T>::infinity());

  SplittingQP<T> ineq_qp(T(2) * U + T(2) * inner_rho * MatX<T>::Identity(n_z, n_z), C,
                         std::vector<bool>(2 * n_lambda, false), qp);

  VecX<T> delta = target;
  VecX<T> omega = target;
  VecX<T> nu = VecX<T>::Zero(n_z);
  bool bisect_failed = false;
  for (int it = 0; it < inner_iters; ++it) {
    const VecX<T> r = T(-2) * (U * target) - T(2) * inner_rho * (omega - nu);
    auto res = ineq_qp.solve(r, l, u);
    delta = res.z;
    bool failed = false;
    omega = qcqp_step(delta + nu, &failed);
    bisect_failed = bisect_failed || failed;
    nu += delta - omega;
  }
  out.delta = delta;
  out.bisection_failure = bisect_failed;
  detail::StageView<T> view{&s, n_x, n_u, n_lambda};
  out.comp_residual = detail::complementarity_violation(view, out.delta);
  out.feasible = false;  // approximate operator: no guarantee
  return out;
}

// Stateful solver: condensed cost and constraint structure are prepared once
// per LCS and reused across iterations and solves. Instances are not
// shareable across concurrent solve() calls.
template <typename T>
class C3Solver {
 public:
  C3Solver(LCS<T> lcs, C3Params<T> params)
      : lcs_(std::move(lcs)), params_(std::move(params)) {
    lcs_.validate();
    params_.validate(lcs_);
    n_x_ = lcs_.n_x;
    n_u_ = lcs_.n_u;
    n_lam_ = lcs_.n_lambda;
    n_z_ = n_x_ + n_lam_ + n_u_;
    N_ = params_.horizon;
    if (params_.G.empty())
      G_.assign(N_, MatX<T>::Identity(n_z_, n_z_));
    else
      G_ = params_.G;
    if (params_.U.size() > 0) {
      U_ = params_.U;
    } else {
      U_ = MatX<T>::Identity(n_z_, n_z_);
      U_.block(n_x_, n_x_, n_lam_, n_lam_).diagonal().setConstant(params_.u_lambda_weight);
    }
    prepare_structure();
  }

  const LCS<T>& lcs() const { return lcs_; }
  const C3Params<T>& params() const { return params_; }
  const MatX<T>& projection_metric() const { return U_; }

  // Swap the model (same dimensions); warm-start state survives.
  void update_lcs(LCS<T> lcs) {
    lcs.validate();
    if (lcs.n_x != n_x_ || lcs.n_u != n_u_ || lcs.n_lambda != n_lam_)
      throw std::invalid_argument("C3Solver::update_lcs: dimension change");
    lcs_ = std::move(lcs);
    prepare_structure();
  }

  // One consensus quadratic step at penalty rho_current; exposed for tests
  // and diagnostics.
  std::vector<VecX<T>> quadratic_step(const VecX<T>& x0, const std::vector<VecX<T>>& delta,
                                      const std::vector<VecX<T>>& w, T rho_current) {
    set_initial_state(x0);
    return quadratic_step_prepared(delta, w, rho_current);
  }

  C3Result<T> solve(const VecX<T>& x0) {
    using clock = std::chrono::steady_clock;
    if (x0.size() != n_x_) throw std::invalid_argument("C3Solver::solve: x0 size");
    set_initial_state(x0);

    std::vector<VecX<T>> delta, w;
    if (params_.warm_start_shift && !carried_delta_.empty()) {
      delta = carried_delta_;
      w = carried_w_;
      for (int k = 0; k + 1 < N_; ++k) {
        delta[k] = delta[k + 1];
        w[k] = w[k + 1];
      }
    } else {
      delta = params_.delta0.empty()
                  ? std::vector<VecX<T>>(N_, VecX<T>::Zero(n_z_))
                  : params_.delta0;
      w = params_.w0.empty() ? std::vector<VecX<T>>(N_, VecX<T>::Zero(n_z_))
                             : params_.w0;
    }

    C3Result<T> result;
    auto& diag = result.diagnostics;
    std::vector<VecX<T>> z(N_, VecX<T>::Zero(n_z_));
    T rho = params_.rho;

    for (int iter = 1; iter <= params_.admm_steps; ++iter) {
      const auto t0 = clock::now();
      z = quadratic_step_prepared(delta, w, rho);
      const auto t1 = clock::now();

      project_all(z, w, iter, delta, diag);
      const auto t2 = clock::now();

      for (int k = 0; k < N_; ++k) w[k] += z[k] - delta[k];
      rho = params_.rho_scale * rho;
      for (int k = 0; k < N_; ++k) w[k] /= params_.rho_scale;

      T prim_sq = T(0);
      T viol = T(0);
      for (int k = 0; k < N_; ++k) {
        prim_sq += (z[k] - delta[k]).squaredNorm();
        detail::StageView<T> view{&lcs_.stage(k), n_x_, n_u_, n_lam_};
        viol = std::max(viol, detail::complementarity_violation(view, z[k]));
      }
      diag.primal_residual.push_back(std::sqrt(prim_sq));
      diag.comp_violation.push_back(viol);
      diag.rho_values.push_back(rho);
      diag.qp_time_us.push_back(
          std::chrono::duration<double, std::micro>(t1 - t0).count());
      diag.proj_time_us.push_back(
          std::chrono::duration<double, std::micro>(t2 - t1).count());
      if (params_.record_trace) {
        ConsensusIterate<T> snap;
        snap.z = z;
        snap.delta = delta;
        snap.w = w;
        snap.rho_current = rho;
        diag.trace.push_back(std::move(snap));
      }
    }

    carried_delta_ = delta;
    carried_w_ = w;

    result.u0 = z[0].tail(n_u_);
    result.plan.states.reserve(N_ + 1);
    for (int k = 0; k < N_; ++k) {
      result.plan.states.push_back(z[k].head(n_x_));
      result.plan.forces.push_back(z[k].segment(n_x_, n_lam_));
      result.plan.inputs.push_back(z[k].tail(n_u_));
    }
    const auto& sN = lcs_.stage(N_ - 1);
    result.plan.states.push_back(sN.A * z[N_ - 1].head(n_x_) +
                                 sN.B * z[N_ - 1].tail(n_u_) +
                                 sN.D * z[N_ - 1].segment(n_x_, n_lam_) + sN.d);
    result.final_iterate.z = std::move(z);
    result.final_iterate.delta = std::move(delta);
    result.final_iterate.w = std::move(w);
    result.final_iterate.rho_current = rho;
    return result;
  }

 private:
  void prepare_structure() {
    maps0_ = build_state_maps(lcs_, N_, VecX<T>(VecX<T>::Zero(n_x_)));
    phi_.assign(N_ + 1, MatX<T>());
    phi_[0] = MatX<T>::Identity(n_x_, n_x_);
    for (int k = 0; k < N_; ++k) phi_[k + 1] = lcs_.stage(k).A * phi_[k];

    // z_k = Wz_k * v + m_k with m_k = [t_k; 0; 0].
    Wz_.assign(N_, MatX<T>::Zero(n_z_, maps0_.n_vars));
    for (int k = 0; k < N_; ++k) {
      Wz_[k].topRows(n_x_) = maps0_.S[k];
      Wz_[k].block(n_x_, maps0_.lambda_offset(k), n_lam_, n_lam_) =
          MatX<T>::Identity(n_lam_, n_lam_);
      Wz_[k].block(n_x_ + n_lam_, maps0_.input_offset(k, n_lam_), n_u_, n_u_) =
          MatX<T>::Identity(n_u_, n_u_);
    }

    // Cost quadratic (x0-independent) and penalty quadratic.
    P_cost_ = MatX<T>::Zero(maps0_.n_vars, maps0_.n_vars);
    for (int k = 0; k <= N_; ++k) {
      const MatX<T>& Qk = (k == N_) ? params_.cost.QN : params_.cost.Q[k];
      P_cost_.noalias() += T(2) * maps0_.S[k].transpose() * Qk * maps0_.S[k];
    }
    for (int k = 0; k < N_; ++k) {
      const int off = maps0_.input_offset(k, n_lam_);
      P_cost_.block(off, off, n_u_, n_u_) += T(2) * params_.cost.R[k];
    }
    P_pen_ = MatX<T>::Zero(maps0_.n_vars, maps0_.n_vars);
    WG_.assign(N_, MatX<T>());
    for (int k = 0; k < N_; ++k) {
      WG_[k] = Wz_[k].transpose() * G_[k];
      P_pen_.noalias() += T(2) * WG_[k] * Wz_[k];
    }

    // Convex constraint rows over the condensed variables (bounds are
    // refreshed per solve since they shift with t_k).
    con_rows_.clear();
    con_qp_.reset();
    if (!params_.constraints.empty()) {
      std::vector<RowX<T>> rows;
      std::vector<T> lo, hi;
      append_condensed_polytope(lcs_, N_, maps0_, params_.constraints, rows, lo, hi);
      con_rows_ = rows;
      MatX<T> C(rows.size(), maps0_.n_vars);
      for (std::size_t i = 0; i < rows.size(); ++i) C.row(static_cast<int>(i)) = rows[i];
      con_qp_ = std::make_unique<SplittingQP<T>>(
          P_cost_, std::move(C), std::vector<bool>(rows.size(), false), params_.qp);
    }
    x0_cached_.resize(0);
  }

  void set_initial_state(const VecX<T>& x0) {
    if (x0_cached_.size() == n_x_ && x0_cached_ == x0) return;
    x0_cached_ = x0;
    t_.assign(N_ + 1, VecX<T>());
    for (int k = 0; k <= N_; ++k) t_[k] = maps0_.t[k] + phi_[k] * x0;

    r_cost_ = VecX<T>::Zero(maps0_.n_vars);
    for (int k = 0; k <= N_; ++k) {
      const MatX<T>& Qk = (k == N_) ? params_.cost.QN : params_.cost.Q[k];
      const VecX<T> terr = t_[k] - params_.cost.ref(k, n_x_);
      r_cost_.noalias() += T(2) * maps0_.S[k].transpose() * (Qk * terr);
    }

    if (con_qp_) {
      // Re-shift the constraint bounds for the new initial state.
      std::vector<RowX<T>> rows;
      std::vector<T> lo, hi;
      StateMaps<T> maps = maps0_;
      maps.t = t_;
      append_condensed_polytope(lcs_, N_, maps, params_.constraints, rows, lo, hi);
      con_l_.resize(static_cast<int>(lo.size()));
      con_u_.resize(static_cast<int>(hi.size()));
      for (std::size_t i = 0; i < lo.size(); ++i) {
        con_l_(static_cast<int>(i)) = lo[i];
        con_u_(static_cast<int>(i)) = hi[i];
      }
    }
  }

  std::vector<VecX<T>> quadratic_step_prepared(const std::vector<VecX<T>>& delta,
                                               const std::vector<VecX<T>>& w,
                                               T rho_current) {
    MatX<T> P = P_cost_ + rho_current * P_pen_;
    VecX<T> r = r_cost_;
    for (int k = 0; k < N_; ++k) {
      VecX<T> mk = VecX<T>::Zero(n_z_);
      mk.head(n_x_) = t_[k];
      const VecX<T> a = delta[k] - w[k];
      r.noalias() += T(2) * rho_current * (WG_[k] * (mk - a));
    }

    VecX<T> v;
    if (!con_qp_) {
      QPProblem<T> qp;
      qp.P = std::move(P);
      qp.r = std::move(r);
      qp.A_eq.resize(0, maps0_.n_vars);
      qp.b_eq.resize(0);
      qp.A_in.resize(0, maps0_.n_vars);
      qp.lb.resize(0);
      qp.ub.resize(0);
      v = solve_equality_qp(qp, T(1e-7)).z;
    } else {
      con_qp_->update_P(std::move(P));
      auto res = con_qp_->solve(r, con_l_, con_u_);
      if (res.status == QPStatus::kPrimalInfeasible)
        throw std::runtime_error("quadratic_step: convex constraints infeasible");
      v = res.z;
    }

    std::vector<VecX<T>> z(N_);
    for (int k = 0; k < N_; ++k) {
      z[k] = Wz_[k] * v;
      z[k].head(n_x_) += t_[k];
    }
    return z;
  }

  ProjectionResult<T> project_one(int k, const VecX<T>& target) const {
    const LCSStage<T>& s = lcs_.stage(k);
    switch (params_.projection) {
      case ProjectionType::kLCP:
        return project_lcp(target, s, n_x_, n_u_, n_lam_, params_.lcp_tol);
      case ProjectionType::kMIQP:
        return project_miqp(target, s, n_x_, n_u_, n_lam_, U_, params_.big_m,
                            params_.miqp_node_limit, params_.qp, params_.lcp_tol);
      case ProjectionType::kADMM:
        return project_admm(target, s, n_x_, n_u_, n_lam_, U_, params_.proj_admm_iters,
                            params_.proj_admm_rho, params_.proj_bisection_tol,
                            params_.qp);
    }
    throw std::logic_error("unknown projection type");
  }

  void project_all(const std::vector<VecX<T>>& z, const std::vector<VecX<T>>& w,
                   int iter, std::vector<VecX<T>>& delta, C3Diagnostics<T>& diag) {
    using clock = std::chrono::steady_clock;
    std::vector<std::exception_ptr> errors(N_);
    std::vector<double> times(N_, 0.0);

    auto work = [&](int k) {
      const auto p0 = clock::now();
      try {
        delta[k] = project_one(k, z[k] + w[k]).delta;
      } catch (...) {
        errors[k] = std::current_exception();
      }
      times[k] = std::chrono::duration<double, std::micro>(clock::now() - p0).count();
    };

    const int workers = std::min(params_.workers, N_);
    if (workers <= 1) {
      for (int k = 0; k < N_; ++k) work(k);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(workers);
      for (int t = 0; t < workers; ++t) {
        pool.emplace_back([&, t]() {
          for (int k = t; k < N_; k += workers) work(k);
        });
      }
      for (auto& th : pool) th.join();
    }
    for (int k = 0; k < N_; ++k) {
      if (errors[k]) {
        try {
          std::rethrow_exception(errors[k]);
        } catch (const std::exception& e) {
          std::ostringstream msg;
          msg << "c3 projection failed at iteration " << iter << ", step " << k << ": "
              << e.what();
          throw std::runtime_error(msg.str());
        }
      }
      diag.proj_solve_count += 1;
      diag.proj_us_sum += times[k];
      diag.proj_us_sumsq += times[k] * times[k];
    }
  }

  LCS<T> lcs_;
  C3Params<T> params_;
  std::vector<MatX<T>> G_;
  MatX<T> U_;
  int n_x_{0}, n_u_{0}, n_lam_{0}, n_z_{0}, N_{0};

  StateMaps<T> maps0_;
  std::vector<MatX<T>> phi_;
  std::vector<MatX<T>> Wz_;
  std::vector<MatX<T>> WG_;
  MatX<T> P_cost_, P_pen_;
  VecX<T> r_cost_;
  std::vector<RowX<T>> con_rows_;
  std::unique_ptr<SplittingQP<T>> con_qp_;
  VecX<T> con_l_, con_u_;
  VecX<T> x0_cached_;
  std::vector<VecX<T>> t_;
  std::vector<VecX<T>> carried_delta_, carried_w_;
};

// One-shot wrapper matching the algorithmic interface.
template <typename T>
C3Result<T> c3_solve(const LCS<T>& lcs, const C3Params<T>& params, const VecX<T>& x0) {
  C3Solver<T> solver(lcs, params);
  return solver.solve(x0);
}

}  // namespace c3
