#pragma once

// Shared pieces of the finite-horizon MPC formulations: quadratic stage
// costs, the per-step convex constraint set, and the condensed affine maps
// x_k = S_k v + t_k over the stacked decision vector v = (lambda_k, u_k).

#include <Eigen/Dense>
#include <stdexcept>
#include <vector>

#include "c3/lcs.hpp"
#include "c3/types.hpp"

namespace c3 {

template <typename T>
struct CostSpec {
  std::vector<MatX<T>> Q;      // length N
  std::vector<MatX<T>> R;      // length N
  MatX<T> QN;
  std::vector<VecX<T>> x_ref;  // empty, or length N+1 (terminal included)

  void validate(int N, int n_x, int n_u) const {
    if (static_cast<int>(Q.size()) != N || static_cast<int>(R.size()) != N)
      throw std::invalid_argument("CostSpec: Q/R sequence length must equal N");
    for (const auto& q : Q)
      if (q.rows() != n_x || q.cols() != n_x)
        throw std::invalid_argument("CostSpec: Q dimension mismatch");
    for (const auto& r : R)
      if (r.rows() != n_u || r.cols() != n_u)
        throw std::invalid_argument("CostSpec: R dimension mismatch");
    if (QN.rows() != n_x || QN.cols() != n_x)
      throw std::invalid_argument("CostSpec: QN dimension mismatch");
    if (!x_ref.empty()) {
      if (static_cast<int>(x_ref.size()) != N + 1)
        throw std::invalid_argument("CostSpec: x_ref must have N+1 entries");
      for (const auto& r : x_ref)
        if (r.size() != n_x) throw std::invalid_argument("CostSpec: x_ref dimension");
    }
  }

  VecX<T> ref(int k, int n_x) const {
    if (x_ref.empty()) return VecX<T>::Zero(n_x);
    return x_ref[k];
  }
};

// Uniform cost with fixed Q, R, QN across the horizon.
template <typename T>
CostSpec<T> uniform_cost(int N, MatX<T> Q, MatX<T> R, MatX<T> QN) {
  CostSpec<T> c;
  c.Q.assign(N, Q);
  c.R.assign(N, R);
  c.QN = std::move(QN);
  return c;
}

// Per-step convex constraints over (x_k, lambda_k, u_k). Empty vectors mean
// "unconstrained". State bounds are skipped at k = 0 since x_0 is pinned.
template <typename T>
struct ConvexPolytope {
  VecX<T> x_lb, x_ub;
  VecX<T> u_lb, u_ub;
  VecX<T> lam_lb, lam_ub;
  MatX<T> A;  // rows over stacked (x, lambda, u)
  VecX<T> lb, ub;

  bool empty() const {
    return x_lb.size() == 0 && x_ub.size() == 0 && u_lb.size() == 0 &&
           u_ub.size() == 0 && lam_lb.size() == 0 && lam_ub.size() == 0 &&
           A.rows() == 0;
  }

  void validate(int n_x, int n_u, int n_lambda) const {
    auto check_pair = [](const VecX<T>& lo, const VecX<T>& hi, int n, const char* what) {
      if ((lo.size() != 0 && lo.size() != n) || (hi.size() != 0 && hi.size() != n))
        throw std::invalid_argument(std::string("ConvexPolytope: bad ") + what);
      if (lo.size() == n && hi.size() == n && (lo.array() > hi.array()).any())
        throw std::invalid_argument(std::string("ConvexPolytope: lb > ub for ") + what);
    };
    check_pair(x_lb, x_ub, n_x, "state bounds");
    check_pair(u_lb, u_ub, n_u, "input bounds");
    check_pair(lam_lb, lam_ub, n_lambda, "force bounds");
    if (A.rows() > 0 &&
        (A.cols() != n_x + n_lambda + n_u || lb.size() != A.rows() || ub.size() != A.rows()))
      throw std::invalid_argument("ConvexPolytope: bad general rows");
  }
};

// Affine maps x_k = S_k v + t_k, k = 0..N, over the stacked decision vector
// v = [lambda_0; u_0; ...; lambda_{N-1}; u_{N-1}] with x_0 fixed.
template <typename T>
struct StateMaps {
  std::vector<MatX<T>> S;
  std::vector<VecX<T>> t;
  int n_vars{0};
  int block{0};  // n_lambda + n_u

  int lambda_offset(int k) const { return k * block; }
  int input_offset(int k, int n_lambda) const { return k * block + n_lambda; }
};

template <typename T>
StateMaps<T> build_state_maps(const LCS<T>& lcs, int N, const VecX<T>& x0) {
  if (x0.size() != lcs.n_x) throw std::invalid_argument("build_state_maps: x0 size");
  if (N < 1) throw std::invalid_argument("build_state_maps: N must be >= 1");
  StateMaps<T> maps;
  maps.block = lcs.n_lambda + lcs.n_u;
  maps.n_vars = N * maps.block;
  maps.S.resize(N + 1);
  maps.t.resize(N + 1);
  maps.S[0] = MatX<T>::Zero(lcs.n_x, maps.n_vars);
  maps.t[0] = x0;
  for (int k = 0; k < N; ++k) {
    const auto& s = lcs.stage(k);
    maps.S[k + 1] = s.A * maps.S[k];
    maps.S[k + 1].middleCols(maps.lambda_offset(k), lcs.n_lambda) += s.D;
    maps.S[k + 1].middleCols(maps.input_offset(k, lcs.n_lambda), lcs.n_u) += s.B;
    maps.t[k + 1] = s.A * maps.t[k] + s.d;
  }
  return maps;
}

// Accumulate 0.5 v'Pv + r'v + constant for the tracking objective
// sum_k (x_k - ref_k)' Q_k (x_k - ref_k) + u_k' R_k u_k + terminal.
template <typename T>
void accumulate_condensed_cost(const LCS<T>& lcs, const CostSpec<T>& cost, int N,
                               const StateMaps<T>& maps, MatX<T>& P, VecX<T>& r,
                               T& constant) {
  P = MatX<T>::Zero(maps.n_vars, maps.n_vars);
  r = VecX<T>::Zero(maps.n_vars);
  constant = T(0);
  for (int k = 0; k <= N; ++k) {
    const MatX<T>& Qk = (k == N) ? cost.QN : cost.Q[k];
    const VecX<T> refk = cost.ref(k, lcs.n_x);
    const VecX<T> terr = maps.t[k] - refk;
    P.noalias() += T(2) * maps.S[k].transpose() * Qk * maps.S[k];
    r.noalias() += T(2) * maps.S[k].transpose() * (Qk * terr);
    constant += terr.dot(Qk * terr);
  }
  for (int k = 0; k < N; ++k) {
    const int off = maps.input_offset(k, lcs.n_lambda);
    P.block(off, off, lcs.n_u, lcs.n_u) += T(2) * cost.R[k];
  }
}

// Append the per-step polytope as rows over the condensed variables.
template <typename T>
void append_condensed_polytope(const LCS<T>& lcs, int N, const StateMaps<T>& maps,
                               const ConvexPolytope<T>& poly,
                               std::vector<RowX<T>>& rows, std::vector<T>& lo,
                               std::vector<T>& hi) {
  if (poly.empty()) return;
  const T inf = std::numeric_limits<T>::infinity();
  auto bound = [&](const VecX<T>& v, int i, T def) { return v.size() ? v(i) : def; };

  for (int k = 0; k < N; ++k) {
    if ((poly.x_lb.size() || poly.x_ub.size()) && k >= 1) {
      for (int i = 0; i < lcs.n_x; ++i) {
        rows.push_back(maps.S[k].row(i));
        lo.push_back(bound(poly.x_lb, i, -inf) - maps.t[k](i));
        hi.push_back(bound(poly.x_ub, i, inf) - maps.t[k](i));
      }
    }
    if (poly.lam_lb.size() || poly.lam_ub.size()) {
      for (int i = 0; i < lcs.n_lambda; ++i) {
        RowX<T> row = RowX<T>::Zero(maps.n_vars);
        row(maps.lambda_offset(k) + i) = T(1);
        rows.push_back(row);
        lo.push_back(bound(poly.lam_lb, i, -inf));
        hi.push_back(bound(poly.lam_ub, i, inf));
      }
    }
    if (poly.u_lb.size() || poly.u_ub.size()) {
      for (int i = 0; i < lcs.n_u; ++i) {
        RowX<T> row = RowX<T>::Zero(maps.n_vars);
        row(maps.input_offset(k, lcs.n_lambda) + i) = T(1);
        rows.push_back(row);
        lo.push_back(bound(poly.u_lb, i, -inf));
        hi.push_back(bound(poly.u_ub, i, inf));
      }
    }
    for (Eigen::Index j = 0; j < poly.A.rows(); ++j) {
      const RowX<T> ax = poly.A.row(j).head(lcs.n_x);
      RowX<T> row = ax * maps.S[k];
      row.segment(maps.lambda_offset(k), lcs.n_lambda) +=
          poly.A.row(j).segment(lcs.n_x, lcs.n_lambda);
      row.segment(maps.input_offset(k, lcs.n_lambda), lcs.n_u) +=
          poly.A.row(j).tail(lcs.n_u);
      rows.push_back(row);
      const T shift = ax.dot(maps.t[k]);
      lo.push_back(poly.lb(j) - shift);
      hi.push_back(poly.ub(j) - shift);
    }
  }
}

// Cost of an explicit trajectory under the same tracking objective. The
// trajectory must have at least N inputs; states beyond N are ignored.
template <typename T>
T trajectory_cost(const CostSpec<T>& cost, int N, const Trajectory<T>& traj) {
  if (static_cast<int>(traj.inputs.size()) < N ||
      static_cast<int>(traj.states.size()) < N + 1)
    throw std::invalid_argument("trajectory_cost: trajectory shorter than N");
  const int n_x = static_cast<int>(traj.states[0].size());
  T total = T(0);
  for (int k = 0; k < N; ++k) {
    const VecX<T> xe = traj.states[k] - cost.ref(k, n_x);
    total += xe.dot(cost.Q[k] * xe) + traj.inputs[k].dot(cost.R[k] * traj.inputs[k]);
  }
  const VecX<T> xe = traj.states[N] - cost.ref(N, n_x);
  total += xe.dot(cost.QN * xe);
  return total;
}

}  // namespace c3
