#pragma once

// Linear complementarity problems: given (q, F), find lambda >= 0 with
// y = F*lambda + q >= 0 and lambda . y = 0. Two solvers are provided: a
// Lemke pivoting solver with lexicographic tie-breaking, and a brute-force
// active-set enumeration usable as a cross-check on small problems.

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "c3/types.hpp"

namespace c3 {

template <typename T>
struct LCPInstance {
  VecX<T> q;
  MatX<T> F;

  LCPInstance() = default;
  LCPInstance(VecX<T> q_in, MatX<T> F_in) : q(std::move(q_in)), F(std::move(F_in)) {
    validate();
  }

  Eigen::Index size() const { return q.size(); }

  void validate() const {
    if (q.size() < 1) throw std::invalid_argument("LCPInstance: empty q");
    if (F.rows() != q.size() || F.cols() != q.size())
      throw std::invalid_argument("LCPInstance: F must be m x m with m = |q|");
  }
};

enum class LCPStatus : std::uint8_t {
  kSolved,
  kRayTermination,
  kIterationLimit,
  kInfeasible,
};

inline const char* to_string(LCPStatus s) {
  switch (s) {
    case LCPStatus::kSolved: return "solved";
    case LCPStatus::kRayTermination: return "ray_termination";
    case LCPStatus::kIterationLimit: return "iteration_limit";
    case LCPStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

template <typename T>
struct LCPSolution {
  VecX<T> lambda;
  VecX<T> y;
  T comp_residual{0};
  T feas_residual{0};
  LCPStatus status{LCPStatus::kInfeasible};

  bool solved() const { return status == LCPStatus::kSolved; }
};

// comp = max_i |lambda_i * (F lambda + q)_i|, feas = max violation of
// lambda >= 0, y >= 0. Both vanish exactly at a solution.
template <typename T>
std::pair<T, T> lcp_residual(const LCPInstance<T>& inst, const VecX<T>& lambda) {
  if (lambda.size() != inst.size())
    throw std::invalid_argument("lcp_residual: lambda has wrong length");
  const VecX<T> y = inst.F * lambda + inst.q;
  const T comp = (lambda.array() * y.array()).abs().maxCoeff();
  T feas = T(0);
  feas = std::max(feas, -lambda.minCoeff());
  feas = std::max(feas, -y.minCoeff());
  return {comp, feas};
}

namespace detail {

template <typename T>
LCPSolution<T> certify_lcp(const LCPInstance<T>& inst, VecX<T> lambda, T tol,
                           LCPStatus path_status) {
  LCPSolution<T> sol;
  sol.lambda = std::move(lambda);
  sol.y = inst.F * sol.lambda + inst.q;
  auto [comp, feas] = lcp_residual(inst, sol.lambda);
  sol.comp_residual = comp;
  sol.feas_residual = feas;
  if (path_status == LCPStatus::kSolved && (comp > tol || feas > tol)) {
    // Pivoting finished but the certificate does not hold; report as
    // infeasible rather than hand back an uncertified point as solved.
    sol.status = LCPStatus::kInfeasible;
  } else {
    sol.status = path_status;
  }
  return sol;
}

}  // namespace detail

// Lemke's algorithm with the all-ones covering vector. Tie-breaking in the
// ratio test is lexicographic over [q_bar | B^-1], which prevents cycling
// without any tuning; all comparisons are exact so the pivot sequence is a
// pure function of the input bits.
template <typename T>
LCPSolution<T> lcp_solve_lemke(const LCPInstance<T>& inst, T tol = T(1e-7),
                               int max_pivots = 1000) {
  inst.validate();
  if (!(tol > T(0))) throw std::invalid_argument("lcp_solve_lemke: tol must be > 0");
  if (max_pivots < 1) throw std::invalid_argument("lcp_solve_lemke: max_pivots must be >= 1");

  const int n = static_cast<int>(inst.size());
  const int col_z0 = 2 * n;
  const int col_rhs = 2 * n + 1;
  const T piv_tol = T(1e-11);

  if (inst.q.minCoeff() >= T(0)) {
    return detail::certify_lcp(inst, VecX<T>(VecX<T>::Zero(n)), tol, LCPStatus::kSolved);
  }

  // Columns: [0, n) basic w slots (holds B^-1 after pivoting), [n, 2n) the z
  // variables, 2n the covering variable z0, 2n+1 the right-hand side.
  MatX<T> tab(n, 2 * n + 2);
  tab.block(0, 0, n, n) = MatX<T>::Identity(n, n);
  tab.block(0, n, n, n) = -inst.F;
  tab.col(col_z0) = -VecX<T>::Ones(n);
  tab.col(col_rhs) = inst.q;

  std::vector<int> basis(n);
  for (int i = 0; i < n; ++i) basis[i] = i;  // w_i basic

  auto pivot = [&](int row, int col) {
    tab.row(row) /= tab(row, col);
    for (int i = 0; i < n; ++i) {
      if (i != row && tab(i, col) != T(0)) tab.row(i) -= tab(i, col) * tab.row(row);
    }
  };

  // Lexicographic comparison of rows a and b as candidates to leave the
  // basis for entering column `col`: compare (rhs, B^-1 row)/pivot entry.
  auto lex_less = [&](int a, int b, int col) {
    const T pa = tab(a, col), pb = tab(b, col);
    T diff = tab(a, col_rhs) * pb - tab(b, col_rhs) * pa;
    if (diff != T(0)) return diff < T(0);
    for (int j = 0; j < n; ++j) {
      diff = tab(a, j) * pb - tab(b, j) * pa;
      if (diff != T(0)) return diff < T(0);
    }
    return a < b;
  };

  // Initial pivot: z0 enters, the row with the most negative q leaves.
  int row = 0;
  for (int i = 1; i < n; ++i) {
    if (tab(i, col_rhs) < tab(row, col_rhs)) row = i;
  }
  pivot(row, col_z0);
  const int z0_basis_var = col_z0;
  basis[row] = z0_basis_var;
  int driving = n + row;  // complement of the leaving w_row

  for (int iter = 0; iter < max_pivots; ++iter) {
    int leave = -1;
    for (int i = 0; i < n; ++i) {
      if (tab(i, driving) > piv_tol) {
        if (leave < 0 || lex_less(i, leave, driving)) leave = i;
      }
    }
    if (leave < 0) {
      // Unbounded ray in the driving direction: no solution along this path.
      VecX<T> lambda = VecX<T>::Zero(n);
      for (int i = 0; i < n; ++i) {
        if (basis[i] >= n && basis[i] < 2 * n) lambda(basis[i] - n) = tab(i, col_rhs);
      }
      return detail::certify_lcp(inst, std::move(lambda), tol, LCPStatus::kRayTermination);
    }
    // When z0 can leave among the eligible rows, let it: this terminates the
    // complementary path immediately.
    for (int i = 0; i < n; ++i) {
      if (basis[i] == z0_basis_var && tab(i, driving) > piv_tol) {
        const T ratio_diff = tab(i, col_rhs) * tab(leave, driving) -
                             tab(leave, col_rhs) * tab(i, driving);
        if (ratio_diff <= T(0)) leave = i;
        break;
      }
    }

    const int leaving_var = basis[leave];
    pivot(leave, driving);
    basis[leave] = (driving == col_z0) ? z0_basis_var : driving;

    if (leaving_var == z0_basis_var) {
      VecX<T> lambda = VecX<T>::Zero(n);
      for (int i = 0; i < n; ++i) {
        if (basis[i] >= n && basis[i] < 2 * n) lambda(basis[i] - n) = tab(i, col_rhs);
      }
      return detail::certify_lcp(inst, std::move(lambda), tol, LCPStatus::kSolved);
    }
    driving = (leaving_var < n) ? n + leaving_var : leaving_var - n;
  }

  VecX<T> lambda = VecX<T>::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (basis[i] >= n && basis[i] < 2 * n) lambda(basis[i] - n) = tab(i, col_rhs);
  }
  return detail::certify_lcp(inst, std::move(lambda), tol, LCPStatus::kIterationLimit);
}

// Brute-force oracle: try every active set S (lambda_i free for i in S,
// y_i = 0 for i in S), ascending by bitmask, and return the first feasible
// mode. Exponential in m; guarded to m <= 16.
template <typename T>
LCPSolution<T> lcp_solve_enumerate(const LCPInstance<T>& inst, T tol = T(1e-7)) {
  inst.validate();
  if (!(tol > T(0))) throw std::invalid_argument("lcp_solve_enumerate: tol must be > 0");
  const int n = static_cast<int>(inst.size());
  if (n > 16)
    throw std::invalid_argument("lcp_solve_enumerate: problem size exceeds 16");

  std::vector<int> active;
  active.reserve(n);
  for (std::uint32_t mask = 0; mask < (std::uint32_t(1) << n); ++mask) {
    active.clear();
    for (int i = 0; i < n; ++i) {
      if (mask & (std::uint32_t(1) << i)) active.push_back(i);
    }
    const int na = static_cast<int>(active.size());
    VecX<T> lambda = VecX<T>::Zero(n);
    if (na > 0) {
      MatX<T> Fss(na, na);
      VecX<T> qs(na);
      for (int a = 0; a < na; ++a) {
        qs(a) = inst.q(active[a]);
        for (int b = 0; b < na; ++b) Fss(a, b) = inst.F(active[a], active[b]);
      }
      Eigen::FullPivLU<MatX<T>> lu(Fss);
      const VecX<T> ls = lu.solve(-qs);
      if (!ls.allFinite()) continue;
      if ((Fss * ls + qs).template lpNorm<Eigen::Infinity>() > tol) continue;
      for (int a = 0; a < na; ++a) lambda(active[a]) = ls(a);
    }
    auto [comp, feas] = lcp_residual(inst, lambda);
    if (comp <= tol && feas <= tol) {
      return detail::certify_lcp(inst, std::move(lambda), tol, LCPStatus::kSolved);
    }
  }
  return detail::certify_lcp(inst, VecX<T>(VecX<T>::Zero(n)), tol,
                             LCPStatus::kInfeasible);
}

}  // namespace c3
