#pragma once

// Convex quadratic programs, objective 0.5 z'Pz + r'z. Two paths:
//  - solve_equality_qp: direct KKT solve for equality-constrained problems.
//  - SplittingQP / solve_convex_qp: fixed-penalty over-relaxed operator
//    splitting for two-sided inequality constraints. The iteration schedule
//    is fixed, so results are deterministic. A SplittingQP instance keeps
//    its KKT factorization and warm state across solves whose matrices are
//    unchanged (only bounds / linear term vary).

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "c3/types.hpp"

namespace c3 {

template <typename T>
struct QPProblem {
  MatX<T> P;     // symmetric PSD
  VecX<T> r;
  MatX<T> A_eq;  // may be 0 x n
  VecX<T> b_eq;
  MatX<T> A_in;  // may be 0 x n
  VecX<T> lb, ub;

  Eigen::Index num_vars() const { return P.rows(); }

  void validate() const {
    const Eigen::Index n = P.rows();
    if (P.cols() != n || r.size() != n)
      throw std::invalid_argument("QPProblem: inconsistent P/r dimensions");
    if ((P - P.transpose()).template lpNorm<Eigen::Infinity>() >
        T(1e-8) * std::max<T>(T(1), P.template lpNorm<Eigen::Infinity>()))
      throw std::invalid_argument("QPProblem: P is not symmetric");
    Eigen::SelfAdjointEigenSolver<MatX<T>> es(T(0.5) * (P + P.transpose()),
                                              Eigen::EigenvaluesOnly);
    if (es.eigenvalues().minCoeff() < T(-1e-9))
      throw std::invalid_argument("QPProblem: P is not positive semidefinite");
    if (A_eq.rows() != b_eq.size() || (A_eq.rows() > 0 && A_eq.cols() != n))
      throw std::invalid_argument("QPProblem: bad equality block");
    if (A_in.rows() != lb.size() || A_in.rows() != ub.size() ||
        (A_in.rows() > 0 && A_in.cols() != n))
      throw std::invalid_argument("QPProblem: bad inequality block");
    if (A_in.rows() > 0 && (lb.array() > ub.array()).any())
      throw std::invalid_argument("QPProblem: lb > ub");
  }
};

template <typename T>
struct EqualityQPResult {
  VecX<T> z;
  VecX<T> multipliers;
};

// Direct KKT solve: [P A'; A 0][z; nu] = [-r; b]. Requires the KKT matrix
// to be nonsingular (P positive definite on the nullspace of A).
template <typename T>
EqualityQPResult<T> solve_equality_qp(const QPProblem<T>& p, T tol = T(1e-8)) {
  if (p.A_in.rows() > 0)
    throw std::invalid_argument("solve_equality_qp: inequality rows present");
  const Eigen::Index n = p.num_vars();
  const Eigen::Index m = p.A_eq.rows();

  MatX<T> K = MatX<T>::Zero(n + m, n + m);
  K.topLeftCorner(n, n) = p.P;
  if (m > 0) {
    K.topRightCorner(n, m) = p.A_eq.transpose();
    K.bottomLeftCorner(m, n) = p.A_eq;
  }
  VecX<T> rhs(n + m);
  rhs.head(n) = -p.r;
  if (m > 0) rhs.tail(m) = p.b_eq;

  Eigen::PartialPivLU<MatX<T>> lu(K);
  const VecX<T> sol = lu.solve(rhs);

  EqualityQPResult<T> out;
  out.z = sol.head(n);
  out.multipliers = sol.tail(m);

  const T scale = std::max<T>(T(1), rhs.template lpNorm<Eigen::Infinity>());
  VecX<T> stat = p.P * out.z + p.r;
  if (m > 0) stat += p.A_eq.transpose() * out.multipliers;
  const T stat_res = stat.template lpNorm<Eigen::Infinity>();
  const T prim_res =
      (m > 0) ? (p.A_eq * out.z - p.b_eq).template lpNorm<Eigen::Infinity>() : T(0);
  if (!out.z.allFinite() || stat_res > tol * scale || prim_res > tol * scale)
    throw std::runtime_error("solve_equality_qp: singular or ill-posed KKT system");
  return out;
}

enum class QPStatus : std::uint8_t { kSolved, kMaxIters, kPrimalInfeasible };

template <typename T>
struct QPResult {
  VecX<T> z;
  VecX<T> y;  // multipliers for the stacked constraint rows
  QPStatus status{QPStatus::kMaxIters};
  int iterations{0};
  T prim_res{std::numeric_limits<T>::infinity()};
  T dual_res{std::numeric_limits<T>::infinity()};

  bool solved() const { return status == QPStatus::kSolved; }
};

template <typename T>
struct QPSettings {
  T tol = T(1e-6);
  int max_iter = 4000;
  T rho = T(0.1);          // penalty for inequality rows
  T eq_rho_scale = T(1e3); // penalty boost for rows declared as equalities
  T sigma = T(1e-6);
  T alpha = T(1.6);        // over-relaxation
  T inf_tol = T(1e-6);     // infeasibility certificate tolerance
  int check_every = 10;
};

// Operator-splitting solver for min 0.5 z'Pz + r'z s.t. l <= Cz <= u.
// The KKT factorization is computed once at construction; solve() may be
// called repeatedly with new (r, l, u). Not shareable across threads.
template <typename T>
class SplittingQP {
 public:
  SplittingQP(MatX<T> P, MatX<T> C, std::vector<bool> row_is_eq,
              QPSettings<T> settings = {})
      : P_(std::move(P)), C_(std::move(C)), settings_(settings) {
    n_ = static_cast<int>(P_.rows());
    m_ = static_cast<int>(C_.rows());
    if (P_.cols() != n_) throw std::invalid_argument("SplittingQP: P not square");
    if (m_ > 0 && C_.cols() != n_)
      throw std::invalid_argument("SplittingQP: C column mismatch");
    if (static_cast<int>(row_is_eq.size()) != m_)
      throw std::invalid_argument("SplittingQP: row_is_eq size mismatch");
    rho_.resize(m_);
    for (int i = 0; i < m_; ++i)
      rho_(i) = settings_.rho * (row_is_eq[i] ? settings_.eq_rho_scale : T(1));

    MatX<T> K = MatX<T>::Zero(n_ + m_, n_ + m_);
    K.topLeftCorner(n_, n_) = P_ + settings_.sigma * MatX<T>::Identity(n_, n_);
    if (m_ > 0) {
      K.topRightCorner(n_, m_) = C_.transpose();
      K.bottomLeftCorner(m_, n_) = C_;
      K.bottomRightCorner(m_, m_) = (-rho_.cwiseInverse()).asDiagonal();
    }
    kkt_.compute(K);
    reset();
  }

  void reset() {
    x_ = VecX<T>::Zero(n_);
    zt_ = VecX<T>::Zero(m_);
    y_ = VecX<T>::Zero(m_);
  }

  // Swap in a new Hessian of the same size (refactors the KKT system); the
  // warm iterates are kept.
  void update_P(MatX<T> P) {
    if (P.rows() != n_ || P.cols() != n_)
      throw std::invalid_argument("SplittingQP::update_P: size mismatch");
    P_ = std::move(P);
    MatX<T> K = MatX<T>::Zero(n_ + m_, n_ + m_);
    K.topLeftCorner(n_, n_) = P_ + settings_.sigma * MatX<T>::Identity(n_, n_);
    if (m_ > 0) {
      K.topRightCorner(n_, m_) = C_.transpose();
      K.bottomLeftCorner(m_, n_) = C_;
      K.bottomRightCorner(m_, m_) = (-rho_.cwiseInverse()).asDiagonal();
    }
    kkt_.compute(K);
  }

  void set_warm(const VecX<T>& x, const VecX<T>& y) {
    x_ = x;
    y_ = y;
    zt_ = (m_ > 0) ? VecX<T>(C_ * x_) : VecX<T>();
  }

  const MatX<T>& P() const { return P_; }
  const MatX<T>& C() const { return C_; }

  QPResult<T> solve(const VecX<T>& r, const VecX<T>& l, const VecX<T>& u) {
    if (r.size() != n_) throw std::invalid_argument("SplittingQP: r size mismatch");
    if (l.size() != m_ || u.size() != m_)
      throw std::invalid_argument("SplittingQP: bound size mismatch");

    QPResult<T> out;
    if (m_ == 0) {
      // Unconstrained: one regularized Newton solve suffices (P PSD).
      VecX<T> rhs(n_);
      rhs = -r;
      Eigen::PartialPivLU<MatX<T>> lu(P_ + settings_.sigma * MatX<T>::Identity(n_, n_));
      out.z = lu.solve(rhs);
      // Polish with one refinement step against the unregularized system.
      out.z -= lu.solve((P_ * out.z + r).eval());
      out.y = VecX<T>();
      out.prim_res = T(0);
      out.dual_res = (P_ * out.z + r).template lpNorm<Eigen::Infinity>();
      out.status = out.dual_res <= settings_.tol ? QPStatus::kSolved : QPStatus::kMaxIters;
      out.iterations = 1;
      x_ = out.z;
      return out;
    }

    zt_ = zt_.cwiseMax(l).cwiseMin(u);
    VecX<T> rhs(n_ + m_), xt(n_), nu(m_), ztil(m_), z_acc(m_), dy(m_);
    const T alpha = settings_.alpha;

    for (int k = 1; k <= settings_.max_iter; ++k) {
      rhs.head(n_) = settings_.sigma * x_ - r;
      rhs.tail(m_) = zt_ - y_.cwiseQuotient(rho_);
      const VecX<T> sol = kkt_.solve(rhs);
      xt = sol.head(n_);
      nu = sol.tail(m_);
      ztil = zt_ + (nu - y_).cwiseQuotient(rho_);

      x_ = alpha * xt + (T(1) - alpha) * x_;
      z_acc = alpha * ztil + (T(1) - alpha) * zt_;
      const VecX<T> z_prev = zt_;
      zt_ = (z_acc + y_.cwiseQuotient(rho_)).cwiseMax(l).cwiseMin(u);
      dy = rho_.cwiseProduct(z_acc - zt_);
      y_ += dy;

      if (k % settings_.check_every == 0 || k == settings_.max_iter) {
        const VecX<T> Cx = C_ * x_;
        const T prim = (Cx - zt_).template lpNorm<Eigen::Infinity>();
        const T dual = (P_ * x_ + r + C_.transpose() * y_)
                           .template lpNorm<Eigen::Infinity>();
        const T prim_ref = std::max<T>(
            T(1), std::max(Cx.template lpNorm<Eigen::Infinity>(),
                           zt_.template lpNorm<Eigen::Infinity>()));
        const T dual_ref = std::max<T>(
            T(1), std::max((P_ * x_).template lpNorm<Eigen::Infinity>(),
                           r.template lpNorm<Eigen::Infinity>()));
        if (prim <= settings_.tol * prim_ref && dual <= settings_.tol * dual_ref) {
          out.status = QPStatus::kSolved;
          out.iterations = k;
          out.prim_res = prim;
          out.dual_res = dual;
          out.z = x_;
          out.y = y_;
          return out;
        }
        if (primal_infeasibility_certificate(dy, l, u)) {
          out.status = QPStatus::kPrimalInfeasible;
          out.iterations = k;
          out.prim_res = prim;
          out.dual_res = dual;
          out.z = x_;
          out.y = y_;
          return out;
        }
      }
    }
    const VecX<T> Cx = C_ * x_;
    out.status = QPStatus::kMaxIters;
    out.iterations = settings_.max_iter;
    out.prim_res = (Cx - zt_).template lpNorm<Eigen::Infinity>();
    out.dual_res =
        (P_ * x_ + r + C_.transpose() * y_).template lpNorm<Eigen::Infinity>();
    out.z = x_;
    out.y = y_;
    return out;
  }

 private:
  bool primal_infeasibility_certificate(const VecX<T>& dy, const VecX<T>& l,
                                        const VecX<T>& u) const {
    const T dy_norm = dy.template lpNorm<Eigen::Infinity>();
    if (dy_norm <= T(0)) return false;
    const T eps = settings_.inf_tol * dy_norm;
    if ((C_.transpose() * dy).template lpNorm<Eigen::Infinity>() > eps) return false;
    T support = T(0);
    for (int i = 0; i < m_; ++i) {
      if (dy(i) > T(0)) {
        if (!std::isfinite(u(i))) return false;
        support += u(i) * dy(i);
      } else if (dy(i) < T(0)) {
        if (!std::isfinite(l(i))) return false;
        support += l(i) * dy(i);
      }
    }
    return support < -eps;
  }

  MatX<T> P_, C_;
  VecX<T> rho_;
  QPSettings<T> settings_;
  Eigen::PartialPivLU<MatX<T>> kkt_;
  VecX<T> x_, zt_, y_;
  int n_{0}, m_{0};
};

// One-shot convenience wrapper over SplittingQP for a full QPProblem.
template <typename T>
QPResult<T> solve_convex_qp(const QPProblem<T>& p, T tol = T(1e-6),
                            int max_iters = 4000) {
  p.validate();
  const Eigen::Index n = p.num_vars();
  const Eigen::Index meq = p.A_eq.rows();
  const Eigen::Index min = p.A_in.rows();

  if (meq + min == 0) {
    QPProblem<T> eq = p;
    auto res = solve_equality_qp(eq, T(1e-8));
    QPResult<T> out;
    out.z = res.z;
    out.y = VecX<T>();
    out.status = QPStatus::kSolved;
    out.iterations = 1;
    out.prim_res = T(0);
    out.dual_res = (p.P * out.z + p.r).template lpNorm<Eigen::Infinity>();
    return out;
  }

  MatX<T> C(meq + min, n);
  VecX<T> l(meq + min), u(meq + min);
  std::vector<bool> is_eq(meq + min, false);
  if (meq > 0) {
    C.topRows(meq) = p.A_eq;
    l.head(meq) = p.b_eq;
    u.head(meq) = p.b_eq;
    for (Eigen::Index i = 0; i < meq; ++i) is_eq[i] = true;
  }
  if (min > 0) {
    C.bottomRows(min) = p.A_in;
    l.tail(min) = p.lb;
    u.tail(min) = p.ub;
  }
  QPSettings<T> settings;
  settings.tol = tol;
  settings.max_iter = max_iters;
  SplittingQP<T> solver(p.P, std::move(C), std::move(is_eq), settings);
  return solver.solve(p.r, l, u);
}

}  // namespace c3
