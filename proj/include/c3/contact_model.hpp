#pragma once

// Analytic multi-contact models in manipulator-equation form
//   M(q) vdot + C(q,v) = B(q) u + Jn' lambda_n + Jt' lambda_t
// together with a semi-implicit time-stepping linearization that produces an
// LCS about a given state/input. Complementarity variables are stacked
// as (gamma, lambda_n, lambda_t): one friction-cone slack per contact, one
// normal force per contact that owns one, and n_e tangential forces per
// contact for the polyhedral cone edges.
//
// Per-contact normal handling:
//  - kGap: standard unilateral contact; the normal row pairs lambda_n with
//    the predicted gap phi(q*) + dt * Jn(q*) v_next.
//  - kInputTracked: the normal force is commanded through an input channel;
//    lambda_n tracks max(u_j, 0) via the row 0 <= lambda_n _|_ lambda_n - u_j.
//  - kInputDirect: no normal variable at all; the commanded input enters the
//    friction cone bound directly (mu_i u_j) and reaches the dynamics through
//    the input map.

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <vector>

#include "c3/lcs.hpp"
#include "c3/types.hpp"

namespace c3 {

enum class NormalForceMode : std::uint8_t { kGap, kInputTracked, kInputDirect };

struct ContactSpec {
  NormalForceMode mode{NormalForceMode::kGap};
  int normal_input{-1};  // input channel for the Input* modes
};

template <typename T>
struct MultiContactModel {
  int n_q{0}, n_v{0}, n_u{0}, n_c{0}, n_e{2};

  std::function<MatX<T>(const VecX<T>&)> mass;                         // n_v x n_v
  std::function<VecX<T>(const VecX<T>&, const VecX<T>&)> bias;         // C(q, v)
  std::function<MatX<T>(const VecX<T>&)> input_map;                    // n_v x n_u
  std::function<MatX<T>(const VecX<T>&)> normal_jacobian;              // n_c x n_v
  std::function<MatX<T>(const VecX<T>&)> tangent_jacobian;             // n_c*n_e x n_v
  std::function<VecX<T>(const VecX<T>&)> gap;                          // phi: n_c
  VecX<T> mu;                                                          // n_c
  std::vector<ContactSpec> contacts;                                   // n_c entries

  int n_x() const { return n_q + n_v; }

  int num_normal_vars() const {
    int n = 0;
    for (const auto& spec : contacts)
      if (spec.mode != NormalForceMode::kInputDirect) ++n;
    return n;
  }

  int n_lambda() const { return n_c + num_normal_vars() + n_c * n_e; }

  // Column of lambda_n owned by contact i, or -1.
  int normal_var_of_contact(int i) const {
    int idx = 0;
    for (int c = 0; c < i; ++c)
      if (contacts[c].mode != NormalForceMode::kInputDirect) ++idx;
    return contacts[i].mode != NormalForceMode::kInputDirect ? idx : -1;
  }

  void validate() const {
    if (n_q <= 0 || n_v <= 0 || n_u < 0 || n_c < 0 || n_e < 1)
      throw std::invalid_argument("MultiContactModel: bad dimensions");
    if (mu.size() != n_c) throw std::invalid_argument("MultiContactModel: mu size");
    if ((mu.array() < T(0)).any())
      throw std::invalid_argument("MultiContactModel: mu must be nonnegative");
    if (static_cast<int>(contacts.size()) != n_c)
      throw std::invalid_argument("MultiContactModel: contacts size");
    for (const auto& spec : contacts) {
      if (spec.mode != NormalForceMode::kGap &&
          (spec.normal_input < 0 || spec.normal_input >= n_u))
        throw std::invalid_argument("MultiContactModel: bad normal input channel");
    }
    if (!mass || !bias || !input_map || !normal_jacobian || !tangent_jacobian || !gap)
      throw std::invalid_argument("MultiContactModel: missing evaluator");
  }
};

namespace detail {

// f(q, v, u) = M(q)^-1 (B(q) u - C(q, v)); the smooth part of the dynamics.
template <typename T>
VecX<T> smooth_accel(const MultiContactModel<T>& m, const VecX<T>& q,
                     const VecX<T>& v, const VecX<T>& u) {
  const MatX<T> M = m.mass(q);
  const VecX<T> rhs = m.input_map(q) * u - m.bias(q, v);
  Eigen::PartialPivLU<MatX<T>> lu(M);
  VecX<T> f = lu.solve(rhs);
  if (!f.allFinite())
    throw std::runtime_error("linearize_stewart_trinkle: non-finite dynamics evaluation");
  return f;
}

}  // namespace detail

// Semi-implicit time-stepping linearization about (x*, u*): the smooth
// dynamics are replaced by their first-order expansion (central differences,
// step fd_step) while the complementarity structure is kept intact.
template <typename T>
LCS<T> linearize_stewart_trinkle(const MultiContactModel<T>& model,
                                 const VecX<T>& x_star, const VecX<T>& u_star,
                                 T dt, T fd_step = T(1e-6)) {
  model.validate();
  if (model.n_q != model.n_v)
    throw std::invalid_argument(
        "linearize_stewart_trinkle: requires n_q == n_v (planar coordinates)");
  if (x_star.size() != model.n_x() || u_star.size() != model.n_u)
    throw std::invalid_argument("linearize_stewart_trinkle: point dimension mismatch");
  if (!(dt > T(0))) throw std::invalid_argument("linearize_stewart_trinkle: dt <= 0");

  const int nq = model.n_q, nv = model.n_v, nu = model.n_u;
  const int nc = model.n_c, ne = model.n_e;
  const int n_lam = model.n_lambda();
  const int n_normal = model.num_normal_vars();
  const VecX<T> q_star = x_star.head(nq);
  const VecX<T> v_star = x_star.tail(nv);

  const MatX<T> M = model.mass(q_star);
  Eigen::PartialPivLU<MatX<T>> Mlu(M);
  {
    const MatX<T> I = MatX<T>::Identity(nv, nv);
    if (((M * Mlu.solve(I)) - I).template lpNorm<Eigen::Infinity>() > T(1e-6))
      throw std::runtime_error("linearize_stewart_trinkle: singular mass matrix");
  }

  // Jacobian of the smooth acceleration w.r.t. (q, v, u), central differences.
  const int n_xi = nq + nv + nu;
  MatX<T> Jf(nv, n_xi);
  VecX<T> xi(n_xi);
  xi << q_star, v_star, u_star;
  for (int j = 0; j < n_xi; ++j) {
    VecX<T> xp = xi, xm = xi;
    xp(j) += fd_step;
    xm(j) -= fd_step;
    const VecX<T> fp = detail::smooth_accel<T>(model, xp.head(nq), xp.segment(nq, nv),
                                               xp.tail(nu));
    const VecX<T> fm = detail::smooth_accel<T>(model, xm.head(nq), xm.segment(nq, nv),
                                               xm.tail(nu));
    Jf.col(j) = (fp - fm) / (T(2) * fd_step);
  }
  const VecX<T> f_star = detail::smooth_accel(model, q_star, v_star, u_star);
  const VecX<T> d_v = f_star - Jf * xi;

  const MatX<T> Jn = model.normal_jacobian(q_star);
  const MatX<T> Jt = model.tangent_jacobian(q_star);
  const VecX<T> phi = model.gap(q_star);
  if (Jn.rows() != nc || Jn.cols() != nv || Jt.rows() != nc * ne || Jt.cols() != nv ||
      phi.size() != nc)
    throw std::invalid_argument("linearize_stewart_trinkle: evaluator dimension mismatch");
  if (!Jn.allFinite() || !Jt.allFinite() || !phi.allFinite())
    throw std::runtime_error("linearize_stewart_trinkle: non-finite evaluator output");

  // Force-to-acceleration maps. Normal columns exist only for contacts that
  // own a normal variable.
  MatX<T> D1 = MatX<T>::Zero(nv, n_normal);
  for (int i = 0; i < nc; ++i) {
    const int col = model.normal_var_of_contact(i);
    if (col >= 0) D1.col(col) = Mlu.solve(Jn.row(i).transpose());
  }
  const MatX<T> D2 = Mlu.solve(Jt.transpose());

  const MatX<T> Jq = Jf.leftCols(nq);
  const MatX<T> Jv = Jf.middleCols(nq, nv);
  const MatX<T> Ju = Jf.rightCols(nu);
  const MatX<T> Iq = MatX<T>::Identity(nq, nq);
  const MatX<T> Iv = MatX<T>::Identity(nv, nv);

  LCSStage<T> s;
  s.A.resize(nq + nv, nq + nv);
  s.A << Iq + dt * dt * Jq, dt * Iv + dt * dt * Jv, dt * Jq, Iv + dt * Jv;
  s.B.resize(nq + nv, nu);
  s.B << dt * dt * Ju, dt * Ju;
  s.D = MatX<T>::Zero(nq + nv, n_lam);
  s.D.block(0, nc, nq, n_normal) = dt * dt * D1;
  s.D.block(nq, nc, nv, n_normal) = dt * D1;
  s.D.block(0, nc + n_normal, nq, nc * ne) = dt * dt * D2;
  s.D.block(nq, nc + n_normal, nv, nc * ne) = dt * D2;
  s.d.resize(nq + nv);
  s.d << dt * dt * d_v, dt * d_v;

  // v_next as an affine function of (q, v, u, lambda_n, lambda_t).
  const MatX<T> Gq = dt * Jq;
  const MatX<T> Gv = Iv + dt * Jv;
  const MatX<T> Gu = dt * Ju;
  const MatX<T> GlamN = dt * D1;
  const MatX<T> GlamT = dt * D2;
  const VecX<T> g0 = dt * d_v;

  s.E = MatX<T>::Zero(n_lam, nq + nv);
  s.F = MatX<T>::Zero(n_lam, n_lam);
  s.H = MatX<T>::Zero(n_lam, nu);
  s.c = VecX<T>::Zero(n_lam);

  for (int i = 0; i < nc; ++i) {
    const int row_gamma = i;
    const int nvar = model.normal_var_of_contact(i);
    // Cone slack row: 0 <= gamma _|_ mu * (normal) - sum(lambda_t) >= 0.
    if (model.contacts[i].mode == NormalForceMode::kInputDirect) {
      s.H(row_gamma, model.contacts[i].normal_input) = model.mu(i);
    } else {
      s.F(row_gamma, nc + nvar) = model.mu(i);
    }
    for (int e = 0; e < ne; ++e) s.F(row_gamma, nc + n_normal + i * ne + e) = T(-1);

    if (nvar >= 0) {
      const int row_n = nc + nvar;
      if (model.contacts[i].mode == NormalForceMode::kInputTracked) {
        s.F(row_n, row_n) = T(1);
        s.H(row_n, model.contacts[i].normal_input) = T(-1);
      } else {
        const RowX<T> jn = Jn.row(i);
        s.E.block(row_n, 0, 1, nq) = dt * jn * Gq;
        s.E.block(row_n, nq, 1, nv) = dt * jn * Gv;
        s.F.block(row_n, nc, 1, n_normal) = dt * jn * GlamN;
        s.F.block(row_n, nc + n_normal, 1, nc * ne) = dt * jn * GlamT;
        s.H.row(row_n) = dt * jn * Gu;
        s.c(row_n) = phi(i) + dt * jn.dot(g0);
      }
    }

    for (int e = 0; e < ne; ++e) {
      const int row_t = nc + n_normal + i * ne + e;
      const RowX<T> jt = Jt.row(i * ne + e);
      s.F(row_t, row_gamma) = T(1);  // E_t' gamma
      s.E.block(row_t, 0, 1, nq) = jt * Gq;
      s.E.block(row_t, nq, 1, nv) = jt * Gv;
      s.F.block(row_t, nc, 1, n_normal) += jt * GlamN;
      s.F.block(row_t, nc + n_normal, 1, nc * ne) += jt * GlamT;
      s.H.row(row_t) = jt * Gu;
      s.c(row_t) = jt.dot(g0);
    }
  }

  return make_time_invariant_lcs(std::move(s), dt);
}

}  // namespace c3
