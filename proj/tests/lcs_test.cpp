#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "c3/contact_model.hpp"
#include "c3/lcs.hpp"
#include "c3/lcs_io.hpp"

using namespace c3;

namespace {

// n_x = 1, n_lambda = 1 block that drifts down by 1 and is pushed back by a
// unilateral force: A=1, B=0, D=1, d=-1, E=1, F=1, H=0, c=0.
LCS<double> scalar_block() {
  LCSStage<double> s;
  s.A = MatXd::Constant(1, 1, 1.0);
  s.B = MatXd::Zero(1, 1);
  s.D = MatXd::Constant(1, 1, 1.0);
  s.d = VecXd::Constant(1, -1.0);
  s.E = MatXd::Constant(1, 1, 1.0);
  s.F = MatXd::Constant(1, 1, 1.0);
  s.H = MatXd::Zero(1, 1);
  s.c = VecXd::Zero(1);
  return make_time_invariant_lcs(std::move(s), 0.1);
}

// 1-DOF point mass of unit mass above rigid ground, frictionless (mu = 0),
// gravity g; used as the hand-derived linearization oracle.
MultiContactModel<double> point_mass_model(double g) {
  MultiContactModel<double> m;
  m.n_q = m.n_v = 1;
  m.n_u = 1;
  m.n_c = 1;
  m.n_e = 2;
  m.mass = [](const VecXd&) { return MatXd::Identity(1, 1); };
  m.bias = [g](const VecXd&, const VecXd&) { return VecXd::Constant(1, g); };
  m.input_map = [](const VecXd&) { return MatXd::Identity(1, 1); };
  m.normal_jacobian = [](const VecXd&) { return MatXd::Identity(1, 1); };
  m.tangent_jacobian = [](const VecXd&) { return MatXd::Zero(2, 1); };
  m.gap = [](const VecXd& q) { return q; };
  m.mu = VecXd::Zero(1);
  m.contacts = {ContactSpec{}};
  return m;
}

// Smooth 2-DOF model with configuration-dependent mass matrix, bias and
// input map; one frictional contact.
MultiContactModel<double> smooth_two_dof_model() {
  MultiContactModel<double> m;
  m.n_q = m.n_v = 2;
  m.n_u = 1;
  m.n_c = 1;
  m.n_e = 2;
  m.mass = [](const VecXd& q) {
    MatXd M(2, 2);
    const double off = 0.2 + 0.05 * std::sin(q(0));
    M << 2.0 + 0.1 * std::cos(q(0)), off, off, 1.5;
    return M;
  };
  m.bias = [](const VecXd& q, const VecXd& v) {
    VecXd c(2);
    c << 0.3 * v(0) * v(1) + 0.981 * std::sin(q(1)),
        0.2 * v(1) * v(1) + 0.4905 * q(0);
    return c;
  };
  m.input_map = [](const VecXd& q) {
    MatXd B(2, 1);
    B << 1.0, 0.5 + 0.1 * q(0);
    return B;
  };
  m.normal_jacobian = [](const VecXd&) {
    MatXd J(1, 2);
    J << 0.7, 0.25;
    return J;
  };
  m.tangent_jacobian = [](const VecXd&) {
    MatXd J(2, 2);
    J << 0.5, 1.0, -0.5, -1.0;
    return J;
  };
  m.gap = [](const VecXd& q) { return VecXd::Constant(1, q(0) + 0.3); };
  m.mu = VecXd::Constant(1, 0.6);
  m.contacts = {ContactSpec{}};
  return m;
}

}  // namespace

TEST_CASE("lcs_step: identity dynamics with inactive contact") {
  LCSStage<double> s;
  s.A = MatXd::Identity(2, 2);
  s.B = MatXd::Zero(2, 1);
  s.D = MatXd::Zero(2, 1);
  s.d = VecXd::Zero(2);
  s.E = MatXd::Zero(1, 2);
  s.F = MatXd::Identity(1, 1);
  s.H = MatXd::Zero(1, 1);
  s.c = VecXd::Constant(1, 0.5);
  auto lcs = make_time_invariant_lcs(std::move(s), 0.01);
  VecXd x(2);
  x << 0.3, -0.7;
  auto step = lcs_step(lcs, x, VecXd(VecXd::Zero(1)));
  REQUIRE(step.ok());
  CHECK(step.lambda.isZero(0));
  CHECK((step.x_next - x).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("lcs_step: scalar block, hand-evaluated branches") {
  auto lcs = scalar_block();
  {
    auto step = lcs_step(lcs, VecXd(VecXd::Zero(1)), VecXd(VecXd::Zero(1)));
    REQUIRE(step.ok());
    CHECK(step.lambda(0) == 0.0);
    CHECK(step.x_next(0) == doctest::Approx(-1.0));
  }
  {
    auto step = lcs_step(lcs, VecXd(VecXd::Constant(1, -2.0)), VecXd(VecXd::Zero(1)));
    REQUIRE(step.ok());
    CHECK(step.lambda(0) == doctest::Approx(2.0));
    CHECK(step.x_next(0) == doctest::Approx(-1.0));
  }
}

TEST_CASE("lcs_rollout: T=1 reduces to lcs_step, identity stays constant") {
  auto lcs = scalar_block();
  std::vector<VecXd> u1{VecXd::Zero(1)};
  auto roll = lcs_rollout(lcs, VecXd(VecXd::Constant(1, -2.0)), u1);
  REQUIRE(roll.ok);
  auto step = lcs_step(lcs, VecXd(VecXd::Constant(1, -2.0)), VecXd(VecXd::Zero(1)));
  CHECK(roll.trajectory.states[1] == step.x_next);
  CHECK(roll.trajectory.forces[0] == step.lambda);

  LCSStage<double> s;
  s.A = MatXd::Identity(3, 3);
  s.B = MatXd::Zero(3, 1);
  s.D = MatXd::Zero(3, 2);
  s.d = VecXd::Zero(3);
  s.E = MatXd::Zero(2, 3);
  s.F = MatXd::Identity(2, 2);
  s.H = MatXd::Zero(2, 1);
  s.c = VecXd::Ones(2);
  auto ident = make_time_invariant_lcs(std::move(s), 0.01);
  VecXd x0(3);
  x0 << 1.0, 2.0, 3.0;
  std::vector<VecXd> u5(5, VecXd::Zero(1));
  auto c = lcs_rollout(ident, x0, u5);
  REQUIRE(c.ok);
  for (const auto& x : c.trajectory.states) CHECK(x == x0);
  c.trajectory.validate();
}

TEST_CASE("rollout determinism is bitwise") {
  auto lcs = scalar_block();
  std::vector<VecXd> u(7, VecXd::Zero(1));
  auto a = lcs_rollout(lcs, VecXd(VecXd::Constant(1, -1.3)), u);
  auto b = lcs_rollout(lcs, VecXd(VecXd::Constant(1, -1.3)), u);
  REQUIRE(a.ok);
  for (std::size_t k = 0; k < a.trajectory.states.size(); ++k)
    CHECK(a.trajectory.states[k] == b.trajectory.states[k]);
}

TEST_CASE("stewart-trinkle: 1-DOF point mass matches hand derivation") {
  const double g = 9.81, h = 0.05;
  auto model = point_mass_model(g);
  VecXd x_star(2), u_star(1);
  x_star << 1.0, 0.0;
  u_star << 0.0;
  auto lcs = linearize_stewart_trinkle(model, x_star, u_star, h);

  REQUIRE(lcs.n_x == 2);
  REQUIRE(lcs.n_u == 1);
  REQUIRE(lcs.n_lambda == 4);  // gamma, lambda_n, two tangential edges
  const auto& s = lcs.stage(0);

  MatXd A(2, 2);
  A << 1.0, h, 0.0, 1.0;
  CHECK((s.A - A).lpNorm<Eigen::Infinity>() < 1e-9);
  MatXd B(2, 1);
  B << h * h, h;
  CHECK((s.B - B).lpNorm<Eigen::Infinity>() < 1e-9);
  MatXd D = MatXd::Zero(2, 4);
  D(0, 1) = h * h;
  D(1, 1) = h;
  CHECK((s.D - D).lpNorm<Eigen::Infinity>() < 1e-9);
  VecXd d(2);
  d << -g * h * h, -g * h;
  CHECK((s.d - d).lpNorm<Eigen::Infinity>() < 1e-9);

  // Row 0 (cone slack, mu = 0): y = -lambda_t+ - lambda_t-.
  CHECK(s.E.row(0).isZero(0));
  CHECK(s.F(0, 2) == doctest::Approx(-1.0));
  CHECK(s.F(0, 3) == doctest::Approx(-1.0));
  CHECK(s.c(0) == 0.0);
  // Row 1 (normal): y = phi(q*) + h * v_next.
  CHECK(s.E(1, 0) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(s.E(1, 1) == doctest::Approx(h).epsilon(1e-9));
  CHECK(s.F(1, 1) == doctest::Approx(h * h).epsilon(1e-9));
  CHECK(s.H(1, 0) == doctest::Approx(h * h).epsilon(1e-9));
  CHECK(s.c(1) == doctest::Approx(1.0 - g * h * h).epsilon(1e-9));
  // Rows 2-3 (tangential, zero tangent jacobian): y = gamma.
  CHECK(s.F(2, 0) == doctest::Approx(1.0));
  CHECK(s.F(3, 0) == doctest::Approx(1.0));
  CHECK(s.E.row(2).isZero(0));
  CHECK(s.c(2) == 0.0);
}

TEST_CASE("stewart-trinkle: emitted rows reconstruct the time-stepping LCP") {
  auto model = smooth_two_dof_model();
  VecXd x_star(4), u_star(1);
  x_star << 0.1, -0.2, 0.3, 0.4;
  u_star << 0.25;
  const double dt = 0.02, fd = 1e-6;
  auto lcs = linearize_stewart_trinkle(model, x_star, u_star, dt, fd);
  const auto& s = lcs.stage(0);

  // Independent reconstruction of the affine v_next map.
  const VecXd q_star = x_star.head(2), v_star = x_star.tail(2);
  const MatXd Minv = model.mass(q_star).inverse();
  auto f = [&](const VecXd& q, const VecXd& v, const VecXd& u) -> VecXd {
    return model.mass(q).inverse() * (model.input_map(q) * u - model.bias(q, v));
  };
  MatXd Jf(2, 5);
  VecXd xi(5);
  xi << q_star, v_star, u_star;
  for (int j = 0; j < 5; ++j) {
    VecXd p = xi, m = xi;
    p(j) += fd;
    m(j) -= fd;
    Jf.col(j) = (f(p.head(2), p.segment(2, 2), p.tail(1)) -
                 f(m.head(2), m.segment(2, 2), m.tail(1))) /
                (2 * fd);
  }
  const VecXd dv = f(q_star, v_star, u_star) - Jf * xi;
  const MatXd Jn = model.normal_jacobian(q_star);
  const MatXd Jt = model.tangent_jacobian(q_star);
  const MatXd D1 = Minv * Jn.transpose();
  const MatXd D2 = Minv * Jt.transpose();

  std::mt19937_64 rng(5150);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    VecXd x(4), u(1), lam(4);
    for (int i = 0; i < 4; ++i) x(i) = unif(rng);
    u(0) = unif(rng);
    for (int i = 0; i < 4; ++i) lam(i) = unif(rng);
    const VecXd gamma = lam.head(1);
    const VecXd lam_n = lam.segment(1, 1);
    const VecXd lam_t = lam.tail(2);

    VecXd xi_k(5);
    xi_k << x, u;
    const VecXd v_next =
        x.tail(2) + dt * (Jf * xi_k + D1 * lam_n + D2 * lam_t + dv);

    VecXd y_direct(4);
    y_direct(0) = model.mu(0) * lam_n(0) - lam_t.sum();
    y_direct(1) = model.gap(q_star)(0) + dt * (Jn * v_next)(0);
    y_direct.tail(2) = VecXd::Constant(2, gamma(0)) + Jt * v_next;

    const VecXd y_lcs = s.E * x + s.F * lam + s.H * u + s.c;
    CHECK((y_direct - y_lcs).lpNorm<Eigen::Infinity>() < 1e-10);

    // The dynamics row must agree with the same expansion.
    const VecXd x_next_direct =
        (VecXd(4) << x.head(2) + dt * v_next, v_next).finished();
    const VecXd x_next_lcs = s.A * x + s.B * u + s.D * lam + s.d;
    CHECK((x_next_direct - x_next_lcs).lpNorm<Eigen::Infinity>() < 1e-10);
  }
}

TEST_CASE("stewart-trinkle: affine dynamics linearize identically everywhere") {
  MultiContactModel<double> m;
  m.n_q = m.n_v = 2;
  m.n_u = 1;
  m.n_c = 1;
  m.n_e = 2;
  MatXd Cq(2, 2), Cv(2, 2);
  Cq << 0.3, -0.1, 0.2, 0.5;
  Cv << 0.05, 0.0, -0.02, 0.1;
  m.mass = [](const VecXd&) {
    MatXd M(2, 2);
    M << 2.0, 0.3, 0.3, 1.2;
    return M;
  };
  m.bias = [Cq, Cv](const VecXd& q, const VecXd& v) -> VecXd {
    return Cq * q + Cv * v + VecXd::Constant(2, 0.7);
  };
  m.input_map = [](const VecXd&) {
    MatXd B(2, 1);
    B << 1.0, -0.5;
    return B;
  };
  m.normal_jacobian = [](const VecXd&) {
    MatXd J(1, 2);
    J << 1.0, 0.0;
    return J;
  };
  m.tangent_jacobian = [](const VecXd&) {
    MatXd J(2, 2);
    J << 0.0, 1.0, 0.0, -1.0;
    return J;
  };
  m.gap = [](const VecXd&) { return VecXd::Constant(1, 0.5); };
  m.mu = VecXd::Constant(1, 0.8);
  m.contacts = {ContactSpec{}};

  VecXd xa(4), xb(4), ua(1), ub(1);
  xa << 0.0, 0.0, 0.0, 0.0;
  xb << 1.3, -0.8, 0.4, 2.0;
  ua << 0.0;
  ub << -1.7;
  auto la = linearize_stewart_trinkle(m, xa, ua, 0.01);
  auto lb = linearize_stewart_trinkle(m, xb, ub, 0.01);
  CHECK((la.stage(0).A - lb.stage(0).A).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((la.stage(0).B - lb.stage(0).B).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((la.stage(0).D - lb.stage(0).D).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((la.stage(0).d - lb.stage(0).d).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((la.stage(0).E - lb.stage(0).E).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((la.stage(0).F - lb.stage(0).F).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((la.stage(0).H - lb.stage(0).H).lpNorm<Eigen::Infinity>() < 1e-8);
  CHECK((la.stage(0).c - lb.stage(0).c).lpNorm<Eigen::Infinity>() < 1e-8);
}

TEST_CASE("stewart-trinkle: zero contact jacobians decouple the contact") {
  auto m = smooth_two_dof_model();
  m.normal_jacobian = [](const VecXd&) { return MatXd::Zero(1, 2); };
  m.tangent_jacobian = [](const VecXd&) { return MatXd::Zero(2, 2); };
  VecXd x_star(4), u_star(1);
  x_star << 0.1, 0.2, -0.1, 0.05;
  u_star << 0.0;
  auto lcs = linearize_stewart_trinkle(m, x_star, u_star, 0.01);
  CHECK(lcs.stage(0).D.isZero(0));
}

TEST_CASE("lcs serialization round-trips") {
  auto model = smooth_two_dof_model();
  VecXd x_star(4), u_star(1);
  x_star << 0.1, -0.2, 0.3, 0.4;
  u_star << 0.25;
  auto lcs = linearize_stewart_trinkle(model, x_star, u_star, 0.02);

  std::stringstream buf;
  write_lcs(buf, lcs);
  auto back = read_lcs(buf);
  CHECK(back.n_x == lcs.n_x);
  CHECK(back.n_u == lcs.n_u);
  CHECK(back.n_lambda == lcs.n_lambda);
  CHECK(back.dt == lcs.dt);
  CHECK((back.stage(0).A - lcs.stage(0).A).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((back.stage(0).F - lcs.stage(0).F).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK((back.stage(0).c - lcs.stage(0).c).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("lcs parser rejects malformed documents") {
  std::stringstream bad("lcs v1\ndims 1 1\n");
  CHECK_THROWS_AS(read_lcs(bad), std::runtime_error);
  std::stringstream worse("not_an_lcs\n");
  CHECK_THROWS_AS(read_lcs(worse), std::runtime_error);
}

TEST_CASE("time-varying stages select per step and clamp") {
  auto base = scalar_block();
  LCS<double> tv = base;
  LCSStage<double> s2 = base.stages[0];
  s2.d = VecXd::Constant(1, +1.0);
  tv.stages.push_back(s2);
  CHECK(tv.time_varying());
  // Step 0 uses drift -1, step 1 and later use drift +1.
  auto r = lcs_rollout(tv, VecXd(VecXd::Constant(1, 5.0)), std::vector<VecXd>(3, VecXd::Zero(1)));
  REQUIRE(r.ok);
  CHECK(r.trajectory.states[1](0) == doctest::Approx(4.0));
  CHECK(r.trajectory.states[2](0) == doctest::Approx(5.0));
  CHECK(r.trajectory.states[3](0) == doctest::Approx(6.0));
}
