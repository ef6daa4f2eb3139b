#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "c3/qp.hpp"

using namespace c3;

namespace {

QPProblem<double> unconstrained(const MatXd& P, const VecXd& r) {
  QPProblem<double> p;
  p.P = P;
  p.r = r;
  p.A_eq.resize(0, P.rows());
  p.b_eq.resize(0);
  p.A_in.resize(0, P.rows());
  p.lb.resize(0);
  p.ub.resize(0);
  return p;
}

double objective(const QPProblem<double>& p, const VecXd& z) {
  return 0.5 * z.dot(p.P * z) + p.r.dot(z);
}

}  // namespace

TEST_CASE("equality QP: min ||z||^2 unconstrained is zero") {
  auto p = unconstrained(2.0 * MatXd::Identity(3, 3), VecXd::Zero(3));
  auto res = solve_equality_qp(p);
  CHECK(res.z.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("equality QP: pinned scalar with hand KKT multiplier") {
  // min (z-1)^2 s.t. z = 3. KKT: P z + r + A' nu = 0 with P = 2, r = -2
  // gives nu = -(2*3 - 2) = -4.
  QPProblem<double> p;
  p.P = MatXd::Constant(1, 1, 2.0);
  p.r = VecXd::Constant(1, -2.0);
  p.A_eq = MatXd::Constant(1, 1, 1.0);
  p.b_eq = VecXd::Constant(1, 3.0);
  p.A_in.resize(0, 1);
  p.lb.resize(0);
  p.ub.resize(0);
  auto res = solve_equality_qp(p);
  CHECK(res.z(0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(res.multipliers(0) == doctest::Approx(-4.0).epsilon(1e-12));
}

TEST_CASE("equality QP: random strictly convex problems satisfy residual contract") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 6, m = 3;
    MatXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = gauss(rng);
    QPProblem<double> p;
    p.P = M.transpose() * M + 0.5 * MatXd::Identity(n, n);
    p.r = VecXd::NullaryExpr(n, [&](Eigen::Index) { return gauss(rng); });
    p.A_eq = MatXd::NullaryExpr(m, n, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
    p.b_eq = VecXd::NullaryExpr(m, [&](Eigen::Index) { return gauss(rng); });
    p.A_in.resize(0, n);
    p.lb.resize(0);
    p.ub.resize(0);
    auto res = solve_equality_qp(p);
    const VecXd stat = p.P * res.z + p.r + p.A_eq.transpose() * res.multipliers;
    CHECK(stat.lpNorm<Eigen::Infinity>() < 1e-8);
    CHECK((p.A_eq * res.z - p.b_eq).lpNorm<Eigen::Infinity>() < 1e-8);
  }
}

TEST_CASE("equality QP: singular KKT throws") {
  QPProblem<double> p;
  p.P = MatXd::Zero(1, 1);  // no curvature, no constraints: unbounded
  p.r = VecXd::Constant(1, 1.0);
  p.A_eq.resize(0, 1);
  p.b_eq.resize(0);
  p.A_in.resize(0, 1);
  p.lb.resize(0);
  p.ub.resize(0);
  CHECK_THROWS_AS(solve_equality_qp(p), std::runtime_error);
}

TEST_CASE("convex QP: clamped scalar") {
  // min (z-2)^2 s.t. 0 <= z <= 1 -> z = 1.
  QPProblem<double> p;
  p.P = MatXd::Constant(1, 1, 2.0);
  p.r = VecXd::Constant(1, -4.0);
  p.A_eq.resize(0, 1);
  p.b_eq.resize(0);
  p.A_in = MatXd::Identity(1, 1);
  p.lb = VecXd::Constant(1, 0.0);
  p.ub = VecXd::Constant(1, 1.0);
  auto res = solve_convex_qp(p);
  REQUIRE(res.solved());
  CHECK(res.z(0) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("convex QP: separable clamp") {
  // min ||z - [3, -3]||^2 with -1 <= z_i <= 1 -> z = [1, -1].
  QPProblem<double> p;
  p.P = 2.0 * MatXd::Identity(2, 2);
  p.r = VecXd(2);
  p.r << -6.0, 6.0;
  p.A_eq.resize(0, 2);
  p.b_eq.resize(0);
  p.A_in = MatXd::Identity(2, 2);
  p.lb = VecXd::Constant(2, -1.0);
  p.ub = VecXd::Constant(2, 1.0);
  auto res = solve_convex_qp(p);
  REQUIRE(res.solved());
  CHECK(res.z(0) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(res.z(1) == doctest::Approx(-1.0).epsilon(1e-5));
}

TEST_CASE("convex QP: equality and inequality paths agree without inequalities") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 5, m = 2;
    MatXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = gauss(rng);
    QPProblem<double> p;
    p.P = M.transpose() * M + MatXd::Identity(n, n);
    p.r = VecXd::NullaryExpr(n, [&](Eigen::Index) { return gauss(rng); });
    p.A_eq = MatXd::NullaryExpr(m, n, [&](Eigen::Index, Eigen::Index) { return gauss(rng); });
    p.b_eq = VecXd::NullaryExpr(m, [&](Eigen::Index) { return gauss(rng); });
    p.A_in.resize(0, n);
    p.lb.resize(0);
    p.ub.resize(0);

    auto eq = solve_equality_qp(p);

    // Feed the same equalities through the splitting path as l = u rows.
    QPProblem<double> q = p;
    q.A_in = p.A_eq;
    q.lb = p.b_eq;
    q.ub = p.b_eq;
    q.A_eq.resize(0, n);
    q.b_eq.resize(0);
    auto in = solve_convex_qp(q, 1e-9, 20000);
    REQUIRE(in.solved());
    CHECK((eq.z - in.z).lpNorm<Eigen::Infinity>() < 1e-7);
  }
}

TEST_CASE("convex QP: optimality against random feasible samples") {
  std::mt19937_64 rng(2718);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 4;
    MatXd M(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M(i, j) = gauss(rng);
    QPProblem<double> p;
    p.P = M.transpose() * M + 0.1 * MatXd::Identity(n, n);
    p.r = VecXd::NullaryExpr(n, [&](Eigen::Index) { return gauss(rng); });
    p.A_eq.resize(0, n);
    p.b_eq.resize(0);
    p.A_in = MatXd::Identity(n, n);
    p.lb = VecXd::Constant(n, -1.0);
    p.ub = VecXd::Constant(n, 1.0);
    auto res = solve_convex_qp(p);
    REQUIRE(res.solved());
    const double opt = objective(p, res.z);
    for (int s = 0; s < 50; ++s) {
      VecXd sample = VecXd::NullaryExpr(n, [&](Eigen::Index) { return unif(rng); });
      CHECK(opt <= objective(p, sample) + 1e-6);
    }
  }
}

TEST_CASE("convex QP: detects primal infeasibility") {
  // z >= 1 and z <= -1 simultaneously.
  QPProblem<double> p;
  p.P = 2.0 * MatXd::Identity(1, 1);
  p.r = VecXd::Zero(1);
  p.A_eq.resize(0, 1);
  p.b_eq.resize(0);
  p.A_in = MatXd::Ones(2, 1);
  p.lb = VecXd(2);
  p.ub = VecXd(2);
  p.lb << 1.0, -3.0;
  p.ub << 2.0, -1.0;
  auto res = solve_convex_qp(p);
  CHECK(res.status == QPStatus::kPrimalInfeasible);
}

TEST_CASE("convex QP: PSD-only objective still converges") {
  // Curvature only on the first coordinate; the second is pinned by bounds.
  QPProblem<double> p;
  p.P = MatXd::Zero(2, 2);
  p.P(0, 0) = 2.0;
  p.r = VecXd(2);
  p.r << -2.0, 1.0;
  p.A_eq.resize(0, 2);
  p.b_eq.resize(0);
  p.A_in = MatXd::Identity(2, 2);
  p.lb = VecXd::Constant(2, 0.0);
  p.ub = VecXd::Constant(2, 2.0);
  auto res = solve_convex_qp(p);
  REQUIRE(res.solved());
  CHECK(res.z(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.z(1) == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("QPProblem validation rejects malformed data") {
  QPProblem<double> p;
  p.P = MatXd::Identity(2, 2);
  p.P(0, 1) = 0.5;  // asymmetric
  p.r = VecXd::Zero(2);
  p.A_eq.resize(0, 2);
  p.b_eq.resize(0);
  p.A_in.resize(0, 2);
  p.lb.resize(0);
  p.ub.resize(0);
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
