#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "c3/lcp.hpp"

using namespace c3;

namespace {

LCPInstance<double> make(std::initializer_list<double> q,
                         std::initializer_list<std::initializer_list<double>> F) {
  const int m = static_cast<int>(q.size());
  VecXd qv(m);
  int i = 0;
  for (double v : q) qv(i++) = v;
  MatXd Fm(m, m);
  i = 0;
  for (auto& row : F) {
    int j = 0;
    for (double v : row) Fm(i, j++) = v;
    ++i;
  }
  return LCPInstance<double>(qv, Fm);
}

// Strictly diagonally dominant with positive diagonal: a P-matrix, so the
// LCP has a unique solution for every q.
LCPInstance<double> random_p_matrix_instance(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> off(-1.0, 1.0);
  std::uniform_real_distribution<double> slack(0.5, 1.5);
  std::uniform_real_distribution<double> qd(-2.0, 2.0);
  MatXd F(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) F(i, j) = (i == j) ? 0.0 : off(rng);
  for (int i = 0; i < m; ++i) F(i, i) = F.row(i).cwiseAbs().sum() + slack(rng);
  VecXd q(m);
  for (int i = 0; i < m; ++i) q(i) = qd(rng);
  return LCPInstance<double>(q, F);
}

}  // namespace

TEST_CASE("lemke: nonnegative q forces lambda = 0") {
  auto inst = make({1.0, 2.0}, {{1.0, 0.0}, {0.0, 1.0}});
  auto sol = lcp_solve_lemke(inst);
  REQUIRE(sol.solved());
  CHECK(sol.lambda.isZero(0));
  CHECK(sol.y(0) == doctest::Approx(1.0));
  CHECK(sol.y(1) == doctest::Approx(2.0));
}

TEST_CASE("lemke: scalar active branch") {
  // Enumerating both modes of q=[-1], F=[2]: lambda=0 gives y=-1 < 0, so the
  // active branch 2*lambda - 1 = 0 is the unique solution.
  auto inst = make({-1.0}, {{2.0}});
  auto sol = lcp_solve_lemke(inst);
  REQUIRE(sol.solved());
  CHECK(sol.lambda(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(sol.y(0) == doctest::Approx(0.0));
}

TEST_CASE("lemke: 2x2 fully active set") {
  // All 4 index sets enumerated by hand: only the fully-active mode is
  // feasible; solving the 2x2 system gives lambda = (1/3, 1/3).
  auto inst = make({-1.0, -1.0}, {{2.0, 1.0}, {1.0, 2.0}});
  auto sol = lcp_solve_lemke(inst);
  REQUIRE(sol.solved());
  CHECK(sol.lambda(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sol.lambda(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sol.y.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("enumerate: trivial and scalar cases") {
  auto inactive = lcp_solve_enumerate(make({1.0}, {{1.0}}));
  REQUIRE(inactive.solved());
  CHECK(inactive.lambda(0) == 0.0);

  auto active = lcp_solve_enumerate(make({-1.0}, {{2.0}}));
  REQUIRE(active.solved());
  CHECK(active.lambda(0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("enumerate: rejects oversized problems") {
  VecXd q = VecXd::Ones(17);
  MatXd F = MatXd::Identity(17, 17);
  CHECK_THROWS_AS(lcp_solve_enumerate(LCPInstance<double>(q, F)),
                  std::invalid_argument);
}

TEST_CASE("lcp_residual: hand values") {
  auto inst = make({-1.0}, {{2.0}});
  {
    auto [comp, feas] = lcp_residual(inst, VecXd(VecXd::Zero(1)));
    CHECK(comp == 0.0);
    CHECK(feas == doctest::Approx(1.0));
  }
  {
    VecXd one(1);
    one << 1.0;
    auto [comp, feas] = lcp_residual(inst, one);
    CHECK(comp == doctest::Approx(1.0));
    CHECK(feas == 0.0);
  }
  {
    auto zero_inst = make({1.0}, {{1.0}});
    auto [comp, feas] = lcp_residual(zero_inst, VecXd(VecXd::Zero(1)));
    CHECK(comp == 0.0);
    CHECK(feas == 0.0);
  }
  CHECK_THROWS_AS(lcp_residual(inst, VecXd(VecXd::Zero(3))), std::invalid_argument);
}

TEST_CASE("oracle agreement: lemke vs enumeration on random P-matrices") {
  std::mt19937_64 rng(20240311);
  std::uniform_int_distribution<int> msize(1, 8);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = msize(rng);
    auto inst = random_p_matrix_instance(rng, m);
    auto lk = lcp_solve_lemke(inst);
    auto en = lcp_solve_enumerate(inst);
    REQUIRE_MESSAGE(lk.solved(), "lemke failed at trial " << trial);
    REQUIRE_MESSAGE(en.solved(), "enumeration failed at trial " << trial);
    CHECK((lk.lambda - en.lambda).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(lk.comp_residual <= 1e-7);
    CHECK(lk.feas_residual <= 1e-7);
    CHECK(en.comp_residual <= 1e-7);
    CHECK(en.feas_residual <= 1e-7);
  }
}

TEST_CASE("determinism: identical inputs give bitwise identical outputs") {
  std::mt19937_64 rng(7);
  auto inst = random_p_matrix_instance(rng, 6);
  auto a = lcp_solve_lemke(inst);
  auto b = lcp_solve_lemke(inst);
  CHECK(a.status == b.status);
  CHECK(a.lambda == b.lambda);
  CHECK(a.y == b.y);
  CHECK(a.comp_residual == b.comp_residual);

  auto c = lcp_solve_enumerate(inst);
  auto d = lcp_solve_enumerate(inst);
  CHECK(c.lambda == d.lambda);
}

TEST_CASE("enumerate: lexicographically-first mode wins on degenerate LCPs") {
  // q = 0, F = I: every subset is feasible with lambda = 0; the empty active
  // set (mask 0) must be returned.
  auto inst = make({0.0, 0.0}, {{1.0, 0.0}, {0.0, 1.0}});
  auto sol = lcp_solve_enumerate(inst);
  REQUIRE(sol.solved());
  CHECK(sol.lambda.isZero(0));
}

TEST_CASE("lemke: ray termination is reported, not silent") {
  // q = [-1], F = [-1]: y = -lambda - 1 < 0 for all lambda >= 0, no solution.
  auto inst = make({-1.0}, {{-1.0}});
  auto sol = lcp_solve_lemke(inst);
  CHECK(sol.status == LCPStatus::kRayTermination);
  auto en = lcp_solve_enumerate(inst);
  CHECK(en.status == LCPStatus::kInfeasible);
}
