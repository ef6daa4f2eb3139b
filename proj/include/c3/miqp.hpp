#pragma once

// Exact global solutions of complementarity-constrained QPs through the
// big-M reformulation and best-first branch-and-bound over the pair
// binaries. Node relaxations drop the products and keep 0 <= lambda_i <= M,
// 0 <= y_i <= M box intervals; fixing a binary pins one side to zero. All
// nodes share one constraint matrix, so the splitting solver's KKT
// factorization is computed once per instance and nodes only swap bounds.

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <queue>
#include <stdexcept>
#include <vector>

#include "c3/mpc_common.hpp"
#include "c3/qp.hpp"
#include "c3/types.hpp"

namespace c3 {

template <typename T>
struct ComplementarityPair {
  int lambda_index;  // position of the lambda component in the decision vector
  RowX<T> y_row;     // y = y_row * v + y_offset
  T y_offset;
};

template <typename T>
struct BCQP {
  MatX<T> P;  // objective 0.5 v'Pv + r'v + constant
  VecX<T> r;
  T constant{0};
  MatX<T> A_eq;
  VecX<T> b_eq;
  MatX<T> A_in;
  VecX<T> lb, ub;
  std::vector<ComplementarityPair<T>> pairs;
  T big_m{1000};

  Eigen::Index num_vars() const { return P.rows(); }

  void validate() const {
    const Eigen::Index n = num_vars();
    if (P.cols() != n || r.size() != n) throw std::invalid_argument("BCQP: P/r dims");
    if (!(big_m > T(0))) throw std::invalid_argument("BCQP: big_m must be positive");
    std::vector<bool> seen(n, false);
    for (const auto& pr : pairs) {
      if (pr.lambda_index < 0 || pr.lambda_index >= n || pr.y_row.size() != n)
        throw std::invalid_argument("BCQP: bad complementarity pair");
      if (seen[pr.lambda_index])
        throw std::invalid_argument("BCQP: lambda component appears in two pairs");
      seen[pr.lambda_index] = true;
    }
  }
};

enum class BnBStatus : std::uint8_t { kOptimal, kNodeLimit, kInfeasible, kBigMViolated };

template <typename T>
struct BnBResult {
  VecX<T> z;
  T objective{std::numeric_limits<T>::infinity()};
  long node_count{0};
  BnBStatus status{BnBStatus::kInfeasible};
  T gap{0};                      // objective - best remaining lower bound
  std::vector<std::int8_t> binaries;

  bool has_solution() const {
    return status == BnBStatus::kOptimal || status == BnBStatus::kNodeLimit;
  }
};

template <typename T>
struct BnBOptions {
  T tol = T(1e-7);          // optimality tolerance for pruning
  long node_limit = 100000;
  T comp_accept = T(1e-7);  // product threshold to accept a relaxation point
  QPSettings<T> qp{};
  VecX<T> incumbent_seed;   // optional feasible point used as initial incumbent
};

namespace detail {

template <typename T>
struct BnBNode {
  std::vector<std::int8_t> fix;  // -1 unfixed, 0 / 1 per pair
  T bound;
  long id;
  VecX<T> warm_x, warm_y;
};

template <typename T>
struct BnBNodeOrder {
  bool operator()(const BnBNode<T>& a, const BnBNode<T>& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    return a.id > b.id;
  }
};

}  // namespace detail

// Best-first branch-and-bound. Branching variable: the pair with the largest
// lambda_i * y_i in the node relaxation, ties broken by lowest index.
template <typename T>
BnBResult<T> solve_bcqp_bnb(const BCQP<T>& p, T tol = T(1e-7), long node_limit = 100000,
                            BnBOptions<T> opts = {}) {
  p.validate();
  opts.tol = tol;
  opts.node_limit = node_limit;
  const int n = static_cast<int>(p.num_vars());
  const int np = static_cast<int>(p.pairs.size());
  if (np > 40) throw std::invalid_argument("solve_bcqp_bnb: more than 40 binaries");
  const T M = p.big_m;

  // Stacked constraint rows: equalities, user inequalities, then per pair a
  // lambda row and a y row whose bounds encode the node's binary pattern.
  const int m_eq = static_cast<int>(p.A_eq.rows());
  const int m_in = static_cast<int>(p.A_in.rows());
  const int m = m_eq + m_in + 2 * np;
  MatX<T> C(m, n);
  VecX<T> base_l(m), base_u(m);
  std::vector<bool> is_eq(m, false);
  int row = 0;
  for (int i = 0; i < m_eq; ++i, ++row) {
    C.row(row) = p.A_eq.row(i);
    base_l(row) = base_u(row) = p.b_eq(i);
    is_eq[row] = true;
  }
  for (int i = 0; i < m_in; ++i, ++row) {
    C.row(row) = p.A_in.row(i);
    base_l(row) = p.lb(i);
    base_u(row) = p.ub(i);
  }
  const int pair_row0 = row;
  for (int j = 0; j < np; ++j) {
    C.row(row).setZero();
    C(row, p.pairs[j].lambda_index) = T(1);
    ++row;
    C.row(row) = p.pairs[j].y_row;
    ++row;
  }

  SplittingQP<T> qp(p.P, C, is_eq, opts.qp);

  auto node_bounds = [&](const std::vector<std::int8_t>& fix, VecX<T>& l, VecX<T>& u) {
    l = base_l;
    u = base_u;
    for (int j = 0; j < np; ++j) {
      const int lr = pair_row0 + 2 * j;
      const int yr = lr + 1;
      const T beta = p.pairs[j].y_offset;
      l(lr) = T(0);
      u(lr) = M;
      l(yr) = -beta;
      u(yr) = M - beta;
      if (fix[j] == 0) {
        u(yr) = -beta;  // y = 0
      } else if (fix[j] == 1) {
        u(lr) = T(0);   // lambda = 0
      }
    }
  };

  auto objective_of = [&](const VecX<T>& v) {
    return T(0.5) * v.dot(p.P * v) + p.r.dot(v) + p.constant;
  };
  auto pair_values = [&](const VecX<T>& v, int j) {
    const T lam = v(p.pairs[j].lambda_index);
    const T y = p.pairs[j].y_row.dot(v) + p.pairs[j].y_offset;
    return std::make_pair(lam, y);
  };

  BnBResult<T> best;
  best.binaries.assign(np, -1);
  T incumbent = std::numeric_limits<T>::infinity();

  auto feasible_for = [&](const VecX<T>& v, T slack) {
    for (int j = 0; j < np; ++j) {
      auto [lam, y] = pair_values(v, j);
      if (lam < -slack || y < -slack || lam > M + slack || y > M + slack) return false;
      if (std::abs(lam * y) > opts.comp_accept * std::max(T(1), M)) return false;
    }
    for (int i = 0; i < m_eq; ++i)
      if (std::abs(p.A_eq.row(i).dot(v) - p.b_eq(i)) > slack) return false;
    for (int i = 0; i < m_in; ++i) {
      const T a = p.A_in.row(i).dot(v);
      if (a < p.lb(i) - slack || a > p.ub(i) + slack) return false;
    }
    return true;
  };

  if (opts.incumbent_seed.size() == n && feasible_for(opts.incumbent_seed, T(1e-7))) {
    incumbent = objective_of(opts.incumbent_seed);
    best.z = opts.incumbent_seed;
    best.objective = incumbent;
    for (int j = 0; j < np; ++j) {
      auto [lam, y] = pair_values(opts.incumbent_seed, j);
      best.binaries[j] = (lam > y) ? 0 : 1;
    }
  }

  // Polish a complementarity-feasible point: re-solve with the active pair
  // sides and active inequality rows as equalities for a high-accuracy
  // certificate. The active set is identified at several thresholds and the
  // best verified value wins; falls back to the unpolished point when every
  // attempt fails.
  auto polish = [&](const VecX<T>& v, const std::vector<std::int8_t>& fix) -> VecX<T> {
    VecX<T> l(m), u(m);
    node_bounds(fix, l, u);
    const VecX<T> cv = C * v;
    const T scale = std::max(T(1), M);
    VecX<T> best_pt = v;
    T best_val = std::numeric_limits<T>::infinity();
    bool have_polished = false;
    for (const T rel : {T(1e-5), T(1e-6), T(1e-4), T(1e-3)}) {
      const T act_tol = rel * scale;
      std::vector<int> active_rows;
      std::vector<T> targets;
      for (int i = 0; i < m; ++i) {
        if (is_eq[i] || u(i) - l(i) < act_tol) {
          active_rows.push_back(i);
          targets.push_back(l(i));
        } else if (cv(i) - l(i) < act_tol && std::isfinite(l(i))) {
          active_rows.push_back(i);
          targets.push_back(l(i));
        } else if (u(i) - cv(i) < act_tol && std::isfinite(u(i))) {
          active_rows.push_back(i);
          targets.push_back(u(i));
        }
      }
      QPProblem<T> eqp;
      eqp.P = p.P;
      eqp.r = p.r;
      eqp.A_eq.resize(static_cast<int>(active_rows.size()), n);
      eqp.b_eq.resize(static_cast<int>(active_rows.size()));
      for (std::size_t i = 0; i < active_rows.size(); ++i) {
        eqp.A_eq.row(static_cast<int>(i)) = C.row(active_rows[i]);
        eqp.b_eq(static_cast<int>(i)) = targets[i];
      }
      eqp.A_in.resize(0, n);
      eqp.lb.resize(0);
      eqp.ub.resize(0);
      try {
        auto res = solve_equality_qp(eqp, T(1e-7));
        const VecX<T> cw = C * res.z;
        bool ok = true;
        for (int i = 0; i < m && ok; ++i)
          if (cw(i) < l(i) - T(1e-7) * scale || cw(i) > u(i) + T(1e-7) * scale) ok = false;
        if (!ok) continue;
        const T val = objective_of(res.z);
        if (!have_polished || val < best_val) {
          best_pt = res.z;
          best_val = val;
          have_polished = true;
        }
      } catch (const std::exception&) {
        continue;
      }
    }
    return best_pt;
  };

  std::priority_queue<detail::BnBNode<T>, std::vector<detail::BnBNode<T>>,
                      detail::BnBNodeOrder<T>>
      queue;
  long next_id = 0;
  detail::BnBNode<T> root;
  root.fix.assign(np, -1);
  root.bound = -std::numeric_limits<T>::infinity();
  root.id = next_id++;
  root.warm_x = VecX<T>::Zero(n);
  root.warm_y = VecX<T>::Zero(m);
  queue.push(std::move(root));

  T best_open_bound = -std::numeric_limits<T>::infinity();
  VecX<T> l(m), u(m);

  while (!queue.empty()) {
    if (best.node_count >= opts.node_limit) {
      best.status = best.z.size() ? BnBStatus::kNodeLimit : BnBStatus::kInfeasible;
      best.gap = best.z.size() ? best.objective - queue.top().bound : T(0);
      break;
    }
    detail::BnBNode<T> node = queue.top();
    queue.pop();
    if (node.bound >= incumbent - opts.tol) {
      // Best-first order: every remaining node is at least this bound.
      best.status = BnBStatus::kOptimal;
      best.gap = T(0);
      break;
    }
    ++best.node_count;
    node_bounds(node.fix, l, u);
    qp.set_warm(node.warm_x, node.warm_y);
    auto relax = qp.solve(p.r, l, u);
    if (relax.status == QPStatus::kPrimalInfeasible) continue;
    const bool reliable = relax.status == QPStatus::kSolved;
    const T value = objective_of(relax.z);
    const T bound = reliable ? value : node.bound;
    if (reliable && bound >= incumbent - opts.tol) continue;

    // Complementarity already satisfied: this node is fully solved.
    bool comp_ok = true;
    int branch_j = -1;
    T worst = T(0);
    for (int j = 0; j < np; ++j) {
      if (node.fix[j] != -1) continue;
      auto [lam, y] = pair_values(relax.z, j);
      const T prod = std::abs(lam * y);
      if (prod > opts.comp_accept * std::max(T(1), M)) comp_ok = false;
      if (prod > worst) {
        worst = prod;
        branch_j = j;
      }
    }
    if (comp_ok && reliable) {
      std::vector<std::int8_t> fix = node.fix;
      for (int j = 0; j < np; ++j) {
        if (fix[j] == -1) {
          auto [lam, y] = pair_values(relax.z, j);
          fix[j] = (lam > y) ? 0 : 1;
        }
      }
      const VecX<T> cand = polish(relax.z, fix);
      const T cand_val = objective_of(cand);
      if (cand_val < incumbent) {
        incumbent = cand_val;
        best.z = cand;
        best.objective = cand_val;
        best.binaries = fix;
        best.status = BnBStatus::kOptimal;
      }
      // The incumbent closes this node only if it matches the node's own
      // lower bound; borderline products may hide a better neighbor mode.
      if (branch_j < 0 || cand_val <= value + opts.tol) continue;
    }
    if (branch_j < 0) continue;  // nothing to branch on and not reliable

    for (std::int8_t side : {std::int8_t(0), std::int8_t(1)}) {
      detail::BnBNode<T> child;
      child.fix = node.fix;
      child.fix[branch_j] = side;
      child.bound = bound;
      child.id = next_id++;
      child.warm_x = relax.z;
      child.warm_y = relax.y;
      queue.push(std::move(child));
    }
  }

  if (!best.z.size()) {
    best.status = BnBStatus::kInfeasible;
    return best;
  }

  // Big-M soundness: a returned solution that presses against M signals a
  // truncated feasible set.
  for (int j = 0; j < np; ++j) {
    auto [lam, y] = pair_values(best.z, j);
    if (lam >= M - T(1e-6) || y >= M - T(1e-6)) {
      best.status = BnBStatus::kBigMViolated;
      break;
    }
  }
  return best;
}

// Exact hybrid MPC baseline: the full horizon problem with N * n_lambda
// binaries, condensed onto the (lambda_k, u_k) decision variables.
template <typename T>
struct MpcMiqpResult {
  Trajectory<T> trajectory;
  T objective{std::numeric_limits<T>::infinity()};
  BnBStatus status{BnBStatus::kInfeasible};
  T gap{0};
  long node_count{0};
};

template <typename T>
MpcMiqpResult<T> mpc_miqp_full(const LCS<T>& lcs, const CostSpec<T>& cost,
                               const VecX<T>& x0, const ConvexPolytope<T>& constraints,
                               T big_m, long node_limit = 100000,
                               BnBOptions<T> opts = {}) {
  lcs.validate();
  const int N = static_cast<int>(cost.Q.size());
  cost.validate(N, lcs.n_x, lcs.n_u);
  constraints.validate(lcs.n_x, lcs.n_u, lcs.n_lambda);

  const StateMaps<T> maps = build_state_maps(lcs, N, x0);
  BCQP<T> p;
  accumulate_condensed_cost(lcs, cost, N, maps, p.P, p.r, p.constant);
  p.big_m = big_m;
  p.A_eq.resize(0, maps.n_vars);
  p.b_eq.resize(0);

  std::vector<RowX<T>> rows;
  std::vector<T> lo, hi;
  append_condensed_polytope(lcs, N, maps, constraints, rows, lo, hi);
  p.A_in.resize(static_cast<int>(rows.size()), maps.n_vars);
  p.lb.resize(static_cast<int>(rows.size()));
  p.ub.resize(static_cast<int>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    p.A_in.row(static_cast<int>(i)) = rows[i];
    p.lb(static_cast<int>(i)) = lo[i];
    p.ub(static_cast<int>(i)) = hi[i];
  }

  for (int k = 0; k < N; ++k) {
    const auto& s = lcs.stage(k);
    for (int i = 0; i < lcs.n_lambda; ++i) {
      ComplementarityPair<T> pair;
      pair.lambda_index = maps.lambda_offset(k) + i;
      pair.y_row = s.E.row(i) * maps.S[k];
      pair.y_row.segment(maps.lambda_offset(k), lcs.n_lambda) += s.F.row(i);
      pair.y_row.segment(maps.input_offset(k, lcs.n_lambda), lcs.n_u) += s.H.row(i);
      pair.y_offset = s.E.row(i).dot(maps.t[k]) + s.c(i);
      p.pairs.push_back(std::move(pair));
    }
  }

  auto bnb = solve_bcqp_bnb(p, opts.tol, node_limit, opts);
  MpcMiqpResult<T> out;
  out.status = bnb.status;
  out.node_count = bnb.node_count;
  out.gap = bnb.gap;
  if (!bnb.has_solution()) return out;
  out.objective = bnb.objective;
  out.trajectory.states.push_back(x0);
  for (int k = 0; k < N; ++k) {
    const auto& s = lcs.stage(k);
    const VecX<T> lam = bnb.z.segment(maps.lambda_offset(k), lcs.n_lambda);
    const VecX<T> u = bnb.z.segment(maps.input_offset(k, lcs.n_lambda), lcs.n_u);
    out.trajectory.forces.push_back(lam);
    out.trajectory.inputs.push_back(u);
    out.trajectory.states.push_back(s.A * out.trajectory.states.back() + s.B * u +
                                    s.D * lam + s.d);
  }
  return out;
}

}  // namespace c3
