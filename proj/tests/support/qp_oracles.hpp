#pragma once

// Brute-force references for the QP suites. The active-set oracle enumerates
// every bound-activity pattern, solves the equality-constrained KKT system on
// the free variables, and keeps the best primal-feasible candidate. The
// grid-polish oracle minimizes an l1-augmented objective by coarse search
// followed by pattern descent.

#include <optional>

#include "percon/qp.hpp"

struct OracleResult {
  bool feasible = false;
  double objective = 0.0;
  percon::Vector x;
};

inline OracleResult active_set_oracle(const percon::QuadraticProgram& qp) {
  using percon::Matrix;
  using percon::Vector;
  const int n = qp.num_vars();
  const int me = qp.num_equalities();
  OracleResult best;
  best.objective = percon::kInf;

  std::vector<int> state(n, 0);  // 0 free, 1 at lb, 2 at ub
  const double tol = 1e-7;

  auto consider = [&](const std::vector<int>& s) {
    std::vector<int> free_idx, fixed_idx;
    Vector fixed_val(n);
    for (int i = 0; i < n; ++i) {
      if (s[i] == 0) {
        free_idx.push_back(i);
      } else {
        double v = s[i] == 1 ? qp.lb(i) : qp.ub(i);
        if (!std::isfinite(v)) return;
        fixed_idx.push_back(i);
        fixed_val(i) = v;
      }
    }
    const int nf = static_cast<int>(free_idx.size());
    Vector x(n);
    for (int i : fixed_idx) x(i) = fixed_val(i);

    if (nf > 0) {
      Matrix pff(nf, nf);
      Vector qf(nf);
      for (int a = 0; a < nf; ++a) {
        qf(a) = qp.q(free_idx[a]);
        for (int b = 0; b < nf; ++b) pff(a, b) = qp.P(free_idx[a], free_idx[b]);
        for (int i : fixed_idx) qf(a) += qp.P(free_idx[a], i) * fixed_val(i);
      }
      Matrix aef(me, nf);
      Vector rhs_eq(me);
      for (int r = 0; r < me; ++r) {
        double c = qp.b_eq(r);
        for (int i : fixed_idx) c -= qp.A_eq(r, i) * fixed_val(i);
        rhs_eq(r) = c;
        for (int a = 0; a < nf; ++a) aef(r, a) = qp.A_eq(r, free_idx[a]);
      }
      Matrix kkt = Matrix::Zero(nf + me, nf + me);
      kkt.topLeftCorner(nf, nf) = pff;
      kkt.topRightCorner(nf, me) = aef.transpose();
      kkt.bottomLeftCorner(me, nf) = aef;
      Vector rhs(nf + me);
      rhs.head(nf) = -qf;
      rhs.tail(me) = rhs_eq;
      Eigen::FullPivLU<Matrix> lu(kkt);
      Vector sol = lu.solve(rhs);
      if ((kkt * sol - rhs).lpNorm<Eigen::Infinity>() > 1e-8) return;
      for (int a = 0; a < nf; ++a) x(free_idx[a]) = sol(a);
    } else if (me > 0) {
      if ((qp.A_eq * x - qp.b_eq).lpNorm<Eigen::Infinity>() > tol) return;
    }

    for (int i = 0; i < n; ++i)
      if (x(i) < qp.lb(i) - tol || x(i) > qp.ub(i) + tol) return;
    if (me > 0 && (qp.A_eq * x - qp.b_eq).lpNorm<Eigen::Infinity>() > tol) return;

    double obj = qp.objective_at(x);
    if (obj < best.objective) {
      best.feasible = true;
      best.objective = obj;
      best.x = x;
    }
  };

  // Odometer over the 3^n activity patterns.
  for (;;) {
    consider(state);
    int i = 0;
    while (i < n && state[i] == 2) state[i++] = 0;
    if (i == n) break;
    ++state[i];
  }
  return best;
}

/// Exact minimizer of 0.5 x'Px + q'x + w * ||Sx||_1 for strictly convex P by
/// enumerating the sign pattern of Sx: each entry is fixed positive, negative,
/// or clamped to zero, the resulting smooth equality-constrained quadratic is
/// solved in closed form, and the best true objective wins. The pattern of the
/// true minimizer reproduces it exactly, so the minimum over patterns is exact.
inline percon::Vector l1_sign_pattern_minimize(const percon::Matrix& p,
                                               const percon::Vector& q, double w,
                                               const percon::Matrix& sel) {
  using percon::Matrix;
  using percon::Vector;
  const int n = static_cast<int>(p.rows());
  const int k = static_cast<int>(sel.rows());

  auto objective = [&](const Vector& x) {
    return 0.5 * x.dot(p * x) + q.dot(x) + w * (sel * x).lpNorm<1>();
  };

  Vector best;
  double best_val = percon::kInf;
  std::vector<int> pattern(k, 0);  // 0 -> clamp to zero, 1 -> +, 2 -> -
  for (;;) {
    std::vector<int> zero_rows;
    Vector signs = Vector::Zero(k);
    for (int i = 0; i < k; ++i) {
      if (pattern[i] == 0) zero_rows.push_back(i);
      else signs(i) = pattern[i] == 1 ? 1.0 : -1.0;
    }
    const int nz = static_cast<int>(zero_rows.size());
    Matrix kkt = Matrix::Zero(n + nz, n + nz);
    kkt.topLeftCorner(n, n) = p;
    for (int a = 0; a < nz; ++a) {
      kkt.block(0, n + a, n, 1) = sel.row(zero_rows[a]).transpose();
      kkt.block(n + a, 0, 1, n) = sel.row(zero_rows[a]);
    }
    Vector rhs = Vector::Zero(n + nz);
    rhs.head(n) = -(q + w * sel.transpose() * signs);
    Eigen::FullPivLU<Matrix> lu(kkt);
    Vector sol = lu.solve(rhs);
    if ((kkt * sol - rhs).lpNorm<Eigen::Infinity>() < 1e-9) {
      Vector x = sol.head(n);
      double v = objective(x);
      if (v < best_val) {
        best_val = v;
        best = x;
      }
    }
    int i = 0;
    while (i < k && pattern[i] == 2) pattern[i++] = 0;
    if (i == k) break;
    ++pattern[i];
  }
  return best;
}
