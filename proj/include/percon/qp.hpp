#pragma once
#include <cstdio>

#include <Eigen/Sparse>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "percon/common.hpp"

namespace percon {

/// Convex quadratic program
///     min 0.5 x'Px + q'x   s.t.  A_eq x = b_eq,  lb <= x <= ub,
/// with +-inf allowed in the bounds. P is symmetrized at construction.
struct QuadraticProgram {
  Matrix P;
  Vector q;
  Matrix A_eq;
  Vector b_eq;
  Vector lb, ub;

  QuadraticProgram() = default;

  QuadraticProgram(Matrix P_, Vector q_, Matrix A, Vector b, Vector lb_, Vector ub_)
      : P(std::move(P_)),
        q(std::move(q_)),
        A_eq(std::move(A)),
        b_eq(std::move(b)),
        lb(std::move(lb_)),
        ub(std::move(ub_)) {
    const auto n = P.rows();
    if (P.cols() != n || q.size() != n || lb.size() != n || ub.size() != n)
      throw DimensionError("qp: P, q, lb, ub sizes disagree");
    if (A_eq.size() > 0 && A_eq.cols() != n)
      throw DimensionError("qp: A_eq column count must match variable count");
    if (A_eq.rows() != b_eq.size())
      throw DimensionError("qp: A_eq and b_eq row counts disagree");
    for (Eigen::Index i = 0; i < n; ++i)
      if (lb(i) > ub(i)) throw ArgumentError("qp: lb exceeds ub");
    P = ((P + P.transpose()) * 0.5).eval();
  }

  static QuadraticProgram unconstrained(Matrix P_, Vector q_) {
    const auto n = P_.rows();
    return QuadraticProgram(std::move(P_), std::move(q_), Matrix(0, n), Vector(0),
                            Vector::Constant(n, -kInf), Vector::Constant(n, kInf));
  }

  int num_vars() const { return static_cast<int>(P.rows()); }
  int num_equalities() const { return static_cast<int>(A_eq.rows()); }

  double objective_at(const Vector& x) const {
    return 0.5 * x.dot(P * x) + q.dot(x);
  }
};

/// Row-constrained form  min 0.5 x'Px + q'x  s.t.  l <= Ax <= u,
/// the solver's native shape; rows with l == u are equalities.
struct RowConstrainedQp {
  Matrix P;
  Vector q;
  Matrix A;
  Vector l, u;
};

enum class QpStatus { optimal, max_iter, infeasible };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::optimal: return "optimal";
    case QpStatus::max_iter: return "max_iter";
    case QpStatus::infeasible: return "infeasible";
  }
  return "?";
}

struct QpSolution {
  Vector x;
  double objective = 0.0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  int iterations = 0;
  QpStatus status = QpStatus::max_iter;
  Vector dual;         // one multiplier per constraint row
  Vector dual_eq;      // multipliers of A_eq rows (equality+box form only)
  Vector dual_bounds;  // multipliers of the variable box (equality+box form only)
};

struct QpSettings {
  double eps_abs = 1e-6;
  double eps_rel = 1e-6;
  double eps_infeasible = 1e-7;
  int max_iter = 20000;
  double rho = 0.1;
  double rho_eq_scale = 1e3;  // stiffer penalty on equality rows
  double sigma = 1e-6;
  double alpha = 1.6;  // over-relaxation
  int check_interval = 25;
  int scaling_iters = 10;  // Ruiz equilibration sweeps; 0 disables
  // Penalty rebalancing from the primal/dual residual ratio. Updates happen
  // on a fixed deterministic schedule and trigger a refactorization.
  bool adaptive_rho = true;
  int rho_update_interval = 100;
  double rho_update_threshold = 5.0;
  // Active-set polish: solve the reduced KKT system on the bound pattern read
  // off the duals and accept the refined point when it meets the tolerances.
  // Rescues the slow tail on nearly linear programs.
  bool polish = true;
  int polish_interval = 500;
  double polish_gate = 1e-3;  // residual level that triggers an attempt
};

/// Operator-splitting solver over rows l <= Ax <= u. The equality+box form
/// stacks A = [A_eq; I]. The penalty is fixed per row class up to scheduled
/// rebalancing, and the KKT matrix is factorized once, so repeated solves
/// with updated costs or bounds reuse the factorization. Iterations are fully
/// deterministic for identical inputs and settings.
class AdmmQpSolver {
 public:
  using Sparse = Eigen::SparseMatrix<double>;

  AdmmQpSolver(RowConstrainedQp problem, QpSettings settings = {})
      : st_(settings), rho_base_(settings.rho) {
    n_ = static_cast<int>(problem.P.rows());
    rows_ = static_cast<int>(problem.A.rows());
    me_boxform_ = -1;
    if (problem.P.cols() != n_ || problem.q.size() != n_)
      throw DimensionError("qp: cost shape mismatch");
    if (problem.A.cols() != n_ || problem.l.size() != rows_ || problem.u.size() != rows_)
      throw DimensionError("qp: constraint shape mismatch");
    for (int i = 0; i < rows_; ++i)
      if (problem.l(i) > problem.u(i)) throw ArgumentError("qp: row lower exceeds upper");
    p_user_ = ((problem.P + problem.P.transpose()) * 0.5).sparseView();
    q_user_ = problem.q;
    a_user_ = problem.A.sparseView();
    l_user_ = problem.l;
    u_user_ = problem.u;
    initialize();
  }

  explicit AdmmQpSolver(QuadraticProgram qp, QpSettings settings = {})
      : st_(settings), rho_base_(settings.rho) {
    n_ = qp.num_vars();
    me_boxform_ = qp.num_equalities();
    rows_ = me_boxform_ + n_;
    p_user_ = qp.P.sparseView();
    q_user_ = qp.q;
    Matrix a(rows_, n_);
    if (me_boxform_ > 0) a.topRows(me_boxform_) = qp.A_eq;
    a.bottomRows(n_) = Matrix::Identity(n_, n_);
    a_user_ = a.sparseView();
    l_user_.resize(rows_);
    u_user_.resize(rows_);
    l_user_ << qp.b_eq, qp.lb;
    u_user_ << qp.b_eq, qp.ub;
    initialize();
  }

  void set_linear_cost(const Vector& q) {
    if (q.size() != n_) throw DimensionError("qp update: q size");
    q_user_ = q;
    q_s_ = cost_scale_ * d_scale_.cwiseProduct(q);
  }

  void set_row_bounds(const Vector& l, const Vector& u) {
    if (l.size() != rows_ || u.size() != rows_) throw DimensionError("qp update: bound size");
    for (int i = 0; i < rows_; ++i)
      if (l(i) > u(i)) throw ArgumentError("qp update: lower exceeds upper");
    l_user_ = l;
    u_user_ = u;
    refresh_bounds();
  }

  void set_equality_rhs(const Vector& b) {
    if (me_boxform_ < 0) throw ArgumentError("qp update: not an equality+box problem");
    if (b.size() != me_boxform_) throw DimensionError("qp update: b_eq size");
    l_user_.head(me_boxform_) = b;
    u_user_.head(me_boxform_) = b;
    refresh_bounds();
  }

  void set_bounds(const Vector& lb, const Vector& ub) {
    if (me_boxform_ < 0) throw ArgumentError("qp update: not an equality+box problem");
    if (lb.size() != n_ || ub.size() != n_) throw DimensionError("qp update: bound size");
    for (int i = 0; i < n_; ++i)
      if (lb(i) > ub(i)) throw ArgumentError("qp update: lb exceeds ub");
    l_user_.tail(n_) = lb;
    u_user_.tail(n_) = ub;
    refresh_bounds();
  }

  void set_warm_start(const Vector& x, const Vector& y) {
    if (x.size() != n_ || y.size() != rows_) throw DimensionError("warm start size");
    x_ = d_scale_.cwiseInverse().cwiseProduct(x);
    y_ = cost_scale_ * e_scale_.cwiseInverse().cwiseProduct(y);
    z_ = (a_s_ * x_).eval();
    warm_ = true;
  }

  QpSolution solve() {
    if (!warm_) reset_start();
    warm_ = false;

    QpSolution sol;
    Vector y_prev = y_;
    double r_prim = kInf, r_dual = kInf;
    int iter = 0;
    for (iter = 1; iter <= st_.max_iter; ++iter) {
      y_prev = y_;
      iterate_once();
      if (iter % st_.check_interval == 0 || iter == st_.max_iter) {
        compute_residuals(r_prim, r_dual);
        if (converged(r_prim, r_dual)) {
          sol.status = QpStatus::optimal;
          break;
        }
        if (primal_infeasible(y_ - y_prev)) {
          sol.status = QpStatus::infeasible;
          break;
        }
      }
      if (st_.polish && iter % st_.polish_interval == 0 &&
          r_prim <= st_.polish_gate * std::max(1.0, scale_prim()) &&
          r_dual <= st_.polish_gate * std::max(1.0, scale_dual()) &&
          try_polish(r_prim, r_dual)) {
        sol.status = QpStatus::optimal;
        break;
      }
      if (st_.adaptive_rho && iter % st_.rho_update_interval == 0)
        maybe_rebalance_rho();
    }
    if (iter > st_.max_iter) {
      iter = st_.max_iter;
      compute_residuals(r_prim, r_dual);
      sol.status = QpStatus::max_iter;
    }
    if (sol.status == QpStatus::max_iter && st_.polish && try_polish(r_prim, r_dual))
      sol.status = QpStatus::optimal;

    sol.x = d_scale_.cwiseProduct(x_);
    sol.dual = e_scale_.cwiseProduct(y_) / cost_scale_;
    if (me_boxform_ >= 0) {
      sol.dual_eq = sol.dual.head(me_boxform_);
      sol.dual_bounds = sol.dual.tail(n_);
    }
    sol.objective = 0.5 * sol.x.dot(p_user_ * sol.x) + q_user_.dot(sol.x);
    sol.primal_residual = r_prim;
    sol.dual_residual = r_dual;
    sol.iterations = iter;
    return sol;
  }

 private:
  void initialize() {
    p_s_ = p_user_;
    q_s_ = q_user_;
    a_s_ = a_user_;
    d_scale_ = Vector::Ones(n_);
    e_scale_ = Vector::Ones(rows_);
    cost_scale_ = 1.0;
    equilibrate();
    refresh_bounds();
    build_rho();
    factorize();
    reset_start();
  }

  // Modified Ruiz equilibration with cost normalization; termination tests
  // are evaluated on unscaled quantities, so tolerances keep their meaning.
  void equilibrate() {
    for (int sweep = 0; sweep < st_.scaling_iters; ++sweep) {
      Vector col_norm = Vector::Zero(n_);
      Vector row_norm = Vector::Zero(rows_);
      for (int k = 0; k < p_s_.outerSize(); ++k)
        for (Sparse::InnerIterator it(p_s_, k); it; ++it)
          col_norm(it.col()) = std::max(col_norm(it.col()), std::abs(it.value()));
      for (int k = 0; k < a_s_.outerSize(); ++k)
        for (Sparse::InnerIterator it(a_s_, k); it; ++it) {
          col_norm(it.col()) = std::max(col_norm(it.col()), std::abs(it.value()));
          row_norm(it.row()) = std::max(row_norm(it.row()), std::abs(it.value()));
        }
      Vector dj(n_), ei(rows_);
      for (int j = 0; j < n_; ++j)
        dj(j) = col_norm(j) > 1e-12 ? 1.0 / std::sqrt(col_norm(j)) : 1.0;
      for (int i = 0; i < rows_; ++i)
        ei(i) = row_norm(i) > 1e-12 ? 1.0 / std::sqrt(row_norm(i)) : 1.0;

      p_s_ = (dj.asDiagonal() * p_s_ * dj.asDiagonal()).eval();
      a_s_ = (ei.asDiagonal() * a_s_ * dj.asDiagonal()).eval();
      q_s_ = dj.cwiseProduct(q_s_);
      d_scale_ = d_scale_.cwiseProduct(dj);
      e_scale_ = e_scale_.cwiseProduct(ei);

      double p_col_mean = 0.0;
      {
        Vector pc = Vector::Zero(n_);
        for (int k = 0; k < p_s_.outerSize(); ++k)
          for (Sparse::InnerIterator it(p_s_, k); it; ++it)
            pc(it.col()) = std::max(pc(it.col()), std::abs(it.value()));
        p_col_mean = pc.sum() / std::max(1, n_);
      }
      double gamma_den = std::max(p_col_mean, q_s_.lpNorm<Eigen::Infinity>());
      double gamma = gamma_den > 1e-12 ? 1.0 / gamma_den : 1.0;
      p_s_ *= gamma;
      q_s_ *= gamma;
      cost_scale_ *= gamma;
    }
  }

  void refresh_bounds() {
    l_s_.resize(rows_);
    u_s_.resize(rows_);
    for (int i = 0; i < rows_; ++i) {
      const double e = e_scale_(i);
      l_s_(i) = std::isfinite(l_user_(i)) ? e * l_user_(i) : -kInf;
      u_s_(i) = std::isfinite(u_user_(i)) ? e * u_user_(i) : kInf;
    }
  }

  void build_rho() {
    rho_ = Vector::Constant(rows_, rho_base_);
    for (int i = 0; i < rows_; ++i)
      if (l_user_(i) == u_user_(i)) rho_(i) = rho_base_ * st_.rho_eq_scale;
    rho_inv_ = rho_.cwiseInverse();
  }

  // Scaled-space residual ratio drives the penalty; a large imbalance means
  // the current rho favors one residual over the other.
  void maybe_rebalance_rho() {
    Vector ax = a_s_ * x_;
    const double rp = (ax - z_).lpNorm<Eigen::Infinity>();
    const double rp_scale =
        std::max({ax.lpNorm<Eigen::Infinity>(), z_.lpNorm<Eigen::Infinity>(), 1e-12});
    Vector stat = p_s_ * x_ + q_s_ + a_s_.transpose() * y_;
    const double rd = stat.lpNorm<Eigen::Infinity>();
    const double rd_scale = std::max({(p_s_ * x_).lpNorm<Eigen::Infinity>(),
                                      (a_s_.transpose() * y_).lpNorm<Eigen::Infinity>(),
                                      q_s_.lpNorm<Eigen::Infinity>(), 1e-12});
    const double ratio = std::sqrt((rp / rp_scale) / std::max(rd / rd_scale, 1e-16));
    if (!(ratio > st_.rho_update_threshold || ratio < 1.0 / st_.rho_update_threshold))
      return;
    rho_base_ = std::clamp(rho_base_ * ratio, 1e-6, 1e6);
    build_rho();
    factorize();
  }

  void factorize() {
    Sparse k = p_s_;
    Sparse at_rho_a = a_s_.transpose() * (rho_.asDiagonal() * a_s_);
    Sparse eye(n_, n_);
    eye.setIdentity();
    k = k + at_rho_a + Sparse(st_.sigma * eye);
    k.makeCompressed();
    kkt_.compute(k);
    if (kkt_.info() != Eigen::Success)
      throw ArgumentError("qp: KKT factorization failed");
  }

  void reset_start() {
    x_ = Vector::Zero(n_);
    z_ = Vector::Zero(rows_);
    y_ = Vector::Zero(rows_);
  }

  void iterate_once() {
    Vector rhs = st_.sigma * x_ - q_s_ + a_s_.transpose() * (rho_.cwiseProduct(z_) - y_);
    Vector x_t = kkt_.solve(rhs);
    Vector z_t = a_s_ * x_t;
    x_ = st_.alpha * x_t + (1.0 - st_.alpha) * x_;
    Vector w = st_.alpha * z_t + (1.0 - st_.alpha) * z_ + rho_inv_.cwiseProduct(y_);
    Vector z_new = w.cwiseMax(l_s_).cwiseMin(u_s_);
    y_ += rho_.cwiseProduct(st_.alpha * z_t + (1.0 - st_.alpha) * z_ - z_new);
    z_ = z_new;
  }

  void compute_residuals(double& r_prim, double& r_dual) {
    Vector ax = a_s_ * x_;
    Vector prim = e_scale_.cwiseInverse().cwiseProduct(ax - z_);
    r_prim = prim.size() ? prim.lpNorm<Eigen::Infinity>() : 0.0;
    Vector stat = p_s_ * x_ + q_s_ + a_s_.transpose() * y_;
    Vector dual = d_scale_.cwiseInverse().cwiseProduct(stat) / cost_scale_;
    r_dual = dual.lpNorm<Eigen::Infinity>();

    ax_unscaled_ = e_scale_.cwiseInverse().cwiseProduct(ax);
    z_unscaled_ = e_scale_.cwiseInverse().cwiseProduct(z_);
    px_unscaled_ = d_scale_.cwiseInverse().cwiseProduct(p_s_ * x_) / cost_scale_;
    aty_unscaled_ = d_scale_.cwiseInverse().cwiseProduct(a_s_.transpose() * y_) / cost_scale_;
  }

  double scale_prim() const {
    return std::max(ax_unscaled_.lpNorm<Eigen::Infinity>(),
                    z_unscaled_.lpNorm<Eigen::Infinity>());
  }

  double scale_dual() const {
    const double q_inf =
        (d_scale_.cwiseInverse().cwiseProduct(q_s_) / cost_scale_).lpNorm<Eigen::Infinity>();
    return std::max({px_unscaled_.lpNorm<Eigen::Infinity>(),
                     aty_unscaled_.lpNorm<Eigen::Infinity>(), q_inf});
  }

  bool converged(double r_prim, double r_dual) const {
    return r_prim <= st_.eps_abs + st_.eps_rel * scale_prim() &&
           r_dual <= st_.eps_abs + st_.eps_rel * scale_dual();
  }

  bool primal_infeasible(const Vector& dy_scaled) const {
    Vector dy = e_scale_.cwiseProduct(dy_scaled) / cost_scale_;
    const double dy_inf = dy.lpNorm<Eigen::Infinity>();
    // A genuine dual ray keeps a non-vanishing increment; skip the test on
    // the rounding-noise plateau of converged feasible problems.
    const double y_inf = (e_scale_.cwiseProduct(y_) / cost_scale_).lpNorm<Eigen::Infinity>();
    if (dy_inf <= 1e-9 * std::max(1.0, y_inf)) return false;
    Vector at_dy =
        d_scale_.cwiseInverse().cwiseProduct(a_s_.transpose() * dy_scaled) / cost_scale_;
    if (at_dy.lpNorm<Eigen::Infinity>() > st_.eps_infeasible * dy_inf) return false;
    double support = 0.0;
    for (int i = 0; i < rows_; ++i) {
      const double pos = std::max(dy(i), 0.0);
      const double neg = std::min(dy(i), 0.0);
      if (!std::isfinite(u_user_(i))) {
        if (pos > st_.eps_infeasible * dy_inf) return false;
      } else {
        support += u_user_(i) * pos;
      }
      if (!std::isfinite(l_user_(i))) {
        if (-neg > st_.eps_infeasible * dy_inf) return false;
      } else {
        support += l_user_(i) * neg;
      }
    }
    return support <= -st_.eps_infeasible * dy_inf;
  }

  // Reduced-KKT refinement seeded by the bound pattern read off the duals,
  // iterated active-set style: violated bounds join the working set, a
  // wrong-sign multiplier leaves otherwise. The refined point is accepted
  // only when it meets the strict tolerances.
  bool try_polish(double& r_prim, double& r_dual) {
    // State per row: 0 inactive, -1 pinned at lower, +1 pinned at upper,
    // 2 equality.
    std::vector<int> state(static_cast<size_t>(rows_), 0);
    for (int i = 0; i < rows_; ++i) {
      if (l_s_(i) == u_s_(i)) state[static_cast<size_t>(i)] = 2;
      else if (y_(i) < 0.0 && std::isfinite(l_s_(i))) state[static_cast<size_t>(i)] = -1;
      else if (y_(i) > 0.0 && std::isfinite(u_s_(i))) state[static_cast<size_t>(i)] = 1;
    }

    Vector x_hat, y_hat;
    bool clean = false;
    for (int pass = 0; pass < 60 && !clean; ++pass) {
      std::vector<int> active;
      for (int i = 0; i < rows_; ++i)
        if (state[static_cast<size_t>(i)] != 0) active.push_back(i);
      const int na = static_cast<int>(active.size());
      const int dim = n_ + na;
      const double reg = 1e-9;

      std::vector<Eigen::Triplet<double>> trips;
      for (int k = 0; k < p_s_.outerSize(); ++k)
        for (Sparse::InnerIterator it(p_s_, k); it; ++it)
          if (it.row() >= it.col()) trips.emplace_back(it.row(), it.col(), it.value());
      for (int i = 0; i < n_; ++i) trips.emplace_back(i, i, reg);
      std::vector<int> row_to_active(static_cast<size_t>(rows_), -1);
      for (int a = 0; a < na; ++a)
        row_to_active[static_cast<size_t>(active[static_cast<size_t>(a)])] = a;
      for (int k = 0; k < a_s_.outerSize(); ++k)
        for (Sparse::InnerIterator it(a_s_, k); it; ++it) {
          const int a = row_to_active[static_cast<size_t>(it.row())];
          if (a >= 0) trips.emplace_back(n_ + a, it.col(), it.value());
        }
      for (int a = 0; a < na; ++a) trips.emplace_back(n_ + a, n_ + a, -reg);
      Sparse kkt(dim, dim);
      kkt.setFromTriplets(trips.begin(), trips.end());

      Eigen::SimplicialLDLT<Sparse, Eigen::Lower> fact;
      fact.compute(kkt);
      if (fact.info() != Eigen::Success) return false;

      Vector rhs(dim);
      rhs.head(n_) = -q_s_;
      for (int a = 0; a < na; ++a) {
        const int row = active[static_cast<size_t>(a)];
        rhs(n_ + a) = state[static_cast<size_t>(row)] == 1 ? u_s_(row) : l_s_(row);
      }
      Sparse kkt_full = Sparse(kkt.template selfadjointView<Eigen::Lower>());
      Vector sol = fact.solve(rhs);
      for (int refine = 0; refine < 3; ++refine)
        sol += fact.solve(rhs - kkt_full * sol);

      x_hat = sol.head(n_);
      y_hat = Vector::Zero(rows_);
      for (int a = 0; a < na; ++a)
        y_hat(active[static_cast<size_t>(a)]) = sol(n_ + a);

      // Working-set exchange: the worst bound violation enters; otherwise
      // the worst wrong-sign multiplier leaves.
      const double nu_scale = 1.0 + y_hat.cwiseAbs().maxCoeff();
      const double sign_tol = 1e-8 * nu_scale;
      Vector ax = a_s_ * x_hat;
      const double feas_scale = 1.0 + ax.cwiseAbs().maxCoeff();
      const double feas_tol = 1e-8 * feas_scale;
      int enter = -1, enter_side = 0, leave = -1;
      double worst_violation = feas_tol, worst_sign = sign_tol;
      for (int i = 0; i < rows_; ++i) {
        const int st = state[static_cast<size_t>(i)];
        if (st == 2) continue;
        if (st == 0) {
          if (std::isfinite(l_s_(i)) && l_s_(i) - ax(i) > worst_violation) {
            worst_violation = l_s_(i) - ax(i);
            enter = i;
            enter_side = -1;
          }
          if (std::isfinite(u_s_(i)) && ax(i) - u_s_(i) > worst_violation) {
            worst_violation = ax(i) - u_s_(i);
            enter = i;
            enter_side = 1;
          }
        } else if (st == -1 && y_hat(i) > worst_sign) {
          worst_sign = y_hat(i);
          leave = i;
        } else if (st == 1 && -y_hat(i) > worst_sign) {
          worst_sign = -y_hat(i);
          leave = i;
        }
      }
      if (enter >= 0) {
        state[static_cast<size_t>(enter)] = enter_side;
      } else if (leave >= 0) {
        state[static_cast<size_t>(leave)] = 0;
      } else {
        clean = true;
      }
#ifdef PERCON_QP_DEBUG
      std::fprintf(stderr, "polish pass %d: na=%d enter=%d leave=%d viol=%g sign=%g\n",
                   pass, na, enter, leave, worst_violation, worst_sign);
#endif
    }
    if (!clean) return false;

    // Evaluate the strict criteria at the refined point.
    Vector x_keep = x_, z_keep = z_, y_keep = y_;
    x_ = x_hat;
    z_ = (a_s_ * x_hat).cwiseMax(l_s_).cwiseMin(u_s_);
    y_ = y_hat;
    double rp, rd;
    compute_residuals(rp, rd);
    if (converged(rp, rd)) {
      r_prim = rp;
      r_dual = rd;
      return true;
    }
#ifdef PERCON_QP_DEBUG
    std::fprintf(stderr, "polish: refined point rejected rp=%g rd=%g\n", rp, rd);
#endif
    x_ = x_keep;
    z_ = z_keep;
    y_ = y_keep;
    return false;
  }

  QpSettings st_;
  int n_ = 0, rows_ = 0;
  int me_boxform_ = -1;  // >= 0 when built from the equality+box form
  Sparse p_user_, a_user_;
  Vector q_user_, l_user_, u_user_;
  Sparse p_s_, a_s_;
  Vector q_s_, l_s_, u_s_;
  Vector d_scale_, e_scale_;
  double cost_scale_ = 1.0;
  double rho_base_ = 0.1;
  Vector rho_, rho_inv_;
  Eigen::SimplicialLDLT<Sparse> kkt_;
  Vector x_, z_, y_;
  bool warm_ = false;
  Vector ax_unscaled_, z_unscaled_, px_unscaled_, aty_unscaled_;
};

inline QpSolution solve(const QuadraticProgram& qp, const QpSettings& settings = {}) {
  AdmmQpSolver solver(qp, settings);
  return solver.solve();
}

inline QpSolution solve(const RowConstrainedQp& qp, const QpSettings& settings = {}) {
  AdmmQpSolver solver(qp, settings);
  return solver.solve();
}

/// One weighted l1 penalty: weight * ||selector * x||_1.
struct L1Term {
  double weight = 0.0;
  Matrix selector;
};

/// Rewrites each weighted ||Sx||_1 with a nonnegative split r+ - r- = Sx and
/// linear cost weight * 1'(r+ + r-); the optimal value and the original
/// variables are unchanged. Terms with zero weight are dropped.
inline QuadraticProgram reformulate_l1(const QuadraticProgram& qp,
                                       const std::vector<L1Term>& terms) {
  int extra = 0;
  for (const auto& t : terms) {
    if (t.weight < 0.0) throw ArgumentError("l1 weight must be nonnegative");
    if (t.selector.cols() != qp.num_vars())
      throw DimensionError("l1 selector column count must match variable count");
    if (t.weight > 0.0) extra += 2 * static_cast<int>(t.selector.rows());
  }
  if (extra == 0) return qp;

  const int n = qp.num_vars();
  const int n2 = n + extra;
  Matrix P = Matrix::Zero(n2, n2);
  P.topLeftCorner(n, n) = qp.P;
  Vector q = Vector::Zero(n2);
  q.head(n) = qp.q;
  Vector lb = Vector::Constant(n2, 0.0);
  Vector ub = Vector::Constant(n2, kInf);
  lb.head(n) = qp.lb;
  ub.head(n) = qp.ub;

  int link_rows = extra / 2;
  Matrix A = Matrix::Zero(qp.num_equalities() + link_rows, n2);
  Vector b = Vector::Zero(qp.num_equalities() + link_rows);
  A.topLeftCorner(qp.num_equalities(), n) = qp.A_eq;
  b.head(qp.num_equalities()) = qp.b_eq;

  int var_at = n;
  int row_at = qp.num_equalities();
  for (const auto& t : terms) {
    if (t.weight == 0.0) continue;
    const int k = static_cast<int>(t.selector.rows());
    // S x - r+ + r- = 0
    A.block(row_at, 0, k, n) = t.selector;
    A.block(row_at, var_at, k, k) = -Matrix::Identity(k, k);
    A.block(row_at, var_at + k, k, k) = Matrix::Identity(k, k);
    q.segment(var_at, 2 * k).setConstant(t.weight);
    var_at += 2 * k;
    row_at += k;
  }
  return QuadraticProgram(std::move(P), std::move(q), std::move(A), std::move(b),
                          std::move(lb), std::move(ub));
}

/// Dense text dump for external cross-checking; one section per matrix.
inline void write_qp_text(const std::string& path, const QuadraticProgram& qp) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  auto dump = [&out](const char* name, const Matrix& m) {
    out << name << ' ' << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j) {
        if (j) out << ' ';
        out << m(i, j);
      }
      out << '\n';
    }
  };
  out.precision(17);
  dump("P", qp.P);
  dump("q", qp.q);
  dump("A_eq", qp.A_eq);
  dump("b_eq", qp.b_eq);
  dump("lb", qp.lb);
  dump("ub", qp.ub);
}

}  // namespace percon
