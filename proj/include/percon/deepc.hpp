#pragma once

#include <deque>
#include <optional>

#include "percon/common.hpp"
#include "percon/hankel.hpp"
#include "percon/qp.hpp"

namespace percon {

/// Horizons, regularization weights, cost matrices and constraint data of the
/// data-driven predictive controller. The input is col(split fractions,
/// exogenous demands); the split block carries box bounds in [0, 1) and a
/// piecewise-hold pattern, the demand block is pinned to its forecast.
struct DeepcConfig {
  int t_ini = 5;
  int t_f = 4;
  double proj_penalty = 1.0;      // quadratic penalty on the out-of-subspace part of g
  double g_l1_penalty = 1.0;      // l1 penalty on g
  double slack_l1_penalty = 0.0;  // l1 penalty on the past-output slack; zero
                                  // removes the slack and pins the match exactly
  Matrix q_weight;                // p x p output tracking cost
  Matrix r_weight;                // m x m input tracking cost (demand block usually zero)
  Vector lambda_min, lambda_max;  // per actuator, within [0, 1)
  int duty_cycle_steps = 1;       // hold length of the split inputs, in controller steps
  int apply_steps = 1;            // prefix of the plan that gets applied
  Vector rho_max;                 // per-region output upper bounds, +inf allowed

  int num_actuators() const { return static_cast<int>(lambda_min.size()); }

  void validate(int input_dim, int output_dim, int data_cols) const {
    if (t_ini < 1 || t_f < 1) throw ArgumentError("deepc: horizons must be positive");
    if (duty_cycle_steps < 1 || t_f % duty_cycle_steps != 0)
      throw ArgumentError("deepc: horizon must be a whole number of duty cycles");
    if (apply_steps < 1 || apply_steps > t_f)
      throw ArgumentError("deepc: apply_steps must lie in [1, t_f]");
    if (lambda_min.size() != lambda_max.size())
      throw DimensionError("deepc: split bound sizes disagree");
    if (num_actuators() > input_dim)
      throw DimensionError("deepc: more actuators than input coordinates");
    for (int i = 0; i < num_actuators(); ++i)
      if (!(0.0 <= lambda_min(i) && lambda_min(i) <= lambda_max(i) && lambda_max(i) < 1.0))
        throw ArgumentError("deepc: split bounds must satisfy 0 <= min <= max < 1");
    if (q_weight.rows() != output_dim || q_weight.cols() != output_dim)
      throw DimensionError("deepc: output cost must be p x p");
    if (r_weight.rows() != input_dim || r_weight.cols() != input_dim)
      throw DimensionError("deepc: input cost must be m x m");
    if (rho_max.size() != output_dim)
      throw DimensionError("deepc: output bounds must have one entry per region");
    if (proj_penalty < 0.0 || g_l1_penalty < 0.0 || slack_l1_penalty < 0.0)
      throw ArgumentError("deepc: penalties must be nonnegative");
    if (data_cols < 1) throw DimensionError("deepc: data horizon too short");
  }
};

/// Equality structure of the admissible input set: the hold pattern matrix
/// (splits constant within each duty cycle) and the selector pinning the
/// demand coordinates to their forecast.
struct InputConstraintSet {
  Matrix hold;           // (m t_f) x (m t_f)
  Matrix demand_select;  // (n_d t_f) x (m t_f)
  Vector demand_ref;     // n_d t_f
};

inline InputConstraintSet build_input_constraints(int num_actuators, int num_demands,
                                                  int t_f, int duty_cycle_steps) {
  const int m = num_actuators + num_demands;
  InputConstraintSet cs;
  cs.hold = Matrix::Zero(m * t_f, m * t_f);
  int row = 0;
  for (int a = 0; a < num_actuators; ++a) {
    for (int w = 0; w < t_f / duty_cycle_steps; ++w) {
      for (int s = 1; s < duty_cycle_steps; ++s) {
        const int k = w * duty_cycle_steps + s;
        cs.hold(row, k * m + a) = 1.0;
        cs.hold(row, (k - 1) * m + a) = -1.0;
        ++row;
      }
    }
  }
  cs.demand_select = Matrix::Zero(num_demands * t_f, m * t_f);
  for (int k = 0; k < t_f; ++k)
    for (int j = 0; j < num_demands; ++j)
      cs.demand_select(k * num_demands + j, k * m + num_actuators + j) = 1.0;
  cs.demand_ref = Vector::Zero(num_demands * t_f);
  return cs;
}

/// Most recent input/output pairs, oldest first.
class RecentWindow {
 public:
  RecentWindow(int input_dim, int output_dim, int t_ini)
      : m_(input_dim), p_(output_dim), t_ini_(t_ini) {}

  void push(const Vector& u, const Vector& y) {
    if (u.size() != m_ || y.size() != p_) throw DimensionError("window sample size");
    u_.push_back(u);
    y_.push_back(y);
    while (static_cast<int>(u_.size()) > t_ini_) {
      u_.pop_front();
      y_.pop_front();
    }
  }

  bool full() const { return static_cast<int>(u_.size()) == t_ini_; }

  Vector u_stacked() const {
    Vector v(m_ * t_ini_);
    for (size_t k = 0; k < u_.size(); ++k) v.segment(static_cast<int>(k) * m_, m_) = u_[k];
    return v;
  }

  Vector y_stacked() const {
    Vector v(p_ * t_ini_);
    for (size_t k = 0; k < y_.size(); ++k) v.segment(static_cast<int>(k) * p_, p_) = y_[k];
    return v;
  }

 private:
  int m_, p_, t_ini_;
  std::deque<Vector> u_, y_;
};

/// Orthogonal projector onto the row space of col(U_p, Y_p, U_f); symmetric
/// and idempotent, used by the quadratic regularizer.
inline Matrix build_projection(const HankelBlocks& blocks) {
  const int n = blocks.num_cols();
  Matrix z(blocks.u_past.rows() + blocks.y_past.rows() + blocks.u_future.rows(), n);
  z << blocks.u_past, blocks.y_past, blocks.u_future;
  if (z.cwiseAbs().maxCoeff() == 0.0) return Matrix::Zero(n, n);
  Eigen::BDCSVD<Matrix> svd(z, Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  const double tol = std::max(z.rows(), z.cols()) * sv(0) * 1e-10;
  int rank = 0;
  while (rank < sv.size() && sv(rank) > tol) ++rank;
  Matrix v = svd.matrixV().leftCols(rank);
  return v * v.transpose();
}

struct DeepcLayout {
  int num_g = 0, num_sigma = 0, num_u = 0, num_y = 0;
  int g_at = 0, sigma_at = 0, u_at = 0, y_at = 0;
  int base_vars = 0;
  int row_u_ini = 0, row_y_ini = 0, row_u_f = 0, row_y_f = 0;
  int row_hold = 0, hold_rows = 0;
  int row_demand = 0, demand_rows = 0;
  int base_rows = 0;
};

struct DeepcProblem {
  QuadraticProgram qp;
  DeepcLayout layout;
};

/// Builds the tracking program over (g, slack, u, y): quadratic tracking
/// costs, the projection regularizer on g, the four data-matching equality
/// blocks (the slack enters only the past-output block), the hold and demand
/// equalities, and the box sets on u and y. l1 penalties are rewritten into
/// the equality-and-box form before returning.
inline DeepcProblem assemble_deepc(const DeepcConfig& cfg, const HankelBlocks& blocks,
                                   const Vector& u_ini, const Vector& y_ini,
                                   const Vector& y_ref, const Vector& u_ref,
                                   const InputConstraintSet& cons,
                                   const Matrix* projection = nullptr) {
  const int m = blocks.input_dim;
  const int p = blocks.output_dim;
  const int n_cols = blocks.num_cols();
  cfg.validate(m, p, n_cols);
  if (blocks.t_ini != cfg.t_ini || blocks.t_f != cfg.t_f)
    throw DimensionError("deepc: data blocks were split with different horizons");
  if (u_ini.size() != m * cfg.t_ini || y_ini.size() != p * cfg.t_ini)
    throw DimensionError("deepc: window size mismatch");
  if (y_ref.size() != p * cfg.t_f || u_ref.size() != m * cfg.t_f)
    throw DimensionError("deepc: reference size mismatch");
  const int n_d = m - cfg.num_actuators();
  if (cons.demand_select.rows() != n_d * cfg.t_f ||
      cons.demand_select.cols() != m * cfg.t_f || cons.hold.rows() != m * cfg.t_f)
    throw DimensionError("deepc: constraint set shape mismatch");
  if (cons.demand_ref.size() != n_d * cfg.t_f)
    throw DimensionError("deepc: demand forecast length mismatch");

  DeepcLayout L;
  L.num_g = n_cols;
  L.num_sigma = cfg.slack_l1_penalty > 0.0 ? p * cfg.t_ini : 0;
  L.num_u = m * cfg.t_f;
  L.num_y = p * cfg.t_f;
  L.g_at = 0;
  L.sigma_at = L.num_g;
  L.u_at = L.sigma_at + L.num_sigma;
  L.y_at = L.u_at + L.num_u;
  L.base_vars = L.y_at + L.num_y;

  // Quadratic cost. Objective form is 0.5 x'Px + q'x, so the squared terms
  // enter P with a factor of two.
  Matrix P = Matrix::Zero(L.base_vars, L.base_vars);
  Vector q = Vector::Zero(L.base_vars);
  if (cfg.proj_penalty > 0.0) {
    Matrix pi = projection ? *projection : build_projection(blocks);
    P.block(L.g_at, L.g_at, L.num_g, L.num_g) =
        2.0 * cfg.proj_penalty * (Matrix::Identity(n_cols, n_cols) - pi);
  }
  for (int k = 0; k < cfg.t_f; ++k) {
    P.block(L.u_at + k * m, L.u_at + k * m, m, m) = 2.0 * cfg.r_weight;
    P.block(L.y_at + k * p, L.y_at + k * p, p, p) = 2.0 * cfg.q_weight;
    q.segment(L.u_at + k * m, m) = -2.0 * cfg.r_weight * u_ref.segment(k * m, m);
    q.segment(L.y_at + k * p, p) = -2.0 * cfg.q_weight * y_ref.segment(k * p, p);
  }

  // Equalities: data matching, hold pattern, demand pinning.
  std::vector<int> hold_row_ids;
  for (int r = 0; r < cons.hold.rows(); ++r)
    if (cons.hold.row(r).cwiseAbs().maxCoeff() > 0.0) hold_row_ids.push_back(r);

  L.row_u_ini = 0;
  L.row_y_ini = m * cfg.t_ini;
  L.row_u_f = L.row_y_ini + p * cfg.t_ini;
  L.row_y_f = L.row_u_f + m * cfg.t_f;
  L.row_hold = L.row_y_f + p * cfg.t_f;
  L.hold_rows = static_cast<int>(hold_row_ids.size());
  L.row_demand = L.row_hold + L.hold_rows;
  L.demand_rows = n_d * cfg.t_f;
  L.base_rows = L.row_demand + L.demand_rows;

  Matrix A = Matrix::Zero(L.base_rows, L.base_vars);
  Vector b = Vector::Zero(L.base_rows);
  A.block(L.row_u_ini, L.g_at, m * cfg.t_ini, n_cols) = blocks.u_past;
  b.segment(L.row_u_ini, m * cfg.t_ini) = u_ini;
  A.block(L.row_y_ini, L.g_at, p * cfg.t_ini, n_cols) = blocks.y_past;
  if (L.num_sigma > 0)
    A.block(L.row_y_ini, L.sigma_at, L.num_sigma, L.num_sigma) =
        -Matrix::Identity(L.num_sigma, L.num_sigma);
  b.segment(L.row_y_ini, p * cfg.t_ini) = y_ini;
  A.block(L.row_u_f, L.g_at, m * cfg.t_f, n_cols) = blocks.u_future;
  A.block(L.row_u_f, L.u_at, m * cfg.t_f, m * cfg.t_f) =
      -Matrix::Identity(m * cfg.t_f, m * cfg.t_f);
  A.block(L.row_y_f, L.g_at, p * cfg.t_f, n_cols) = blocks.y_future;
  A.block(L.row_y_f, L.y_at, p * cfg.t_f, p * cfg.t_f) =
      -Matrix::Identity(p * cfg.t_f, p * cfg.t_f);
  for (int r = 0; r < L.hold_rows; ++r)
    A.block(L.row_hold + r, L.u_at, 1, m * cfg.t_f) =
        cons.hold.row(hold_row_ids[static_cast<size_t>(r)]);
  if (L.demand_rows > 0) {
    A.block(L.row_demand, L.u_at, L.demand_rows, m * cfg.t_f) = cons.demand_select;
    b.segment(L.row_demand, L.demand_rows) = cons.demand_ref;
  }

  // Boxes: g and the slack are free, splits and outputs are boxed, demand
  // coordinates stay nonnegative.
  Vector lb = Vector::Constant(L.base_vars, -kInf);
  Vector ub = Vector::Constant(L.base_vars, kInf);
  const int l = cfg.num_actuators();
  for (int k = 0; k < cfg.t_f; ++k) {
    for (int a = 0; a < l; ++a) {
      lb(L.u_at + k * m + a) = cfg.lambda_min(a);
      ub(L.u_at + k * m + a) = cfg.lambda_max(a);
    }
    for (int j = 0; j < n_d; ++j) lb(L.u_at + k * m + l + j) = 0.0;
    for (int i = 0; i < p; ++i) {
      lb(L.y_at + k * p + i) = 0.0;
      ub(L.y_at + k * p + i) = cfg.rho_max(i);
    }
  }

  QuadraticProgram base(std::move(P), std::move(q), std::move(A), std::move(b),
                        std::move(lb), std::move(ub));

  std::vector<L1Term> terms;
  if (cfg.g_l1_penalty > 0.0) {
    Matrix sel = Matrix::Zero(L.num_g, L.base_vars);
    sel.block(0, L.g_at, L.num_g, L.num_g) = Matrix::Identity(L.num_g, L.num_g);
    terms.push_back({cfg.g_l1_penalty, std::move(sel)});
  }
  if (cfg.slack_l1_penalty > 0.0 && L.num_sigma > 0) {
    Matrix sel = Matrix::Zero(L.num_sigma, L.base_vars);
    sel.block(0, L.sigma_at, L.num_sigma, L.num_sigma) =
        Matrix::Identity(L.num_sigma, L.num_sigma);
    terms.push_back({cfg.slack_l1_penalty, std::move(sel)});
  }
  return DeepcProblem{reformulate_l1(base, terms), L};
}

struct ControlStepDiag {
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool degraded = false;
};

/// Receding-horizon driver around the assembled program. The program matrices
/// are fixed at construction; each step rewrites the window and forecast
/// parts of the right-hand side, solves warm-started, and returns the first
/// apply_steps columns of the planned splits (clamped into their box). When
/// the solver fails the reference split is applied and the step is flagged.
class DeepcController {
 public:
  DeepcController(DeepcConfig cfg, HankelBlocks blocks, Vector y_ref_step,
                  Vector lambda_ref, QpSettings settings = {})
      : cfg_(std::move(cfg)),
        blocks_(std::move(blocks)),
        window_(blocks_.input_dim, blocks_.output_dim, cfg_.t_ini),
        lambda_ref_(std::move(lambda_ref)) {
    const int m = blocks_.input_dim;
    const int p = blocks_.output_dim;
    if (y_ref_step.size() != p) throw DimensionError("deepc: reference must have p entries");
    if (lambda_ref_.size() != cfg_.num_actuators())
      throw DimensionError("deepc: split reference size mismatch");
    n_d_ = m - cfg_.num_actuators();
    y_ref_ = Vector(p * cfg_.t_f);
    for (int k = 0; k < cfg_.t_f; ++k) y_ref_.segment(k * p, p) = y_ref_step;
    cons_ = build_input_constraints(cfg_.num_actuators(), n_d_, cfg_.t_f,
                                    cfg_.duty_cycle_steps);
    u_ref_ = Vector::Zero(m * cfg_.t_f);
    for (int k = 0; k < cfg_.t_f; ++k)
      u_ref_.segment(k * m, cfg_.num_actuators()) = lambda_ref_;
    demand_in_cost_ =
        n_d_ > 0 &&
        cfg_.r_weight.bottomRightCorner(n_d_, n_d_).cwiseAbs().maxCoeff() > 0.0;

    problem_ = assemble_deepc(cfg_, blocks_, Vector::Zero(m * cfg_.t_ini),
                              Vector::Zero(p * cfg_.t_ini), y_ref_, u_ref_, cons_);
    solver_.emplace(problem_.qp, settings);
  }

  int input_dim() const { return blocks_.input_dim; }
  int output_dim() const { return blocks_.output_dim; }
  int num_demands() const { return n_d_; }
  const DeepcProblem& problem() const { return problem_; }
  bool ready() const { return window_.full(); }

  void observe(const Vector& u, const Vector& y) { window_.push(u, y); }

  struct Plan {
    Matrix lambda;         // actuators x apply_steps
    Matrix input_plan;     // m x t_f, full planned input
    Vector output_plan;    // p t_f, planned outputs
    ControlStepDiag diag;
  };

  Plan plan(const Matrix& demand_forecast) {
    if (!ready()) throw ArgumentError("deepc: window not fully populated");
    const int m = blocks_.input_dim;
    const int l = cfg_.num_actuators();
    if (demand_forecast.rows() != n_d_ || demand_forecast.cols() != cfg_.t_f)
      throw DimensionError("deepc: demand forecast must be n_d x t_f");

    Vector d_bar(n_d_ * cfg_.t_f);
    for (int k = 0; k < cfg_.t_f; ++k) d_bar.segment(k * n_d_, n_d_) = demand_forecast.col(k);

    Vector b = problem_.qp.b_eq;
    b.segment(problem_.layout.row_u_ini, m * cfg_.t_ini) = window_.u_stacked();
    b.segment(problem_.layout.row_y_ini, blocks_.output_dim * cfg_.t_ini) =
        window_.y_stacked();
    if (problem_.layout.demand_rows > 0)
      b.segment(problem_.layout.row_demand, problem_.layout.demand_rows) = d_bar;
    solver_->set_equality_rhs(b);

    if (demand_in_cost_) {
      Vector u_ref = u_ref_;
      for (int k = 0; k < cfg_.t_f; ++k)
        u_ref.segment(k * m + l, n_d_) = demand_forecast.col(k);
      Vector q = problem_.qp.q;
      for (int k = 0; k < cfg_.t_f; ++k)
        q.segment(problem_.layout.u_at + k * m, m) =
            -2.0 * cfg_.r_weight * u_ref.segment(k * m, m);
      solver_->set_linear_cost(q);
    }

    if (warm_x_.size() > 0) solver_->set_warm_start(warm_x_, warm_y_);
    QpSolution sol = solver_->solve();

    Plan out;
    out.diag.status = sol.status;
    out.diag.iterations = sol.iterations;
    out.diag.primal_residual = sol.primal_residual;
    out.diag.dual_residual = sol.dual_residual;
    out.diag.degraded = sol.status != QpStatus::optimal;

    out.lambda = Matrix(l, cfg_.apply_steps);
    out.input_plan = Matrix(m, cfg_.t_f);
    out.output_plan = Vector::Zero(blocks_.output_dim * cfg_.t_f);
    if (out.diag.degraded) {
      // Fall back to the static reference plan.
      for (int k = 0; k < cfg_.apply_steps; ++k) out.lambda.col(k) = lambda_ref_;
      for (int k = 0; k < cfg_.t_f; ++k) {
        out.input_plan.col(k).head(l) = lambda_ref_;
        if (n_d_ > 0) out.input_plan.col(k).tail(n_d_) = demand_forecast.col(k);
      }
      warm_x_.resize(0);
      return out;
    }

    warm_x_ = sol.x;
    warm_y_ = Vector(sol.dual_eq.size() + sol.dual_bounds.size());
    warm_y_ << sol.dual_eq, sol.dual_bounds;

    for (int k = 0; k < cfg_.t_f; ++k)
      out.input_plan.col(k) = sol.x.segment(problem_.layout.u_at + k * m, m);
    out.output_plan = sol.x.segment(problem_.layout.y_at, problem_.layout.num_y);
    for (int k = 0; k < cfg_.apply_steps; ++k)
      out.lambda.col(k) = out.input_plan.col(k)
                              .head(l)
                              .cwiseMax(cfg_.lambda_min)
                              .cwiseMin(cfg_.lambda_max);
    return out;
  }

 private:
  DeepcConfig cfg_;
  HankelBlocks blocks_;
  RecentWindow window_;
  Vector lambda_ref_, y_ref_, u_ref_;
  InputConstraintSet cons_;
  int n_d_ = 0;
  bool demand_in_cost_ = false;
  DeepcProblem problem_;
  std::optional<AdmmQpSolver> solver_;
  Vector warm_x_, warm_y_;
};

}  // namespace percon
