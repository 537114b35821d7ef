#include <catch2/catch.hpp>

#include <random>

#include "percon/deepc.hpp"
#include "percon/state_space.hpp"
#include "support/control_oracles.hpp"
#include "support/lti_fixtures.hpp"

using namespace percon;

namespace {

struct LtiData {
  StateSpaceModel sys;
  Matrix u_d, y_d;
  HankelBlocks blocks;
};

LtiData collect_lti_data(int t_ini, int t_f, int length, unsigned seed) {
  LtiData d;
  d.sys = positive_test_system();
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> split(0.1, 0.9);
  d.u_d = Matrix(1, length);
  for (int t = 0; t < length; ++t) d.u_d(0, t) = split(rng);
  Vector x0(2);
  x0 << 1.0, 0.5;
  d.y_d = simulate_lti(d.sys, x0, d.u_d);
  d.blocks = split_past_future(d.u_d, d.y_d, t_ini, t_f);
  return d;
}

DeepcConfig lti_config(int t_ini, int t_f, double r_diag = 0.1) {
  DeepcConfig cfg;
  cfg.t_ini = t_ini;
  cfg.t_f = t_f;
  cfg.proj_penalty = 0.0;
  cfg.g_l1_penalty = 0.0;
  cfg.slack_l1_penalty = 0.0;
  cfg.q_weight = Matrix::Identity(1, 1);
  cfg.r_weight = r_diag * Matrix::Identity(1, 1);
  cfg.lambda_min = Vector::Constant(1, 0.02);
  cfg.lambda_max = Vector::Constant(1, 0.97);
  cfg.rho_max = Vector::Constant(1, kInf);
  return cfg;
}

QpSettings tight_settings() {
  QpSettings st;
  st.eps_abs = 1e-9;
  st.eps_rel = 0.0;
  return st;
}

}  // namespace

TEST_CASE("projection of a full-rank square stack is the identity", "[deepc]") {
  HankelBlocks b;
  b.t_ini = 1;
  b.t_f = 1;
  b.input_dim = 1;
  b.output_dim = 1;
  b.u_past = Matrix::Zero(1, 3);
  b.u_past(0, 0) = 1.0;
  b.y_past = Matrix::Zero(1, 3);
  b.y_past(0, 1) = 1.0;
  b.u_future = Matrix::Zero(1, 3);
  b.u_future(0, 2) = 1.0;
  b.y_future = Matrix::Zero(1, 3);
  Matrix pi = build_projection(b);
  REQUIRE((pi - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("projection of the zero stack is zero", "[deepc]") {
  HankelBlocks b;
  b.t_ini = 1;
  b.t_f = 1;
  b.input_dim = 1;
  b.output_dim = 1;
  b.u_past = Matrix::Zero(1, 4);
  b.y_past = Matrix::Zero(1, 4);
  b.u_future = Matrix::Zero(1, 4);
  b.y_future = Matrix::Zero(1, 4);
  Matrix pi = build_projection(b);
  REQUIRE(pi.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("projection is idempotent and fixes the row space", "[deepc]") {
  std::mt19937 rng(3);
  HankelBlocks b;
  b.t_ini = 2;
  b.t_f = 2;
  b.input_dim = 1;
  b.output_dim = 1;
  b.u_past = random_matrix(2, 10, rng);
  b.y_past = random_matrix(2, 10, rng);
  b.u_future = random_matrix(2, 10, rng);
  b.y_future = random_matrix(2, 10, rng);
  Matrix pi = build_projection(b);
  REQUIRE((pi * pi - pi).cwiseAbs().maxCoeff() < 1e-10);
  Matrix z(6, 10);
  z << b.u_past, b.y_past, b.u_future;
  REQUIRE((pi * z.transpose() - z.transpose()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("hold constraints tie splits within each duty cycle", "[deepc]") {
  InputConstraintSet cs = build_input_constraints(2, 1, 4, 2);
  // Two actuators, two windows, one tie per window per actuator.
  int nonzero_rows = 0;
  for (int r = 0; r < cs.hold.rows(); ++r)
    if (cs.hold.row(r).cwiseAbs().maxCoeff() > 0) ++nonzero_rows;
  REQUIRE(nonzero_rows == 4);

  // A compliant input satisfies M u = 0, a drifting one does not.
  const int m = 3;
  Vector u = Vector::Zero(m * 4);
  for (int k = 0; k < 4; ++k) {
    u(k * m + 0) = k < 2 ? 0.3 : 0.6;
    u(k * m + 1) = k < 2 ? 0.8 : 0.2;
    u(k * m + 2) = 1.0 * k;  // demand coordinate, unconstrained by the hold
  }
  REQUIRE((cs.hold * u).cwiseAbs().maxCoeff() == 0.0);
  u(1 * m + 0) = 0.9;
  REQUIRE((cs.hold * u).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("planned splits respect the hold pattern", "[deepc]") {
  LtiData d = collect_lti_data(3, 4, 90, 11);
  DeepcConfig cfg = lti_config(3, 4);
  cfg.duty_cycle_steps = 2;
  DeepcController ctrl(cfg, d.blocks, Vector::Constant(1, 1.1), Vector::Constant(1, 0.5),
                       tight_settings());
  for (int t = 0; t < 3; ++t)
    ctrl.observe(d.u_d.col(t), d.y_d.col(t));
  auto plan = ctrl.plan(Matrix(0, 4));
  REQUIRE(plan.diag.status == QpStatus::optimal);
  REQUIRE(plan.input_plan(0, 0) == Approx(plan.input_plan(0, 1)).margin(5e-6));
  REQUIRE(plan.input_plan(0, 2) == Approx(plan.input_plan(0, 3)).margin(5e-6));
}

TEST_CASE("demand coordinates are pinned to the forecast", "[deepc]") {
  // Two-input system: one split, one exogenous demand.
  StateSpaceModel sys;
  sys.A = Matrix::Constant(1, 1, 0.8);
  sys.B = Matrix(1, 2);
  sys.B << 0.4, 0.3;
  sys.C = Matrix::Identity(1, 1);
  sys.D = Matrix::Zero(1, 2);

  std::mt19937 rng(21);
  std::uniform_real_distribution<double> split(0.1, 0.9);
  std::uniform_real_distribution<double> load(0.2, 0.8);
  const int T = 80;
  Matrix u_d(2, T);
  for (int t = 0; t < T; ++t) {
    u_d(0, t) = split(rng);
    u_d(1, t) = load(rng);  // rich demand so any forecast window is representable
  }
  Matrix y_d = simulate_lti(sys, Vector::Constant(1, 2.0), u_d);
  HankelBlocks blocks = split_past_future(u_d, y_d, 3, 4);

  DeepcConfig cfg;
  cfg.t_ini = 3;
  cfg.t_f = 4;
  cfg.proj_penalty = 0.0;
  cfg.g_l1_penalty = 0.0;
  cfg.q_weight = Matrix::Identity(1, 1);
  cfg.r_weight = Matrix::Zero(2, 2);
  cfg.r_weight(0, 0) = 0.1;
  cfg.lambda_min = Vector::Constant(1, 0.02);
  cfg.lambda_max = Vector::Constant(1, 0.97);
  cfg.rho_max = Vector::Constant(1, kInf);

  DeepcController ctrl(cfg, blocks, Vector::Constant(1, 2.2), Vector::Constant(1, 0.5),
                       tight_settings());
  for (int t = 0; t < 3; ++t) ctrl.observe(u_d.col(t), y_d.col(t));

  Matrix forecast(1, 4);
  forecast << 0.42, 0.55, 0.61, 0.37;
  auto plan = ctrl.plan(forecast);
  REQUIRE(plan.diag.status == QpStatus::optimal);
  for (int k = 0; k < 4; ++k)
    REQUIRE(plan.input_plan(1, k) == Approx(forecast(0, k)).margin(5e-6));
}

TEST_CASE("with zero regularization a reachable reference is tracked exactly",
          "[deepc]") {
  const int t_ini = 3, t_f = 4;
  LtiData d = collect_lti_data(t_ini, t_f, 100, 7);

  // A genuine continuation of the recorded data is reachable.
  Vector x = Vector::Zero(2);
  Matrix u_hist(1, t_ini);
  for (int t = 0; t < 40; ++t) x = d.sys.A * x + d.sys.B * Vector::Constant(1, 0.5);
  Vector x_window = x;
  Matrix y_hist(1, t_ini);
  for (int t = 0; t < t_ini; ++t) {
    u_hist(0, t) = 0.5;
    y_hist.col(t) = d.sys.C * x_window + d.sys.D * u_hist.col(t);
    x_window = d.sys.A * x_window + d.sys.B * u_hist.col(t);
  }
  Matrix u_target = Matrix::Constant(1, t_f, 0.55);
  Matrix y_target = simulate_lti(d.sys, x_window, u_target);

  DeepcConfig cfg = lti_config(t_ini, t_f, 0.5);
  Vector y_ref(t_f), u_ref(t_f);
  for (int k = 0; k < t_f; ++k) {
    y_ref(k) = y_target(0, k);
    u_ref(k) = 0.55;
  }
  InputConstraintSet cs = build_input_constraints(1, 0, t_f, 1);
  DeepcProblem problem = assemble_deepc(
      cfg, d.blocks, Eigen::Map<Vector>(u_hist.data(), t_ini),
      Eigen::Map<Vector>(y_hist.data(), t_ini), y_ref, u_ref, cs);
  QpSolution sol = solve(problem.qp, tight_settings());
  REQUIRE(sol.status == QpStatus::optimal);
  for (int k = 0; k < t_f; ++k) {
    REQUIRE(sol.x(problem.layout.y_at + k) == Approx(y_target(0, k)).margin(1e-6));
    REQUIRE(sol.x(problem.layout.u_at + k) == Approx(0.55).margin(1e-6));
  }

  // The model-based plan from the same state agrees.
  FiniteHorizonTracker oracle(d.sys, t_f, cfg.q_weight, cfg.r_weight);
  Vector u_oracle = oracle.plan(x_window, y_ref, u_ref);
  for (int k = 0; k < t_f; ++k)
    REQUIRE(sol.x(problem.layout.u_at + k) == Approx(u_oracle(k)).margin(1e-6));
}

TEST_CASE("steady state replanning returns the same inputs", "[deepc]") {
  const int t_ini = 3, t_f = 4;
  LtiData d = collect_lti_data(t_ini, t_f, 90, 13);
  DeepcConfig cfg = lti_config(t_ini, t_f);
  const double y_ss = dc_gain_output(d.sys, 0.5);
  DeepcController ctrl(cfg, d.blocks, Vector::Constant(1, y_ss),
                       Vector::Constant(1, 0.5), tight_settings());

  // Drive the plant to the steady state of the reference split.
  Vector x = Vector::Zero(2);
  for (int t = 0; t < 200; ++t) x = d.sys.A * x + d.sys.B * Vector::Constant(1, 0.5);
  for (int t = 0; t < t_ini; ++t) {
    Vector u = Vector::Constant(1, 0.5);
    Vector y = d.sys.C * x + d.sys.D * u;
    ctrl.observe(u, y);
    x = d.sys.A * x + d.sys.B * u;
  }

  Vector first, second;
  {
    auto plan = ctrl.plan(Matrix(0, t_f));
    REQUIRE(plan.diag.status == QpStatus::optimal);
    first = plan.lambda.col(0);
    Vector u = first;
    Vector y = d.sys.C * x + d.sys.D * u;
    ctrl.observe(u, y);
    x = d.sys.A * x + d.sys.B * u;
  }
  {
    auto plan = ctrl.plan(Matrix(0, t_f));
    second = plan.lambda.col(0);
  }
  REQUIRE((first - second).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("solver failure falls back to the reference split", "[deepc]") {
  LtiData d = collect_lti_data(3, 4, 90, 17);
  DeepcConfig cfg = lti_config(3, 4);
  QpSettings crippled;
  crippled.max_iter = 1;
  crippled.polish = false;
  DeepcController ctrl(cfg, d.blocks, Vector::Constant(1, 1.0),
                       Vector::Constant(1, 0.44), crippled);
  for (int t = 0; t < 3; ++t) ctrl.observe(d.u_d.col(t), d.y_d.col(t));
  auto plan = ctrl.plan(Matrix(0, 4));
  REQUIRE(plan.diag.degraded);
  REQUIRE(plan.lambda(0, 0) == 0.44);
}

TEST_CASE("applied splits always stay inside their box", "[deepc]") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> ref(-3.0, 5.0);
  LtiData d = collect_lti_data(3, 4, 90, 29);
  for (int trial = 0; trial < 6; ++trial) {
    DeepcConfig cfg = lti_config(3, 4);
    DeepcController ctrl(cfg, d.blocks, Vector::Constant(1, ref(rng)),
                         Vector::Constant(1, 0.5), tight_settings());
    for (int t = 0; t < 3; ++t) ctrl.observe(d.u_d.col(t), d.y_d.col(t));
    auto plan = ctrl.plan(Matrix(0, 4));
    for (int k = 0; k < plan.lambda.cols(); ++k) {
      REQUIRE(plan.lambda(0, k) >= cfg.lambda_min(0));
      REQUIRE(plan.lambda(0, k) <= cfg.lambda_max(0));
    }
  }
}

TEST_CASE("the slack keeps inconsistent windows feasible", "[deepc]") {
  LtiData d = collect_lti_data(3, 4, 90, 31);
  DeepcConfig cfg = lti_config(3, 4);
  cfg.slack_l1_penalty = 5.0;
  DeepcController ctrl(cfg, d.blocks, Vector::Constant(1, 1.2),
                       Vector::Constant(1, 0.5), tight_settings());
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> noise(-2.0, 2.0);
  for (int t = 0; t < 3; ++t)
    ctrl.observe(d.u_d.col(t), Vector::Constant(1, noise(rng)));
  auto plan = ctrl.plan(Matrix(0, 4));
  REQUIRE(plan.diag.status == QpStatus::optimal);
}

TEST_CASE("closed loop matches the model-based controller on the noiseless plant",
          "[deepc]") {
  const int t_ini = 3, t_f = 4, steps = 15;
  LtiData d = collect_lti_data(t_ini, t_f, 110, 37);
  DeepcConfig cfg = lti_config(t_ini, t_f);
  const double y_ss = dc_gain_output(d.sys, 0.5);
  const double y_ref = 1.05 * y_ss;  // keeps the optimum inside the split box

  DeepcController ctrl(cfg, d.blocks, Vector::Constant(1, y_ref),
                       Vector::Constant(1, 0.5), tight_settings());
  FiniteHorizonTracker oracle(d.sys, t_f, cfg.q_weight, cfg.r_weight);
  Vector y_ref_stack = Vector::Constant(t_f, y_ref);
  Vector u_ref_stack = Vector::Constant(t_f, 0.5);

  Vector x_deepc = Vector::Zero(2), x_model = Vector::Zero(2);
  for (int t = 0; t < 300; ++t) {
    x_deepc = d.sys.A * x_deepc + d.sys.B * Vector::Constant(1, 0.5);
  }
  x_model = x_deepc;
  for (int t = 0; t < t_ini; ++t) {
    Vector u = Vector::Constant(1, 0.5);
    ctrl.observe(u, d.sys.C * x_deepc + d.sys.D * u);
    x_deepc = d.sys.A * x_deepc + d.sys.B * u;
    x_model = d.sys.A * x_model + d.sys.B * u;
  }

  for (int t = 0; t < steps; ++t) {
    auto plan = ctrl.plan(Matrix(0, t_f));
    REQUIRE(plan.diag.status == QpStatus::optimal);
    Vector u_deepc = plan.lambda.col(0);
    Vector y_deepc = d.sys.C * x_deepc + d.sys.D * u_deepc;
    ctrl.observe(u_deepc, y_deepc);
    x_deepc = d.sys.A * x_deepc + d.sys.B * u_deepc;

    Vector u_model = oracle.plan(x_model, y_ref_stack, u_ref_stack).head(1);
    Vector y_model = d.sys.C * x_model + d.sys.D * u_model;
    x_model = d.sys.A * x_model + d.sys.B * u_model;

    CAPTURE(t);
    REQUIRE(std::abs(y_deepc(0) - y_model(0)) <= 1e-4);
  }
}
