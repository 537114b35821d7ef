#pragma once

#include <random>

#include "percon/analysis.hpp"
#include "percon/deepc.hpp"
#include "percon/mpc.hpp"
#include "percon/plant.hpp"
#include "percon/run_record.hpp"
#include "percon/scenario.hpp"
#include "percon/trajectory.hpp"

namespace percon {

enum class ControllerKind { baseline, mpc, deepc };

inline const char* to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::baseline: return "baseline";
    case ControllerKind::mpc: return "mpc";
    case ControllerKind::deepc: return "deepc";
  }
  return "?";
}

inline ControllerKind controller_from_string(const std::string& s) {
  if (s == "baseline") return ControllerKind::baseline;
  if (s == "mpc") return ControllerKind::mpc;
  if (s == "deepc") return ControllerKind::deepc;
  throw ConfigError("unknown controller '" + s + "'");
}

namespace detail {

/// Demand estimate the controllers work with: the profile averaged over the
/// forecast block containing the cycle. Block length one reproduces the exact
/// per-cycle average.
inline Matrix demand_estimate(const ScenarioConfig& cfg, const DemandProfile& profile,
                              int cycle) {
  const int block = std::max(1, cfg.sim.forecast_block_cycles);
  const int c0 = (cycle / block) * block;
  const double t0 = c0 * cfg.sim.duty_cycle_s;
  return profile.average_rate(t0, t0 + block * cfg.sim.duty_cycle_s);
}

/// Input coordinates the controllers see for one duty cycle: the applied
/// splits stacked over the demand estimate.
inline Vector cycle_input(const ScenarioConfig& cfg, const DemandProfile& profile,
                          const Vector& lambda, int cycle) {
  const int n = cfg.network.num_regions();
  Matrix q = demand_estimate(cfg, profile, cycle);
  Vector u(lambda.size() + n * n);
  u.head(lambda.size()) = lambda;
  for (int i = 0; i < n; ++i)
    for (int dest = 0; dest < n; ++dest) u(lambda.size() + i * n + dest) = q(i, dest);
  return u;
}

inline Matrix demand_forecast(const ScenarioConfig& cfg, const DemandProfile& profile,
                              int first_cycle, int horizon) {
  const int n = cfg.network.num_regions();
  Matrix f(n * n, horizon);
  for (int k = 0; k < horizon; ++k) {
    Matrix q = demand_estimate(cfg, profile, first_cycle + k);
    for (int i = 0; i < n; ++i)
      for (int dest = 0; dest < n; ++dest) f(i * n + dest, k) = q(i, dest);
  }
  return f;
}

inline std::vector<Matrix> demand_forecast_matrices(const ScenarioConfig& cfg,
                                                    const DemandProfile& profile,
                                                    int first_cycle, int horizon) {
  std::vector<Matrix> out;
  out.reserve(static_cast<size_t>(horizon));
  for (int k = 0; k < horizon; ++k)
    out.push_back(demand_estimate(cfg, profile, first_cycle + k));
  return out;
}

/// Integrates one duty cycle at the plant step and logs every substep.
inline PlantState run_cycle(const ScenarioConfig& cfg, const DemandProfile& profile,
                            PlantState state, const Vector& lambda, int cycle,
                            RunRecord* rec) {
  const double dt = cfg.sim.duty_cycle_s / cfg.sim.substeps_per_cycle;
  Matrix gates = cfg.actuators.gates(lambda, cfg.network.num_regions());
  for (int sub = 0; sub < cfg.sim.substeps_per_cycle; ++sub) {
    const double t = cycle * cfg.sim.duty_cycle_s + sub * dt;
    if (rec) {
      SensorReading r = read_sensors(state, cfg.network);
      rec->accumulation.push_back(state.accumulations());
      rec->density.push_back(r.density);
      rec->flow.push_back(r.flow);
    }
    state = step(state, cfg.network, profile.rate_at(t), gates, dt);
  }
  if (rec) rec->lambda_applied.push_back(lambda);
  return state;
}

inline RunRecord make_record(const ScenarioConfig& cfg, const std::string& controller) {
  RunRecord rec;
  rec.controller = controller;
  rec.num_regions = cfg.network.num_regions();
  rec.num_actuators = cfg.actuators.num_actuators();
  rec.plant_dt_s = cfg.sim.duty_cycle_s / cfg.sim.substeps_per_cycle;
  rec.substeps_per_cycle = cfg.sim.substeps_per_cycle;
  rec.duty_cycle_s = cfg.sim.duty_cycle_s;
  rec.rho_max = Vector(rec.num_regions);
  for (int i = 0; i < rec.num_regions; ++i)
    rec.rho_max(i) = cfg.network.regions[static_cast<size_t>(i)].n_max_veh /
                     cfg.network.regions[static_cast<size_t>(i)].lane_km;
  return rec;
}

}  // namespace detail

struct CollectResult {
  Trajectory trajectory;
  PeCheck full_signal;     // strict rank identity on col(u, y)
  int controllable_rank = 0;
  int controllable_needed = 0;
  bool excitation_ok = false;  // controllable-pair rank reaches the bound
};

/// Runs the plant under uniformly random splits held per duty cycle (demand
/// follows the scenario profile) and records the input/output trajectory the
/// predictive controller trains on. Excitation is judged on the controllable
/// pair (splits, densities); the full-signal rank is reported alongside.
inline CollectResult collect_data(const ScenarioConfig& cfg, int steps,
                                  std::uint64_t seed) {
  cfg.validate();
  const int depth = cfg.deepc.t_ini + cfg.deepc.t_f;
  if (steps < depth)
    throw ArgumentError("collect: need at least t_ini + t_f steps");
  const int n = cfg.network.num_regions();
  const int l = cfg.actuators.num_actuators();
  DemandProfile profile = cfg.demand_profile();

  std::mt19937_64 rng(seed);
  Vector lo = cfg.actuators.lower_bounds(), hi = cfg.actuators.upper_bounds();
  if (cfg.deepc.excitation_width > 0.0) {
    Vector mid = cfg.actuators.defaults();
    lo = lo.cwiseMax((mid.array() - cfg.deepc.excitation_width).matrix());
    hi = hi.cwiseMin((mid.array() + cfg.deepc.excitation_width).matrix());
  }

  Matrix u_log(l + n * n, steps);
  Matrix y_log(n, steps);
  PlantState state = PlantState::empty(n);
  for (int c = 0; c < steps; ++c) {
    Vector lambda(l);
    for (int a = 0; a < l; ++a) {
      std::uniform_real_distribution<double> dist(lo(a), hi(a));
      lambda(a) = dist(rng);
    }
    state = detail::run_cycle(cfg, profile, state, lambda, c, nullptr);
    SensorReading r = read_sensors(state, cfg.network);
    u_log.col(c) = detail::cycle_input(cfg, profile, lambda, c);
    y_log.col(c) = r.density;
  }

  Matrix w(u_log.rows() + y_log.rows(), steps);
  w << u_log, y_log;
  CollectResult out{Trajectory(w, static_cast<int>(u_log.rows())), {}, 0, 0, false};
  out.full_signal =
      check_generalized_pe(build_hankel(w, depth), static_cast<int>(u_log.rows()),
                           cfg.pe_order());

  Matrix w_ctrl(l + n, steps);
  w_ctrl << u_log.topRows(l), y_log;
  out.controllable_rank = numeric_rank(build_hankel(w_ctrl, depth).entries);
  out.controllable_needed = l * depth + cfg.pe_order();
  out.excitation_ok = out.controllable_rank >= out.controllable_needed;
  return out;
}

struct RunOptions {
  int period_multiplier = 1;  // recompute every this many duty cycles
  std::optional<Trajectory> data;          // offline data, required for deepc
  std::optional<Vector> rho_cr_override;   // reference densities
  std::vector<MfdEstimate> fitted_mfd;     // estimated curves for the flow model
  QpSettings deepc_settings;
};

/// Closed loop over the scenario horizon. The baseline applies the static
/// splits; the predictive controllers replan every period_multiplier duty
/// cycles and hold their splits in between.
inline RunRecord run_closed_loop(const ScenarioConfig& cfg, ControllerKind kind,
                                 const RunOptions& opts = {}) {
  cfg.validate();
  const int n = cfg.network.num_regions();
  const int l = cfg.actuators.num_actuators();
  const int period = std::max(1, opts.period_multiplier);
  DemandProfile profile = cfg.demand_profile();
  RunRecord rec = detail::make_record(cfg, to_string(kind));
  rec.demand_total_veh = profile.total_vehicles();

  Vector lambda_ref = cfg.actuators.defaults();
  Vector rho_cr = opts.rho_cr_override ? *opts.rho_cr_override : cfg.reference_densities();
  if (rho_cr.size() != n) throw ConfigError("run: reference density size mismatch");

  std::optional<DeepcController> deepc_ctrl;
  std::optional<MpcController> mpc_ctrl;
  int t_f = cfg.deepc.t_f;
  if (kind == ControllerKind::deepc) {
    if (!opts.data) throw ConfigError("run: the predictive controller needs offline data");
    // The horizon stays a whole number of replanning periods.
    t_f = ((cfg.deepc.t_f + period - 1) / period) * period;
    DeepcConfig dc;
    dc.t_ini = cfg.deepc.t_ini;
    dc.t_f = t_f;
    dc.duty_cycle_steps = period;
    dc.apply_steps = period;
    dc.proj_penalty = cfg.deepc.proj_penalty;
    dc.g_l1_penalty = cfg.deepc.g_l1_penalty;
    dc.slack_l1_penalty = cfg.deepc.slack_l1_penalty;
    dc.q_weight = cfg.deepc.q_weight * Matrix::Identity(n, n);
    if (!cfg.deepc.q_weight_per_region.empty()) {
      if (static_cast<int>(cfg.deepc.q_weight_per_region.size()) != n)
        throw ConfigError("run: per-region output weights must cover every region");
      dc.q_weight = Matrix::Zero(n, n);
      for (int i = 0; i < n; ++i)
        dc.q_weight(i, i) = cfg.deepc.q_weight_per_region[static_cast<size_t>(i)];
    }
    dc.r_weight = Matrix::Zero(l + n * n, l + n * n);
    dc.r_weight.topLeftCorner(l, l) = cfg.deepc.r_weight * Matrix::Identity(l, l);
    dc.lambda_min = cfg.actuators.lower_bounds();
    dc.lambda_max = cfg.actuators.upper_bounds();
    dc.rho_max = rec.rho_max;
    HankelBlocks blocks = split_past_future(*opts.data, dc.t_ini, dc.t_f);
    deepc_ctrl.emplace(dc, std::move(blocks), rho_cr, lambda_ref, opts.deepc_settings);
  } else if (kind == ControllerKind::mpc) {
    MpcConfig mc;
    mc.horizon = cfg.mpc.horizon;
    mc.pwa_pieces = cfg.mpc.pwa_pieces;
    mc.actuator_flow = cfg.mpc.assignment;
    mc.fitted_mfd = opts.fitted_mfd;
    mpc_ctrl.emplace(cfg.network, cfg.actuators, mc);
  }

  PlantState state = PlantState::empty(n);
  Matrix planned;  // columns queued for the coming cycles
  int planned_at = 0;
  Vector mpc_hold;
  for (int c = 0; c < cfg.sim.horizon_cycles; ++c) {
    Vector lambda = lambda_ref;
    if (kind == ControllerKind::mpc) {
      if (c % period == 0) {
        MpcStepDiag diag;
        mpc_hold = mpc_ctrl->step(
            state,
            detail::demand_forecast_matrices(cfg, profile, c, cfg.mpc.horizon),
            cfg.sim.duty_cycle_s, &diag);
        rec.solver_log.push_back({c, to_string(diag.status), diag.iterations,
                                  diag.primal_residual, diag.dual_residual,
                                  diag.degraded});
      }
      if (mpc_hold.size() == l) lambda = mpc_hold;
    } else if (kind == ControllerKind::deepc && deepc_ctrl->ready()) {
      if (planned.cols() == 0 || planned_at >= planned.cols()) {
        auto plan = deepc_ctrl->plan(detail::demand_forecast(cfg, profile, c, t_f));
        rec.solver_log.push_back({c, to_string(plan.diag.status), plan.diag.iterations,
                                  plan.diag.primal_residual, plan.diag.dual_residual,
                                  plan.diag.degraded});
        planned = plan.lambda;
        planned_at = 0;
      }
      lambda = planned.col(planned_at++);
    }

    state = detail::run_cycle(cfg, profile, state, lambda, c, &rec);
    if (deepc_ctrl) {
      SensorReading r = read_sensors(state, cfg.network);
      deepc_ctrl->observe(detail::cycle_input(cfg, profile, lambda, c), r.density);
    }
  }

  rec.time_spent_veh_s = state.time_spent_veh_s;
  rec.trips_completed = state.trips_completed;
  return rec;
}

}  // namespace percon
