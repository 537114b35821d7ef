#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "percon/common.hpp"
#include "percon/csv.hpp"

namespace percon {

struct SolverDiag {
  int cycle = 0;
  std::string status;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  bool degraded = false;
};

/// Everything a closed-loop run leaves behind: plant state sampled at every
/// integration substep (before the update), applied splits per duty cycle,
/// solver diagnostics, and the aggregate counters.
struct RunRecord {
  std::string controller;
  int num_regions = 0;
  int num_actuators = 0;
  double plant_dt_s = 0.0;
  int substeps_per_cycle = 0;
  double duty_cycle_s = 0.0;
  Vector rho_max;  // per region [veh/km]

  std::vector<Vector> accumulation;  // per substep, veh
  std::vector<Vector> density;       // per substep, veh/km
  std::vector<Vector> flow;          // per substep, veh/h
  std::vector<Vector> lambda_applied;  // per duty cycle
  std::vector<SolverDiag> solver_log;

  double time_spent_veh_s = 0.0;
  double trips_completed = 0.0;
  double demand_total_veh = 0.0;
};

inline void write_run_record(const std::string& dir, const RunRecord& rec) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);

  CsvWriter states(dir + "/states.csv");
  states.row({"k", "region", "n", "rho", "phi"});
  for (size_t k = 0; k < rec.accumulation.size(); ++k) {
    for (int i = 0; i < rec.num_regions; ++i) {
      states.row({std::to_string(k), std::to_string(i),
                  format_double(rec.accumulation[k](i)), format_double(rec.density[k](i)),
                  format_double(rec.flow[k](i))});
    }
  }

  CsvWriter inputs(dir + "/inputs.csv");
  inputs.row({"k", "actuator", "lambda"});
  for (size_t c = 0; c < rec.lambda_applied.size(); ++c) {
    const long k = static_cast<long>(c) * rec.substeps_per_cycle;
    for (int a = 0; a < rec.num_actuators; ++a) {
      inputs.row({std::to_string(k), std::to_string(a),
                  format_double(rec.lambda_applied[c](a))});
    }
  }

  CsvWriter solver(dir + "/solver.csv");
  solver.row({"cycle", "status", "iterations", "primal_residual", "dual_residual",
              "degraded"});
  for (const auto& d : rec.solver_log) {
    solver.row({std::to_string(d.cycle), d.status, std::to_string(d.iterations),
                format_double(d.primal_residual), format_double(d.dual_residual),
                d.degraded ? "1" : "0"});
  }

  CsvWriter summary(dir + "/run_summary.csv");
  summary.row({"key", "value"});
  summary.row({"controller", rec.controller});
  summary.row({"num_regions", std::to_string(rec.num_regions)});
  summary.row({"num_actuators", std::to_string(rec.num_actuators)});
  summary.row({"plant_dt_s", format_double(rec.plant_dt_s)});
  summary.row({"substeps_per_cycle", std::to_string(rec.substeps_per_cycle)});
  summary.row({"duty_cycle_s", format_double(rec.duty_cycle_s)});
  summary.row({"time_spent_veh_s", format_double(rec.time_spent_veh_s)});
  summary.row({"trips_completed", format_double(rec.trips_completed)});
  summary.row({"demand_total_veh", format_double(rec.demand_total_veh)});
  for (int i = 0; i < rec.rho_max.size(); ++i)
    summary.row({"rho_max_" + std::to_string(i), format_double(rec.rho_max(i))});
}

inline RunRecord read_run_record(const std::string& dir) {
  RunRecord rec;

  CsvTable summary = read_csv(dir + "/run_summary.csv");
  const int ck = summary.column("key"), cv = summary.column("value");
  std::vector<double> rho_max;
  for (size_t r = 0; r < summary.rows.size(); ++r) {
    const std::string& key = summary.rows[r][ck];
    const std::string& val = summary.rows[r][cv];
    const int line = static_cast<int>(r) + 2;
    if (key == "controller") rec.controller = val;
    else if (key == "num_regions") rec.num_regions = static_cast<int>(parse_long(val, dir, line));
    else if (key == "num_actuators") rec.num_actuators = static_cast<int>(parse_long(val, dir, line));
    else if (key == "plant_dt_s") rec.plant_dt_s = parse_double(val, dir, line);
    else if (key == "substeps_per_cycle") rec.substeps_per_cycle = static_cast<int>(parse_long(val, dir, line));
    else if (key == "duty_cycle_s") rec.duty_cycle_s = parse_double(val, dir, line);
    else if (key == "time_spent_veh_s") rec.time_spent_veh_s = parse_double(val, dir, line);
    else if (key == "trips_completed") rec.trips_completed = parse_double(val, dir, line);
    else if (key == "demand_total_veh") rec.demand_total_veh = parse_double(val, dir, line);
    else if (key.rfind("rho_max_", 0) == 0) rho_max.push_back(parse_double(val, dir, line));
  }
  rec.rho_max = Eigen::Map<Vector>(rho_max.data(), static_cast<Eigen::Index>(rho_max.size()));

  CsvTable states = read_csv(dir + "/states.csv");
  {
    const int cs = states.column("k"), cr = states.column("region");
    const int cn = states.column("n"), cd = states.column("rho"), cf = states.column("phi");
    size_t steps = states.rows.size() / static_cast<size_t>(std::max(1, rec.num_regions));
    rec.accumulation.assign(steps, Vector::Zero(rec.num_regions));
    rec.density.assign(steps, Vector::Zero(rec.num_regions));
    rec.flow.assign(steps, Vector::Zero(rec.num_regions));
    for (size_t r = 0; r < states.rows.size(); ++r) {
      const int line = static_cast<int>(r) + 2;
      const auto k = static_cast<size_t>(parse_long(states.rows[r][cs], dir, line));
      const auto region = static_cast<int>(parse_long(states.rows[r][cr], dir, line));
      rec.accumulation[k](region) = parse_double(states.rows[r][cn], dir, line);
      rec.density[k](region) = parse_double(states.rows[r][cd], dir, line);
      rec.flow[k](region) = parse_double(states.rows[r][cf], dir, line);
    }
  }

  CsvTable inputs = read_csv(dir + "/inputs.csv");
  {
    const int ca = inputs.column("actuator"), cl = inputs.column("lambda");
    size_t cycles = inputs.rows.size() / static_cast<size_t>(std::max(1, rec.num_actuators));
    rec.lambda_applied.assign(cycles, Vector::Zero(rec.num_actuators));
    size_t at = 0;
    for (size_t c = 0; c < cycles; ++c) {
      for (int a = 0; a < rec.num_actuators; ++a, ++at) {
        const int line = static_cast<int>(at) + 2;
        const auto act = static_cast<int>(parse_long(inputs.rows[at][ca], dir, line));
        rec.lambda_applied[c](act) = parse_double(inputs.rows[at][cl], dir, line);
      }
    }
  }

  CsvTable solver = read_csv(dir + "/solver.csv");
  {
    const int cc = solver.column("cycle"), cs = solver.column("status");
    const int ci = solver.column("iterations"), cp = solver.column("primal_residual");
    const int cd = solver.column("dual_residual"), cg = solver.column("degraded");
    for (size_t r = 0; r < solver.rows.size(); ++r) {
      const int line = static_cast<int>(r) + 2;
      SolverDiag d;
      d.cycle = static_cast<int>(parse_long(solver.rows[r][cc], dir, line));
      d.status = solver.rows[r][cs];
      d.iterations = static_cast<int>(parse_long(solver.rows[r][ci], dir, line));
      d.primal_residual = parse_double(solver.rows[r][cp], dir, line);
      d.dual_residual = parse_double(solver.rows[r][cd], dir, line);
      d.degraded = solver.rows[r][cg] == "1";
      rec.solver_log.push_back(std::move(d));
    }
  }
  return rec;
}

}  // namespace percon
