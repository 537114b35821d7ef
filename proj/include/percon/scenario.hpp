#pragma once

#include <nlohmann/json.hpp>

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "percon/common.hpp"
#include "percon/plant.hpp"

namespace percon {

using Json = nlohmann::ordered_json;

struct DemandSpec {
  std::vector<TwoPeakParams> two_peak;
  struct Constant {
    int origin = 0;
    int destination = 0;
    double rate_veh_s = 0.0;
    double start_s = 0.0;
    double end_s = 0.0;
  };
  std::vector<Constant> constant;
};

struct DeepcSpec {
  int t_ini = 5;
  int t_f = 4;
  double proj_penalty = 1.0;
  double g_l1_penalty = 1.0;
  double slack_l1_penalty = 0.0;
  double q_weight = 1.0;
  std::vector<double> q_weight_per_region;  // overrides the scalar when set
  double r_weight = 2.0;
  int collect_steps = 160;
  double excitation_width = 0.0;  // half-width around the static split; 0 = full box
  int pe_order_estimate = 0;  // 0 means "one state per region"
};

struct MpcSpec {
  int horizon = 4;
  int pwa_pieces = 10;
  std::vector<std::pair<int, int>> assignment;  // per actuator: (from, to)
};

struct SimSpec {
  double duty_cycle_s = 90.0;
  int substeps_per_cycle = 18;
  int horizon_cycles = 120;
  std::uint64_t seed = 42;
  // Demand knowledge granularity: the controllers (and the recorded data)
  // carry block-averaged demand estimates over this many duty cycles.
  int forecast_block_cycles = 1;
};

struct SensorSpec {
  std::vector<int> per_region;
  double noise_std = 0.0;
};

/// Everything one experiment needs: the network, actuators, demand, horizons,
/// controller parameters, and seeds.
struct ScenarioConfig {
  std::string name;
  RegionNetwork network;
  ActuatorMap actuators;
  DemandSpec demand;
  SimSpec sim;
  SensorSpec sensors;
  std::vector<double> rho_cr_reference;  // optional; empty means derive
  DeepcSpec deepc;
  MpcSpec mpc;

  void validate() const {
    network.validate();
    actuators.validate(network);
    const int n = network.num_regions();
    for (const auto& p : demand.two_peak)
      if (p.origin < 0 || p.origin >= n || p.destination < 0 || p.destination >= n)
        throw ConfigError("scenario: demand references an unknown region");
    for (const auto& c : demand.constant)
      if (c.origin < 0 || c.origin >= n || c.destination < 0 || c.destination >= n)
        throw ConfigError("scenario: demand references an unknown region");
    if (!rho_cr_reference.empty() && static_cast<int>(rho_cr_reference.size()) != n)
      throw ConfigError("scenario: reference must list one density per region");
    if (sim.duty_cycle_s <= 0 || sim.substeps_per_cycle < 1 || sim.horizon_cycles < 1)
      throw ConfigError("scenario: invalid simulation timing");
    for (const auto& [act, flow] : enumerate_assignment())
      if (network.capacity_c0(flow.first, flow.second) <= 0.0)
        throw ConfigError("scenario: controller assignment uses a non-adjacent flow");
  }

  std::vector<std::pair<int, std::pair<int, int>>> enumerate_assignment() const {
    std::vector<std::pair<int, std::pair<int, int>>> out;
    for (size_t a = 0; a < mpc.assignment.size(); ++a)
      out.emplace_back(static_cast<int>(a), mpc.assignment[a]);
    return out;
  }

  DemandProfile demand_profile() const {
    DemandProfile d;
    d.num_regions = network.num_regions();
    for (const auto& p : demand.two_peak) {
      DemandProfile one = make_two_peak_demand(p, d.num_regions);
      for (auto& [od, pl] : one.series) d.series[od] = pl;
    }
    for (const auto& c : demand.constant) {
      if (c.rate_veh_s <= 0.0) continue;
      PiecewiseLinear pl;
      pl.points = {{c.start_s, c.rate_veh_s}, {c.end_s, c.rate_veh_s}};
      d.series[{c.origin, c.destination}] = pl;
    }
    return d;
  }

  /// Critical densities: the configured reference, or the abscissa of each
  /// region's production maximum when none is given.
  Vector reference_densities() const {
    const int n = network.num_regions();
    Vector ref(n);
    for (int i = 0; i < n; ++i) {
      if (!rho_cr_reference.empty()) {
        ref(i) = rho_cr_reference[static_cast<size_t>(i)];
      } else {
        const Region& r = network.regions[static_cast<size_t>(i)];
        ref(i) = r.n_max_veh / 3.0 / r.lane_km;  // argmax of n (1 - n/n_max)^2
      }
    }
    return ref;
  }

  int pe_order() const {
    return deepc.pe_order_estimate > 0 ? deepc.pe_order_estimate
                                       : network.num_regions();
  }
};

inline Json serialize_scenario(const ScenarioConfig& s) {
  Json j;
  j["name"] = s.name;
  j["regions"] = Json::array();
  for (const Region& r : s.network.regions) {
    j["regions"].push_back({{"name", r.name},
                            {"free_flow_speed_ms", r.free_flow_speed_ms},
                            {"n_max_veh", r.n_max_veh},
                            {"trip_length_m", r.trip_length_m},
                            {"lane_km", r.lane_km}});
  }
  j["capacity_veh_s"] = Json::array();
  for (int i = 0; i < s.network.num_regions(); ++i) {
    Json row = Json::array();
    for (int h = 0; h < s.network.num_regions(); ++h) row.push_back(s.network.capacity_c0(i, h));
    j["capacity_veh_s"].push_back(row);
  }
  j["routing"] = Json::array();
  for (int via = 0; via < s.network.num_regions(); ++via)
    for (int i = 0; i < s.network.num_regions(); ++i)
      for (int dest = 0; dest < s.network.num_regions(); ++dest) {
        const double share = s.network.routing[static_cast<size_t>(via)](i, dest);
        if (share > 0.0)
          j["routing"].push_back(
              {{"from", i}, {"dest", dest}, {"via", via}, {"share", share}});
      }
  j["actuators"] = Json::array();
  for (const Actuator& a : s.actuators.actuators) {
    Json flows = Json::array();
    for (const auto& f : a.flows)
      flows.push_back({{"from", f.from}, {"to", f.to}, {"weight", f.weight}});
    j["actuators"].push_back({{"name", a.name},
                              {"flows", flows},
                              {"lambda_default", a.lambda_default},
                              {"lambda_min", a.lambda_min},
                              {"lambda_max", a.lambda_max}});
  }
  j["demand"]["two_peak"] = Json::array();
  for (const auto& p : s.demand.two_peak) {
    j["demand"]["two_peak"].push_back({{"origin", p.origin},
                                       {"destination", p.destination},
                                       {"peak1_time_s", p.peak1_time_s},
                                       {"peak1_width_s", p.peak1_width_s},
                                       {"peak2_time_s", p.peak2_time_s},
                                       {"peak2_width_s", p.peak2_width_s},
                                       {"peak1_share", p.peak1_share},
                                       {"total_vehicles", p.total_vehicles}});
  }
  j["demand"]["constant"] = Json::array();
  for (const auto& c : s.demand.constant) {
    j["demand"]["constant"].push_back({{"origin", c.origin},
                                       {"destination", c.destination},
                                       {"rate_veh_s", c.rate_veh_s},
                                       {"start_s", c.start_s},
                                       {"end_s", c.end_s}});
  }
  j["sim"] = {{"duty_cycle_s", s.sim.duty_cycle_s},
              {"substeps_per_cycle", s.sim.substeps_per_cycle},
              {"horizon_cycles", s.sim.horizon_cycles},
              {"seed", s.sim.seed},
              {"forecast_block_cycles", s.sim.forecast_block_cycles}};
  j["sensors"] = {{"per_region", s.sensors.per_region}, {"noise_std", s.sensors.noise_std}};
  if (!s.rho_cr_reference.empty()) j["reference"]["rho_cr_veh_km"] = s.rho_cr_reference;
  j["deepc"] = {{"t_ini", s.deepc.t_ini},
                {"t_f", s.deepc.t_f},
                {"proj_penalty", s.deepc.proj_penalty},
                {"g_l1_penalty", s.deepc.g_l1_penalty},
                {"slack_l1_penalty", s.deepc.slack_l1_penalty},
                {"q_weight", s.deepc.q_weight},
                {"r_weight", s.deepc.r_weight},
                {"collect_steps", s.deepc.collect_steps},
                {"excitation_width", s.deepc.excitation_width},
                {"pe_order_estimate", s.deepc.pe_order_estimate}};
  if (!s.deepc.q_weight_per_region.empty())
    j["deepc"]["q_weight_per_region"] = s.deepc.q_weight_per_region;
  Json assignment = Json::array();
  for (const auto& [from, to] : s.mpc.assignment)
    assignment.push_back({{"from", from}, {"to", to}});
  j["mpc"] = {{"horizon", s.mpc.horizon},
              {"pwa_pieces", s.mpc.pwa_pieces},
              {"assignment", assignment}};
  return j;
}

inline ScenarioConfig parse_scenario(const Json& j) {
  ScenarioConfig s;
  try {
    s.name = j.value("name", "scenario");
    for (const auto& jr : j.at("regions")) {
      Region r;
      r.name = jr.value("name", "");
      r.free_flow_speed_ms = jr.at("free_flow_speed_ms").get<double>();
      r.n_max_veh = jr.at("n_max_veh").get<double>();
      r.trip_length_m = jr.at("trip_length_m").get<double>();
      r.lane_km = jr.at("lane_km").get<double>();
      s.network.regions.push_back(std::move(r));
    }
    const int n = s.network.num_regions();
    s.network.capacity_c0 = Matrix::Zero(n, n);
    const auto& cap = j.at("capacity_veh_s");
    for (int i = 0; i < n; ++i)
      for (int h = 0; h < n; ++h) s.network.capacity_c0(i, h) = cap.at(i).at(h).get<double>();
    s.network.routing.assign(static_cast<size_t>(n), Matrix::Zero(n, n));
    for (const auto& jr : j.at("routing")) {
      s.network.routing[jr.at("via").get<size_t>()](jr.at("from").get<int>(),
                                                    jr.at("dest").get<int>()) =
          jr.at("share").get<double>();
    }
    for (const auto& ja : j.value("actuators", Json::array())) {
      Actuator a;
      a.name = ja.value("name", "");
      for (const auto& jf : ja.at("flows"))
        a.flows.push_back({jf.at("from").get<int>(), jf.at("to").get<int>(),
                           jf.at("weight").get<double>()});
      a.lambda_default = ja.at("lambda_default").get<double>();
      a.lambda_min = ja.at("lambda_min").get<double>();
      a.lambda_max = ja.at("lambda_max").get<double>();
      s.actuators.actuators.push_back(std::move(a));
    }
    if (j.contains("demand")) {
      for (const auto& jp : j["demand"].value("two_peak", Json::array())) {
        TwoPeakParams p;
        p.origin = jp.at("origin").get<int>();
        p.destination = jp.at("destination").get<int>();
        p.peak1_time_s = jp.at("peak1_time_s").get<double>();
        p.peak1_width_s = jp.at("peak1_width_s").get<double>();
        p.peak2_time_s = jp.at("peak2_time_s").get<double>();
        p.peak2_width_s = jp.at("peak2_width_s").get<double>();
        p.peak1_share = jp.value("peak1_share", 0.5);
        p.total_vehicles = jp.at("total_vehicles").get<double>();
        s.demand.two_peak.push_back(p);
      }
      for (const auto& jc : j["demand"].value("constant", Json::array())) {
        DemandSpec::Constant c;
        c.origin = jc.at("origin").get<int>();
        c.destination = jc.at("destination").get<int>();
        c.rate_veh_s = jc.at("rate_veh_s").get<double>();
        c.start_s = jc.at("start_s").get<double>();
        c.end_s = jc.at("end_s").get<double>();
        s.demand.constant.push_back(c);
      }
    }
    const auto& sim = j.at("sim");
    s.sim.duty_cycle_s = sim.at("duty_cycle_s").get<double>();
    s.sim.substeps_per_cycle = sim.value("substeps_per_cycle", 18);
    s.sim.horizon_cycles = sim.at("horizon_cycles").get<int>();
    s.sim.seed = sim.value("seed", 42ULL);
    s.sim.forecast_block_cycles = sim.value("forecast_block_cycles", 1);
    if (j.contains("sensors")) {
      s.sensors.per_region = j["sensors"].value("per_region", std::vector<int>{});
      s.sensors.noise_std = j["sensors"].value("noise_std", 0.0);
    }
    if (j.contains("reference"))
      s.rho_cr_reference = j["reference"].value("rho_cr_veh_km", std::vector<double>{});
    if (j.contains("deepc")) {
      const auto& d = j["deepc"];
      s.deepc.t_ini = d.value("t_ini", 5);
      s.deepc.t_f = d.value("t_f", 4);
      s.deepc.proj_penalty = d.value("proj_penalty", 1.0);
      s.deepc.g_l1_penalty = d.value("g_l1_penalty", 1.0);
      s.deepc.slack_l1_penalty = d.value("slack_l1_penalty", 0.0);
      s.deepc.q_weight = d.value("q_weight", 1.0);
      s.deepc.q_weight_per_region =
          d.value("q_weight_per_region", std::vector<double>{});
      s.deepc.r_weight = d.value("r_weight", 2.0);
      s.deepc.collect_steps = d.value("collect_steps", 160);
      s.deepc.excitation_width = d.value("excitation_width", 0.0);
      s.deepc.pe_order_estimate = d.value("pe_order_estimate", 0);
    }
    if (j.contains("mpc")) {
      const auto& m = j["mpc"];
      s.mpc.horizon = m.value("horizon", 4);
      s.mpc.pwa_pieces = m.value("pwa_pieces", 10);
      for (const auto& ja : m.value("assignment", Json::array()))
        s.mpc.assignment.emplace_back(ja.at("from").get<int>(), ja.at("to").get<int>());
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("scenario parse: ") + e.what());
  }
  s.validate();
  return s;
}

inline ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_scenario(j);
}

inline void save_scenario(const std::string& path, const ScenarioConfig& s) {
  std::ofstream out(path);
  if (!out) throw ConfigError(path + ": cannot open for writing");
  out << serialize_scenario(s).dump(2) << '\n';
}

}  // namespace percon
