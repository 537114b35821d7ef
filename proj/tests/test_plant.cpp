#include <catch2/catch.hpp>

#include <random>

#include "percon/plant.hpp"

using namespace percon;

namespace {

// Two regions, flows 0->1 and 1->0; destination buckets cycle so closed-loop
// mass keeps moving without ever completing.
RegionNetwork circular_network() {
  RegionNetwork net;
  net.regions.resize(2);
  net.regions[0] = {"a", 13.0, 500.0, 2000.0, 20.0};
  net.regions[1] = {"b", 13.0, 400.0, 1500.0, 10.0};
  net.capacity_c0 = Matrix::Zero(2, 2);
  net.capacity_c0(0, 1) = 2.0;
  net.capacity_c0(1, 0) = 2.0;
  net.routing.assign(2, Matrix::Zero(2, 2));
  net.routing[1](0, 0) = 1.0;  // home-bound vehicles in 0 loop through 1
  net.routing[0](1, 0) = 1.0;
  net.routing[1](0, 1) = 1.0;
  net.routing[0](1, 1) = 1.0;
  net.validate();
  return net;
}

RegionNetwork completing_network() {
  RegionNetwork net;
  net.regions.resize(2);
  net.regions[0] = {"outer", 13.0, 2000.0, 2000.0, 40.0};
  net.regions[1] = {"inner", 13.0, 400.0, 1500.0, 12.0};
  net.capacity_c0 = Matrix::Zero(2, 2);
  net.capacity_c0(0, 1) = 1.5;
  net.capacity_c0(1, 0) = 1.5;
  net.routing.assign(2, Matrix::Zero(2, 2));
  net.routing[1](0, 1) = 1.0;  // outer vehicles bound for inner transfer
  net.routing[1](1, 1) = 1.0;  // inner vehicles complete at home
  net.routing[0](0, 0) = 1.0;  // outer internal trips complete at home
  net.routing[0](1, 0) = 1.0;
  net.validate();
  return net;
}

}  // namespace

TEST_CASE("transfer stops at a gridlocked receiver", "[plant]") {
  RegionNetwork net = completing_network();
  PlantState s = PlantState::empty(2);
  s.n_od(0, 1) = 100.0;
  s.n_od(1, 1) = net.regions[1].n_max_veh;  // receiver full
  TransferFlows f = transfer_flows(s, net, Matrix::Ones(2, 2));
  REQUIRE(f.via[1](0, 1) == 0.0);
}

TEST_CASE("closed gate stops the transfer", "[plant]") {
  RegionNetwork net = completing_network();
  PlantState s = PlantState::empty(2);
  s.n_od(0, 1) = 100.0;
  Matrix gates = Matrix::Ones(2, 2);
  gates(0, 1) = 0.0;
  TransferFlows f = transfer_flows(s, net, gates);
  REQUIRE(f.via[1](0, 1) == 0.0);
}

TEST_CASE("half-open gate sends half the completion rate", "[plant]") {
  RegionNetwork net;
  net.regions.resize(2);
  net.regions[0] = {"src", 100.0, 1e9, 1000.0, 10.0};
  net.regions[1] = {"dst", 13.0, 1e9, 1000.0, 10.0};
  net.capacity_c0 = Matrix::Zero(2, 2);
  net.capacity_c0(0, 1) = 1e6;
  net.routing.assign(2, Matrix::Zero(2, 2));
  net.routing[1](0, 1) = 1.0;
  net.routing[1](1, 1) = 1.0;
  net.validate();

  PlantState s = PlantState::empty(2);
  s.n_od(0, 1) = 100.0;  // P/L = 100 * 100 / 1000 = 10 veh/s
  Matrix gates = Matrix::Ones(2, 2);
  gates(0, 1) = 0.5;
  TransferFlows f = transfer_flows(s, net, gates);
  REQUIRE(f.via[1](0, 1) == Approx(5.0).margin(1e-3));
}

TEST_CASE("empty regions send nothing", "[plant]") {
  RegionNetwork net = completing_network();
  PlantState s = PlantState::empty(2);
  TransferFlows f = transfer_flows(s, net, Matrix::Ones(2, 2));
  REQUIRE(f.completion.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(f.via[0].cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(f.via[1].cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("closed circulating system conserves mass", "[plant]") {
  RegionNetwork net = circular_network();
  PlantState s = PlantState::empty(2);
  s.n_od(0, 0) = 120.0;
  s.n_od(1, 0) = 60.0;
  const double mass = s.n_od.sum();
  Matrix zero_demand = Matrix::Zero(2, 2);
  for (int k = 0; k < 5000; ++k) {
    s = step(s, net, zero_demand, Matrix::Ones(2, 2), 5.0);
    REQUIRE(std::abs(s.n_od.sum() - mass) <= 1e-9 * (k + 1));
  }
  REQUIRE(s.trips_completed == 0.0);
}

TEST_CASE("single-region accumulation follows the scalar recursion", "[plant]") {
  RegionNetwork net;
  net.regions.resize(1);
  net.regions[0] = {"solo", 13.0, 800.0, 1800.0, 15.0};
  net.capacity_c0 = Matrix::Zero(1, 1);
  net.routing.assign(1, Matrix::Zero(1, 1));
  net.routing[0](0, 0) = 1.0;
  net.validate();

  const double q = 0.4, dt = 5.0;
  Matrix demand = Matrix::Constant(1, 1, q);
  PlantState s = PlantState::empty(1);

  // Independent scalar recursion from the same physics.
  double n_ref = 0.0;
  for (int k = 0; k < 2000; ++k) {
    s = step(s, net, demand, Matrix::Ones(1, 1), dt);
    const double a = 13.0, n_max = 800.0, trip = 1800.0;
    double shape = n_ref <= 0 || n_ref >= n_max ? 0.0 : (1.0 - n_ref / n_max);
    double completion = a * n_ref * shape * shape / trip;
    n_ref += dt * (q - completion);
    REQUIRE(s.n_od(0, 0) == Approx(n_ref).margin(1e-9 * (k + 1)));
  }
  // The inflow balances completion well below gridlock.
  REQUIRE(s.n_od(0, 0) < 0.5 * 800.0);
  REQUIRE(s.trips_completed > 0.0);
}

TEST_CASE("demand into a full region queues instead of overfilling", "[plant]") {
  RegionNetwork net = completing_network();
  PlantState s = PlantState::empty(2);
  s.n_od(1, 1) = net.regions[1].n_max_veh - 1e-9;
  Matrix demand = Matrix::Zero(2, 2);
  demand(1, 1) = 5.0;
  for (int k = 0; k < 100; ++k) {
    s = step(s, net, demand, Matrix::Ones(2, 2), 5.0);
    REQUIRE(s.accumulations()(1) <= net.regions[1].n_max_veh + 1e-9);
  }
  REQUIRE(s.backlog_veh(1, 1) > 0.0);
  REQUIRE(s.inflow_saturations > 0);
}

TEST_CASE("sensors on the empty network read zero", "[plant]") {
  RegionNetwork net = completing_network();
  SensorReading r = read_sensors(PlantState::empty(2), net);
  REQUIRE(r.density.cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(r.flow.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("flow vanishes exactly at gridlock", "[plant]") {
  RegionNetwork net = completing_network();
  PlantState s = PlantState::empty(2);
  s.n_od(1, 1) = net.regions[1].n_max_veh;
  SensorReading r = read_sensors(s, net);
  REQUIRE(r.flow(1) == 0.0);
  REQUIRE(r.density(1) == Approx(net.regions[1].n_max_veh / net.regions[1].lane_km));
}

TEST_CASE("virtual sensor averaging without noise equals the direct value", "[plant]") {
  RegionNetwork net = completing_network();
  PlantState s = PlantState::empty(2);
  s.n_od(0, 1) = 321.0;
  SensorConfig cfg;
  cfg.per_region = {4, 4};
  SensorReading direct = read_sensors(s, net);
  SensorReading averaged = read_sensors(s, net, cfg);
  REQUIRE(averaged.density == direct.density);
  REQUIRE(averaged.flow == direct.flow);

  std::mt19937 rng(5);
  cfg.noise_std = 0.05;
  cfg.rng = &rng;
  SensorReading noisy = read_sensors(s, net, cfg);
  REQUIRE(noisy.density(0) != direct.density(0));
  REQUIRE(noisy.density(0) == Approx(direct.density(0)).epsilon(0.2));
}

TEST_CASE("two-peak demand integrates to the requested total", "[plant]") {
  TwoPeakParams p;
  p.total_vehicles = 6149.0;
  p.peak1_time_s = 1800.0;
  p.peak1_width_s = 2400.0;
  p.peak2_time_s = 5400.0;
  p.peak2_width_s = 2400.0;
  DemandProfile d = make_two_peak_demand(p, 2);

  // Independent fine-grid trapezoid of the evaluated profile.
  const auto& pl = d.series.at({0, 0});
  double integral = 0.0;
  const double lo = 0.0, hi = 7200.0;
  const int cells = 200000;
  for (int k = 0; k < cells; ++k) {
    double t0 = lo + (hi - lo) * k / cells;
    double t1 = lo + (hi - lo) * (k + 1) / cells;
    integral += 0.5 * (pl.eval(t0) + pl.eval(t1)) * (t1 - t0);
  }
  REQUIRE(std::abs(integral - 6149.0) / 6149.0 < 0.005);
  REQUIRE(d.total_vehicles() == Approx(6149.0).margin(1e-6));
}

TEST_CASE("zero-magnitude demand is identically zero", "[plant]") {
  TwoPeakParams p;
  p.total_vehicles = 0.0;
  DemandProfile d = make_two_peak_demand(p, 2);
  REQUIRE(d.series.empty());
  REQUIRE(d.rate_at(1000.0).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("degenerate single peak is one triangle with the full total", "[plant]") {
  TwoPeakParams p;
  p.total_vehicles = 500.0;
  p.peak1_share = 1.0;
  DemandProfile d = make_two_peak_demand(p, 1);
  REQUIRE(d.total_vehicles() == Approx(500.0).margin(1e-9));
  const auto& pl = d.series.at({0, 0});
  REQUIRE(pl.eval(p.peak1_time_s) == Approx(2.0 * 500.0 / p.peak1_width_s));
  REQUIRE(pl.eval(p.peak2_time_s) == 0.0);
}

TEST_CASE("demand peaks before time zero are rejected", "[plant]") {
  TwoPeakParams p;
  p.total_vehicles = 100.0;
  p.peak1_time_s = 100.0;
  p.peak1_width_s = 400.0;
  REQUIRE_THROWS_AS(make_two_peak_demand(p, 1), ArgumentError);
  p.peak1_width_s = -10.0;
  REQUIRE_THROWS_AS(make_two_peak_demand(p, 1), ArgumentError);
}

TEST_CASE("random gating keeps the state nonnegative and below gridlock", "[plant]") {
  RegionNetwork net = completing_network();
  std::mt19937 rng(77);
  std::uniform_real_distribution<double> gate(0.0, 1.0);
  std::uniform_real_distribution<double> load(0.0, 3.0);
  for (int run = 0; run < 40; ++run) {
    PlantState s = PlantState::empty(2);
    Matrix demand = Matrix::Zero(2, 2);
    demand(0, 1) = load(rng);
    demand(1, 1) = 0.2 * load(rng);
    for (int k = 0; k < 200; ++k) {
      Matrix gates = Matrix::Ones(2, 2);
      gates(0, 1) = gate(rng);
      gates(1, 0) = gate(rng);
      s = step(s, net, demand, gates, 5.0);
      REQUIRE(s.n_od.minCoeff() >= 0.0);
      for (int i = 0; i < 2; ++i)
        REQUIRE(s.accumulations()(i) <= net.regions[static_cast<size_t>(i)].n_max_veh + 1e-9);
    }
  }
}

TEST_CASE("transfers are nondecreasing in the gate value", "[plant]") {
  RegionNetwork net = completing_network();
  PlantState s = PlantState::empty(2);
  s.n_od(0, 1) = 900.0;
  s.n_od(1, 1) = 100.0;
  double prev = -1.0;
  for (double u = 0.0; u <= 1.0; u += 0.05) {
    Matrix gates = Matrix::Ones(2, 2);
    gates(0, 1) = u;
    TransferFlows f = transfer_flows(s, net, gates);
    REQUIRE(f.via[1](0, 1) >= prev);
    prev = f.via[1](0, 1);
  }
}

TEST_CASE("actuator map turns splits into gates", "[plant]") {
  RegionNetwork net = completing_network();
  ActuatorMap am;
  am.actuators.push_back({"perimeter", {{0, 1, 1.0}}, 0.6, 0.1, 0.9});
  am.actuators.push_back({"reverse", {{1, 0, 1.0}}, 0.6, 0.1, 0.9});
  am.validate(net);
  Vector lambda(2);
  lambda << 0.3, 0.7;
  Matrix gates = am.gates(lambda, 2);
  REQUIRE(gates(0, 1) == Approx(0.3));
  REQUIRE(gates(1, 0) == Approx(0.7));
  REQUIRE(gates(0, 0) == 1.0);

  // Shared flow accumulates weighted splits.
  ActuatorMap shared;
  shared.actuators.push_back({"x", {{0, 1, 0.5}, {1, 0, 0.5}}, 0.5, 0.0, 0.9});
  shared.actuators.push_back({"y", {{0, 1, 1.0}}, 0.5, 0.0, 0.9});
  REQUIRE_THROWS_AS(shared.validate(net), ArgumentError);  // flow weight 1.5
  shared.actuators[1].flows[0].weight = 0.5;
  REQUIRE_THROWS_AS(shared.validate(net), ArgumentError);  // weights sum 0.5
}

TEST_CASE("network validation rejects inconsistent routing", "[plant]") {
  RegionNetwork net = completing_network();
  net.routing[1](0, 1) = 0.5;  // no longer sums to one
  REQUIRE_THROWS_AS(net.validate(), ArgumentError);
  net.routing[1](0, 1) = 1.0;
  net.routing[0](1, 0) = 0.0;
  net.routing[1](1, 0) = 1.0;  // dest 0 vehicles sent back into 1
  REQUIRE_THROWS_AS(net.validate(), ArgumentError);
}
