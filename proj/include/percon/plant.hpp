#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "percon/common.hpp"

namespace percon {

/// One homogeneous region: accumulation-based production with a single
/// interior maximum, vanishing at zero and at the gridlock accumulation.
struct Region {
  std::string name;
  double free_flow_speed_ms = 13.0;  // slope of the production curve at zero
  double n_max_veh = 1000.0;
  double trip_length_m = 2000.0;
  double lane_km = 20.0;

  /// P(n) = a n (1 - n/n_max)^2 [veh*m/s], zero outside [0, n_max].
  double production(double n) const {
    if (n <= 0.0 || n >= n_max_veh) return 0.0;
    const double s = 1.0 - n / n_max_veh;
    return free_flow_speed_ms * n * s * s;
  }

  /// Trip completion capacity P(n)/L [veh/s].
  double completion_rate(double n) const { return production(n) / trip_length_m; }
};

/// Multi-region network: receiving capacities (linear, zero at gridlock) and
/// routing proportions routing[h](i, j) = share of region-i vehicles bound for
/// j that leave via neighbor h; routing[i](i, i) is the internal completion
/// share.
struct RegionNetwork {
  std::vector<Region> regions;
  Matrix capacity_c0;           // veh/s into an empty receiver; 0 = not adjacent
  std::vector<Matrix> routing;  // one N x N matrix per via-region

  int num_regions() const { return static_cast<int>(regions.size()); }

  double receiving_capacity(int from, int to, double n_to) const {
    const double c0 = capacity_c0(from, to);
    if (c0 <= 0.0) return 0.0;
    return c0 * std::max(0.0, 1.0 - n_to / regions[static_cast<size_t>(to)].n_max_veh);
  }

  std::vector<int> neighbors(int i) const {
    std::vector<int> out;
    for (int h = 0; h < num_regions(); ++h)
      if (h != i && capacity_c0(i, h) > 0.0) out.push_back(h);
    return out;
  }

  void validate() const {
    const int n = num_regions();
    if (capacity_c0.rows() != n || capacity_c0.cols() != n)
      throw DimensionError("network: capacity matrix must be N x N");
    if (static_cast<int>(routing.size()) != n)
      throw DimensionError("network: one routing matrix per via-region required");
    for (const auto& r : routing)
      if (r.rows() != n || r.cols() != n)
        throw DimensionError("network: routing matrices must be N x N");
    for (int i = 0; i < n; ++i) {
      if (regions[static_cast<size_t>(i)].n_max_veh <= 0.0 ||
          regions[static_cast<size_t>(i)].trip_length_m <= 0.0 ||
          regions[static_cast<size_t>(i)].lane_km <= 0.0)
        throw ArgumentError("network: region parameters must be positive");
      for (int j = 0; j < n; ++j) {
        double total = 0.0;
        for (int h = 0; h < n; ++h) {
          const double share = routing[static_cast<size_t>(h)](i, j);
          if (share < 0.0) throw ArgumentError("network: routing shares must be nonnegative");
          if (share > 0.0 && h != i && capacity_c0(i, h) <= 0.0)
            throw ArgumentError("network: route through non-adjacent region");
          if (share > 0.0 && h == i && i != j)
            throw ArgumentError("network: internal completion only for home-bound vehicles");
          total += share;
        }
        if (total > 0.0 && std::abs(total - 1.0) > 1e-9)
          throw ArgumentError("network: routing shares must sum to one where present");
      }
    }
  }
};

struct ActuatorFlow {
  int from = 0;
  int to = 0;
  double weight = 1.0;
};

struct Actuator {
  std::string name;
  std::vector<ActuatorFlow> flows;
  double lambda_default = 0.5;
  double lambda_min = 0.0;
  double lambda_max = 0.95;
};

/// Split-to-gate coupling: each actuator modulates a weighted set of directed
/// region flows; gates of unactuated flows stay fully open.
struct ActuatorMap {
  std::vector<Actuator> actuators;

  int num_actuators() const { return static_cast<int>(actuators.size()); }

  Vector defaults() const {
    Vector v(num_actuators());
    for (int i = 0; i < num_actuators(); ++i) v(i) = actuators[static_cast<size_t>(i)].lambda_default;
    return v;
  }
  Vector lower_bounds() const {
    Vector v(num_actuators());
    for (int i = 0; i < num_actuators(); ++i) v(i) = actuators[static_cast<size_t>(i)].lambda_min;
    return v;
  }
  Vector upper_bounds() const {
    Vector v(num_actuators());
    for (int i = 0; i < num_actuators(); ++i) v(i) = actuators[static_cast<size_t>(i)].lambda_max;
    return v;
  }

  /// Gate matrix u(from, to): sum of actuator weights times their splits on
  /// actuated flows, 1 elsewhere.
  Matrix gates(const Vector& lambda, int num_regions) const {
    if (lambda.size() != num_actuators()) throw DimensionError("gates: lambda size");
    Matrix u = Matrix::Ones(num_regions, num_regions);
    std::vector<std::vector<char>> touched(
        static_cast<size_t>(num_regions), std::vector<char>(static_cast<size_t>(num_regions), 0));
    for (int a = 0; a < num_actuators(); ++a) {
      for (const auto& f : actuators[static_cast<size_t>(a)].flows) {
        if (!touched[static_cast<size_t>(f.from)][static_cast<size_t>(f.to)]) {
          u(f.from, f.to) = 0.0;
          touched[static_cast<size_t>(f.from)][static_cast<size_t>(f.to)] = 1;
        }
        u(f.from, f.to) += f.weight * lambda(a);
      }
    }
    return u;
  }

  void validate(const RegionNetwork& net) const {
    Matrix incoming = Matrix::Zero(net.num_regions(), net.num_regions());
    for (const auto& act : actuators) {
      if (act.flows.empty()) throw ArgumentError("actuator must modulate at least one flow");
      double total = 0.0;
      for (const auto& f : act.flows) {
        if (f.from < 0 || f.from >= net.num_regions() || f.to < 0 || f.to >= net.num_regions())
          throw ArgumentError("actuator flow endpoint out of range");
        if (net.capacity_c0(f.from, f.to) <= 0.0)
          throw ArgumentError("actuator must modulate an adjacent flow");
        if (f.weight < 0.0) throw ArgumentError("actuator weights must be nonnegative");
        total += f.weight;
        incoming(f.from, f.to) += f.weight;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw ArgumentError("actuator weights must sum to one");
      if (!(act.lambda_min >= 0.0 && act.lambda_min <= act.lambda_max && act.lambda_max < 1.0))
        throw ArgumentError("actuator bounds must satisfy 0 <= min <= max < 1");
      if (!(act.lambda_default >= act.lambda_min && act.lambda_default <= act.lambda_max))
        throw ArgumentError("actuator default split must respect its bounds");
    }
    if (incoming.maxCoeff() > 1.0 + 1e-9)
      throw ArgumentError("total actuator weight on a flow must not exceed one");
  }
};

/// Vehicles by current region (row) and destination region (column), plus the
/// entry queues of demand not yet admitted and the run accumulators.
struct PlantState {
  Matrix n_od;
  Matrix backlog_veh;
  long step_count = 0;
  double time_spent_veh_s = 0.0;
  double trips_completed = 0.0;
  long outflow_saturations = 0;
  long inflow_saturations = 0;

  static PlantState empty(int num_regions) {
    PlantState s;
    s.n_od = Matrix::Zero(num_regions, num_regions);
    s.backlog_veh = Matrix::Zero(num_regions, num_regions);
    return s;
  }

  Vector accumulations() const { return n_od.rowwise().sum(); }
};

struct TransferFlows {
  std::vector<Matrix> via;  // via[h](i, j) [veh/s]
  Vector completion;        // internal completion per region [veh/s]
};

/// Unclipped flow rates at the current state: completions and, per transfer,
/// the minimum of the receiving capacity and the gated sending rate. Empty
/// regions send nothing.
inline TransferFlows transfer_flows(const PlantState& state, const RegionNetwork& net,
                                    const Matrix& gates) {
  const int n = net.num_regions();
  TransferFlows f;
  f.via.assign(static_cast<size_t>(n), Matrix::Zero(n, n));
  f.completion = Vector::Zero(n);
  const Vector acc = state.accumulations();
  for (int i = 0; i < n; ++i) {
    const double n_i = acc(i);
    if (n_i <= 0.0) continue;
    const double send = net.regions[static_cast<size_t>(i)].completion_rate(n_i);
    for (int j = 0; j < n; ++j) {
      const double n_ij = state.n_od(i, j);
      if (n_ij <= 0.0) continue;
      for (int h = 0; h < n; ++h) {
        const double share = net.routing[static_cast<size_t>(h)](i, j);
        if (share <= 0.0) continue;
        if (h == i) {
          f.completion(i) += share * (n_ij / n_i) * send;
        } else {
          const double wish = gates(i, h) * share * (n_ij / n_i) * send;
          f.via[static_cast<size_t>(h)](i, j) =
              std::min(net.receiving_capacity(i, h, acc(h)), wish);
        }
      }
    }
  }
  return f;
}

/// One forward-Euler step of the accumulation dynamics. Outflows of a bucket
/// are scaled down when they would overdraw it within the step, and arrivals
/// into a region (transfers and demand admissions together) are capped by the
/// remaining headroom so accumulations never exceed n_max. Unadmitted demand
/// waits in the entry queue and retries on later steps.
inline PlantState step(const PlantState& state, const RegionNetwork& net,
                       const Matrix& demand_rate, const Matrix& gates, double dt) {
  if (dt <= 0.0) throw ArgumentError("plant step needs a positive dt");
  const int n = net.num_regions();
  if (demand_rate.rows() != n || demand_rate.cols() != n)
    throw DimensionError("plant step: demand matrix must be N x N");

  PlantState next = state;
  next.step_count = state.step_count + 1;
  const Vector acc = state.accumulations();
  next.time_spent_veh_s += dt * acc.sum();

  TransferFlows flows = transfer_flows(state, net, gates);

  // Demand pressure including queued vehicles.
  Matrix q_eff = demand_rate + state.backlog_veh / dt;

  // Per-bucket outflow scale: a step cannot remove more than is present.
  Matrix scale = Matrix::Ones(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double out = (i == j) ? flows.completion(i) : 0.0;
      for (int h = 0; h < n; ++h) out += flows.via[static_cast<size_t>(h)](i, j);
      if (out <= 0.0) continue;
      const double limit = state.n_od(i, j) / (dt * out);
      if (limit < 1.0) {
        scale(i, j) = std::max(0.0, limit);
        ++next.outflow_saturations;
      }
    }
  }

  Vector completion(n);
  for (int i = 0; i < n; ++i) completion(i) = scale(i, i) * flows.completion(i);

  // Headroom cap per receiving region; completions are the only outflow
  // guaranteed to survive later scaling, so only they enlarge the room.
  Vector admit = Vector::Ones(n);
  for (int g = 0; g < n; ++g) {
    double arriving = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) arriving += scale(i, j) * flows.via[static_cast<size_t>(g)](i, j);
    for (int j = 0; j < n; ++j) arriving += q_eff(g, j);
    if (arriving <= 0.0) continue;
    const double room =
        (net.regions[static_cast<size_t>(g)].n_max_veh - acc(g)) / dt + completion(g);
    if (arriving > room) {
      admit(g) = std::max(0.0, room / arriving);
      ++next.inflow_saturations;
    }
  }

  // Final rates and the state update.
  for (int g = 0; g < n; ++g) {
    for (int j = 0; j < n; ++j) {
      double delta = admit(g) * q_eff(g, j);  // admitted demand
      next.backlog_veh(g, j) = dt * (q_eff(g, j) - admit(g) * q_eff(g, j));
      for (int i = 0; i < n; ++i)
        delta += admit(g) * scale(i, j) * flows.via[static_cast<size_t>(g)](i, j);
      for (int h = 0; h < n; ++h)
        delta -= admit(h) * scale(g, j) * flows.via[static_cast<size_t>(h)](g, j);
      if (g == j) delta -= completion(g);
      next.n_od(g, j) = std::max(0.0, state.n_od(g, j) + dt * delta);
    }
  }
  next.trips_completed += dt * completion.sum();
  return next;
}

struct SensorConfig {
  std::vector<int> per_region;  // virtual sensors per region; empty means one
  double noise_std = 0.0;       // multiplicative
  std::mt19937* rng = nullptr;
};

struct SensorReading {
  Vector density;  // veh/km
  Vector flow;     // veh/h
};

/// Region-averaged density and flow. With several virtual sensors per region
/// the regional value is perturbed multiplicatively per sensor and averaged.
inline SensorReading read_sensors(const PlantState& state, const RegionNetwork& net,
                                  const SensorConfig& cfg = {}) {
  const int n = net.num_regions();
  SensorReading r;
  r.density = Vector::Zero(n);
  r.flow = Vector::Zero(n);
  const Vector acc = state.accumulations();
  std::normal_distribution<double> noise(0.0, cfg.noise_std);
  for (int i = 0; i < n; ++i) {
    const Region& reg = net.regions[static_cast<size_t>(i)];
    const double rho = acc(i) / reg.lane_km;
    const double phi = reg.completion_rate(acc(i)) * 3600.0;
    const int sensors = cfg.per_region.empty() ? 1 : cfg.per_region[static_cast<size_t>(i)];
    if (sensors <= 1 || cfg.noise_std <= 0.0 || cfg.rng == nullptr) {
      r.density(i) = rho;
      r.flow(i) = phi;
      continue;
    }
    double rho_sum = 0.0, phi_sum = 0.0;
    for (int s = 0; s < sensors; ++s) {
      const double eps = noise(*cfg.rng);
      rho_sum += rho * (1.0 + eps);
      phi_sum += phi * (1.0 + eps);
    }
    r.density(i) = rho_sum / sensors;
    r.flow(i) = phi_sum / sensors;
  }
  return r;
}

/// Piecewise-linear time series; zero outside its breakpoint support.
struct PiecewiseLinear {
  std::vector<std::pair<double, double>> points;  // (t, value), t ascending

  double eval(double t) const {
    if (points.empty() || t < points.front().first || t > points.back().first) return 0.0;
    for (size_t k = 1; k < points.size(); ++k) {
      if (t <= points[k].first) {
        const auto& [t0, v0] = points[k - 1];
        const auto& [t1, v1] = points[k];
        if (t1 == t0) return v1;
        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
      }
    }
    return points.back().second;
  }

  double integral_between(double a, double b) const {
    if (points.empty() || b <= a) return 0.0;
    std::vector<double> ts{a, b};
    for (const auto& [t, v] : points)
      if (t > a && t < b) ts.push_back(t);
    std::sort(ts.begin(), ts.end());
    double total = 0.0;
    for (size_t k = 1; k < ts.size(); ++k)
      total += 0.5 * (eval(ts[k - 1]) + eval(ts[k])) * (ts[k] - ts[k - 1]);
    return total;
  }

  double integral() const {
    if (points.empty()) return 0.0;
    return integral_between(points.front().first, points.back().first);
  }
};

/// Origin-destination demand over the scenario horizon [veh/s].
struct DemandProfile {
  int num_regions = 0;
  std::map<std::pair<int, int>, PiecewiseLinear> series;

  Matrix rate_at(double t) const {
    Matrix q = Matrix::Zero(num_regions, num_regions);
    for (const auto& [od, pl] : series) q(od.first, od.second) = pl.eval(t);
    return q;
  }

  Matrix average_rate(double t0, double t1) const {
    Matrix q = Matrix::Zero(num_regions, num_regions);
    if (t1 <= t0) return q;
    for (const auto& [od, pl] : series)
      q(od.first, od.second) = pl.integral_between(t0, t1) / (t1 - t0);
    return q;
  }

  double total_vehicles() const {
    double total = 0.0;
    for (const auto& [od, pl] : series) total += pl.integral();
    return total;
  }
};

struct TwoPeakParams {
  int origin = 0;
  int destination = 0;
  double peak1_time_s = 1800.0;
  double peak1_width_s = 1800.0;
  double peak2_time_s = 5400.0;
  double peak2_width_s = 1800.0;
  double peak1_share = 0.5;  // fraction of the total carried by the first peak
  double total_vehicles = 0.0;
};

/// Two triangular demand peaks whose areas sum to the requested vehicle total.
inline DemandProfile make_two_peak_demand(const TwoPeakParams& p, int num_regions) {
  if (p.peak1_width_s <= 0.0 || p.peak2_width_s <= 0.0)
    throw ArgumentError("demand peaks need positive widths");
  if (p.peak1_time_s - 0.5 * p.peak1_width_s < 0.0 ||
      p.peak2_time_s - 0.5 * p.peak2_width_s < 0.0)
    throw ArgumentError("demand peaks must not start before time zero");
  if (p.peak1_share < 0.0 || p.peak1_share > 1.0)
    throw ArgumentError("peak share must lie in [0, 1]");
  if (p.total_vehicles < 0.0) throw ArgumentError("total vehicles must be nonnegative");

  struct Tri {
    double t, w, area;
  };
  std::vector<Tri> tris{{p.peak1_time_s, p.peak1_width_s, p.peak1_share * p.total_vehicles},
                        {p.peak2_time_s, p.peak2_width_s, (1.0 - p.peak1_share) * p.total_vehicles}};

  auto tri_eval = [](const Tri& tri, double t) {
    const double h = 2.0 * tri.area / tri.w;
    const double d = std::abs(t - tri.t);
    return d >= 0.5 * tri.w ? 0.0 : h * (1.0 - d / (0.5 * tri.w));
  };

  std::vector<double> ts;
  for (const auto& tri : tris)
    for (double t : {tri.t - 0.5 * tri.w, tri.t, tri.t + 0.5 * tri.w}) ts.push_back(t);
  std::sort(ts.begin(), ts.end());
  ts.erase(std::unique(ts.begin(), ts.end()), ts.end());

  PiecewiseLinear pl;
  for (double t : ts) pl.points.emplace_back(t, tri_eval(tris[0], t) + tri_eval(tris[1], t));

  DemandProfile d;
  d.num_regions = num_regions;
  if (p.total_vehicles > 0.0) d.series[{p.origin, p.destination}] = pl;
  return d;
}

}  // namespace percon
