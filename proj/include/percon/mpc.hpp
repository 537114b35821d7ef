#pragma once

#include <functional>
#include <vector>

#include "percon/common.hpp"
#include "percon/mfd.hpp"
#include "percon/plant.hpp"
#include "percon/qp.hpp"

namespace percon {

struct PwaPiece {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Min-of-affine envelope of a completion-rate curve over [0, n_max].
struct PwaMfd {
  std::vector<PwaPiece> pieces;
  double n_max = 0.0;
  bool concavified = false;

  double eval(double n) const {
    double v = kInf;
    for (const auto& p : pieces) v = std::min(v, p.slope * n + p.intercept);
    return std::max(0.0, v);
  }
};

/// Chords over a uniform breakpoint grid. Non-concave sources are replaced by
/// the upper concave hull of their breakpoint samples first, which the flag
/// reports.
inline PwaMfd fit_pwa(const std::function<double(double)>& f, double n_max,
                      int num_pieces) {
  if (num_pieces < 1) throw ArgumentError("pwa fit needs at least one piece");
  if (n_max <= 0.0) throw ArgumentError("pwa fit needs a positive range");

  std::vector<std::pair<double, double>> pts;
  for (int k = 0; k <= num_pieces; ++k) {
    const double x = n_max * k / num_pieces;
    pts.emplace_back(x, f(x));
  }

  PwaMfd out;
  out.n_max = n_max;
  std::vector<std::pair<double, double>> hull;
  auto cross = [](const std::pair<double, double>& o, const std::pair<double, double>& a,
                  const std::pair<double, double>& b) {
    return (a.first - o.first) * (b.second - o.second) -
           (a.second - o.second) * (b.first - o.first);
  };
  for (const auto& p : pts) {
    while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), p) >= 0.0) {
      if (cross(hull[hull.size() - 2], hull.back(), p) > 1e-12) out.concavified = true;
      hull.pop_back();
    }
    hull.push_back(p);
  }
  for (size_t k = 1; k < hull.size(); ++k) {
    const double dx = hull[k].first - hull[k - 1].first;
    const double slope = dx > 0.0 ? (hull[k].second - hull[k - 1].second) / dx : 0.0;
    out.pieces.push_back({slope, hull[k - 1].second - slope * hull[k - 1].first});
  }
  if (out.pieces.empty()) out.pieces.push_back({0.0, pts.front().second});
  return out;
}

struct MpcConfig {
  int horizon = 4;
  int pwa_pieces = 10;
  double tikhonov = 1e-9;         // keeps the flow program strictly convex
  double overload_penalty = 1e5;  // per vehicle above the gridlock bound
  bool rate_constraints = false;
  double rate_limit = 0.2;                          // per control step, when enabled
  std::vector<std::pair<int, int>> actuator_flow;   // actuator -> its single flow
  // Estimated flow/density curves, one per region; when present the envelopes
  // come from these fits instead of the plant parameters.
  std::vector<MfdEstimate> fitted_mfd;
};

/// Per-step programs are linear; a moderate tolerance keeps every solve
/// inside the iteration budget without affecting the applied splits.
inline QpSettings mpc_solver_defaults() {
  QpSettings st;
  st.eps_abs = 1e-5;
  st.eps_rel = 1e-5;
  return st;
}

struct MpcStepDiag {
  QpStatus status = QpStatus::optimal;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double throughput_objective = 0.0;  // weighted completed distance over the horizon
  Vector predicted_next;              // accumulations after one step
  bool degraded = false;
};

/// Linearized perimeter-flow controller: freezes the destination shares at
/// the measured state, bounds every flow by the piecewise-affine envelope of
/// its sending capacity, maximizes the trip-weighted flows over the horizon,
/// and maps the first-step flow of each assigned actuator back to a split.
class MpcController {
 public:
  MpcController(const RegionNetwork& net, const ActuatorMap& actuators, MpcConfig cfg,
                QpSettings settings = mpc_solver_defaults())
      : net_(net), act_(actuators), cfg_(std::move(cfg)), settings_(settings) {
    net_.validate();
    act_.validate(net_);
    if (cfg_.horizon < 1) throw ArgumentError("mpc horizon must be positive");
    if (static_cast<int>(cfg_.actuator_flow.size()) != act_.num_actuators())
      throw ArgumentError("mpc needs exactly one flow per actuator");
    for (const auto& [from, to] : cfg_.actuator_flow)
      if (net_.capacity_c0(from, to) <= 0.0)
        throw ArgumentError("mpc actuator assigned to a non-adjacent flow");
    if (!cfg_.fitted_mfd.empty() &&
        static_cast<int>(cfg_.fitted_mfd.size()) != net_.num_regions())
      throw ArgumentError("mpc needs one fitted curve per region");
    for (int i = 0; i < net_.num_regions(); ++i) {
      const Region& r = net_.regions[static_cast<size_t>(i)];
      if (cfg_.fitted_mfd.empty()) {
        pwa_.push_back(fit_pwa([&r](double n) { return r.completion_rate(n); },
                               r.n_max_veh, cfg_.pwa_pieces));
      } else {
        // Fitted curves report flow in veh/h against density; express them as
        // completion rates against accumulation.
        const MfdEstimate est = cfg_.fitted_mfd[static_cast<size_t>(i)];
        const double lane_km = r.lane_km;
        const double n_hi =
            est.rho_max ? std::min(*est.rho_max * lane_km, r.n_max_veh) : r.n_max_veh;
        pwa_.push_back(fit_pwa(
            [est, lane_km](double n) {
              return std::max(0.0, est.eval(n / lane_km)) / 3600.0;
            },
            n_hi, cfg_.pwa_pieces));
      }
      for (int h = 0; h < net_.num_regions(); ++h)
        if (h != i && net_.capacity_c0(i, h) > 0.0) edges_.emplace_back(i, h);
    }
  }

  const std::vector<PwaMfd>& envelopes() const { return pwa_; }

  /// The most recently assembled per-step program, for inspection.
  const RowConstrainedQp& last_problem() const { return last_qp_; }

  /// One receding-horizon step. demand_forecast[k] is the N x N rate matrix
  /// for prediction step k; dt is the control period in seconds.
  Vector step(const PlantState& state, const std::vector<Matrix>& demand_forecast,
              double dt, MpcStepDiag* diag = nullptr) {
    const int n_regions = net_.num_regions();
    const int n_edges = static_cast<int>(edges_.size());
    const int np = cfg_.horizon;
    if (static_cast<int>(demand_forecast.size()) < np)
      throw DimensionError("mpc: demand forecast shorter than the horizon");

    const Vector acc = state.accumulations();

    // Frozen destination shares and routing-weighted coefficients.
    Matrix alpha = Matrix::Zero(n_regions, n_regions);
    for (int i = 0; i < n_regions; ++i)
      if (acc(i) > 0.0) alpha.row(i) = state.n_od.row(i) / acc(i);
    Vector c_int(n_regions);
    for (int i = 0; i < n_regions; ++i)
      c_int(i) = net_.routing[static_cast<size_t>(i)](i, i) * alpha(i, i);
    Vector c_tr(n_edges);
    for (int e = 0; e < n_edges; ++e) {
      const auto [i, h] = edges_[static_cast<size_t>(e)];
      double c = 0.0;
      for (int j = 0; j < n_regions; ++j)
        c += net_.routing[static_cast<size_t>(h)](i, j) * alpha(i, j);
      c_tr(e) = c;
    }

    // Variable layout per prediction step: internal flows, transfer flows,
    // bounded accumulation, overload excess. Flow capacities and variable
    // ranges enter as constraint rows directly.
    const int flows_per_step = n_regions + n_edges;
    const int vars_per_step = flows_per_step + 2 * n_regions;
    const int num_vars = np * vars_per_step;

    std::vector<std::array<int, 4>> pwa_rows;  // (k, flow var, region, piece)
    std::vector<char> flow_disabled(static_cast<size_t>(flows_per_step), 0);
    for (int i = 0; i < n_regions; ++i)
      if (c_int(i) <= 1e-12) flow_disabled[static_cast<size_t>(i)] = 1;
    for (int e = 0; e < n_edges; ++e)
      if (c_tr(e) <= 1e-12) flow_disabled[static_cast<size_t>(n_regions + e)] = 1;
    for (int k = 1; k < np; ++k) {
      for (int i = 0; i < n_regions; ++i) {
        if (flow_disabled[static_cast<size_t>(i)]) continue;
        for (size_t piece = 0; piece < pwa_[static_cast<size_t>(i)].pieces.size(); ++piece)
          pwa_rows.push_back({k, i, i, static_cast<int>(piece)});
      }
      for (int e = 0; e < n_edges; ++e) {
        if (flow_disabled[static_cast<size_t>(n_regions + e)]) continue;
        for (size_t piece = 0;
             piece < pwa_[static_cast<size_t>(edges_[static_cast<size_t>(e)].first)].pieces.size();
             ++piece)
          pwa_rows.push_back({k, n_regions + e, edges_[static_cast<size_t>(e)].first,
                              static_cast<int>(piece)});
      }
    }

    auto f_var = [&](int k, int flow) { return k * vars_per_step + flow; };
    auto n_var = [&](int k, int i) { return k * vars_per_step + flows_per_step + i; };
    auto e_var = [&](int k, int i) {
      return k * vars_per_step + flows_per_step + n_regions + i;
    };

    const int dyn_rows = np * n_regions;
    const int num_rows = dyn_rows + static_cast<int>(pwa_rows.size()) + num_vars;
    Matrix a = Matrix::Zero(num_rows, num_vars);
    Vector l = Vector::Constant(num_rows, -kInf);
    Vector u = Vector::Constant(num_rows, kInf);
    Vector q = Vector::Zero(num_vars);

    double trip_scale = 0.0;
    for (const Region& r : net_.regions) trip_scale = std::max(trip_scale, r.trip_length_m);

    for (int k = 0; k < np; ++k) {
      Vector q_region = demand_forecast[static_cast<size_t>(k)].rowwise().sum();
      for (int i = 0; i < n_regions; ++i) {
        const int row = k * n_regions + i;
        a(row, n_var(k, i)) = 1.0;
        a(row, e_var(k, i)) = 1.0;
        a(row, f_var(k, i)) = dt;
        double rhs = dt * q_region(i);
        if (k == 0) rhs += acc(i);
        else {
          a(row, n_var(k - 1, i)) = -1.0;
          a(row, e_var(k - 1, i)) = -1.0;
        }
        l(row) = rhs;
        u(row) = rhs;
        q(e_var(k, i)) = cfg_.overload_penalty / trip_scale;
        q(f_var(k, i)) = -net_.regions[static_cast<size_t>(i)].trip_length_m / trip_scale;
      }
      for (int e = 0; e < n_edges; ++e) {
        const int row_base = k * n_regions;
        const auto [i, h] = edges_[static_cast<size_t>(e)];
        a(row_base + i, f_var(k, n_regions + e)) += dt;
        a(row_base + h, f_var(k, n_regions + e)) -= dt;
        q(f_var(k, n_regions + e)) =
            -net_.regions[static_cast<size_t>(i)].trip_length_m / trip_scale;
      }
    }

    int row = dyn_rows;
    for (const auto& [k, flow, region, piece] : pwa_rows) {
      const double coeff = flow < n_regions ? c_int(flow) : c_tr(flow - n_regions);
      const PwaPiece& pc = pwa_[static_cast<size_t>(region)].pieces[static_cast<size_t>(piece)];
      a(row, f_var(k, flow)) = 1.0;
      a(row, n_var(k - 1, region)) = -coeff * pc.slope;
      u(row) = coeff * pc.intercept;
      ++row;
    }

    // Variable ranges, one identity row each.
    for (int k = 0; k < np; ++k) {
      for (int flow = 0; flow < flows_per_step; ++flow) {
        a(row, f_var(k, flow)) = 1.0;
        l(row) = 0.0;
        if (flow_disabled[static_cast<size_t>(flow)]) {
          u(row) = 0.0;
        } else if (k == 0) {
          if (flow < n_regions) {
            u(row) = c_int(flow) * pwa_[static_cast<size_t>(flow)].eval(acc(flow));
          } else {
            const auto [i, h] = edges_[static_cast<size_t>(flow - n_regions)];
            double cap = c_tr(flow - n_regions) * pwa_[static_cast<size_t>(i)].eval(acc(i));
            if (cfg_.rate_constraints && last_gate_.size() == n_edges) {
              const double send =
                  pwa_[static_cast<size_t>(i)].eval(acc(i)) * c_tr(flow - n_regions);
              cap = std::min(cap, (last_gate_(flow - n_regions) + cfg_.rate_limit) * send);
            }
            u(row) = cap;
          }
        }
        ++row;
      }
      for (int i = 0; i < n_regions; ++i) {
        a(row, n_var(k, i)) = 1.0;
        l(row) = 0.0;
        u(row) = net_.regions[static_cast<size_t>(i)].n_max_veh;
        ++row;
        a(row, e_var(k, i)) = 1.0;
        l(row) = 0.0;
        ++row;
      }
    }

    last_qp_ = RowConstrainedQp{2.0 * cfg_.tikhonov * Matrix::Identity(num_vars, num_vars),
                                std::move(q), std::move(a), std::move(l), std::move(u)};
    QpSolution sol = solve(last_qp_, settings_);

    Vector lambda = act_.defaults();
    MpcStepDiag d;
    d.status = sol.status;
    d.iterations = sol.iterations;
    d.primal_residual = sol.primal_residual;
    d.dual_residual = sol.dual_residual;
    d.degraded = sol.status != QpStatus::optimal;
    d.predicted_next = Vector::Zero(n_regions);
    if (!d.degraded) {
      for (int i = 0; i < n_regions; ++i)
        d.predicted_next(i) = sol.x(n_var(0, i)) + sol.x(e_var(0, i));
      for (int k = 0; k < np; ++k) {
        for (int i = 0; i < n_regions; ++i)
          d.throughput_objective +=
              net_.regions[static_cast<size_t>(i)].trip_length_m * sol.x(f_var(k, i));
        for (int e = 0; e < n_edges; ++e)
          d.throughput_objective +=
              net_.regions[static_cast<size_t>(edges_[static_cast<size_t>(e)].first)]
                  .trip_length_m *
              sol.x(f_var(k, n_regions + e));
      }

      Vector gate = Vector::Zero(n_edges);
      for (int e = 0; e < n_edges; ++e) {
        const auto [i, h] = edges_[static_cast<size_t>(e)];
        const double send = pwa_[static_cast<size_t>(i)].eval(acc(i)) * c_tr(e);
        gate(e) = send > 1e-12 ? std::clamp(sol.x(f_var(0, n_regions + e)) / send, 0.0, 1.0)
                               : 0.0;
      }
      last_gate_ = gate;

      for (int a_i = 0; a_i < act_.num_actuators(); ++a_i) {
        const auto [from, to] = cfg_.actuator_flow[static_cast<size_t>(a_i)];
        const Actuator& actuator = act_.actuators[static_cast<size_t>(a_i)];
        // An idle sender leaves nothing to modulate; keep the static split.
        if (pwa_[static_cast<size_t>(from)].eval(acc(from)) <= 1e-12) continue;
        int edge = -1;
        for (int e = 0; e < n_edges; ++e)
          if (edges_[static_cast<size_t>(e)] == std::make_pair(from, to)) edge = e;
        lambda(a_i) =
            std::clamp(gate(edge), actuator.lambda_min, actuator.lambda_max);
      }
    }
    if (diag) *diag = d;
    return lambda;
  }

 private:
  RegionNetwork net_;
  ActuatorMap act_;
  MpcConfig cfg_;
  QpSettings settings_;
  std::vector<PwaMfd> pwa_;
  std::vector<std::pair<int, int>> edges_;
  Vector last_gate_;
  RowConstrainedQp last_qp_;
};

}  // namespace percon
