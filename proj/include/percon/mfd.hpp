#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "percon/common.hpp"
#include "percon/csv.hpp"

namespace percon {

/// Quartic flow/density relation fitted from sensor scatter, with the
/// density of maximum flow (the tracking reference) and the smallest
/// positive zero crossing (the gridlock density).
struct MfdEstimate {
  std::array<double, 5> coeffs{};  // c0..c4, flow = sum c_k * rho^k
  double rho_cr = 0.0;
  std::optional<double> rho_max;
  double rmse = 0.0;

  double eval(double rho) const {
    double v = 0.0;
    for (int k = 4; k >= 0; --k) v = v * rho + coeffs[static_cast<size_t>(k)];
    return v;
  }

  double derivative(double rho) const {
    double v = 0.0;
    for (int k = 4; k >= 1; --k) v = v * rho + k * coeffs[static_cast<size_t>(k)];
    return v;
  }
};

namespace detail {

/// Root of f in [a, b] with f(a) and f(b) of opposite (weak) sign,
/// bisected to 1e-9 absolute.
template <typename F>
double bisect(const F& f, double a, double b) {
  double fa = f(a);
  for (int it = 0; it < 200 && b - a > 1e-9; ++it) {
    double mid = 0.5 * (a + b);
    double fm = f(mid);
    if ((fa > 0.0) == (fm > 0.0)) {
      a = mid;
      fa = fm;
    } else {
      b = mid;
    }
  }
  return 0.5 * (a + b);
}

/// Scans [lo, hi] on a uniform grid and bisects every sign change.
template <typename F>
std::vector<double> grid_roots(const F& f, double lo, double hi, int cells) {
  std::vector<double> roots;
  double prev_x = lo, prev_f = f(lo);
  for (int i = 1; i <= cells; ++i) {
    double x = lo + (hi - lo) * i / cells;
    double fx = f(x);
    if (prev_f == 0.0) {
      roots.push_back(prev_x);
    } else if ((prev_f > 0.0) != (fx > 0.0)) {
      roots.push_back(bisect(f, prev_x, x));
    }
    prev_x = x;
    prev_f = fx;
  }
  return roots;
}

}  // namespace detail

/// Least-squares quartic through (rho, flow) scatter. Needs at least ten
/// nonnegative points. rho_max is reported absent when no positive-to-zero
/// crossing exists within three times the sampled density range.
inline MfdEstimate fit_mfd(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 10) throw ArgumentError("mfd fit needs at least 10 points");
  double rho_hi = 0.0;
  bool any_flow = false;
  for (const auto& [rho, flow] : points) {
    if (rho < 0.0 || flow < 0.0) throw ArgumentError("mfd samples must be nonnegative");
    rho_hi = std::max(rho_hi, rho);
    if (flow > 0.0) any_flow = true;
  }
  if (!any_flow) throw DegenerateFitError("mfd fit: all flows are zero");
  if (rho_hi <= 0.0) throw DegenerateFitError("mfd fit: all densities are zero");

  const int n = static_cast<int>(points.size());
  Matrix vand(n, 5);
  Vector flow(n);
  for (int i = 0; i < n; ++i) {
    double r = points[static_cast<size_t>(i)].first;
    double v = 1.0;
    for (int k = 0; k < 5; ++k) {
      vand(i, k) = v;
      v *= r;
    }
    flow(i) = points[static_cast<size_t>(i)].second;
  }
  Vector c = vand.colPivHouseholderQr().solve(flow);

  MfdEstimate est;
  for (int k = 0; k < 5; ++k) est.coeffs[static_cast<size_t>(k)] = c(k);
  est.rmse = std::sqrt((vand * c - flow).squaredNorm() / n);

  auto poly = [&est](double x) { return est.eval(x); };
  auto deriv_fn = [&est](double x) { return est.derivative(x); };
  const double scan_hi = 3.0 * rho_hi;
  const int cells = 10000;
  const double eps = scan_hi / cells * 1e-3;

  double poly_scale = 0.0;
  for (int i = 0; i <= cells; ++i)
    poly_scale = std::max(poly_scale, std::abs(poly(eps + (scan_hi - eps) * i / cells)));

  // Smallest positive zero reached from above: either a sign change or a
  // touching root (a critical point where the polynomial vanishes).
  std::vector<double> zero_candidates;
  {
    double prev_x = eps, prev_f = poly(prev_x);
    for (int i = 1; i <= cells; ++i) {
      double x = eps + (scan_hi - eps) * i / cells;
      double fx = poly(x);
      if (prev_f > 0.0 && fx <= 0.0)
        zero_candidates.push_back(detail::bisect(poly, prev_x, x));
      prev_x = x;
      prev_f = fx;
    }
    for (double xc : detail::grid_roots(deriv_fn, eps, scan_hi, cells)) {
      if (std::abs(poly(xc)) <= 1e-7 * poly_scale && poly(0.5 * xc) > 0.0)
        zero_candidates.push_back(xc);
    }
  }
  for (double z : zero_candidates)
    if (z > 0.0 && (!est.rho_max || z < *est.rho_max)) est.rho_max = z;

  // Argmax over the positive branch via derivative roots.
  const double arg_hi = est.rho_max.value_or(rho_hi);
  std::vector<double> crit = detail::grid_roots(deriv_fn, eps, arg_hi, cells);
  double best_x = 0.0, best_v = -kInf;
  for (double x : crit) {
    if (x <= 0.0 || x > arg_hi) continue;
    double v = poly(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  if (best_v == -kInf) {
    for (int i = 1; i <= cells; ++i) {
      double x = eps + (arg_hi - eps) * i / cells;
      double v = poly(x);
      if (v > best_v) {
        best_v = v;
        best_x = x;
      }
    }
  }
  est.rho_cr = best_x;
  return est;
}

/// Stacks the per-region critical densities into the output reference.
inline Vector critical_reference(const std::vector<std::optional<MfdEstimate>>& regions) {
  Vector ref(static_cast<Eigen::Index>(regions.size()));
  for (size_t i = 0; i < regions.size(); ++i) {
    if (!regions[i])
      throw ArgumentError("critical_reference: estimate missing for region " +
                          std::to_string(i));
    ref(static_cast<Eigen::Index>(i)) = regions[i]->rho_cr;
  }
  return ref;
}

inline std::vector<std::pair<double, double>> read_mfd_scatter_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  const int cd = t.column("density");
  const int cf = t.column("flow");
  std::vector<std::pair<double, double>> pts;
  pts.reserve(t.rows.size());
  for (size_t r = 0; r < t.rows.size(); ++r) {
    pts.emplace_back(parse_double(t.rows[r][cd], path, static_cast<int>(r) + 2),
                     parse_double(t.rows[r][cf], path, static_cast<int>(r) + 2));
  }
  return pts;
}

inline void write_mfd_curve_csv(const std::string& path, const MfdEstimate& est,
                                double rho_hi, int samples = 200) {
  CsvWriter w(path);
  w.row({"density", "flow"});
  for (int i = 0; i <= samples; ++i) {
    double rho = rho_hi * i / samples;
    w.row({format_double(rho), format_double(std::max(0.0, est.eval(rho)))});
  }
}

inline void write_mfd_summary_csv(const std::string& path, const MfdEstimate& est) {
  CsvWriter w(path);
  w.row({"rho_cr", "rho_max", "rmse"});
  w.row({format_double(est.rho_cr), est.rho_max ? format_double(*est.rho_max) : "absent",
         format_double(est.rmse)});
}

}  // namespace percon
