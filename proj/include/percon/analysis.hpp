#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "percon/common.hpp"
#include "percon/csv.hpp"
#include "percon/mfd.hpp"
#include "percon/run_record.hpp"

namespace percon {

/// Principal components of an applied-input log. Rows of the log are
/// actuators, columns are control steps; observations are the steps and the
/// variables are the actuators, mean-centered before the eigendecomposition.
struct PcaResult {
  Vector explained_variance_ratio;  // over the retained components
  Vector eigenvalues;               // descending
  Matrix components;                // actuators x k, orthonormal columns
  Matrix scores;                    // steps x k
};

inline PcaResult pca(const Matrix& input_log, int num_components) {
  const int l = static_cast<int>(input_log.rows());
  const int steps = static_cast<int>(input_log.cols());
  if (steps < 2) throw ArgumentError("pca needs at least two steps");
  if (num_components < 1 || num_components > std::min(l, steps))
    throw ArgumentError("pca component count must lie in [1, min(actuators, steps)]");

  Matrix x = input_log.transpose();  // steps x actuators
  Vector mean = x.colwise().mean();
  x.rowwise() -= mean.transpose();
  Matrix cov = x.transpose() * x / static_cast<double>(steps - 1);

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw ArgumentError("pca eigendecomposition failed");
  Vector vals = eig.eigenvalues().reverse();
  Matrix vecs = eig.eigenvectors().rowwise().reverse();

  const double scale = std::max(vals.cwiseAbs().maxCoeff(), 0.0);
  if (scale <= 1e-300) throw DegenerateFitError("pca: input log is constant");

  PcaResult r;
  r.eigenvalues = vals.head(num_components).cwiseMax(0.0);
  r.components = vecs.leftCols(num_components);
  // Sign convention: the largest-magnitude loading of each component is positive.
  for (int c = 0; c < num_components; ++c) {
    int at = 0;
    r.components.col(c).cwiseAbs().maxCoeff(&at);
    if (r.components(at, c) < 0.0) r.components.col(c) = -r.components.col(c);
  }
  r.scores = x * r.components;
  const double total = r.eigenvalues.sum();
  if (total <= 0.0) throw DegenerateFitError("pca: no variance in the retained components");
  r.explained_variance_ratio = r.eigenvalues / total;
  return r;
}

/// Actuators ordered by descending loading on one component; ties keep
/// ascending actuator ids.
inline std::vector<std::pair<int, double>> rank_actuators(const Vector& loadings) {
  std::vector<std::pair<int, double>> order;
  order.reserve(static_cast<size_t>(loadings.size()));
  for (int i = 0; i < loadings.size(); ++i) order.emplace_back(i, loadings(i));
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return order;
}

struct MetricsSummary {
  double total_time_spent_veh_h = 0.0;
  std::optional<double> mean_travel_time_min;
  double trips_completed = 0.0;
  Vector peak_density;
  bool gridlock = false;
};

/// Aggregates a run: time spent, completed trips, the travel-time proxy, and
/// a gridlock flag raised when any region sits at >= 98% of its maximal
/// density for three consecutive duty cycles.
inline MetricsSummary summarize_run(const RunRecord& rec) {
  MetricsSummary s;
  s.total_time_spent_veh_h = rec.time_spent_veh_s / 3600.0;
  s.trips_completed = rec.trips_completed;
  if (rec.trips_completed > 0.0)
    s.mean_travel_time_min = rec.time_spent_veh_s / rec.trips_completed / 60.0;

  s.peak_density = Vector::Zero(rec.num_regions);
  std::vector<int> streak(static_cast<size_t>(rec.num_regions), 0);
  const int needed = 3 * std::max(1, rec.substeps_per_cycle);
  for (const Vector& rho : rec.density) {
    for (int i = 0; i < rec.num_regions; ++i) {
      s.peak_density(i) = std::max(s.peak_density(i), rho(i));
      if (rec.rho_max.size() == rec.num_regions && rho(i) >= 0.98 * rec.rho_max(i)) {
        if (++streak[static_cast<size_t>(i)] >= needed) s.gridlock = true;
      } else {
        streak[static_cast<size_t>(i)] = 0;
      }
    }
  }
  return s;
}

inline void write_pca_components_csv(const std::string& path, const PcaResult& r) {
  CsvWriter w(path);
  std::vector<std::string> head{"step"};
  for (int c = 0; c < r.scores.cols(); ++c) head.push_back("PC" + std::to_string(c + 1));
  w.row(head);
  for (int t = 0; t < r.scores.rows(); ++t) {
    std::vector<std::string> row{std::to_string(t)};
    for (int c = 0; c < r.scores.cols(); ++c) row.push_back(format_double(r.scores(t, c)));
    w.row(row);
  }
}

inline void write_loadings_csv(const std::string& path, const PcaResult& r) {
  CsvWriter w(path);
  std::vector<std::string> head{"actuator"};
  for (int c = 0; c < r.components.cols(); ++c)
    head.push_back("PC" + std::to_string(c + 1));
  w.row(head);
  for (int a = 0; a < r.components.rows(); ++a) {
    std::vector<std::string> row{std::to_string(a)};
    for (int c = 0; c < r.components.cols(); ++c)
      row.push_back(format_double(r.components(a, c)));
    w.row(row);
  }
}

inline void write_metrics_summary_csv(const std::string& path, const MetricsSummary& s) {
  CsvWriter w(path);
  w.row({"key", "value"});
  w.row({"total_time_spent_veh_h", format_double(s.total_time_spent_veh_h)});
  w.row({"mean_travel_time_min",
         s.mean_travel_time_min ? format_double(*s.mean_travel_time_min) : "absent"});
  w.row({"trips_completed", format_double(s.trips_completed)});
  for (int i = 0; i < s.peak_density.size(); ++i)
    w.row({"peak_density_" + std::to_string(i), format_double(s.peak_density(i))});
  w.row({"gridlock", s.gridlock ? "1" : "0"});
}

inline void write_mfd_comparison_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, MfdEstimate>>& labeled) {
  CsvWriter w(path);
  w.row({"label", "rho_cr", "rho_max", "rmse"});
  for (const auto& [label, est] : labeled) {
    w.row({label, format_double(est.rho_cr),
           est.rho_max ? format_double(*est.rho_max) : "absent", format_double(est.rmse)});
  }
}

}  // namespace percon
