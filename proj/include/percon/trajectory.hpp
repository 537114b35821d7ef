#pragma once

#include <string>

#include "percon/common.hpp"
#include "percon/csv.hpp"

namespace percon {

/// A finite input/output signal. Columns are time samples w(t) = col(u(t), y(t))
/// with the first `input_dim` rows holding the input and the rest the output.
class Trajectory {
 public:
  Trajectory(Matrix values, int input_dim) : values_(std::move(values)), m_(input_dim) {
    if (values_.cols() < 1 || values_.rows() < 1)
      throw DimensionError("trajectory needs at least one sample of a nonempty signal");
    if (m_ < 0 || m_ > values_.rows())
      throw ArgumentError("input dimension must lie in [0, q]");
  }

  int q() const { return static_cast<int>(values_.rows()); }
  int input_dim() const { return m_; }
  int output_dim() const { return q() - m_; }
  int length() const { return static_cast<int>(values_.cols()); }

  const Matrix& values() const { return values_; }
  Matrix inputs() const { return values_.topRows(m_); }
  Matrix outputs() const { return values_.bottomRows(q() - m_); }

  /// Sample at 0-based time index.
  Vector sample(int t) const { return values_.col(t); }

 private:
  Matrix values_;
  int m_;
};

/// CSV schema: header `t,u1..um,y1..yp`, one row per time step, t starting at 1.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
  CsvWriter w(path);
  std::vector<std::string> head{"t"};
  for (int i = 1; i <= traj.input_dim(); ++i) head.push_back("u" + std::to_string(i));
  for (int i = 1; i <= traj.output_dim(); ++i) head.push_back("y" + std::to_string(i));
  w.row(head);
  for (int t = 0; t < traj.length(); ++t) {
    std::vector<std::string> row{std::to_string(t + 1)};
    for (int i = 0; i < traj.q(); ++i) row.push_back(format_double(traj.values()(i, t)));
    w.row(row);
  }
}

inline Trajectory read_trajectory_csv(const std::string& path) {
  CsvTable t = read_csv(path);
  int m = 0, p = 0;
  if (t.header.empty() || t.header[0] != "t")
    throw ConfigError(path + ":1: first column must be 't'");
  for (size_t i = 1; i < t.header.size(); ++i) {
    const std::string& h = t.header[i];
    if (h.size() > 1 && h[0] == 'u') ++m;
    else if (h.size() > 1 && h[0] == 'y') ++p;
    else throw ConfigError(path + ":1: unexpected column '" + h + "'");
  }
  if (t.rows.empty()) throw ConfigError(path + ": no samples");
  Matrix values(m + p, static_cast<Eigen::Index>(t.rows.size()));
  for (size_t r = 0; r < t.rows.size(); ++r) {
    for (int c = 0; c < m + p; ++c) {
      values(c, static_cast<Eigen::Index>(r)) =
          parse_double(t.rows[r][c + 1], path, static_cast<int>(r) + 2);
    }
  }
  return Trajectory(std::move(values), m);
}

}  // namespace percon
