#pragma once

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace percon {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Incompatible shapes or horizon overflow.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument value (zero depth, negative weight, out-of-range parameter).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed configuration or input file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fit cannot be computed from the given samples.
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numeric rank by singular-value thresholding: sigma_i counts iff
/// sigma_i > max(rows, cols) * sigma_max * 1e-10.
inline int numeric_rank(const Matrix& m) {
  if (m.size() == 0) return 0;
  Eigen::BDCSVD<Matrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv(0) > 0.0)) return 0;
  const double tol =
      static_cast<double>(std::max(m.rows(), m.cols())) * sv(0) * 1e-10;
  int r = 0;
  while (r < sv.size() && sv(r) > tol) ++r;
  return r;
}

}  // namespace percon
