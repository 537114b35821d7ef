#pragma once

#include "percon/common.hpp"

namespace percon {

/// Minimal discrete-time LTI realization x+ = Ax + Bu, y = Cx + Du.
struct StateSpaceModel {
  Matrix A, B, C, D;

  int order() const { return static_cast<int>(A.rows()); }
  int input_dim() const { return static_cast<int>(B.cols()); }
  int output_dim() const { return static_cast<int>(C.rows()); }

  void validate() const {
    if (A.rows() != A.cols()) throw DimensionError("A must be square");
    if (B.rows() != A.rows()) throw DimensionError("B row count must match order");
    if (C.cols() != A.rows()) throw DimensionError("C column count must match order");
    if (D.rows() != C.rows() || D.cols() != B.cols())
      throw DimensionError("D must be p x m");
  }
};

/// Exact state recursion; the reference oracle for everything Hankel-based.
inline Matrix simulate_lti(const StateSpaceModel& sys, const Vector& x0, const Matrix& u) {
  sys.validate();
  if (x0.size() != sys.order()) throw DimensionError("x0 size must match order");
  if (u.rows() != sys.input_dim()) throw DimensionError("input rows must match m");
  const int T = static_cast<int>(u.cols());
  Matrix y(sys.output_dim(), T);
  Vector x = x0;
  for (int t = 0; t < T; ++t) {
    y.col(t) = sys.C * x + sys.D * u.col(t);
    x = sys.A * x + sys.B * u.col(t);
  }
  return y;
}

/// Smallest l such that the observability matrix col(C, CA, ..., CA^{l-1})
/// has full rank. Throws if the pair (A, C) is unobservable.
inline int observability_lag(const StateSpaceModel& sys) {
  sys.validate();
  const int n = sys.order();
  if (n == 0) return 0;
  Matrix obs(sys.output_dim() * n, n);
  Matrix block = sys.C;
  for (int l = 1; l <= n; ++l) {
    obs.middleRows((l - 1) * sys.output_dim(), sys.output_dim()) = block;
    if (numeric_rank(obs.topRows(l * sys.output_dim())) == n) return l;
    block = block * sys.A;
  }
  throw ArgumentError("system is not observable");
}

}  // namespace percon
