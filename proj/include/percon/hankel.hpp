#pragma once

#include "percon/common.hpp"
#include "percon/trajectory.hpp"

namespace percon {

/// Block-Hankel matrix of a q-dimensional signal: block row i, column j holds
/// the sample at time i + j (0-based), giving shape (q*depth) x (T - depth + 1).
struct HankelMatrix {
  Matrix entries;
  int depth = 0;
  int signal_dim = 0;

  int num_windows() const { return static_cast<int>(entries.cols()); }
};

inline HankelMatrix build_hankel(const Matrix& signal, int depth) {
  const int q = static_cast<int>(signal.rows());
  const int T = static_cast<int>(signal.cols());
  if (depth <= 0) throw ArgumentError("hankel depth must be positive");
  if (depth > T) throw DimensionError("hankel depth exceeds signal length");
  const int cols = T - depth + 1;
  Matrix h(q * depth, cols);
  for (int i = 0; i < depth; ++i) h.middleRows(i * q, q) = signal.middleCols(i, cols);
  return HankelMatrix{std::move(h), depth, q};
}

inline HankelMatrix build_hankel(const Trajectory& w, int depth) {
  return build_hankel(w.values(), depth);
}

/// Past/future slices of the depth-(t_ini + t_f) Hankel matrices of an
/// input sequence and the matching output sequence.
struct HankelBlocks {
  Matrix u_past;    // (m*t_ini) x N
  Matrix y_past;    // (p*t_ini) x N
  Matrix u_future;  // (m*t_f)   x N
  Matrix y_future;  // (p*t_f)   x N
  int t_ini = 0;
  int t_f = 0;
  int input_dim = 0;
  int output_dim = 0;

  int num_cols() const { return static_cast<int>(u_past.cols()); }
};

inline HankelBlocks split_past_future(const Matrix& u_d, const Matrix& y_d, int t_ini,
                                      int t_f) {
  if (u_d.cols() != y_d.cols())
    throw DimensionError("input and output sequences must have equal length");
  if (t_ini <= 0 || t_f <= 0) throw ArgumentError("horizons must be positive");
  if (t_ini + t_f > u_d.cols())
    throw DimensionError("t_ini + t_f exceeds data length");
  const int m = static_cast<int>(u_d.rows());
  const int p = static_cast<int>(y_d.rows());
  HankelMatrix hu = build_hankel(u_d, t_ini + t_f);
  HankelMatrix hy = build_hankel(y_d, t_ini + t_f);
  HankelBlocks b;
  b.u_past = hu.entries.topRows(m * t_ini);
  b.u_future = hu.entries.bottomRows(m * t_f);
  b.y_past = hy.entries.topRows(p * t_ini);
  b.y_future = hy.entries.bottomRows(p * t_f);
  b.t_ini = t_ini;
  b.t_f = t_f;
  b.input_dim = m;
  b.output_dim = p;
  return b;
}

inline HankelBlocks split_past_future(const Trajectory& w, int t_ini, int t_f) {
  return split_past_future(w.inputs(), w.outputs(), t_ini, t_f);
}

struct PeCheck {
  bool satisfied = false;
  int rank = 0;
  int expected = 0;
};

/// Generalized persistency of excitation: the image of the Hankel matrix spans
/// every length-L trajectory iff its rank equals num_inputs * L + order.
inline PeCheck check_generalized_pe(const HankelMatrix& h, int num_inputs, int order) {
  PeCheck r;
  r.rank = numeric_rank(h.entries);
  r.expected = num_inputs * h.depth + order;
  r.satisfied = (r.rank == r.expected);
  return r;
}

}  // namespace percon
