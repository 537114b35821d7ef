#pragma once

#include <algorithm>
#include <cstdint>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "percon/common.hpp"

namespace percon {

/// Road-level view of the network used for region building: one mean density
/// per road plus undirected road connectivity.
struct RoadGraph {
  std::vector<double> density;
  std::vector<std::vector<int>> adjacency;

  int num_roads() const { return static_cast<int>(density.size()); }

  void validate() const {
    if (density.size() != adjacency.size())
      throw DimensionError("road graph: density and adjacency sizes disagree");
    for (double d : density)
      if (d < 0.0) throw ArgumentError("road graph: densities must be nonnegative");
    for (size_t i = 0; i < adjacency.size(); ++i)
      for (int j : adjacency[i]) {
        if (j < 0 || j >= num_roads())
          throw ArgumentError("road graph: edge endpoint out of range");
        const auto& back = adjacency[static_cast<size_t>(j)];
        if (std::find(back.begin(), back.end(), static_cast<int>(i)) == back.end())
          throw ArgumentError("road graph: adjacency must be symmetric");
      }
  }
};

struct SnakeSet {
  std::vector<std::vector<int>> snakes;  // snakes[seed] lists road ids, seed first
  int depth = 0;
  int truncated = 0;  // seeds whose component ran out before reaching the depth
};

/// Grows one snake per seed road: at every step the neighboring road that
/// minimizes the density variance of the grown set joins, ties resolved by
/// the lowest road id.
inline SnakeSet run_snakes(const RoadGraph& graph, int depth) {
  graph.validate();
  const int n = graph.num_roads();
  if (depth < 1 || depth > n) throw ArgumentError("snake depth must lie in [1, n]");

  SnakeSet out;
  out.depth = depth;
  out.snakes.reserve(static_cast<size_t>(n));
  for (int seed = 0; seed < n; ++seed) {
    std::vector<int> snake{seed};
    std::vector<char> member(static_cast<size_t>(n), 0);
    member[static_cast<size_t>(seed)] = 1;
    std::set<int> frontier(graph.adjacency[static_cast<size_t>(seed)].begin(),
                           graph.adjacency[static_cast<size_t>(seed)].end());
    double sum = graph.density[static_cast<size_t>(seed)];
    double sumsq = sum * sum;
    while (static_cast<int>(snake.size()) < depth && !frontier.empty()) {
      const double count = static_cast<double>(snake.size()) + 1.0;
      int best = -1;
      double best_var = kInf;
      for (int cand : frontier) {  // ascending ids, strict improvement keeps ties low
        const double d = graph.density[static_cast<size_t>(cand)];
        const double mean = (sum + d) / count;
        const double var = (sumsq + d * d) / count - mean * mean;
        if (var < best_var) {
          best_var = var;
          best = cand;
        }
      }
      snake.push_back(best);
      member[static_cast<size_t>(best)] = 1;
      frontier.erase(best);
      sum += graph.density[static_cast<size_t>(best)];
      sumsq += graph.density[static_cast<size_t>(best)] *
               graph.density[static_cast<size_t>(best)];
      for (int nb : graph.adjacency[static_cast<size_t>(best)])
        if (!member[static_cast<size_t>(nb)]) frontier.insert(nb);
    }
    if (static_cast<int>(snake.size()) < depth) ++out.truncated;
    out.snakes.push_back(std::move(snake));
  }
  return out;
}

/// Similarity of two snakes: the decay-weighted sizes of their prefix
/// intersections, W[i,j] = sum_{k=1..m} decay^(n-k) * |prefix_k(i) n prefix_k(j)|.
inline Matrix compute_similarity(const SnakeSet& snakes, double decay, int num_roads) {
  if (!(decay > 0.0 && decay < 1.0))
    throw ArgumentError("similarity decay must lie in (0, 1)");
  const int n = static_cast<int>(snakes.snakes.size());
  const int m = snakes.depth;

  std::vector<double> weight(static_cast<size_t>(m) + 1, 0.0);
  for (int k = 1; k <= m; ++k)
    weight[static_cast<size_t>(k)] = std::pow(decay, num_roads - k);

  // Position of every road within each snake, for O(m) pair scoring.
  std::vector<std::vector<int>> pos(static_cast<size_t>(n),
                                    std::vector<int>(static_cast<size_t>(num_roads), -1));
  for (int s = 0; s < n; ++s)
    for (size_t a = 0; a < snakes.snakes[static_cast<size_t>(s)].size(); ++a)
      pos[static_cast<size_t>(s)][static_cast<size_t>(
          snakes.snakes[static_cast<size_t>(s)][a])] = static_cast<int>(a);

  Matrix w = Matrix::Zero(n, n);
  std::vector<int> count_at(static_cast<size_t>(m) + 2, 0);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      std::fill(count_at.begin(), count_at.end(), 0);
      const auto& si = snakes.snakes[static_cast<size_t>(i)];
      for (size_t a = 0; a < si.size(); ++a) {
        int pj = pos[static_cast<size_t>(j)][static_cast<size_t>(si[a])];
        if (pj < 0) continue;
        // Road si[a] is inside both prefixes from k = max(a, pj) + 1 on.
        int from = std::max(static_cast<int>(a), pj) + 1;
        if (from <= m) ++count_at[static_cast<size_t>(from)];
      }
      double total = 0.0;
      int members = 0;
      for (int k = 1; k <= m; ++k) {
        members += count_at[static_cast<size_t>(k)];
        total += weight[static_cast<size_t>(k)] * members;
      }
      w(i, j) = total;
      w(j, i) = total;
    }
  }
  return (w + w.transpose()) * 0.5;
}

struct SymnmfOptions {
  int max_iter = 500;
  double rel_tol = 1e-7;
  bool symmetric_normalization = true;  // the asymmetric variant is experimental
};

struct PartitionResult {
  std::vector<int> assignment;
  std::vector<double> objective_history;
  Matrix h;
  int repairs = 0;
};

namespace detail {

inline std::vector<std::vector<int>> label_components(const RoadGraph& graph,
                                                      const std::vector<int>& assignment,
                                                      int label) {
  const int n = graph.num_roads();
  std::vector<char> seen(static_cast<size_t>(n), 0);
  std::vector<std::vector<int>> comps;
  for (int start = 0; start < n; ++start) {
    if (assignment[static_cast<size_t>(start)] != label || seen[static_cast<size_t>(start)])
      continue;
    std::vector<int> comp;
    std::queue<int> q;
    q.push(start);
    seen[static_cast<size_t>(start)] = 1;
    while (!q.empty()) {
      int v = q.front();
      q.pop();
      comp.push_back(v);
      for (int nb : graph.adjacency[static_cast<size_t>(v)]) {
        if (assignment[static_cast<size_t>(nb)] == label && !seen[static_cast<size_t>(nb)]) {
          seen[static_cast<size_t>(nb)] = 1;
          q.push(nb);
        }
      }
    }
    comps.push_back(std::move(comp));
  }
  return comps;
}

/// Moves stray disconnected fragments of each region to the adjacent region
/// they touch the most. Returns the number of reassigned fragments.
inline int repair_connectivity(const RoadGraph& graph, std::vector<int>& assignment,
                               int num_labels) {
  int repairs = 0;
  for (int round = 0; round < graph.num_roads(); ++round) {
    bool changed = false;
    for (int label = 0; label < num_labels; ++label) {
      auto comps = label_components(graph, assignment, label);
      if (comps.size() <= 1) continue;
      size_t keep = 0;
      for (size_t c = 1; c < comps.size(); ++c)
        if (comps[c].size() > comps[keep].size()) keep = c;
      for (size_t c = 0; c < comps.size(); ++c) {
        if (c == keep) continue;
        std::vector<int> touch(static_cast<size_t>(num_labels), 0);
        for (int v : comps[c])
          for (int nb : graph.adjacency[static_cast<size_t>(v)]) {
            int other = assignment[static_cast<size_t>(nb)];
            if (other != label) ++touch[static_cast<size_t>(other)];
          }
        int best = -1, best_count = 0;
        for (int cand = 0; cand < num_labels; ++cand)
          if (touch[static_cast<size_t>(cand)] > best_count) {
            best_count = touch[static_cast<size_t>(cand)];
            best = cand;
          }
        if (best < 0) continue;
        for (int v : comps[c]) assignment[static_cast<size_t>(v)] = best;
        ++repairs;
        changed = true;
      }
    }
    if (!changed) break;
  }
  return repairs;
}

}  // namespace detail

/// Clusters the degree-normalized similarity by symmetric nonnegative matrix
/// factorization with multiplicative half-step updates, then assigns each
/// road to its dominant factor and repairs disconnected fragments.
inline PartitionResult symnmf_cluster(const Matrix& w, int num_regions, std::uint64_t seed,
                                      const RoadGraph& graph, SymnmfOptions opts = {}) {
  const int n = static_cast<int>(w.rows());
  if (w.cols() != n) throw DimensionError("similarity matrix must be square");
  if (num_regions < 1 || num_regions > n)
    throw ArgumentError("region count must lie in [1, n]");
  if (((w - w.transpose()).cwiseAbs().maxCoeff()) > 1e-9 * std::max(1.0, w.cwiseAbs().maxCoeff()))
    throw ArgumentError("similarity matrix must be symmetric");
  if (w.minCoeff() < 0.0) throw ArgumentError("similarity matrix must be nonnegative");

  Vector deg = w.rowwise().sum();
  Vector dinv_sqrt(n), dsqrt(n);
  for (int i = 0; i < n; ++i) {
    dinv_sqrt(i) = deg(i) > 0.0 ? 1.0 / std::sqrt(deg(i)) : 0.0;
    dsqrt(i) = std::sqrt(deg(i));
  }
  Matrix w_norm = opts.symmetric_normalization
                      ? Matrix(dinv_sqrt.asDiagonal() * w * dinv_sqrt.asDiagonal())
                      : Matrix(dinv_sqrt.asDiagonal() * w * dsqrt.asDiagonal());

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double scale =
      std::sqrt(std::max(w_norm.mean(), 1e-12) / std::max(1, num_regions));
  Matrix h(n, num_regions);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < num_regions; ++j) h(i, j) = 2.0 * scale * unif(rng);

  PartitionResult result;
  auto objective = [&](const Matrix& hh) {
    return (w_norm - hh * hh.transpose()).squaredNorm();
  };
  double prev = objective(h);
  result.objective_history.push_back(prev);
  for (int it = 0; it < opts.max_iter; ++it) {
    Matrix wh = w_norm * h;
    Matrix denom = h * (h.transpose() * h);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < num_regions; ++j)
        h(i, j) *= 0.5 + 0.5 * wh(i, j) / std::max(denom(i, j), 1e-300);
    double cur = objective(h);
    result.objective_history.push_back(cur);
    if (std::abs(prev - cur) < opts.rel_tol * std::max(prev, 1e-12)) break;
    prev = cur;
  }

  result.assignment.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < num_regions; ++j)
      if (h(i, j) > h(i, best)) best = j;
    result.assignment[static_cast<size_t>(i)] = best;
  }
  result.h = std::move(h);
  result.repairs = detail::repair_connectivity(graph, result.assignment, num_regions);
  return result;
}

}  // namespace percon
