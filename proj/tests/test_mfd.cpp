#include <catch2/catch.hpp>

#include <random>

#include "percon/mfd.hpp"

using namespace percon;

namespace {

std::vector<std::pair<double, double>> sample_poly(
    const std::function<double(double)>& f, double lo, double hi, int n) {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < n; ++i) {
    double rho = lo + (hi - lo) * i / (n - 1);
    pts.emplace_back(rho, std::max(0.0, f(rho)));
  }
  return pts;
}

}  // namespace

TEST_CASE("symmetric quartic recovered exactly", "[mfd]") {
  auto f = [](double r) { return r * r * (2.0 - r) * (2.0 - r); };
  auto pts = sample_poly(f, 0.0, 2.0, 50);
  MfdEstimate est = fit_mfd(pts);
  REQUIRE(est.rho_cr == Approx(1.0).margin(1e-6));
  REQUIRE(est.rho_max.has_value());
  REQUIRE(*est.rho_max == Approx(2.0).margin(1e-6));
  REQUIRE(est.rmse < 1e-9);
}

TEST_CASE("quartic with urban-scale landmarks recovered", "[mfd]") {
  // Quartic peaking at 16.24 with its first positive zero at 101.8,
  // scaled to a plausible peak flow.
  const double rho_max = 101.8, rho_cr = 16.24;
  const double span = rho_max - rho_cr;
  const double a = 1.0, b = 1e-4;
  const double level = a * span * span + b * span * span * span * span;
  auto f = [&](double r) {
    double d = r - rho_cr;
    double v = level - a * d * d - b * d * d * d * d;
    return 225.0 * v / level;
  };
  auto pts = sample_poly(f, 0.0, rho_max, 200);
  MfdEstimate est = fit_mfd(pts);
  REQUIRE(est.rho_cr == Approx(rho_cr).margin(1e-2));
  REQUIRE(est.rho_max.has_value());
  REQUIRE(*est.rho_max == Approx(rho_max).margin(1e-2));
}

TEST_CASE("noisy synthetic quartic recovered within five percent", "[mfd]") {
  auto truth = [](double r) { return 3.0 * r * (60.0 - r) * (130.0 - r) * (130.0 - r) / 1.7e5; };
  std::mt19937 rng(4242);
  std::normal_distribution<double> noise(0.0, 0.05);
  std::uniform_real_distribution<double> where(0.5, 59.5);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 500; ++i) {
    double rho = where(rng);
    pts.emplace_back(rho, std::max(0.0, truth(rho) * (1.0 + noise(rng))));
  }
  MfdEstimate est = fit_mfd(pts);
  // True critical density of the sampled family.
  double best_x = 0, best_v = -1;
  for (int i = 1; i < 6000; ++i) {
    double x = 60.0 * i / 6000;
    if (truth(x) > best_v) {
      best_v = truth(x);
      best_x = x;
    }
  }
  REQUIRE(std::abs(est.rho_cr - best_x) / best_x < 0.05);
  REQUIRE(est.rho_max.has_value());
  REQUIRE(std::abs(*est.rho_max - 60.0) / 60.0 < 0.05);
}

TEST_CASE("monotone scatter reports rho_max absent", "[mfd]") {
  // Strictly increasing flow: no positive-to-zero crossing in range.
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 20; ++i) pts.emplace_back(i + 1.0, 2.0 * (i + 1.0) + 1.0);
  MfdEstimate est = fit_mfd(pts);
  REQUIRE_FALSE(est.rho_max.has_value());
}

TEST_CASE("all-zero flow is a degenerate fit", "[mfd]") {
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 15; ++i) pts.emplace_back(i + 1.0, 0.0);
  REQUIRE_THROWS_AS(fit_mfd(pts), DegenerateFitError);
}

TEST_CASE("too few points rejected", "[mfd]") {
  std::vector<std::pair<double, double>> pts{{1, 1}, {2, 2}};
  REQUIRE_THROWS_AS(fit_mfd(pts), ArgumentError);
}

TEST_CASE("normal-equation residual orthogonality", "[mfd]") {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> d(0.0, 30.0);
  std::vector<std::pair<double, double>> pts;
  for (int i = 0; i < 80; ++i) {
    double rho = d(rng);
    pts.emplace_back(rho, std::max(0.0, rho * (30 - rho) / 10 + d(rng) * 0.05));
  }
  MfdEstimate est = fit_mfd(pts);
  Matrix vand(static_cast<int>(pts.size()), 5);
  Vector flow(static_cast<int>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) {
    double v = 1.0;
    for (int k = 0; k < 5; ++k) {
      vand(static_cast<int>(i), k) = v;
      v *= pts[i].first;
    }
    flow(static_cast<int>(i)) = pts[i].second;
  }
  Vector c(5);
  for (int k = 0; k < 5; ++k) c(k) = est.coeffs[static_cast<size_t>(k)];
  REQUIRE((vand.transpose() * (vand * c - flow)).norm() <= 1e-6 * flow.norm());
}

TEST_CASE("scaling flows scales coefficients and keeps landmarks", "[mfd]") {
  auto f = [](double r) { return r * r * (2.0 - r) * (2.0 - r); };
  auto pts = sample_poly(f, 0.0, 2.0, 40);
  MfdEstimate base = fit_mfd(pts);
  for (auto& pt : pts) pt.second *= 7.5;
  MfdEstimate scaled = fit_mfd(pts);
  for (int k = 0; k < 5; ++k)
    REQUIRE(scaled.coeffs[static_cast<size_t>(k)] ==
            Approx(7.5 * base.coeffs[static_cast<size_t>(k)]).margin(1e-8));
  REQUIRE(scaled.rho_cr == Approx(base.rho_cr).margin(1e-7));
  REQUIRE(*scaled.rho_max == Approx(*base.rho_max).margin(1e-7));
}

TEST_CASE("critical reference stacks per-region estimates", "[mfd]") {
  MfdEstimate e;
  e.rho_cr = 3.5;
  std::vector<std::optional<MfdEstimate>> all(4, e);
  Vector ref = critical_reference(all);
  REQUIRE(ref.size() == 4);
  REQUIRE((ref.array() == 3.5).all());

  all[2].reset();
  REQUIRE_THROWS_AS(critical_reference(all), ArgumentError);
}

TEST_CASE("critical reference matches a dense-grid argmax oracle", "[mfd]") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> peak(20.0, 80.0);
  std::vector<std::optional<MfdEstimate>> ests;
  std::vector<double> oracle;
  for (int region = 0; region < 8; ++region) {
    double rmax = peak(rng);
    auto f = [&](double r) { return r * (rmax - r) * (rmax - r); };
    auto pts = sample_poly(f, 0.0, rmax, 120);
    ests.push_back(fit_mfd(pts));
    double bx = 0, bv = -1;
    for (int i = 1; i <= 100000; ++i) {
      double x = rmax * i / 100000;
      if (f(x) > bv) {
        bv = f(x);
        bx = x;
      }
    }
    oracle.push_back(bx);
  }
  Vector ref = critical_reference(ests);
  for (int region = 0; region < 8; ++region)
    REQUIRE(ref(region) == Approx(oracle[static_cast<size_t>(region)]).margin(1e-3));
}
