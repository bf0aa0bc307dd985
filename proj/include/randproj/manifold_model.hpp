// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "randproj/errors.hpp"

namespace randproj {

/// Parameters of the Gaussian random manifold ensemble.
struct ManifoldSpec {
  std::size_t K = 1;
  std::size_t N = 1;
  double ell = 1.0;
  std::vector<double> lambda{1.0};
  std::vector<double> L{1.0};
  std::vector<std::size_t> grid{2};

  void validate() const {
    const char* m = "manifold_model";
    detail::require(K >= 1, m, "K must be >= 1");
    detail::require(N >= 1, m, "N must be >= 1");
    detail::require(std::isfinite(ell) && ell > 0, m, "ell must be positive");
    if (lambda.size() != K || L.size() != K || grid.size() != K)
      throw DimensionMismatch(m, "lambda, L and grid must each have K entries");
    for (std::size_t a = 0; a < K; ++a) {
      detail::require(std::isfinite(lambda[a]) && lambda[a] > 0, m, "lambda entries must be positive");
      detail::require(std::isfinite(L[a]) && L[a] > 0, m, "L entries must be positive");
      detail::require(grid[a] >= 2, m, "grid entries must be >= 2");
    }
    const double lv = log_volume_ratio();
    detail::require(std::isfinite(lv), m, "volume ratio must be finite");
  }

  double log_volume_ratio() const {
    double s = 0.0;
    for (std::size_t a = 0; a < L.size(); ++a) s += std::log(L[a] / lambda[a]);
    return s;
  }

  double volume_ratio() const { return std::exp(log_volume_ratio()); }

  std::size_t point_count() const {
    return std::accumulate(grid.begin(), grid.end(), std::size_t{1}, std::multiplies<>());
  }

  /// Grid spacing along axis a; grids include both endpoints 0 and L_a.
  double spacing(std::size_t a) const { return L[a] / static_cast<double>(grid[a] - 1); }

  std::vector<double> axis(std::size_t a) const {
    std::vector<double> x(grid[a]);
    for (std::size_t k = 0; k < grid[a]; ++k) x[k] = spacing(a) * static_cast<double>(k);
    x.back() = L[a];
    return x;
  }

  /// Isotropic spec with L_a / lambda_a = V^{1/K} on every axis.
  static ManifoldSpec with_volume(std::size_t K, std::size_t N, double log_V, double ell,
                                  double lambda, double points_per_lambda) {
    ManifoldSpec s;
    s.K = K;
    s.N = N;
    s.ell = ell;
    const double extent = lambda * std::exp(log_V / static_cast<double>(K));
    s.lambda.assign(K, lambda);
    s.L.assign(K, extent);
    const auto n = static_cast<std::size_t>(std::llround(extent / lambda * points_per_lambda)) + 1;
    s.grid.assign(K, std::max<std::size_t>(n, 3));
    s.validate();
    return s;
  }
};

struct CellPartition {
  double gamma = 1.0;
  std::vector<std::size_t> counts;
  std::vector<std::vector<double>> centers;

  std::size_t total() const {
    return std::accumulate(counts.begin(), counts.end(), std::size_t{1}, std::multiplies<>());
  }
};

struct ExpectedGeometry {
  double rho = 0.0;
  double chord_sq = 0.0;
  std::vector<double> principal_cosines;
  std::vector<double> metric_diag;
};

inline double intrinsic_separation(const ManifoldSpec& spec, const std::vector<double>& s1,
                                   const std::vector<double>& s2) {
  if (s1.size() != spec.K || s2.size() != spec.K)
    throw DimensionMismatch("manifold_model", "intrinsic points must have K coordinates");
  double rho = 0.0;
  for (std::size_t a = 0; a < spec.K; ++a) {
    const double d = (s1[a] - s2[a]) / spec.lambda[a];
    rho += d * d;
  }
  return rho;
}

namespace detail {
inline void require_rho(double rho) {
  if (!(rho >= 0.0)) throw DomainError("manifold_model", "rho must be nonnegative");
}
}  // namespace detail

inline double expected_chord_sq(double rho, double ell) {
  detail::require_rho(rho);
  detail::require(ell > 0, "manifold_model", "ell must be positive");
  return -2.0 * ell * ell * std::expm1(-0.5 * rho);
}

inline std::vector<double> expected_principal_cosines(double rho, std::size_t K) {
  detail::require_rho(rho);
  detail::require(K >= 1, "manifold_model", "K must be >= 1");
  const double e = std::exp(-0.5 * rho);
  std::vector<double> c(K, e);
  c.back() = std::abs(1.0 - rho) * e;
  return c;
}

inline double expected_tangent_cosine(double rho) {
  detail::require_rho(rho);
  return (1.0 - rho) * std::exp(-0.5 * rho);
}

inline ExpectedGeometry expected_geometry(const ManifoldSpec& spec, const std::vector<double>& s1,
                                          const std::vector<double>& s2) {
  ExpectedGeometry g;
  g.rho = intrinsic_separation(spec, s1, s2);
  g.chord_sq = expected_chord_sq(g.rho, spec.ell);
  g.principal_cosines = expected_principal_cosines(g.rho, spec.K);
  for (double lam : spec.lambda) g.metric_diag.push_back((spec.ell / lam) * (spec.ell / lam));
  return g;
}

/// Sine of the half-angle of the chordal cone between two cells whose index
/// offset has Euclidean norm `cell_offset_norm`. Infinity is accepted.
inline double chordal_cone_angle(double gamma, std::size_t K, double cell_offset_norm) {
  const char* m = "manifold_model";
  detail::require(gamma > 0, m, "gamma must be positive");
  detail::require(K >= 1, m, "K must be >= 1");
  detail::require(cell_offset_norm > 0, m, "cell offset must be nonzero");
  const double x = 0.5 * gamma * gamma * cell_offset_norm * cell_offset_norm;
  const double denom = std::isinf(x) ? 1.0 : -std::expm1(-x);
  const double s = gamma * std::sqrt(0.5 * static_cast<double>(K) / denom);
  if (s > 1.0)
    throw ConeUndefined(m, "chordal cone angle exceeds pi/2 (sin = " + std::to_string(s) + ")");
  return s;
}

enum class AngleMode { approx, exact };

inline double tangential_cone_angle(double gamma, std::size_t K, AngleMode mode = AngleMode::approx) {
  const char* m = "manifold_model";
  detail::require(gamma >= 0, m, "gamma must be nonnegative");
  detail::require(K >= 1, m, "K must be >= 1");
  const double Kd = static_cast<double>(K);
  double s = 0.0;
  if (mode == AngleMode::approx) {
    s = 0.5 * gamma * std::sqrt(3.0 * Kd);
  } else {
    const double r = 0.25 * gamma * gamma * Kd;
    const double a = -std::expm1(-r);
    // 1 - (1-r)^2 e^{-r}
    const double b = r < 1.0 ? -std::expm1(2.0 * std::log1p(-r) - r)
                             : 1.0 - (1.0 - r) * (1.0 - r) * std::exp(-r);
    s = std::sqrt(std::max(a, b));
  }
  if (s > 1.0)
    throw ConeUndefined(m, "tangential cone angle exceeds pi/2 (sin = " + std::to_string(s) + ")");
  return s;
}

/// Largest angle between a short intracellular chord and the tangent plane.
inline double short_chord_tangent_angle(double gamma, std::size_t K, AngleMode mode = AngleMode::approx) {
  detail::require(gamma >= 0, "manifold_model", "gamma must be nonnegative");
  const double rho = gamma * gamma * static_cast<double>(K);
  if (mode == AngleMode::approx) return rho / (4.0 * std::sqrt(6.0));
  const double x = 0.25 * rho;
  if (x == 0.0) return 0.0;
  // sin^2 psi = (sinh x - x) / sinh x
  double num;
  if (x < 1e-2) {
    const double x2 = x * x;
    num = x * x2 / 6.0 * (1.0 + x2 / 20.0 * (1.0 + x2 / 42.0 * (1.0 + x2 / 72.0)));
  } else {
    num = std::sinh(x) - x;
  }
  return std::asin(std::sqrt(num / std::sinh(x)));
}

inline CellPartition make_cells(const ManifoldSpec& spec, double gamma) {
  detail::require(gamma > 0 && std::isfinite(gamma), "manifold_model", "gamma must be positive");
  CellPartition c;
  c.gamma = gamma;
  for (std::size_t a = 0; a < spec.K; ++a) {
    const double side = gamma * spec.lambda[a];
    const double raw = spec.L[a] / side;
    auto n = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    if (n == 0) n = 1;
    c.counts.push_back(n);
    std::vector<double> centers(n);
    for (std::size_t k = 0; k < n; ++k) centers[k] = (static_cast<double>(k) + 0.5) * side;
    c.centers.push_back(std::move(centers));
  }
  return c;
}

}  // namespace randproj
