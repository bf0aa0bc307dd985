// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include "randproj/errors.hpp"

namespace randproj {

/// A probability bound evaluated in log space, with its regime flags.
struct Bound {
  double log_value = 0.0;   // unclamped natural log
  double value = 1.0;       // exp(log_value) clamped to [0, 1]
  bool applicable = false;  // regime preconditions hold and the bound is below 1
  bool asymptotic = false;  // N >= 10 M, the large-N regime the expansions assume

  static Bound from_log(double lv, bool regime) {
    Bound b;
    b.log_value = lv;
    b.value = lv >= 0 ? 1.0 : std::exp(lv);
    b.applicable = regime && lv < 0;
    return b;
  }
};

inline double lambert_w_minus1(double x) {
  const char* m = "theory";
  const double branch = -std::exp(-1.0);
  if (!(x >= branch * (1 + 1e-15) && x < 0)) throw DomainError(m, "W_{-1} needs -1/e <= x < 0");
  if (x <= branch) return -1.0;
  double w;
  if (x < -0.25) {
    const double p = -std::sqrt(std::max(0.0, 2.0 * (1.0 + std::numbers::e * x)));
    w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
  } else {
    const double l1 = std::log(-x);
    const double l2 = std::log(-l1);
    w = l1 - l2 + l2 / l1;
  }
  for (int it = 0; it < 64; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double d1 = ew * (w + 1.0);
    if (d1 == 0.0) break;
    const double step = f / (d1 - (w + 2.0) * f / (2.0 * w + 2.0));
    double next = w - step;
    if (next > -1.0) next = 0.5 * (w - 1.0);
    if (std::abs(next - w) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(w)) {
      w = next;
      break;
    }
    w = next;
  }
  return w;
}

struct TheoryConstants {
  double w_branch_value;
  double rho_star;
  double C0;
};

inline TheoryConstants theory_constants() {
  TheoryConstants c{};
  c.w_branch_value = lambert_w_minus1(-1.0 / (2.0 * std::sqrt(std::numbers::e)));
  c.rho_star = -1.0 - 2.0 * c.w_branch_value;
  c.C0 = 0.5 * c.rho_star + 0.5 * std::log(std::numbers::pi / c.rho_star) + 2.0 - 5.0 * std::numbers::ln2;
  return c;
}

enum class JlMode { full, small_eps };

/// Failure probability of the JL embedding of P points (P = 1: a single vector).
inline Bound jl_point_bound(double eps, double M, double P = 1, JlMode mode = JlMode::full) {
  const char* m = "theory";
  detail::require(eps > 0 && eps < 1, m, "eps must lie in (0, 1)");
  detail::require(M >= 1 && P >= 1, m, "need M >= 1 and P >= 1");
  double lv = std::numbers::ln2;
  lv -= mode == JlMode::full ? 0.5 * M * (0.5 * eps * eps - eps * eps * eps / 3.0) : 0.25 * M * eps * eps;
  if (P >= 2) lv += std::log(P) + std::log(P - 1) - std::numbers::ln2;
  return Bound::from_log(lv, true);
}

/// Failure probability of a K-dim subspace embedding; `coeff` multiplies K in the covering term.
inline Bound jl_subspace_bound(double eps, double M, double K, int coeff = 1) {
  const char* m = "theory";
  detail::require(eps > 0 && eps < 1, m, "eps must lie in (0, 1)");
  detail::require(K >= 1 && K <= M, m, "need 1 <= K <= M");
  detail::require(coeff == 1 || coeff == 2, m, "coefficient must be 1 or 2");
  const double lv = std::numbers::ln2 + coeff * K * std::log(12.0 / eps) - M / 16.0 * (eps * eps - eps * eps * eps / 3.0);
  return Bound::from_log(lv, true);
}

namespace detail {
inline void check_bound_args(double eps, double M, double K, double N, double lnV) {
  const char* m = "theory";
  detail::require(eps > 0, m, "eps must be positive");
  detail::require(M > 0 && K >= 1 && N >= 1, m, "need M > 0, K >= 1, N >= 1");
  detail::require(lnV >= 0 && std::isfinite(lnV), m, "lnV must be finite and nonnegative");
}
inline double short_log_factor(double eps, double K, double N) {
  return std::log(9.0 * std::sqrt(3.0) * std::numbers::e * N / (eps * std::sqrt(K)));
}
}  // namespace detail

/// Union bound over long (intercell) chords.
inline Bound delta_long(double eps, double M, double K, double N, double lnV) {
  detail::check_bound_args(eps, M, K, N, lnV);
  const double mu = M * eps * eps / K;
  const double lv = -0.25 * M * eps * eps + lnV + K * std::log(N * mu) + theory_constants().C0 - std::lgamma(0.5 * K);
  Bound b = Bound::from_log(lv, mu > 16);
  b.asymptotic = N >= 10 * M;
  return b;
}

enum class ShortVariant { appendix, main };

/// Union bound over short (intracellular) chords and tangent planes.
inline Bound delta_short(double eps, double M, double K, double N, double lnV,
                         ShortVariant variant = ShortVariant::appendix) {
  detail::check_bound_args(eps, M, K, N, lnV);
  const double mu = M * eps * eps / K;
  double lv = -M * eps * eps / 16.0 + lnV + K * detail::short_log_factor(eps, K, N);
  if (variant == ShortVariant::main) lv += 0.5 * K;
  Bound b = Bound::from_log(lv, mu > 32);
  b.asymptotic = N >= 10 * M;
  return b;
}

inline Bound delta_total(double eps, double M, double K, double N, double lnV) {
  return delta_short(eps, M, K, N, lnV, ShortVariant::appendix);
}

/// Unrounded number of projections at which delta_total equals delta.
inline double m_star_bound_exact(double eps, double delta, double K, double N, double lnV) {
  const char* m = "theory";
  detail::require(eps > 0 && eps < 1, m, "eps must lie in (0, 1)");
  detail::require(delta > 0 && delta < 1, m, "delta must lie in (0, 1)");
  detail::check_bound_args(eps, 1, K, N, lnV);
  return 16.0 * (lnV - std::log(delta) + K * detail::short_log_factor(eps, K, N)) / (eps * eps);
}

inline double m_star_bound(double eps, double delta, double K, double N, double lnV) {
  return std::ceil(m_star_bound_exact(eps, delta, K, N, lnV));
}

/// Prior-theory estimate with the geodesic-covering constants, kept unrounded.
inline double bw_underestimate(double eps, double delta, double K, double N, double lnV) {
  detail::check_bound_args(eps, 1, K, N, lnV);
  detail::require(delta > 0 && delta < 1, "theory", "delta must lie in (0, 1)");
  const double lg = 4 * std::log(3100.0) + 3 * std::log(N) + std::log(K) -
                    std::log(4 * std::numbers::pi * std::numbers::e) - 6 * std::log(eps);
  return K / (eps * eps) * (1352.0 * lnV / K - 676.0 * std::log(delta) / K + 676.0 * lg);
}

/// Prior-theory estimate with the second-fundamental-form constants; no N dependence.
inline double nv_underestimate(double eps, double delta, double K, double lnV) {
  detail::check_bound_args(eps, 1, K, 1, lnV);
  detail::require(delta > 0 && delta < 1, "theory", "delta must lie in (0, 1)");
  const double lg = 5 * std::log(384.0) + std::log(169.0) + std::log(K) -
                    std::log(std::numbers::pi * std::numbers::e) - 6 * std::log(eps);
  return K / (eps * eps) * (64.0 * lnV / K - 64.0 * std::log(delta) / K + 32.0 * lg);
}

struct Crossover {
  double closed_form = 0.0;
  double numeric = 0.0;
  double log_closed_form = 0.0;
  double log_numeric = 0.0;
  bool found = false;
};

/// Ambient dimension above which the new bound exceeds the NV estimate.
inline Crossover crossover_N(double eps, double delta, double K, double lnV) {
  const char* m = "theory";
  detail::require(eps > 0 && eps < 1, m, "eps must lie in (0, 1)");
  detail::require(delta > 0 && delta < 1, m, "delta must lie in (0, 1)");
  Crossover c;
  c.log_closed_form = std::log(3.5e27) + 1.5 * std::log(K) - 11 * std::log(eps) + 3.0 / K * (lnV - std::log(delta));
  c.closed_form = std::exp(c.log_closed_form);
  // m_star_bound_exact is affine in ln N with slope 16 K / eps^2, so the root is explicit.
  const double target = nv_underestimate(eps, delta, K, lnV) * eps * eps / 16.0;
  const double ln9 = std::log(9.0 * std::sqrt(3.0) * std::numbers::e / (eps * std::sqrt(K)));
  c.log_numeric = (target - lnV + std::log(delta)) / K - ln9;
  c.numeric = std::exp(c.log_numeric);
  c.found = c.log_numeric >= 0 && std::isfinite(c.log_numeric);
  return c;
}

struct OptimalCells {
  double mu = 0.0;
  double gamma_star_C = std::numeric_limits<double>::quiet_NaN();
  double sin_theta_C_star = std::numeric_limits<double>::quiet_NaN();
  double gamma_star_T = std::numeric_limits<double>::quiet_NaN();
  double sin_theta_T_star = std::numeric_limits<double>::quiet_NaN();
  bool chordal_ok = false;
  bool tangential_ok = false;
};

inline OptimalCells optimal_cell_sizes(double eps, double M, double K, double N) {
  detail::check_bound_args(eps, M, K, N, 0.0);
  OptimalCells o;
  o.mu = M * eps * eps / K;
  const double rc = eps * eps - 16.0 * K / M;
  if (o.mu >= 16.0) {
    const double d = eps - std::sqrt(std::max(0.0, rc));
    const double rho = theory_constants().rho_star;
    o.gamma_star_C = std::sqrt(M * rho * std::exp(-0.5 * rho) / (2 * K * N)) * d;
    o.sin_theta_C_star = 0.5 * std::sqrt(M / N) * d;
    o.chordal_ok = true;
  }
  if (o.mu >= 32.0) {
    const double d = M * eps - std::sqrt(std::max(0.0, M * (M * eps * eps - 32.0 * K)));
    o.gamma_star_T = d / (N * std::sqrt(3.0 * K));
    o.sin_theta_T_star = d / (2.0 * N);
    o.tangential_ok = true;
  }
  return o;
}

struct PriorTheoryInputs {
  double R_lower;
  double tau_upper;
  double secfund_norm;
};

inline PriorTheoryInputs prior_theory_inputs(double ell) {
  detail::require(ell > 0, "theory", "ell must be positive");
  return {1.0 / std::sqrt(2 * std::numbers::pi * std::numbers::e), std::sqrt(2.0) * ell, std::sqrt(3.0) / ell};
}

struct BoundQuery {
  double eps = 0.2;
  double delta = 0.05;
  double K = 1;
  double N = 1000;
  double lnV = 0.0;
  std::optional<double> M;
};

struct BoundReport {
  BoundQuery query;
  TheoryConstants constants{};
  double M = 0.0;  // the M at which the probabilities were evaluated
  double mu = 0.0;
  Bound delta_long, delta_short, delta_total;
  double m_bar = 0.0;
  OptimalCells cells;
  double m_bw = 0.0;
  double m_nv = 0.0;
  Crossover crossover;
};

/// Every analytic quantity for one parameter point. Without an explicit M the
/// probabilities are evaluated at M = m_bar.
inline BoundReport bound_report(const BoundQuery& q) {
  BoundReport r;
  r.query = q;
  r.constants = theory_constants();
  r.m_bar = m_star_bound(q.eps, q.delta, q.K, q.N, q.lnV);
  r.M = q.M.value_or(r.m_bar);
  r.mu = r.M * q.eps * q.eps / q.K;
  r.delta_long = delta_long(q.eps, r.M, q.K, q.N, q.lnV);
  r.delta_short = delta_short(q.eps, r.M, q.K, q.N, q.lnV);
  r.delta_total = delta_total(q.eps, r.M, q.K, q.N, q.lnV);
  r.cells = optimal_cell_sizes(q.eps, r.M, q.K, q.N);
  r.m_bw = bw_underestimate(q.eps, q.delta, q.K, q.N, q.lnV);
  r.m_nv = nv_underestimate(q.eps, q.delta, q.K, q.lnV);
  r.crossover = crossover_N(q.eps, q.delta, q.K, q.lnV);
  return r;
}

}  // namespace randproj
