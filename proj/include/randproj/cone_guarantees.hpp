// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "randproj/errors.hpp"
#include "randproj/manifold_model.hpp"
#include "randproj/parallel.hpp"
#include "randproj/projector.hpp"
#include "randproj/seed.hpp"

namespace randproj {

struct ChordalCone {
  Eigen::VectorXd center;
  double sin_theta = 0.0;
};

struct TangentialCone {
  SubspaceBasis center;
  double sin_theta = 0.0;
};

namespace detail {

inline void check_guarantee_args(double eps, double sin_theta, std::size_t N, std::size_t M) {
  const char* m = "cone_guarantees";
  detail::require(eps > 0, m, "eps must be positive");
  detail::require(sin_theta >= 0 && sin_theta <= 1, m, "sin theta must lie in [0, 1]");
  detail::require(M >= 1 && M <= N, m, "need 1 <= M <= N");
}

inline double ratio(std::size_t N, std::size_t M) { return static_cast<double>(N) / static_cast<double>(M); }

inline double g_chordal_raw(double eps, double s, std::size_t N, std::size_t M) {
  return eps - std::sqrt(ratio(N, M)) * s;
}

inline double g_tangential_raw(double eps, double s, std::size_t N, std::size_t M, AngleMode mode) {
  const double q = ratio(N, M);
  if (mode == AngleMode::approx) return eps - q * s;
  const double up = (1 + eps) * (1 + eps);
  const double dn = (1 - eps) * (1 - eps);
  if (q < up) throw DomainError("cone_guarantees", "exact tangential guarantee needs N/M >= (1+eps)^2");
  const double rp = up - 2 * s * std::sqrt(q * (q - up)) - q * s * s;
  const double rm = dn + 2 * s * std::sqrt(q * (q - dn)) - q * s * s;
  if (rp < 0 || rm < 0) throw DomainError("cone_guarantees", "exact tangential guarantee radicand is negative");
  return std::min(std::sqrt(rp) - 1.0, 1.0 - std::sqrt(rm));
}

}  // namespace detail

/// Largest central-chord distortion that keeps every chord in the cone within eps.
inline double g_chordal(double eps, double sin_theta_C, std::size_t N, std::size_t M) {
  detail::check_guarantee_args(eps, sin_theta_C, N, M);
  const double g = detail::g_chordal_raw(eps, sin_theta_C, N, M);
  if (!(g > 0)) throw GuaranteeVacuous("cone_guarantees", "chordal guarantee is not positive");
  return g;
}

inline double g_tangential(double eps, double sin_theta_T, std::size_t N, std::size_t M,
                           AngleMode mode = AngleMode::approx) {
  detail::check_guarantee_args(eps, sin_theta_T, N, M);
  const double g = detail::g_tangential_raw(eps, sin_theta_T, N, M, mode);
  if (!(g > 0)) throw GuaranteeVacuous("cone_guarantees", "tangential guarantee is not positive");
  return g;
}

/// The eps for which g_C(eps, theta) equals the central distortion d.
inline double chordal_eps_for(double d, double sin_theta_C, std::size_t N, std::size_t M) {
  return d + std::sqrt(detail::ratio(N, M)) * sin_theta_C;
}

inline double tangential_eps_for(double d, double sin_theta_T, std::size_t N, std::size_t M,
                                 AngleMode mode = AngleMode::approx) {
  if (mode == AngleMode::approx) return d + detail::ratio(N, M) * sin_theta_T;
  // g_T is increasing in eps; bracket then bisect.
  auto f = [&](double e) {
    try {
      return detail::g_tangential_raw(e, sin_theta_T, N, M, mode) - d;
    } catch (const DomainError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  double lo = d, hi = std::max(2 * d, d + detail::ratio(N, M) * sin_theta_T) + 1e-3;
  if (!(f(lo) <= 0)) return lo;
  while (!(f(hi) >= 0)) {
    if (std::isnan(f(hi)) || hi > 1e6) throw DomainError("cone_guarantees", "no eps reproduces this distortion");
    hi *= 2;
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (std::isnan(v) || v < 0) lo = mid; else hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// Uniform point on the boundary of the chordal cone around x, with |y| = |x|.
inline Eigen::VectorXd sample_chordal_boundary(const Eigen::VectorXd& x, double sin_theta_C, Seed seed) {
  const double nx = x.norm();
  if (!(nx > 0)) throw InvalidArgument("cone_guarantees", "cone center must be nonzero");
  detail::require(sin_theta_C >= 0 && sin_theta_C <= 1, "cone_guarantees", "sin theta must lie in [0, 1]");
  if (x.size() < 2) throw DimensionMismatch("cone_guarantees", "need N >= 2");
  const Eigen::VectorXd u = x / nx;
  Rng rng(seed);
  Eigen::VectorXd v = detail::gaussian_matrix(x.size(), 1, rng);
  v -= u * u.dot(v);
  v -= u * u.dot(v);
  v.normalize();
  const double c = std::sqrt(1.0 - sin_theta_C * sin_theta_C);
  return nx * (c * u + sin_theta_C * v);
}

/// U' = U cos(theta) + V sin(theta) with V a random orthonormal frame orthogonal to U.
inline SubspaceBasis sample_tangential_boundary(const SubspaceBasis& U, double sin_theta_T, Seed seed) {
  if (2 * U.K() > U.N()) throw DimensionMismatch("cone_guarantees", "need 2K <= N");
  detail::require(sin_theta_T >= 0 && sin_theta_T <= 1, "cone_guarantees", "sin theta must lie in [0, 1]");
  Rng rng(seed);
  Eigen::MatrixXd G = detail::gaussian_matrix(U.N(), U.K(), rng);
  G -= U.cols() * (U.cols().transpose() * G);
  Eigen::MatrixXd V = detail::haar_columns(G);
  V -= U.cols() * (U.cols().transpose() * V);
  V = detail::haar_columns(V);
  const double c = std::sqrt(1.0 - sin_theta_T * sin_theta_T);
  return SubspaceBasis(c * U.cols() + sin_theta_T * V);
}

/// Coordinates adapted to a fixed (A, U): the M rows of A, an orthonormal basis
/// of the part of U orthogonal to them, and K more directions standing in for
/// the rest of the ambient space. Boundary elements are drawn exactly in
/// distribution by replacing the ambient Gaussian block outside these
/// coordinates with its K x K Bartlett factor.
class ReducedFrame {
 public:
  ReducedFrame(const Projector& A, const Eigen::MatrixXd& U) : M_(A.M()), K_(U.cols()), scale_(A.scale()) {
    const Eigen::Index N = A.N();
    if (U.rows() != N) throw DimensionMismatch("cone_guarantees", "basis must live in N dimensions");
    if (!applicable(N, M_, K_)) throw DimensionMismatch("cone_guarantees", "reduced frame needs N >= M + 2K");
    rest_dof_ = N - M_ - K_;
    const Eigen::MatrixXd AU = A.rows * U;
    const Eigen::MatrixXd perp = U - A.rows.transpose() * AU;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(perp);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(K_).triangularView<Eigen::Upper>();
    U_ = Eigen::MatrixXd::Zero(M_ + 2 * K_, K_);
    U_.topRows(M_) = AU;
    U_.middleRows(M_, K_) = R;
    orthonormalize_columns(U_);
  }

  static bool applicable(Eigen::Index N, Eigen::Index M, Eigen::Index K) { return N >= M + 2 * K; }

  /// Distortion of the subspace spanned by the columns of a frame-coordinate basis.
  double distortion(const Eigen::MatrixXd& B) const {
    if (K_ == 1) return std::abs(scale_ * B.col(0).head(M_).norm() / B.col(0).norm() - 1.0);
    const Eigen::MatrixXd P = B.topRows(M_);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P.transpose() * P, Eigen::EigenvaluesOnly);
    const auto ev = es.eigenvalues();
    const double smin = std::sqrt(std::max(0.0, ev(0)));
    const double smax = std::sqrt(std::max(0.0, ev(ev.size() - 1)));
    return std::max(scale_ * smax - 1.0, 1.0 - scale_ * smin);
  }

  double center_distortion() const { return distortion(U_); }

  /// Frame coordinates of a uniformly random boundary element at the given angle.
  Eigen::MatrixXd sample_boundary(double sin_theta, Rng& rng) const {
    std::normal_distribution<double> normal;
    const Eigen::Index D = M_ + 2 * K_;
    Eigen::MatrixXd G(D, K_);
    for (Eigen::Index j = 0; j < K_; ++j)
      for (Eigen::Index i = 0; i < M_ + K_; ++i) G(i, j) = normal(rng);
    G.bottomRows(K_).setZero();
    for (Eigen::Index i = 0; i < K_; ++i) {
      std::chi_squared_distribution<double> chi2(static_cast<double>(rest_dof_ - i));
      G(M_ + K_ + i, i) = std::sqrt(chi2(rng));
      for (Eigen::Index j = i + 1; j < K_; ++j) G(M_ + K_ + i, j) = normal(rng);
    }
    G -= U_ * (U_.transpose() * G);
    G -= U_ * (U_.transpose() * G);
    orthonormalize_columns(G);
    const double c = std::sqrt(1.0 - sin_theta * sin_theta);
    return c * U_ + sin_theta * G;
  }

  const Eigen::MatrixXd& center() const { return U_; }

 private:
  static void orthonormalize_columns(Eigen::MatrixXd& B) {
    if (B.cols() == 1) {
      B.col(0).normalize();
      return;
    }
    B = detail::haar_columns(B);
  }

  Eigen::Index M_, K_;
  double scale_;
  Eigen::Index rest_dof_ = 0;
  Eigen::MatrixXd U_;
};

struct TrialRecord {
  std::size_t trial = 0;
  double dist_x = 0.0;
  double worst_dist_y = 0.0;
  double g_value = 0.0;
  double eps_x = 0.0;
  bool violated = false;
  bool vacuous = false;

  double margin() const { return dist_x - g_value; }
};

struct VerificationReport {
  std::vector<TrialRecord> trials;
  std::size_t violations = 0;
  std::size_t vacuous = 0;
  double violation_fraction = 0.0;
  double mean_margin = 0.0;
  double min_margin = 0.0;
};

struct VerifyOptions {
  AngleMode mode = AngleMode::approx;
  bool force_ambient = false;
  unsigned threads = 1;
};

namespace detail {

inline VerificationReport summarize(std::vector<TrialRecord> trials) {
  VerificationReport r;
  r.trials = std::move(trials);
  double sum = 0.0;
  std::size_t counted = 0;
  r.min_margin = std::numeric_limits<double>::infinity();
  for (const auto& t : r.trials) {
    r.violations += t.violated;
    r.vacuous += t.vacuous;
    if (t.vacuous) continue;
    sum += t.margin();
    ++counted;
    r.min_margin = std::min(r.min_margin, t.margin());
  }
  r.violation_fraction = r.trials.empty() ? 0.0 : double(r.violations) / double(r.trials.size());
  r.mean_margin = counted ? sum / double(counted) : std::numeric_limits<double>::quiet_NaN();
  return r;
}

// Absolute slack in the verdict so that rounding (e.g. |x| * x/|x| != x) is not a violation.
inline constexpr double kJudgeSlack = 1e-12;

// Fills the record given the center distortion and the worst boundary distortion.
inline TrialRecord judge(std::size_t t, double dx, double worst, double g, double eps_x) {
  TrialRecord rec;
  rec.trial = t;
  rec.dist_x = dx;
  rec.worst_dist_y = worst;
  rec.g_value = g;
  rec.eps_x = eps_x;
  rec.vacuous = !(g > 0);
  rec.violated = !rec.vacuous && (dx < g - kJudgeSlack || worst > eps_x + kJudgeSlack);
  return rec;
}

}  // namespace detail

/// Monte Carlo test of the chordal guarantee with random (x, A) per trial.
inline VerificationReport verify_chordal_guarantee(std::size_t N, std::size_t M, double sin_theta_C,
                                                   std::size_t n_boundary, std::size_t n_trials, Seed seed,
                                                   const VerifyOptions& opt = {}) {
  detail::require(n_boundary >= 1 && n_trials >= 1, "cone_guarantees", "counts must be positive");
  detail::require(M >= 1 && M <= N && N >= 2, "cone_guarantees", "need 1 <= M <= N, N >= 2");
  detail::require(sin_theta_C >= 0 && sin_theta_C <= 1, "cone_guarantees", "sin theta must lie in [0, 1]");
  std::vector<TrialRecord> recs(n_trials);
  parallel_for(n_trials, opt.threads, [&](std::size_t t) {
    const Seed ts = derive_seed(seed, {"trial", t});
    Rng xr(derive_seed(ts, {"x"}));
    const Eigen::VectorXd x = detail::gaussian_matrix(static_cast<Eigen::Index>(N), 1, xr);
    const Projector A = sample_projector(N, M, derive_seed(ts, {"A"}));
    double dx, worst = 0.0;
    if (!opt.force_ambient && ReducedFrame::applicable(A.N(), A.M(), 1)) {
      const ReducedFrame f(A, x);
      dx = f.center_distortion();
      Rng br(derive_seed(ts, {"boundary"}));
      for (std::size_t b = 0; b < n_boundary; ++b) worst = std::max(worst, f.distortion(f.sample_boundary(sin_theta_C, br)));
    } else {
      dx = vector_distortion(A, x);
      for (std::size_t b = 0; b < n_boundary; ++b)
        worst = std::max(worst, vector_distortion(A, sample_chordal_boundary(x, sin_theta_C, derive_seed(ts, {"boundary", b}))));
    }
    recs[t] = detail::judge(t, dx, worst, detail::g_chordal_raw(worst, sin_theta_C, N, M),
                            chordal_eps_for(dx, sin_theta_C, N, M));
  });
  return detail::summarize(std::move(recs));
}

/// Monte Carlo test of the tangential guarantee with random (U, A) per trial.
inline VerificationReport verify_tangential_guarantee(std::size_t N, std::size_t M, std::size_t K, double sin_theta_T,
                                                      std::size_t n_boundary, std::size_t n_trials, Seed seed,
                                                      const VerifyOptions& opt = {}) {
  detail::require(n_boundary >= 1 && n_trials >= 1, "cone_guarantees", "counts must be positive");
  detail::require(K >= 1 && K <= M && M <= N && 2 * K <= N, "cone_guarantees", "need K <= M <= N and 2K <= N");
  detail::require(sin_theta_T >= 0 && sin_theta_T <= 1, "cone_guarantees", "sin theta must lie in [0, 1]");
  std::vector<TrialRecord> recs(n_trials);
  parallel_for(n_trials, opt.threads, [&](std::size_t t) {
    const Seed ts = derive_seed(seed, {"trial", t});
    const SubspaceBasis U = SubspaceBasis::random(N, K, derive_seed(ts, {"U"}));
    const Projector A = sample_projector(N, M, derive_seed(ts, {"A"}));
    double dx, worst = 0.0;
    if (!opt.force_ambient && ReducedFrame::applicable(A.N(), A.M(), U.K())) {
      const ReducedFrame f(A, U.cols());
      dx = f.center_distortion();
      Rng br(derive_seed(ts, {"boundary"}));
      for (std::size_t b = 0; b < n_boundary; ++b) worst = std::max(worst, f.distortion(f.sample_boundary(sin_theta_T, br)));
    } else {
      dx = subspace_distortion(A, U);
      for (std::size_t b = 0; b < n_boundary; ++b)
        worst = std::max(worst, subspace_distortion(A, sample_tangential_boundary(U, sin_theta_T, derive_seed(ts, {"boundary", b}))));
    }
    double g;
    try {
      g = detail::g_tangential_raw(worst, sin_theta_T, N, M, opt.mode);
    } catch (const DomainError&) {
      g = -std::numeric_limits<double>::infinity();
    }
    double eps_x;
    try {
      eps_x = tangential_eps_for(dx, sin_theta_T, N, M, opt.mode);
    } catch (const DomainError&) {
      eps_x = std::numeric_limits<double>::infinity();
    }
    recs[t] = detail::judge(t, dx, worst, g, eps_x);
  });
  return detail::summarize(std::move(recs));
}

}  // namespace randproj
