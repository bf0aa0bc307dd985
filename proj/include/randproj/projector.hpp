// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "randproj/errors.hpp"
#include "randproj/parallel.hpp"
#include "randproj/seed.hpp"

namespace randproj {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kOrthoTol = 1e-10;

/// M x N projection with orthonormal rows.
struct Projector {
  Eigen::MatrixXd rows;
  Seed seed = 0;

  Eigen::Index M() const { return rows.rows(); }
  Eigen::Index N() const { return rows.cols(); }
  double scale() const { return std::sqrt(static_cast<double>(N()) / static_cast<double>(M())); }

  double orthonormality_error() const {
    return (rows * rows.transpose() - Eigen::MatrixXd::Identity(M(), M())).norm();
  }

  void require_orthonormal() const {
    if (!(orthonormality_error() <= kOrthoTol))
      throw NotOrthogonal("projector", "projector rows are not orthonormal");
  }
};

namespace detail {

inline Eigen::MatrixXd gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd G(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) G(i, j) = normal(rng);
  return G;
}

// Thin Q of G with the sign of each column chosen so that diag(R) >= 0.
inline Eigen::MatrixXd haar_columns(const Eigen::MatrixXd& G) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(G.rows(), G.cols());
  const auto& R = qr.matrixQR();
  for (Eigen::Index j = 0; j < G.cols(); ++j)
    if (R(j, j) < 0) Q.col(j) *= -1.0;
  return Q;
}

}  // namespace detail

/// Haar-distributed M x N projector: sign-fixed QR of a Gaussian matrix.
inline Projector sample_projector(std::size_t N, std::size_t M, Seed seed) {
  if (M < 1 || M > N) throw InvalidArgument("projector", "need 1 <= M <= N");
  Rng rng(seed);
  const Eigen::MatrixXd G = detail::gaussian_matrix(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(M), rng);
  Projector A;
  A.rows = detail::haar_columns(G).transpose();
  A.seed = seed;
  return A;
}

/// N x K matrix with orthonormal columns.
class SubspaceBasis {
 public:
  SubspaceBasis() = default;
  explicit SubspaceBasis(Eigen::MatrixXd cols) : cols_(std::move(cols)) {
    if (cols_.cols() < 1 || cols_.cols() > cols_.rows())
      throw DimensionMismatch("projector", "basis must be N x K with 1 <= K <= N");
    const double err =
        (cols_.transpose() * cols_ - Eigen::MatrixXd::Identity(cols_.cols(), cols_.cols())).norm();
    if (!(err <= kOrthoTol)) throw RankDeficient("projector", "basis columns are not orthonormal");
  }

  /// Orthonormalizes the columns of X (which must have full column rank).
  static SubspaceBasis from_span(const Eigen::MatrixXd& X) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() < X.cols()) throw RankDeficient("projector", "spanning set is rank deficient");
    return SubspaceBasis(detail::haar_columns(X));
  }

  static SubspaceBasis random(std::size_t N, std::size_t K, Seed seed) {
    Rng rng(seed);
    return SubspaceBasis(
        detail::haar_columns(detail::gaussian_matrix(static_cast<Eigen::Index>(N), static_cast<Eigen::Index>(K), rng)));
  }

  const Eigen::MatrixXd& cols() const { return cols_; }
  Eigen::Index N() const { return cols_.rows(); }
  Eigen::Index K() const { return cols_.cols(); }

 private:
  Eigen::MatrixXd cols_;
};

struct PrincipalAngles {
  std::vector<double> cosines;  // descending
  Eigen::MatrixXd W, V;         // empty unless requested
};

struct DistortionSummary {
  std::vector<double> samples;
  double max = 0.0;
  std::size_t argmax_first = 0;
  std::size_t argmax_second = 0;
  std::string policy;
};

inline double vector_distortion(const Projector& A, const Eigen::VectorXd& u) {
  if (u.size() != A.N()) throw DimensionMismatch("projector", "vector length must equal N");
  const double n = u.norm();
  if (!(n > 0)) throw InvalidArgument("projector", "zero vector has no distortion");
  return std::abs(A.scale() * (A.rows * u).norm() / n - 1.0);
}

struct PairPolicy {
  enum class Kind { all, subsample };
  Kind kind = Kind::all;
  std::size_t count = 0;
  Seed seed = 0;
  bool keep_samples = false;

  static PairPolicy all_pairs(bool keep = false) { return {Kind::all, 0, 0, keep}; }
  static PairPolicy subsample(std::size_t n, Seed s, bool keep = false) { return {Kind::subsample, n, s, keep}; }

  std::string describe() const {
    return kind == Kind::all ? std::string("all")
                             : "subsample(" + std::to_string(count) + ",seed=" + std::to_string(seed) + ")";
  }
};

/// Inverse ambient chord lengths for every unordered pair, packed row by row.
/// Lets repeated scans of one point set under many projectors skip the N-dim work.
struct ChordTable {
  std::size_t P = 0;
  std::vector<double> inv_norm;

  static std::size_t offset(std::size_t P, std::size_t i) { return i * P - i * (i + 1) / 2; }
  double at(std::size_t i, std::size_t j) const { return inv_norm[offset(P, i) + (j - i - 1)]; }
};

template <class Derived>
ChordTable make_chord_table(const Eigen::MatrixBase<Derived>& points, unsigned threads = 1) {
  const RowMatrix X = points;
  ChordTable t;
  t.P = static_cast<std::size_t>(X.rows());
  if (t.P < 2) throw InvalidArgument("projector", "need at least 2 points");
  t.inv_norm.resize(t.P * (t.P - 1) / 2);
  parallel_for(t.P - 1, threads, [&](std::size_t i) {
    const auto base = ChordTable::offset(t.P, i);
    for (std::size_t j = i + 1; j < t.P; ++j) {
      const double d = (X.row(Eigen::Index(i)) - X.row(Eigen::Index(j))).norm();
      if (!(d > 0)) throw InvalidArgument("projector", "coincident points have no chord distortion");
      t.inv_norm[base + (j - i - 1)] = 1.0 / d;
    }
  });
  return t;
}

namespace detail {

struct Best {
  double value = -1.0;
  std::size_t i = 0, j = 0;
  void offer(double v, std::size_t a, std::size_t b) {
    if (v > value) value = v, i = a, j = b;
  }
  void merge(const Best& o) {
    if (o.value > value || (o.value == value && (o.i < i || (o.i == i && o.j < j)))) *this = o;
  }
};

template <class InvNorm>
DistortionSummary scan_pairs(const RowMatrix& Y, double scale, const PairPolicy& policy, unsigned threads,
                             InvNorm&& inv_norm) {
  const auto P = static_cast<std::size_t>(Y.rows());
  if (P < 2) throw InvalidArgument("projector", "need at least 2 points");
  const auto M = Y.cols();
  DistortionSummary out;
  out.policy = policy.describe();
  auto dist = [&](std::size_t i, std::size_t j) {
    const double* a = Y.data() + i * M;
    const double* b = Y.data() + j * M;
    double s = 0.0;
    for (Eigen::Index k = 0; k < M; ++k) {
      const double d = a[k] - b[k];
      s += d * d;
    }
    return std::abs(scale * std::sqrt(s) * inv_norm(i, j) - 1.0);
  };

  if (policy.kind == PairPolicy::Kind::all) {
    if (policy.keep_samples) out.samples.resize(P * (P - 1) / 2);
    constexpr std::size_t B = 64;
    const std::size_t blocks = (P - 1 + B - 1) / B;
    std::vector<Best> best(blocks);
    parallel_for(blocks, threads, [&](std::size_t blk) {
      Best local;
      const std::size_t i1 = std::min(P - 1, (blk + 1) * B);
      for (std::size_t i = blk * B; i < i1; ++i) {
        const std::size_t base = ChordTable::offset(P, i);
        for (std::size_t j = i + 1; j < P; ++j) {
          const double v = dist(i, j);
          local.offer(v, i, j);
          if (policy.keep_samples) out.samples[base + (j - i - 1)] = v;
        }
      }
      best[blk] = local;
    });
    Best all;
    for (const auto& b : best) all.merge(b);
    out.max = all.value;
    out.argmax_first = all.i;
    out.argmax_second = all.j;
  } else {
    if (policy.count < 1) throw InvalidArgument("projector", "subsample count must be positive");
    Rng rng(policy.seed);
    std::uniform_int_distribution<std::size_t> pick(0, P - 1);
    std::vector<std::pair<std::size_t, std::size_t>> pairs(policy.count);
    for (auto& pr : pairs) {
      std::size_t a = pick(rng), b = pick(rng);
      while (b == a) b = pick(rng);
      pr = {std::min(a, b), std::max(a, b)};
    }
    std::vector<double> vals(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t k) { vals[k] = dist(pairs[k].first, pairs[k].second); });
    Best all;
    for (std::size_t k = 0; k < vals.size(); ++k) {
      Best one{vals[k], pairs[k].first, pairs[k].second};
      all.merge(one);
    }
    out.max = all.value;
    out.argmax_first = all.i;
    out.argmax_second = all.j;
    if (policy.keep_samples) out.samples = std::move(vals);
  }
  return out;
}

}  // namespace detail

/// Worst chord distortion of a point set (rows of `points`).
template <class Derived>
DistortionSummary pointset_distortion(const Projector& A, const Eigen::MatrixBase<Derived>& points,
                                      const PairPolicy& policy = PairPolicy::all_pairs(), unsigned threads = 1) {
  if (points.cols() != A.N()) throw DimensionMismatch("projector", "points must have N columns");
  const RowMatrix X = points;
  const RowMatrix Y = X * A.rows.transpose();
  const auto N = X.cols();
  return detail::scan_pairs(Y, A.scale(), policy, threads, [&](std::size_t i, std::size_t j) {
    const double* a = X.data() + i * N;
    const double* b = X.data() + j * N;
    double s = 0.0;
    for (Eigen::Index k = 0; k < N; ++k) {
      const double d = a[k] - b[k];
      s += d * d;
    }
    if (!(s > 0)) throw InvalidArgument("projector", "coincident points have no chord distortion");
    return 1.0 / std::sqrt(s);
  });
}

/// Same as above, reusing precomputed ambient chord lengths.
template <class Derived>
DistortionSummary pointset_distortion(const Projector& A, const Eigen::MatrixBase<Derived>& points,
                                      const ChordTable& table, const PairPolicy& policy = PairPolicy::all_pairs(),
                                      unsigned threads = 1) {
  if (points.cols() != A.N()) throw DimensionMismatch("projector", "points must have N columns");
  if (static_cast<std::size_t>(points.rows()) != table.P) throw DimensionMismatch("projector", "chord table size");
  const RowMatrix Y = points * A.rows.transpose();
  return detail::scan_pairs(Y, A.scale(), policy, threads,
                            [&](std::size_t i, std::size_t j) { return table.at(i, j); });
}

/// Singular values of AU, descending.
inline Eigen::VectorXd projected_singular_values(const Projector& A, const SubspaceBasis& U) {
  if (U.N() != A.N()) throw DimensionMismatch("projector", "basis must live in N dimensions");
  if (U.K() > A.M()) throw DimensionMismatch("projector", "need K <= M");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A.rows * U.cols());
  return svd.singularValues();
}

inline double subspace_distortion(const Projector& A, const SubspaceBasis& U) {
  const Eigen::VectorXd s = projected_singular_values(A, U);
  const double c = A.scale();
  return std::max(c * s(0) - 1.0, 1.0 - c * s(s.size() - 1));
}

inline PrincipalAngles principal_angles(const SubspaceBasis& U, const SubspaceBasis& U2, bool with_factors = false) {
  if (U.N() != U2.N() || U.K() != U2.K()) throw DimensionMismatch("projector", "bases must have equal shape");
  const Eigen::MatrixXd C = U.cols().transpose() * U2.cols();
  PrincipalAngles pa;
  if (with_factors) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
    pa.W = svd.matrixU();
    pa.V = svd.matrixV();
    for (Eigen::Index a = 0; a < C.cols(); ++a) pa.cosines.push_back(std::clamp(svd.singularValues()(a), 0.0, 1.0));
  } else {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(C);
    for (Eigen::Index a = 0; a < C.cols(); ++a) pa.cosines.push_back(std::clamp(svd.singularValues()(a), 0.0, 1.0));
  }
  return pa;
}

struct WeylReport {
  std::vector<double> gaps;
  double bound = 0.0;
  std::size_t violations = 0;
};

/// Per-index gaps |sin phi_a - sin phi'_a| between the angles that U and U2
/// make with the projector's row space, and the bound sin theta_max(U, U2).
inline WeylReport weyl_gap(const Projector& A, const SubspaceBasis& U, const SubspaceBasis& U2,
                           double tol = 1e-10) {
  A.require_orthonormal();
  if (U.K() != U2.K() || U.N() != U2.N()) throw DimensionMismatch("projector", "bases must have equal shape");
  const Eigen::VectorXd c1 = projected_singular_values(A, U);
  const Eigen::VectorXd c2 = projected_singular_values(A, U2);
  const auto pa = principal_angles(U, U2);
  WeylReport r;
  const double cmin = pa.cosines.back();
  r.bound = std::sqrt(std::max(0.0, 1.0 - cmin * cmin));
  for (Eigen::Index a = 0; a < c1.size(); ++a) {
    const double s1 = std::sqrt(std::max(0.0, 1.0 - std::min(1.0, c1(a) * c1(a))));
    const double s2 = std::sqrt(std::max(0.0, 1.0 - std::min(1.0, c2(a) * c2(a))));
    const double g = std::abs(s1 - s2);
    r.gaps.push_back(g);
    if (g > r.bound + tol) ++r.violations;
  }
  return r;
}

}  // namespace randproj
