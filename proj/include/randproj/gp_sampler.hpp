// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <bit>
#include <type_traits>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "randproj/errors.hpp"
#include "randproj/manifold_model.hpp"
#include "randproj/parallel.hpp"
#include "randproj/seed.hpp"

namespace randproj {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A realized embedding on the grid. Row p of `points` is phi(sigma_p); the
/// linear index runs over the grid axes with the last axis fastest.
struct ManifoldSample {
  ManifoldSpec spec;
  std::vector<std::vector<double>> sigma_axes;
  RowMatrix points;
  Seed seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(points.rows()); }

  std::vector<std::size_t> multi_index(std::size_t p) const {
    std::vector<std::size_t> idx(spec.K);
    for (std::size_t a = spec.K; a-- > 0;) {
      idx[a] = p % spec.grid[a];
      p /= spec.grid[a];
    }
    return idx;
  }

  std::size_t linear_index(const std::vector<std::size_t>& idx) const {
    std::size_t p = 0;
    for (std::size_t a = 0; a < spec.K; ++a) p = p * spec.grid[a] + idx[a];
    return p;
  }

  std::vector<double> sigma(std::size_t p) const {
    const auto idx = multi_index(p);
    std::vector<double> s(spec.K);
    for (std::size_t a = 0; a < spec.K; ++a) s[a] = sigma_axes[a][idx[a]];
    return s;
  }

  /// Index of the grid point nearest the middle of the grid.
  std::size_t center_index() const {
    std::vector<std::size_t> idx(spec.K);
    for (std::size_t a = 0; a < spec.K; ++a) idx[a] = spec.grid[a] / 2;
    return linear_index(idx);
  }
};

struct TangentFrames {
  std::vector<Eigen::MatrixXd> derivs;  // N x K per point, column a = d phi / d sigma^a
  std::vector<Eigen::MatrixXd> bases;   // N x K per point, orthonormal columns
  std::vector<Eigen::MatrixXd> metric;  // K x K per point
  std::vector<bool> boundary;           // true within one stencil of the grid boundary

  std::size_t size() const { return bases.size(); }
};

struct NormAudit {
  std::size_t count = 0;
  double mean = 0.0;
  double rel_sd = 0.0;
  double expected_mean = 0.0;
  double expected_rel_sd = 0.0;
};

namespace detail {

inline Eigen::MatrixXd axis_kernel(const std::vector<double>& x, double lambda) {
  const auto n = static_cast<Eigen::Index>(x.size());
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const double d = (x[i] - x[j]) / lambda;
      C(i, j) = std::exp(-0.5 * d * d);
    }
  return C;
}

// Lower Cholesky factor of a unit-diagonal kernel matrix, adding relative
// jitter 1e-10 and escalating by 10x up to 1e-6.
inline Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& C) {
  for (double jitter = 1e-10; jitter <= 1e-6 * (1 + 1e-9); jitter *= 10.0) {
    Eigen::MatrixXd A = C;
    A.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) {
      Eigen::MatrixXd Lf = llt.matrixL();
      if (Lf.allFinite() && (Lf.diagonal().array() > 0).all()) return Lf;
    }
  }
  throw NumericalBreakdown("gp_sampler", "covariance factorization failed after jitter escalation");
}

}  // namespace detail

/// Draws phi^i on the grid for i = 1..N, each coordinate an independent GP
/// with covariance (ell^2/N) exp(-rho/2). Coordinate i uses its own stream
/// derived from (seed, i), so the output does not depend on `threads`.
inline ManifoldSample sample_manifold(const ManifoldSpec& spec, Seed seed, unsigned threads = 1) {
  spec.validate();
  ManifoldSample s;
  s.spec = spec;
  s.seed = seed;
  for (std::size_t a = 0; a < spec.K; ++a) s.sigma_axes.push_back(spec.axis(a));

  const auto P = static_cast<Eigen::Index>(spec.point_count());
  const auto N = static_cast<Eigen::Index>(spec.N);
  s.points.resize(P, N);
  parallel_for(spec.N, threads, [&](std::size_t i) {
    Rng rng(derive_seed(seed, {"coord", i}));
    std::normal_distribution<double> normal;
    for (Eigen::Index p = 0; p < P; ++p) s.points(p, static_cast<Eigen::Index>(i)) = normal(rng);
  });

  Eigen::Index outer = 1;
  for (std::size_t a = 0; a < spec.K; ++a) {
    const Eigen::MatrixXd Lf = detail::jittered_cholesky(detail::axis_kernel(s.sigma_axes[a], spec.lambda[a]));
    const auto na = static_cast<Eigen::Index>(spec.grid[a]);
    const Eigen::Index inner = P / (outer * na) * N;
    for (Eigen::Index o = 0; o < outer; ++o) {
      Eigen::Map<RowMatrix> block(s.points.data() + o * na * inner, na, inner);
      block = (Lf * block).eval();
    }
    outer *= na;
  }
  s.points *= spec.ell / std::sqrt(static_cast<double>(spec.N));
  if (!s.points.allFinite()) throw NumericalBreakdown("gp_sampler", "non-finite sample");
  return s;
}

inline NormAudit self_averaging_audit(const ManifoldSample& s) {
  NormAudit r;
  const Eigen::VectorXd sq = s.points.rowwise().squaredNorm();
  r.count = static_cast<std::size_t>(sq.size());
  r.mean = sq.mean();
  const double var = (sq.array() - r.mean).square().sum() / std::max<double>(1.0, double(sq.size()) - 1.0);
  r.rel_sd = std::sqrt(var) / r.mean;
  r.expected_mean = s.spec.ell * s.spec.ell;
  r.expected_rel_sd = std::sqrt(2.0 / static_cast<double>(s.spec.N));
  return r;
}

inline double empirical_chord_sq(const ManifoldSample& s, std::size_t i, std::size_t j) {
  if (i >= s.size() || j >= s.size()) throw InvalidArgument("gp_sampler", "point index out of range");
  return (s.points.row(static_cast<Eigen::Index>(i)) - s.points.row(static_cast<Eigen::Index>(j))).squaredNorm();
}

/// Finite-difference tangent frames for points laid out on `spec`'s grid.
/// Central differences in the interior, second-order one-sided at the ends.
inline TangentFrames tangent_frames(const ManifoldSpec& spec, const RowMatrix& points, unsigned threads = 1) {
  for (std::size_t a = 0; a < spec.K; ++a)
    detail::require(spec.grid[a] >= 3, "gp_sampler", "tangent frames need at least 3 points per axis");
  const auto P = static_cast<std::size_t>(points.rows());
  if (P != spec.point_count()) throw DimensionMismatch("gp_sampler", "points do not match grid");
  const auto K = static_cast<Eigen::Index>(spec.K);
  const auto N = points.cols();

  std::vector<std::size_t> stride(spec.K, 1);
  for (std::size_t a = spec.K - 1; a-- > 0;) stride[a] = stride[a + 1] * spec.grid[a + 1];

  TangentFrames f;
  f.derivs.resize(P);
  f.bases.resize(P);
  f.metric.resize(P);
  f.boundary.assign(P, false);
  std::vector<char> singular(P, 0);
  parallel_for(P, threads, [&](std::size_t p) {
    Eigen::MatrixXd D(N, K);
    bool edge = false;
    for (std::size_t a = 0; a < spec.K; ++a) {
      const std::size_t k = (p / stride[a]) % spec.grid[a];
      const std::size_t n = spec.grid[a];
      const double h = spec.spacing(a);
      const auto row = [&](std::size_t q) { return points.row(static_cast<Eigen::Index>(q)).transpose(); };
      const auto ai = static_cast<Eigen::Index>(a);
      if (k == 0) {
        D.col(ai) = (-3.0 * row(p) + 4.0 * row(p + stride[a]) - row(p + 2 * stride[a])) / (2.0 * h);
        edge = true;
      } else if (k == n - 1) {
        D.col(ai) = (3.0 * row(p) - 4.0 * row(p - stride[a]) + row(p - 2 * stride[a])) / (2.0 * h);
        edge = true;
      } else {
        D.col(ai) = (row(p + stride[a]) - row(p - stride[a])) / (2.0 * h);
      }
    }
    Eigen::MatrixXd h = D.transpose() * D;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
    const auto ev = es.eigenvalues();
    if (!(ev.minCoeff() > 1e-14 * ev.maxCoeff()) || !(ev.maxCoeff() > 0)) {
      singular[p] = 1;
      return;
    }
    const Eigen::MatrixXd inv_sqrt =
        es.eigenvectors() * ev.array().rsqrt().matrix().asDiagonal() * es.eigenvectors().transpose();
    f.bases[p] = D * inv_sqrt;
    f.metric[p] = std::move(h);
    f.derivs[p] = std::move(D);
    f.boundary[p] = edge;
  });
  if (std::find(singular.begin(), singular.end(), 1) != singular.end())
    throw NumericalBreakdown("gp_sampler", "singular empirical metric");
  return f;
}

inline TangentFrames tangent_frames(const ManifoldSample& s, unsigned threads = 1) {
  return tangent_frames(s.spec, s.points, threads);
}

inline std::vector<double> empirical_principal_angles(const TangentFrames& f, std::size_t i, std::size_t j) {
  if (i >= f.size() || j >= f.size()) throw InvalidArgument("gp_sampler", "point index out of range");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(f.bases[i].transpose() * f.bases[j]);
  std::vector<double> c(svd.singularValues().data(), svd.singularValues().data() + svd.singularValues().size());
  for (double& x : c) x = std::clamp(x, 0.0, 1.0);
  std::sort(c.begin(), c.end(), std::greater<>());
  return c;
}

/// Signed cosine between the tangent vectors at i and j (K = 1 only).
inline double empirical_tangent_cosine(const TangentFrames& f, std::size_t i, std::size_t j) {
  if (i >= f.size() || j >= f.size()) throw InvalidArgument("gp_sampler", "point index out of range");
  if (f.derivs[i].cols() != 1) throw DimensionMismatch("gp_sampler", "signed tangent cosine needs K = 1");
  const auto& a = f.derivs[i];
  const auto& b = f.derivs[j];
  return std::clamp(a.col(0).dot(b.col(0)) / (a.col(0).norm() * b.col(0).norm()), -1.0, 1.0);
}

// Binary dump: "RPMS", u32 version, u32 K, u32 N, K x u32 grid, f64 ell,
// K x f64 lambda, K x f64 L, u64 seed, then P x N f64 row-major. Little-endian.
inline constexpr std::uint32_t kSampleVersion = 1;

namespace detail {
template <class T>
void put(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(buf, sizeof(T));
}
template <class T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw InvalidArgument("gp_sampler", "truncated sample file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}
}  // namespace detail

inline void write_sample(const ManifoldSample& s, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidArgument("gp_sampler", "cannot open " + path);
  os.write("RPMS", 4);
  detail::put<std::uint32_t>(os, kSampleVersion);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.spec.K));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(s.spec.N));
  for (auto n : s.spec.grid) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(n));
  detail::put<double>(os, s.spec.ell);
  for (double v : s.spec.lambda) detail::put<double>(os, v);
  for (double v : s.spec.L) detail::put<double>(os, v);
  detail::put<std::uint64_t>(os, s.seed);
  for (Eigen::Index p = 0; p < s.points.rows(); ++p)
    for (Eigen::Index i = 0; i < s.points.cols(); ++i) detail::put<double>(os, s.points(p, i));
}

inline ManifoldSample read_sample(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("gp_sampler", "cannot open " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "RPMS", 4) != 0)
    throw InvalidArgument("gp_sampler", "bad magic in " + path);
  if (detail::get<std::uint32_t>(is) != kSampleVersion) throw InvalidArgument("gp_sampler", "unsupported version");
  ManifoldSample s;
  s.spec.K = detail::get<std::uint32_t>(is);
  s.spec.N = detail::get<std::uint32_t>(is);
  s.spec.grid.resize(s.spec.K);
  s.spec.lambda.resize(s.spec.K);
  s.spec.L.resize(s.spec.K);
  for (auto& n : s.spec.grid) n = detail::get<std::uint32_t>(is);
  s.spec.ell = detail::get<double>(is);
  for (auto& v : s.spec.lambda) v = detail::get<double>(is);
  for (auto& v : s.spec.L) v = detail::get<double>(is);
  s.seed = detail::get<std::uint64_t>(is);
  s.spec.validate();
  for (std::size_t a = 0; a < s.spec.K; ++a) s.sigma_axes.push_back(s.spec.axis(a));
  s.points.resize(static_cast<Eigen::Index>(s.spec.point_count()), static_cast<Eigen::Index>(s.spec.N));
  for (Eigen::Index p = 0; p < s.points.rows(); ++p)
    for (Eigen::Index i = 0; i < s.points.cols(); ++i) s.points(p, i) = detail::get<double>(is);
  return s;
}

}  // namespace randproj
