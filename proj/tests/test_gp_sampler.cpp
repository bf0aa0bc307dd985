// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <random>

#include "randproj/gp_sampler.hpp"
#include "randproj/projector.hpp"
#include "randproj/seed.hpp"

#include <algorithm>
#include <array>
#include <cstring>

using namespace randproj;

namespace {

ManifoldSpec curve(std::size_t N, double L, std::size_t n, double lambda = 1.0, double ell = 1.0) {
  ManifoldSpec s;
  s.K = 1;
  s.N = N;
  s.ell = ell;
  s.lambda = {lambda};
  s.L = {L};
  s.grid = {n};
  return s;
}

ManifoldSpec surface(std::size_t N, std::size_t n1, std::size_t n2) {
  ManifoldSpec s;
  s.K = 2;
  s.N = N;
  s.lambda = {1.0, 1.8};
  s.L = {12.0, 20.0};
  s.grid = {n1, n2};
  return s;
}

}  // namespace

TEST(Sample, ShapeAndDeterminism) {
  const auto spec = surface(30, 7, 9);
  const auto a = sample_manifold(spec, 42);
  const auto b = sample_manifold(spec, 42);
  EXPECT_EQ(a.points.rows(), 63);
  EXPECT_EQ(a.points.cols(), 30);
  EXPECT_TRUE(a.points.allFinite());
  EXPECT_EQ(std::memcmp(a.points.data(), b.points.data(), sizeof(double) * a.points.size()), 0);
  const auto c = sample_manifold(spec, 43);
  EXPECT_NE((a.points - c.points).norm(), 0.0);
}

TEST(Sample, IndependentOfThreadCount) {
  const auto spec = surface(40, 8, 6);
  const auto a = sample_manifold(spec, 9, 1);
  const auto b = sample_manifold(spec, 9, 3);
  EXPECT_EQ(std::memcmp(a.points.data(), b.points.data(), sizeof(double) * a.points.size()), 0);
}

TEST(Sample, GridIndexing) {
  const auto s = sample_manifold(surface(5, 4, 6), 1);
  for (std::size_t p = 0; p < s.size(); ++p) EXPECT_EQ(s.linear_index(s.multi_index(p)), p);
  EXPECT_DOUBLE_EQ(s.sigma(7)[0], 12.0 / 3);
  EXPECT_DOUBLE_EQ(s.sigma(7)[1], 20.0 / 5);
}

TEST(Sample, CovarianceAtFixedSeparation) {
  // Grid step 0.1: pairs 10 apart have rho = 1. Per-coordinate averages are
  // independent across coordinates, giving an honest standard error.
  const std::size_t N = 2000;
  const auto s = sample_manifold(curve(N, 10, 101), 5);
  for (int lag : {0, 10, 20}) {
    const double rho = (0.1 * lag) * (0.1 * lag);
    std::vector<double> per(N);
    for (std::size_t i = 0; i < N; ++i) {
      double acc = 0;
      int cnt = 0;
      for (int p = 0; p + lag < 101; ++p, ++cnt) acc += s.points(p, Eigen::Index(i)) * s.points(p + lag, Eigen::Index(i));
      per[i] = acc / cnt * double(N);
    }
    const double mean = std::accumulate(per.begin(), per.end(), 0.0) / double(N);
    double var = 0;
    for (double v : per) var += (v - mean) * (v - mean);
    const double se = std::sqrt(var / double(N - 1) / double(N));
    EXPECT_NEAR(mean, std::exp(-rho / 2), 4 * se) << "lag " << lag;
  }
}

TEST(Sample, MarginalVarianceAcrossRealizations) {
  const std::size_t N = 50;
  const auto spec = curve(N, 6, 31, 1.0, 2.0);
  std::vector<double> v;
  for (Seed sd = 0; sd < 40; ++sd) {
    const auto s = sample_manifold(spec, sd);
    for (std::size_t i = 0; i < N; ++i) v.push_back(s.points(15, Eigen::Index(i)) * s.points(15, Eigen::Index(i)));
  }
  const double target = 4.0 / double(N);
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  const double se = std::sqrt(2.0) * target / std::sqrt(double(v.size()));
  EXPECT_NEAR(mean, target, 4 * se);
}

TEST(Sample, ChordConvergesToExpectation) {
  const auto spec = curve(200, 8, 81);
  for (int lag : {7, 14, 28}) {  // rho = 0.49, 1.96, 7.84
    const double d = 0.1 * lag;
    std::vector<double> v;
    for (Seed sd = 0; sd < 30; ++sd) v.push_back(empirical_chord_sq(sample_manifold(spec, 100 + sd), 10, 10 + lag));
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double var = 0;
    for (double x : v) var += (x - mean) * (x - mean);
    const double se = std::sqrt(var / double(v.size() - 1) / double(v.size()));
    EXPECT_NEAR(mean, expected_chord_sq(d * d, 1.0), 4 * se) << lag;
  }
}

TEST(Audit, SelfAveragingAtLargeN) {
  const auto s = sample_manifold(curve(1000, 10, 1024), 3);
  const auto a = self_averaging_audit(s);
  EXPECT_EQ(a.count, 1024u);
  EXPECT_GE(a.mean, 0.97);
  EXPECT_LE(a.mean, 1.03);
  EXPECT_GE(a.rel_sd, 0.5 * a.expected_rel_sd);
  EXPECT_LE(a.rel_sd, 2.0 * a.expected_rel_sd);
}

TEST(Audit, NoConcentrationForSingleCoordinate) {
  // Long curve so that the 1024 points span ~200 correlation lengths.
  const auto s = sample_manifold(curve(1, 200, 1024), 11);
  const auto a = self_averaging_audit(s);
  EXPECT_NEAR(a.expected_rel_sd, std::sqrt(2.0), 1e-15);
  EXPECT_GT(a.rel_sd, 0.7 * std::sqrt(2.0));
  EXPECT_LT(a.rel_sd, 1.3 * std::sqrt(2.0));
}

TEST(Chord, ZeroDiagonalAndNaiveOracle) {
  const auto s = sample_manifold(curve(300, 5, 40), 2);
  EXPECT_EQ(empirical_chord_sq(s, 7, 7), 0.0);
  for (std::size_t i = 0; i < 40; i += 3)
    for (std::size_t j = 0; j < 40; j += 5) {
      double naive = 0;
      for (Eigen::Index k = 0; k < 300; ++k) {
        const double d = s.points(Eigen::Index(i), k) - s.points(Eigen::Index(j), k);
        naive += d * d;
      }
      EXPECT_NEAR(empirical_chord_sq(s, i, j), naive, 1e-12 * (1 + naive));
    }
  EXPECT_THROW(empirical_chord_sq(s, 0, 40), InvalidArgument);
}

TEST(Chord, ConcentratesAroundExpectation) {
  const auto s = sample_manifold(curve(1000, 10, 1024), 4);
  const std::size_t c = s.center_index();
  std::size_t total = 0, ok = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double rho = intrinsic_separation(s.spec, s.sigma(c), s.sigma(j));
    if (j == c || rho > 10) continue;
    ++total;
    ok += std::abs(empirical_chord_sq(s, c, j) / expected_chord_sq(rho, 1.0) - 1) <= 0.2;
  }
  EXPECT_GE(double(ok), 0.95 * double(total));
}

TEST(Frames, OrthonormalBasesAndPositiveMetric) {
  const auto s = sample_manifold(surface(60, 12, 14), 8);
  const auto f = tangent_frames(s);
  ASSERT_EQ(f.size(), s.size());
  for (std::size_t p = 0; p < f.size(); ++p) {
    EXPECT_LT((f.bases[p].transpose() * f.bases[p] - Eigen::Matrix2d::Identity()).norm(), 1e-8);
    EXPECT_LT((f.metric[p] - f.metric[p].transpose()).norm(), 1e-12);
    EXPECT_GT(f.metric[p].determinant(), 0.0);
  }
  EXPECT_TRUE(f.boundary[0]);
  EXPECT_FALSE(f.boundary[s.linear_index({5, 5})]);
}

TEST(Frames, MetricMatchesExpectation) {
  ManifoldSpec spec = surface(3000, 41, 41);
  spec.L = {4.0, 8.0};
  spec.lambda = {1.0, 2.0};
  spec.ell = 1.5;
  const auto s = sample_manifold(spec, 21);
  const auto f = tangent_frames(s);
  const double h = 0.1;  // spacing / lambda on both axes
  const double tol = 5 * std::sqrt(2.0 / 3000) + 2 * h * h;
  for (std::size_t p = 0; p < f.size(); ++p) {
    if (f.boundary[p]) continue;
    for (int a = 0; a < 2; ++a) {
      const double expect = std::pow(spec.ell / spec.lambda[std::size_t(a)], 2);
      EXPECT_NEAR(f.metric[p](a, a) / expect, 1.0, tol);
    }
    EXPECT_LT(std::abs(f.metric[p](0, 1)) / std::sqrt(f.metric[p](0, 0) * f.metric[p](1, 1)), tol);
  }
}

TEST(Frames, SecondOrderOnAnalyticCurve) {
  // phi^i(s) = a_i sin(w_i s + b_i): finite-difference error should drop ~4x when h halves.
  const std::size_t N = 20;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> a(N), w(N), b(N);
  for (std::size_t i = 0; i < N; ++i) a[i] = u(rng), w[i] = u(rng), b[i] = 3 * u(rng);
  auto err = [&](std::size_t n) {
    const auto spec = curve(N, 4, n);
    RowMatrix X(n, N);
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < N; ++i) X(Eigen::Index(k), Eigen::Index(i)) = a[i] * std::sin(w[i] * spec.spacing(0) * k + b[i]);
    const auto f = tangent_frames(spec, X);
    // Compare at sigma = 2, which is a grid point for every n used.
    const std::size_t k = (n - 1) / 2;
    double e = 0;
    for (std::size_t i = 0; i < N; ++i) {
      const double exact = a[i] * w[i] * std::cos(w[i] * 2.0 + b[i]);
      e += std::pow(f.derivs[k](Eigen::Index(i), 0) - exact, 2);
    }
    return std::sqrt(e);
  };
  const double r1 = err(21) / err(41);
  const double r2 = err(41) / err(81);
  EXPECT_NEAR(r1, 4.0, 0.3);
  EXPECT_NEAR(r2, 4.0, 0.1);
}

TEST(Frames, RichardsonOnFixedRealization) {
  // One realization on a fine grid; step h, 2h, 4h come from subsampling it, so
  // all three estimates see the same function.
  const std::size_t N = 400;
  const auto fine = sample_manifold(curve(N, 8, 161), 17);
  auto deriv_at = [&](std::size_t stride) {
    const std::size_t n = (161 - 1) / stride + 1;
    ManifoldSpec spec = curve(N, 8, n);
    RowMatrix X(n, N);
    for (std::size_t k = 0; k < n; ++k) X.row(Eigen::Index(k)) = fine.points.row(Eigen::Index(k * stride));
    const auto f = tangent_frames(spec, X);
    // Shared fine-grid indices 16, 20, ..., 144, away from the edges for every stride.
    Eigen::MatrixXd out(N, 33);
    for (std::size_t c = 0; c < 33; ++c) out.col(Eigen::Index(c)) = f.derivs[(16 + 4 * c) / stride].col(0);
    return out;
  };
  const auto d4 = deriv_at(4), d2 = deriv_at(2), d1 = deriv_at(1);
  const double ratio = (d4 - d2).norm() / (d2 - d1).norm();
  EXPECT_NEAR(ratio, 4.0, 0.5);
}

TEST(Frames, RequiresThreePoints) {
  const auto s = sample_manifold(curve(5, 1, 2), 1);
  EXPECT_THROW(tangent_frames(s), InvalidArgument);
}

TEST(Angles, IdentityAndBasisInvariance) {
  const auto s = sample_manifold(surface(80, 10, 10), 6);
  auto f = tangent_frames(s);
  for (double c : empirical_principal_angles(f, 33, 33)) EXPECT_NEAR(c, 1.0, 1e-12);
  const auto before = empirical_principal_angles(f, 33, 57);
  const Eigen::MatrixXd R = SubspaceBasis::random(2, 2, 99).cols();
  f.bases[33] = f.bases[33] * R;
  const auto after = empirical_principal_angles(f, 33, 57);
  for (int a = 0; a < 2; ++a) EXPECT_NEAR(before[std::size_t(a)], after[std::size_t(a)], 1e-10);
  EXPECT_THROW(empirical_principal_angles(f, 0, 100), InvalidArgument);
}

TEST(Angles, SurfaceMeanCosinesFollowExpectation) {
  const auto s = sample_manifold(surface(200, 64, 64), 12);
  const auto f = tangent_frames(s);
  const std::size_t c = s.center_index();
  const int bins = 16;
  std::vector<std::array<double, 4>> acc(bins, {0, 0, 0, 0});
  std::vector<int> cnt(bins, 0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (f.boundary[j]) continue;
    const double rho = intrinsic_separation(s.spec, s.sigma(c), s.sigma(j));
    if (rho > 4) continue;
    const int b = std::min(bins - 1, int(rho / 0.25));
    const auto emp = empirical_principal_angles(f, c, j);
    auto th = expected_principal_cosines(rho, 2);
    std::sort(th.begin(), th.end(), std::greater<>());
    for (int a = 0; a < 2; ++a) acc[b][a] += emp[a], acc[b][2 + a] += th[a];
    ++cnt[b];
  }
  for (int b = 0; b < bins; ++b) {
    if (!cnt[b]) continue;
    for (int a = 0; a < 2; ++a) EXPECT_NEAR(acc[b][a] / cnt[b], acc[b][2 + a] / cnt[b], 0.15) << "bin " << b;
  }
}

TEST(Angles, SignedTangentCosineOnCurve) {
  const auto s = sample_manifold(curve(1000, 10, 1024), 7);
  const auto f = tangent_frames(s);
  const std::size_t c = s.center_index();
  std::size_t total = 0, ok = 0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    if (f.boundary[j]) continue;
    const double rho = intrinsic_separation(s.spec, s.sigma(c), s.sigma(j));
    if (rho > 4) continue;
    ++total;
    ok += std::abs(empirical_tangent_cosine(f, c, j) - expected_tangent_cosine(rho)) <= 0.1;
  }
  EXPECT_GE(double(ok), 0.95 * double(total));
}

TEST(Dump, RoundTrip) {
  const auto s = sample_manifold(surface(7, 4, 5), 77);
  const auto path = (std::filesystem::temp_directory_path() / "randproj_dump_test.rpms").string();
  write_sample(s, path);
  EXPECT_EQ(std::filesystem::file_size(path), 4 + 4 * 3 + 4 * 2 + 8 + 16 + 16 + 8 + 20 * 7 * 8u);
  const auto r = read_sample(path);
  EXPECT_EQ(r.seed, 77u);
  EXPECT_EQ(r.spec.grid, s.spec.grid);
  EXPECT_EQ(r.spec.lambda, s.spec.lambda);
  EXPECT_EQ(r.points, s.points);
  std::filesystem::remove(path);
}

TEST(Jitter, FactorizesIllConditionedKernel) {
  // 600 points across one correlation length is numerically singular without jitter.
  EXPECT_NO_THROW(sample_manifold(curve(3, 1, 600), 1));
}
