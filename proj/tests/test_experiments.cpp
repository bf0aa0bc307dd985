// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "randproj/experiments.hpp"
#include "randproj/theory.hpp"

using namespace randproj;

TEST(Quantile, MatchesSortOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> len(20, 300), val(0, 9);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> v(std::size_t(len(rng)));
    for (auto& x : v) x = val(rng) / 10.0;  // ties on purpose
    const double delta = 0.05;
    auto s = v;
    std::sort(s.begin(), s.end());
    const auto k = std::size_t(std::ceil((1 - delta) * double(v.size()) - 1e-9));
    EXPECT_EQ(epsilon_at_delta(v, delta), s[k - 1]);
  }
}

TEST(Quantile, EdgeCases) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < 100; ++i) v[i] = double(99 - i);
  EXPECT_EQ(epsilon_at_delta(v, 0.05), 94.0);  // 95th smallest
  EXPECT_EQ(epsilon_at_delta(v, 0.99), 0.0);
  EXPECT_THROW(epsilon_at_delta(std::vector<double>(19, 1.0), 0.05), InsufficientSamples);
  EXPECT_NO_THROW(epsilon_at_delta(std::vector<double>(20, 1.0), 0.05));
  EXPECT_THROW(epsilon_at_delta(v, 0.0), InvalidArgument);
  EXPECT_THROW(epsilon_at_delta(v, 1.0), InvalidArgument);
}

TEST(Isotonic, FitProperties) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> y(15);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 / std::sqrt(double(i + 1)) + 0.1 * n(rng);
    const auto f = isotonic_nonincreasing(y);
    ASSERT_EQ(f.size(), y.size());
    for (std::size_t i = 1; i < f.size(); ++i) EXPECT_LE(f[i], f[i - 1] + 1e-15);
    EXPECT_NEAR(std::accumulate(f.begin(), f.end(), 0.0), std::accumulate(y.begin(), y.end(), 0.0), 1e-12);
    const auto g = isotonic_nonincreasing(f);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_NEAR(g[i], f[i], 1e-15);
  }
  EXPECT_EQ(isotonic_nonincreasing({3, 1, 2}), (std::vector<double>{3, 1.5, 1.5}));
}

TEST(MStar, SyntheticInverseSqrt) {
  std::vector<double> M, e;
  for (auto m : geometric_grid(4, 400, 30)) {
    M.push_back(double(m));
    e.push_back(2.0 / std::sqrt(double(m)));
  }
  const auto r = m_star_from_quantiles(M, e, 0.2);
  EXPECT_NEAR(r.m_star_emp, 100.0, 2.0);
  EXPECT_FALSE(r.isotonic_adjusted);
  EXPECT_FALSE(r.at_grid_minimum);
  EXPECT_THROW(m_star_from_quantiles(M, e, 0.05), Unachievable);
  EXPECT_TRUE(m_star_from_quantiles(M, e, 5.0).at_grid_minimum);
  EXPECT_THROW(m_star_from_quantiles({4, 4}, {1, 1}, 0.5), InvalidArgument);
}

TEST(MStar, IsotonicRepairsNoise) {
  const auto r = m_star_from_quantiles({10, 20, 40, 80}, {0.5, 0.3, 0.32, 0.1}, 0.2);
  EXPECT_TRUE(r.isotonic_adjusted);
  EXPECT_GT(r.m_star_emp, 40);
  EXPECT_LT(r.m_star_emp, 80);
}

TEST(Grid, Geometric) {
  const auto g = geometric_grid(4, 200, 24);
  EXPECT_EQ(g.front(), 4u);
  EXPECT_EQ(g.back(), 200u);
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_GT(g[i], g[i - 1]);
}

TEST(Scaling, RecoversCoefficients) {
  std::vector<ScalingPoint> pts;
  for (double K : {1.0, 2.0, 3.0})
    for (double lnV : {1.0, 2.5, 4.0}) pts.push_back({K, lnV, 0.2, (1.2 * lnV + 2.5 * K) / 0.04});
  const auto f = scaling_fit(pts);
  EXPECT_NEAR(f.a, 1.2, 1e-6);
  EXPECT_NEAR(f.b, 2.5, 1e-6);
  for (double r : f.residuals) EXPECT_NEAR(r, 0.0, 1e-9);
  std::vector<ScalingPoint> collinear{{1, 1, 0.2, 50}, {2, 2, 0.2, 100}, {3, 3, 0.2, 160}};
  EXPECT_THROW(scaling_fit(collinear), RankDeficient);
}

namespace {
ManifoldSpec small_curve() { return ManifoldSpec::with_volume(1, 300, 1.0, 1.0, 1.0, 8); }
}  // namespace

TEST(Distribution, SingleProjectorMatchesPointSet) {
  const auto spec = small_curve();
  const auto d = distortion_distribution(spec, 30, 1, 5);
  const auto s = sample_manifold(spec, manifold_seed(5));
  const auto A = sample_projector(spec.N, 30, projector_seed(5, 30, 0));
  EXPECT_NEAR(d.samples[0], pointset_distortion(A, s.points).max, 1e-12);
}

TEST(Distribution, PrefixStableAndDeterministic) {
  const auto spec = small_curve();
  const auto a = distortion_distribution(spec, 20, 10, 7);
  ExperimentOptions o;
  o.threads = 3;
  const auto b = distortion_distribution(spec, 20, 20, 7, o);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(a.samples[k], b.samples[k]);
  const auto c = distortion_distribution(spec, 20, 10, 7);
  EXPECT_EQ(a.samples, c.samples);
}

TEST(Distribution, TangentsOnlyIncrease) {
  const auto spec = small_curve();
  ExperimentOptions o;
  const auto a = distortion_distribution(spec, 20, 10, 7, o);
  o.include_tangents = true;
  const auto b = distortion_distribution(spec, 20, 10, 7, o);
  for (std::size_t k = 0; k < 10; ++k) EXPECT_GE(b.samples[k], a.samples[k]);
  EXPECT_EQ(b.policy, "all+tangents");
}

TEST(MStar, EmpiricalBelowBound) {
  const auto spec = small_curve();
  const auto r = m_star_empirical(spec, 0.3, 0.05, geometric_grid(4, 200, 16), 20, 3);
  EXPECT_LE(r.m_star_emp, m_star_bound(0.3, 0.05, 1, 300, 1.0));
  EXPECT_GT(r.m_star_emp, 4);
  EXPECT_THROW(m_star_empirical(spec, 0.3, 0.05, geometric_grid(4, 200, 16), 19, 3), InvalidArgument);
}

TEST(MStar, DeskScaleScalingLaw) {
  // K = 1 curves over a range of volumes; the fit should land near (1.2, 2.5).
  std::vector<ScalingPoint> pts;
  for (double lnV : {0.5, 1.5, 2.5, 3.5}) {
    const auto spec = ManifoldSpec::with_volume(1, 1000, lnV, 1.0, 1.0, 8);
    const auto r = m_star_empirical(spec, 0.25, 0.05, geometric_grid(4, 300, 24), 40, derive_seed(21, {lnV > 2 ? 1 : 0, int(lnV * 10)}));
    pts.push_back({1, lnV, 0.25, r.m_star_emp});
  }
  const auto f = scaling_fit(pts);
  EXPECT_GE(f.a, 0.6);
  EXPECT_LE(f.a, 2.4);
  EXPECT_GE(f.b, 1.25);
  EXPECT_LE(f.b, 5.0);
}

TEST(Figures, Fig6TheoryColumns) {
  auto p = FigureParams::defaults(FigureKind::fig6b);
  const auto t = figure_data(FigureKind::fig6b, p, 1);
  ASSERT_EQ(t.rows.size(), p.Ks.size() * p.Ns.size());
  for (const auto& r : t.rows) {
    const double K = r[0], lnV = r[1], N = r[2];
    EXPECT_NEAR(lnV, kLogV1 * K, 1e-15);
    EXPECT_TRUE(std::isnan(r[6]));
    EXPECT_NEAR(r[7], m_star_bound(0.2, 0.05, K, N, lnV), 1e-12 * r[7]);
    EXPECT_NEAR(r[8], bw_underestimate(0.2, 0.05, K, N, lnV), 1e-12 * r[8]);
    EXPECT_NEAR(r[9], nv_underestimate(0.2, 0.05, K, lnV), 1e-12 * r[9]);
    EXPECT_NEAR(r[11], r[7] * 0.04 / K, 1e-12 * r[11]);
  }
  const auto a = figure_data(FigureKind::fig6a, p, 1);
  ASSERT_EQ(a.rows.size(), p.Ks.size() * p.lnV_per_K.size());
  EXPECT_EQ(a.columns[5], "lnV_per_K");
  EXPECT_EQ(parse_figure_kind("fig5"), FigureKind::fig5);
  EXPECT_THROW(parse_figure_kind("fig7"), InvalidArgument);
}

TEST(Figures, GeometryTableShape) {
  auto p = FigureParams::defaults(FigureKind::fig5);
  p.spec.grid = {16, 20};
  const auto t = figure_data(FigureKind::fig5, p, 1);
  EXPECT_EQ(t.rows.size(), 320u);
  EXPECT_EQ(t.columns.size(), 1 + 2 + 4 + 4u);
  for (const auto& r : t.rows) EXPECT_EQ(r.size(), t.columns.size());
}
