// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "randproj/errors.hpp"
#include "randproj/gp_sampler.hpp"
#include "randproj/manifold_model.hpp"
#include "randproj/parallel.hpp"
#include "randproj/projector.hpp"
#include "randproj/seed.hpp"
#include "randproj/theory.hpp"

namespace randproj {

struct ExperimentOptions {
  PairPolicy pairs = PairPolicy::all_pairs();
  bool include_tangents = false;  // also take the max over tangent-plane distortions
  unsigned threads = 1;
};

/// Points above this count switch the default pair policy to a seeded subsample.
inline constexpr std::size_t kAllPairsLimit = 4096;
inline constexpr std::size_t kDefaultSubsample = 10'000'000;

inline PairPolicy default_pair_policy(std::size_t P, Seed seed) {
  return P <= kAllPairsLimit ? PairPolicy::all_pairs() : PairPolicy::subsample(kDefaultSubsample, seed);
}

inline Seed projector_seed(Seed seed, std::size_t M, std::size_t k) { return derive_seed(seed, {"projector", M, k}); }

inline Seed manifold_seed(Seed seed) { return derive_seed(seed, {"manifold"}); }

/// Worst distortion of one realized manifold under each of n_proj projectors.
/// `samples[k]` comes from projector_seed(seed, M, k), so a longer run extends a shorter one.
inline DistortionSummary distortion_distribution(const ManifoldSample& s, const ChordTable& chords, std::size_t M,
                                                 std::size_t n_proj, Seed seed, const ExperimentOptions& opt = {},
                                                 const TangentFrames* frames = nullptr) {
  detail::require(n_proj >= 1, "experiments", "need at least one projector");
  detail::require(M >= 1 && M <= s.spec.N, "experiments", "need 1 <= M <= N");
  if (opt.include_tangents && frames == nullptr)
    throw InvalidArgument("experiments", "tangent distortions requested without frames");
  DistortionSummary out;
  out.policy = opt.pairs.describe() + (opt.include_tangents ? "+tangents" : "");
  out.samples.resize(n_proj);
  // Parallelism is across projectors; each scan runs single-threaded.
  parallel_for(n_proj, opt.threads, [&](std::size_t k) {
    const Projector A = sample_projector(s.spec.N, M, projector_seed(seed, M, k));
    PairPolicy pol = opt.pairs;
    pol.keep_samples = false;
    double v = pointset_distortion(A, s.points, chords, pol, 1).max;
    if (opt.include_tangents && s.spec.K <= M) {
      for (std::size_t p = 0; p < frames->size(); ++p)
        v = std::max(v, subspace_distortion(A, SubspaceBasis(frames->bases[p])));
    }
    out.samples[k] = v;
  });
  const auto it = std::max_element(out.samples.begin(), out.samples.end());
  out.max = *it;
  out.argmax_first = static_cast<std::size_t>(it - out.samples.begin());
  return out;
}

inline DistortionSummary distortion_distribution(const ManifoldSpec& spec, std::size_t M, std::size_t n_proj,
                                                 Seed seed, const ExperimentOptions& opt = {}) {
  const ManifoldSample s = sample_manifold(spec, manifold_seed(seed), opt.threads);
  const ChordTable chords = make_chord_table(s.points, opt.threads);
  if (opt.include_tangents) {
    const TangentFrames f = tangent_frames(s, opt.threads);
    return distortion_distribution(s, chords, M, n_proj, seed, opt, &f);
  }
  return distortion_distribution(s, chords, M, n_proj, seed, opt);
}

/// The ceil((1 - delta) n)-th order statistic.
inline double epsilon_at_delta(std::vector<double> samples, double delta) {
  detail::require(delta > 0 && delta < 1, "experiments", "delta must lie in (0, 1)");
  const auto n = samples.size();
  const auto need = static_cast<std::size_t>(std::ceil(1.0 / delta - 1e-9));
  if (n == 0 || n < need)
    throw InsufficientSamples("experiments", "need at least " + std::to_string(need) + " samples");
  auto k = static_cast<std::size_t>(std::ceil((1.0 - delta) * static_cast<double>(n) - 1e-9));
  k = std::clamp<std::size_t>(k, 1, n);
  std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(k - 1), samples.end());
  return samples[k - 1];
}

inline double epsilon_at_delta(const DistortionSummary& s, double delta) { return epsilon_at_delta(s.samples, delta); }

/// Least-squares nonincreasing fit (pool adjacent violators), equal weights.
inline std::vector<double> isotonic_nonincreasing(const std::vector<double>& y) {
  std::vector<double> mean;
  std::vector<std::size_t> width;
  for (double v : y) {
    mean.push_back(v);
    width.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] < mean.back()) {
      const std::size_t w = width[width.size() - 2] + width.back();
      const double m = (mean[mean.size() - 2] * double(width[width.size() - 2]) + mean.back() * double(width.back())) / double(w);
      mean.pop_back();
      width.pop_back();
      mean.back() = m;
      width.back() = w;
    }
  }
  std::vector<double> out;
  out.reserve(y.size());
  for (std::size_t b = 0; b < mean.size(); ++b) out.insert(out.end(), width[b], mean[b]);
  return out;
}

struct MStarResult {
  double eps_target = 0.0;
  double delta = 0.0;
  std::vector<double> M_grid;
  std::vector<double> eps_raw;
  std::vector<double> eps_iso;
  double m_star_emp = std::numeric_limits<double>::quiet_NaN();
  bool isotonic_adjusted = false;
  bool at_grid_minimum = false;
};

/// Smallest M whose (isotonic) quantile reaches eps_target, interpolating in (log M, eps).
inline MStarResult m_star_from_quantiles(const std::vector<double>& M_grid, const std::vector<double>& eps_q,
                                         double eps_target, double delta = 0.0) {
  if (M_grid.size() != eps_q.size()) throw DimensionMismatch("experiments", "grid and quantiles differ in length");
  detail::require(M_grid.size() >= 2, "experiments", "need at least two grid points");
  for (std::size_t i = 1; i < M_grid.size(); ++i)
    detail::require(M_grid[i] > M_grid[i - 1], "experiments", "M grid must be strictly increasing");
  detail::require(M_grid.front() > 0, "experiments", "M grid must be positive");
  MStarResult r;
  r.eps_target = eps_target;
  r.delta = delta;
  r.M_grid = M_grid;
  r.eps_raw = eps_q;
  r.eps_iso = isotonic_nonincreasing(eps_q);
  r.isotonic_adjusted = r.eps_iso != r.eps_raw;
  const auto& e = r.eps_iso;
  std::size_t k = 0;
  while (k < e.size() && e[k] > eps_target) ++k;
  if (k == e.size())
    throw Unachievable("experiments", "target eps not reached within the M grid (best " + std::to_string(e.back()) + ")");
  if (k == 0) {
    r.m_star_emp = M_grid.front();
    r.at_grid_minimum = true;
    return r;
  }
  const double t = (e[k - 1] - eps_target) / (e[k - 1] - e[k]);
  const double l0 = std::log(M_grid[k - 1]), l1 = std::log(M_grid[k]);
  r.m_star_emp = std::exp(l0 + t * (l1 - l0));
  return r;
}

/// Empirical M*: one manifold, n_proj projectors per grid value.
inline MStarResult m_star_empirical(const ManifoldSpec& spec, double eps_target, double delta,
                                    const std::vector<std::size_t>& M_grid, std::size_t n_proj, Seed seed,
                                    const ExperimentOptions& opt = {}) {
  detail::require(n_proj >= 20, "experiments", "need at least 20 projectors per grid point");
  const ManifoldSample s = sample_manifold(spec, manifold_seed(seed), opt.threads);
  const ChordTable chords = make_chord_table(s.points, opt.threads);
  TangentFrames frames;
  if (opt.include_tangents) frames = tangent_frames(s, opt.threads);
  std::vector<double> Ms, q;
  for (std::size_t M : M_grid) {
    const auto d = distortion_distribution(s, chords, M, n_proj, seed, opt, opt.include_tangents ? &frames : nullptr);
    Ms.push_back(static_cast<double>(M));
    q.push_back(epsilon_at_delta(d, delta));
  }
  return m_star_from_quantiles(Ms, q, eps_target, delta);
}

/// Geometric grid of `count` distinct integers from lo to hi.
inline std::vector<std::size_t> geometric_grid(std::size_t lo, std::size_t hi, std::size_t count) {
  detail::require(lo >= 1 && hi > lo && count >= 2, "experiments", "bad grid request");
  std::vector<std::size_t> g;
  for (std::size_t i = 0; i < count; ++i) {
    const double t = double(i) / double(count - 1);
    const auto v = static_cast<std::size_t>(std::llround(double(lo) * std::pow(double(hi) / double(lo), t)));
    if (g.empty() || v > g.back()) g.push_back(v);
  }
  return g;
}

struct ScalingPoint {
  double K = 1;
  double lnV = 0;
  double eps = 0.2;
  double m_star = 0;
};

struct ScalingFit {
  double a = 0.0;  // coefficient of lnV
  double b = 0.0;  // coefficient of K
  std::vector<double> residuals;
};

/// Ordinary least squares, no intercept: m_star * eps^2 ~ a lnV + b K.
inline ScalingFit scaling_fit(const std::vector<ScalingPoint>& pts) {
  if (pts.size() < 2) throw RankDeficient("experiments", "need at least two points");
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd X(n, 2);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = pts[i].lnV;
    X(i, 1) = pts[i].K;
    y(i) = pts[i].m_star * pts[i].eps * pts[i].eps;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(X, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (!(sv(1) > 1e-10 * sv(0))) throw RankDeficient("experiments", "(lnV, K) design is rank deficient");
  const Eigen::VectorXd c = svd.solve(y);
  ScalingFit f;
  f.a = c(0);
  f.b = c(1);
  const Eigen::VectorXd r = y - X * c;
  f.residuals.assign(r.data(), r.data() + r.size());
  return f;
}

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

enum class FigureKind { fig4, fig5, fig6a, fig6b };

inline FigureKind parse_figure_kind(const std::string& s) {
  if (s == "fig4") return FigureKind::fig4;
  if (s == "fig5") return FigureKind::fig5;
  if (s == "fig6a") return FigureKind::fig6a;
  if (s == "fig6b") return FigureKind::fig6b;
  throw InvalidArgument("experiments", "unknown figure kind '" + s + "'");
}

inline const double kLogV1 = std::log(10.0 * std::sqrt(2.0) / 3.0);

struct FigureParams {
  // fig4 / fig5
  ManifoldSpec spec;
  // fig6
  std::vector<std::size_t> Ks{1, 2};
  std::vector<double> lnV_per_K{kLogV1, 2.0, 2.5};
  std::vector<double> Ns{200, 1000, 5000, 20000};
  double N = 1000;
  double eps = 0.2;
  double delta = 0.05;
  bool experiment = false;
  std::vector<std::size_t> M_grid = geometric_grid(4, 200, 24);
  std::size_t n_proj = 100;
  double points_per_lambda = 16;
  bool include_tangents = false;
  unsigned threads = 1;

  static FigureParams defaults(FigureKind k) {
    FigureParams p;
    if (k == FigureKind::fig4) {
      p.spec.K = 1;
      p.spec.N = 1000;
      p.spec.ell = 1.0;
      p.spec.lambda = {1.0};
      p.spec.L = {10.0};
      p.spec.grid = {1024};
    } else if (k == FigureKind::fig5) {
      p.spec.K = 2;
      p.spec.N = 200;
      p.spec.ell = 1.0;
      p.spec.lambda = {1.0, 1.8};
      p.spec.L = {12.0, 20.0};
      p.spec.grid = {128, 256};
    }
    return p;
  }
};

namespace detail {

inline Table geometry_table(const FigureParams& p, Seed seed) {
  const ManifoldSample s = sample_manifold(p.spec, manifold_seed(seed), p.threads);
  const TangentFrames f = tangent_frames(s, p.threads);
  const std::size_t c = s.center_index();
  const auto sc = s.sigma(c);
  const std::size_t K = p.spec.K;
  Table t;
  t.columns = {"point"};
  for (std::size_t a = 0; a < K; ++a) t.columns.push_back("sigma" + std::to_string(a + 1));
  for (const char* col : {"rho", "boundary", "chord_sq", "chord_sq_theory"}) t.columns.emplace_back(col);
  if (K == 1) {
    t.columns.emplace_back("tangent_cos");
    t.columns.emplace_back("tangent_cos_theory");
  } else {
    for (std::size_t a = 0; a < K; ++a) t.columns.push_back("cos" + std::to_string(a + 1));
    for (std::size_t a = 0; a < K; ++a) t.columns.push_back("cos" + std::to_string(a + 1) + "_theory");
  }
  for (std::size_t j = 0; j < s.size(); ++j) {
    const auto sj = s.sigma(j);
    const double rho = intrinsic_separation(p.spec, sc, sj);
    std::vector<double> row{double(j)};
    row.insert(row.end(), sj.begin(), sj.end());
    row.push_back(rho);
    row.push_back(f.boundary[j] ? 1.0 : 0.0);
    row.push_back(empirical_chord_sq(s, c, j));
    row.push_back(expected_chord_sq(rho, p.spec.ell));
    if (K == 1) {
      row.push_back(empirical_tangent_cosine(f, c, j));
      row.push_back(expected_tangent_cosine(rho));
    } else {
      const auto emp = empirical_principal_angles(f, c, j);
      auto th = expected_principal_cosines(rho, K);
      std::sort(th.begin(), th.end(), std::greater<>());
      row.insert(row.end(), emp.begin(), emp.end());
      row.insert(row.end(), th.begin(), th.end());
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline std::vector<double> fig6_row(const FigureParams& p, std::size_t K, double lnV, double N, double x, Seed seed) {
  double emp = std::numeric_limits<double>::quiet_NaN();
  if (p.experiment) {
    const ManifoldSpec spec =
        ManifoldSpec::with_volume(K, static_cast<std::size_t>(N), lnV, 1.0, 1.0, p.points_per_lambda);
    ExperimentOptions opt;
    opt.threads = p.threads;
    opt.include_tangents = p.include_tangents;
    opt.pairs = default_pair_policy(spec.point_count(), derive_seed(seed, {"pairs"}));
    try {
      emp = m_star_empirical(spec, p.eps, p.delta, p.M_grid, p.n_proj, seed, opt).m_star_emp;
    } catch (const Unachievable&) {
    }
  }
  const double Kd = double(K);
  const double mnew = m_star_bound(p.eps, p.delta, Kd, N, lnV);
  const double mbw = bw_underestimate(p.eps, p.delta, Kd, N, lnV);
  const double mnv = nv_underestimate(p.eps, p.delta, Kd, lnV);
  const double sc = p.eps * p.eps / Kd;
  return {Kd, lnV, N, p.eps, p.delta, x, emp, mnew, mbw, mnv, emp * sc, mnew * sc, mbw * sc, mnv * sc};
}

inline std::vector<std::string> fig6_columns(const char* xname) {
  return {"K", "lnV", "N", "eps_target", "delta", xname, "m_star_emp", "m_star_new", "m_star_bw", "m_star_nv",
          "scaled_emp", "scaled_new", "scaled_bw", "scaled_nv"};
}

}  // namespace detail

/// Plot data for one figure kind; every theory column comes from the theory and manifold_model modules.
inline Table figure_data(FigureKind kind, const FigureParams& p, Seed seed) {
  switch (kind) {
    case FigureKind::fig4:
    case FigureKind::fig5:
      return detail::geometry_table(p, seed);
    case FigureKind::fig6a: {
      Table t;
      t.columns = detail::fig6_columns("lnV_per_K");
      for (std::size_t K : p.Ks)
        for (double x : p.lnV_per_K)
          t.rows.push_back(detail::fig6_row(p, K, x * double(K), p.N, x, derive_seed(seed, {"fig6a", K, t.rows.size()})));
      return t;
    }
    case FigureKind::fig6b: {
      Table t;
      t.columns = detail::fig6_columns("lnN");
      for (std::size_t K : p.Ks)
        for (double N : p.Ns)
          t.rows.push_back(detail::fig6_row(p, K, kLogV1 * double(K), N, std::log(N), derive_seed(seed, {"fig6b", K, t.rows.size()})));
      return t;
    }
  }
  throw InvalidArgument("experiments", "unknown figure kind");
}

}  // namespace randproj
