// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"
#include "randproj/cone_guarantees.hpp"
#include "randproj/errors.hpp"
#include "randproj/experiments.hpp"
#include "randproj/gp_sampler.hpp"
#include "randproj/harness/config.hpp"
#include "randproj/harness/output.hpp"
#include "randproj/theory.hpp"

namespace randproj::harness {

inline constexpr const char* kVersion = "1.0.0";

struct RunResult {
  std::vector<std::string> files;
  json summary = json::object();
};

namespace detail {

inline Table bounds_table(const BoundsConfig& b) {
  Table t;
  t.columns = {"eps", "delta", "K", "N", "lnV", "M", "mu",
               "delta_long", "delta_long_log", "delta_long_ok",
               "delta_short", "delta_short_log", "delta_short_ok",
               "delta_total", "m_bar",
               "gamma_star_C", "sin_theta_C_star", "chordal_ok",
               "gamma_star_T", "sin_theta_T_star", "tangential_ok",
               "m_bw", "m_nv", "crossover_closed", "crossover_numeric", "crossover_found",
               "rho_star", "C0"};
  std::vector<std::optional<double>> Ms;
  if (b.M.empty()) Ms.push_back(std::nullopt);
  for (double m : b.M) Ms.push_back(m);
  for (double eps : b.eps)
    for (double delta : b.delta)
      for (double K : b.K)
        for (double N : b.N)
          for (double lnV : b.lnV)
            for (const auto& M : Ms) {
              BoundQuery q{eps, delta, K, N, lnV, M};
              const BoundReport r = bound_report(q);
              auto f = [](bool x) { return x ? 1.0 : 0.0; };
              t.rows.push_back({eps, delta, K, N, lnV, r.M, r.mu,
                                r.delta_long.value, r.delta_long.log_value, f(r.delta_long.applicable),
                                r.delta_short.value, r.delta_short.log_value, f(r.delta_short.applicable),
                                r.delta_total.value, r.m_bar,
                                r.cells.gamma_star_C, r.cells.sin_theta_C_star, f(r.cells.chordal_ok),
                                r.cells.gamma_star_T, r.cells.sin_theta_T_star, f(r.cells.tangential_ok),
                                r.m_bw, r.m_nv, r.crossover.closed_form, r.crossover.numeric, f(r.crossover.found),
                                r.constants.rho_star, r.constants.C0});
            }
  return t;
}

inline Table verification_rows(const VerificationReport& r, double sin_theta, bool tangential) {
  Table t;
  t.columns = {"tangential", "sin_theta", "trial", "dist_x", "worst_dist_y", "g_value", "eps_x", "violated", "vacuous"};
  for (const auto& tr : r.trials)
    t.rows.push_back({tangential ? 1.0 : 0.0, sin_theta, double(tr.trial), tr.dist_x, tr.worst_dist_y, tr.g_value,
                      tr.eps_x, tr.violated ? 1.0 : 0.0, tr.vacuous ? 1.0 : 0.0});
  return t;
}

inline void append(Table& dst, const Table& src) {
  if (dst.columns.empty()) dst.columns = src.columns;
  dst.rows.insert(dst.rows.end(), src.rows.begin(), src.rows.end());
}

}  // namespace detail

/// Executes a validated config, writing artifacts and manifest.json into out_dir.
inline RunResult run(const RunConfig& c) {
  namespace fs = std::filesystem;
  const auto t0 = std::chrono::steady_clock::now();
  fs::create_directories(c.out_dir);
  RunResult res;
  const auto emit = [&](const std::string& stem, const Table& t) {
    res.files.push_back(write_table(c.out_dir, stem, t, c.echo, c.master_seed, c.format));
  };

  switch (c.command) {
    case Command::sample: {
      const ManifoldSample s = sample_manifold(c.sample.spec, manifold_seed(c.master_seed), c.threads);
      const NormAudit a = self_averaging_audit(s);
      Table t;
      t.columns = {"points", "mean_norm_sq", "rel_sd", "expected_mean", "expected_rel_sd"};
      t.rows.push_back({double(a.count), a.mean, a.rel_sd, a.expected_mean, a.expected_rel_sd});
      emit("audit", t);
      if (c.sample.dump) {
        write_sample(s, c.out_dir + "/sample.rpms");
        res.files.push_back("sample.rpms");
      }
      if (c.sample.frames) {
        const TangentFrames f = tangent_frames(s, c.threads);
        Table ft;
        ft.columns = {"point", "boundary"};
        const auto K = c.sample.spec.K;
        for (std::size_t a1 = 0; a1 < K; ++a1)
          for (std::size_t a2 = 0; a2 < K; ++a2) ft.columns.push_back("h" + std::to_string(a1 + 1) + std::to_string(a2 + 1));
        for (std::size_t p = 0; p < f.size(); ++p) {
          std::vector<double> row{double(p), f.boundary[p] ? 1.0 : 0.0};
          for (std::size_t a1 = 0; a1 < K; ++a1)
            for (std::size_t a2 = 0; a2 < K; ++a2) row.push_back(f.metric[p](Eigen::Index(a1), Eigen::Index(a2)));
          ft.rows.push_back(std::move(row));
        }
        emit("frames", ft);
      }
      res.summary = {{"points", a.count}, {"mean_norm_sq", a.mean}, {"rel_sd", a.rel_sd}};
      break;
    }
    case Command::bounds: {
      const Table t = detail::bounds_table(c.bounds);
      emit("bounds", t);
      res.summary = {{"rows", t.rows.size()}};
      break;
    }
    case Command::verify_cones: {
      const auto& v = c.verify;
      VerifyOptions opt;
      opt.mode = v.mode;
      opt.threads = c.threads;
      Table trials, summary;
      summary.columns = {"tangential", "sin_theta", "K", "trials", "violations", "vacuous", "violation_fraction",
                         "mean_margin", "min_margin"};
      if (v.chordal) {
        for (std::size_t i = 0; i < v.chordal->sin_theta.size(); ++i) {
          const double s = v.chordal->sin_theta[i];
          const auto r = verify_chordal_guarantee(v.N, v.M, s, v.chordal->n_boundary, v.chordal->n_trials,
                                                  derive_seed(c.master_seed, {"chordal", i}), opt);
          detail::append(trials, detail::verification_rows(r, s, false));
          summary.rows.push_back({0.0, s, 1.0, double(r.trials.size()), double(r.violations), double(r.vacuous),
                                  r.violation_fraction, r.mean_margin, r.min_margin});
        }
      }
      if (v.tangential) {
        for (std::size_t i = 0; i < v.tangential->sin_theta.size(); ++i) {
          const double s = v.tangential->sin_theta[i];
          const auto r = verify_tangential_guarantee(v.N, v.M, v.tangential->K, s, v.tangential->n_boundary,
                                                     v.tangential->n_trials,
                                                     derive_seed(c.master_seed, {"tangential", i}), opt);
          detail::append(trials, detail::verification_rows(r, s, true));
          summary.rows.push_back({1.0, s, double(v.tangential->K), double(r.trials.size()), double(r.violations),
                                  double(r.vacuous), r.violation_fraction, r.mean_margin, r.min_margin});
        }
      }
      emit("verify_trials", trials);
      emit("verify_summary", summary);
      std::size_t viol = 0;
      for (const auto& row : summary.rows) viol += static_cast<std::size_t>(row[4]);
      res.summary = {{"violations", viol}};
      break;
    }
    case Command::figure: {
      const std::string names[] = {"fig4", "fig5", "fig6a", "fig6b"};
      const auto& name = names[static_cast<int>(c.figure.kind)];
      const Table t = figure_data(c.figure.kind, c.figure.params, derive_seed(c.master_seed, {"figure", name}));
      emit(name, t);
      res.summary = {{"kind", name}, {"rows", t.rows.size()}};
      break;
    }
    case Command::mstar: {
      const auto& m = c.mstar;
      const ManifoldSpec spec = ManifoldSpec::with_volume(m.K, m.N, m.lnV, m.ell, m.lambda, m.points_per_lambda);
      ExperimentOptions opt;
      opt.threads = c.threads;
      opt.include_tangents = m.include_tangents;
      const Seed seed = derive_seed(c.master_seed, {"mstar"});
      opt.pairs = default_pair_policy(spec.point_count(), derive_seed(seed, {"pairs"}));
      Table t;
      t.columns = {"M", "eps_quantile", "eps_isotonic"};
      json summary;
      summary["m_star_bound"] = m_star_bound(m.eps, m.delta, double(m.K), double(m.N), m.lnV);
      summary["scaling_law"] = (1.2 * m.lnV + 2.5 * double(m.K)) / (m.eps * m.eps);
      summary["points"] = spec.point_count();
      try {
        const MStarResult r = m_star_empirical(spec, m.eps, m.delta, m.M_grid, m.n_proj, seed, opt);
        for (std::size_t i = 0; i < r.M_grid.size(); ++i) t.rows.push_back({r.M_grid[i], r.eps_raw[i], r.eps_iso[i]});
        summary["m_star_emp"] = r.m_star_emp;
        summary["isotonic_adjusted"] = r.isotonic_adjusted;
        summary["achieved"] = true;
      } catch (const Unachievable& e) {
        summary["m_star_emp"] = nullptr;
        summary["achieved"] = false;
      }
      emit("mstar", t);
      res.summary = summary;
      break;
    }
  }

  json manifest;
  manifest["command"] = command_name(c.command);
  manifest["config"] = c.echo;
  manifest["master_seed"] = c.master_seed;
  manifest["files"] = res.files;
  manifest["summary"] = res.summary;
  manifest["version"] = kVersion;
  manifest["threads"] = c.threads;
  manifest["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream os(c.out_dir + "/manifest.json", std::ios::binary);
  os << manifest.dump(2) << "\n";
  return res;
}

struct ReplayResult {
  bool identical = true;
  std::vector<std::string> mismatched;
};

inline std::string slurp(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidArgument("harness", "cannot read " + path);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

/// Re-runs the config recorded in a manifest into scratch_dir and compares every artifact byte for byte.
inline ReplayResult replay(const std::string& manifest_path, const std::string& scratch_dir,
                           std::optional<unsigned> threads = std::nullopt) {
  namespace fs = std::filesystem;
  const json manifest = json::parse(slurp(manifest_path));
  json cfg = manifest.at("config");
  cfg["out_dir"] = scratch_dir;
  if (threads) cfg["threads"] = *threads;
  const RunConfig c = parse_config(cfg);
  const RunResult r = run(c);
  const fs::path src = fs::path(manifest_path).parent_path();
  ReplayResult out;
  const auto files = manifest.at("files").get<std::vector<std::string>>();
  if (files != r.files) {
    out.identical = false;
    out.mismatched.push_back("<file list>");
  }
  for (const auto& f : files) {
    const fs::path a = src / f, b = fs::path(scratch_dir) / f;
    if (!fs::exists(b) || slurp(a.string()) != slurp(b.string())) {
      out.identical = false;
      out.mismatched.push_back(f);
    }
  }
  return out;
}

}  // namespace randproj::harness
