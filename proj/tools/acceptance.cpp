// SPDX-License-Identifier: Apache-2.0
// Desk-scale acceptance run. One PASS/FAIL line per criterion; exit status is
// nonzero if any criterion fails.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "randproj/harness/run.hpp"
#include "randproj/randproj.hpp"

using namespace randproj;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(int id, const char* name, bool ok, const std::string& detail, double seconds) {
  std::printf("%s [%d] %s: %s (%.2f s)\n", ok ? "PASS" : "FAIL", id, name, detail.c_str(), seconds);
  std::fflush(stdout);
  failures += !ok;
}

template <class F>
void criterion(int id, const char* name, F body) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = false;
  std::string detail;
  try {
    ok = body(detail);
  } catch (const std::exception& e) {
    detail += std::string(" exception: ") + e.what();
  }
  report(id, name, ok, detail, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

std::size_t col(const Table& t, const std::string& name) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), name);
  if (it == t.columns.end()) throw std::runtime_error("missing column " + name);
  return std::size_t(it - t.columns.begin());
}

fs::path scratch;

// Runs the figure command through the harness and reads the CSV back.
Table figure_via_harness(const std::string& tag, const harness::json& section) {
  harness::json cfg{{"command", "figure"}, {"master_seed", 2024}, {"out_dir", (scratch / tag).string()}, {"figure", section}};
  harness::run(harness::parse_config(cfg));
  const std::string kind = section.at("kind");
  return harness::read_table_csv((scratch / tag / (kind + ".csv")).string());
}

}  // namespace

int main() {
  scratch = fs::temp_directory_path() / "randproj_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);

  criterion(1, "constants", [](std::string& d) {
    const auto c = theory_constants();
    d = fmt("rho*=%.6f C0=%.8f", c.rho_star, c.C0);
    return std::abs(c.rho_star - 2.513) <= 1e-3 && std::abs(c.C0 + 0.097651) <= 1e-6;
  });

  criterion(2, "expected geometry, curve", [](std::string& d) {
    const Table t = figure_via_harness("fig4", {{"kind", "fig4"}});
    const auto rho = col(t, "rho"), cs = col(t, "chord_sq"), cst = col(t, "chord_sq_theory");
    const auto tc = col(t, "tangent_cos"), tct = col(t, "tangent_cos_theory");
    std::size_t nc = 0, okc = 0, nt = 0, okt = 0;
    for (const auto& r : t.rows) {
      if (r[rho] > 0 && r[rho] <= 10) {
        ++nc;
        okc += std::abs(r[cs] / r[cst] - 1) <= 0.2;
      }
      if (r[rho] <= 4) {
        ++nt;
        okt += std::abs(r[tc] - r[tct]) <= 0.1;
      }
    }
    const double fc = double(okc) / double(nc), ft = double(okt) / double(nt);
    d = fmt("chord within 20%%: %.4f of %.0f pairs; tangent cos within 0.1: %.4f of %.0f points", fc, double(nc), ft,
            double(nt));
    return nc > 0 && nt > 0 && fc >= 0.95 && ft >= 0.95;
  });

  criterion(3, "expected geometry, surface", [](std::string& d) {
    const Table t = figure_via_harness("fig5", {{"kind", "fig5"}, {"spec", {{"grid", {64, 64}}}}});
    const auto rho = col(t, "rho"), bd = col(t, "boundary");
    const std::size_t c1 = col(t, "cos1"), c2 = col(t, "cos2"), t1 = col(t, "cos1_theory"), t2 = col(t, "cos2_theory");
    const int bins = 16;
    std::vector<std::array<double, 4>> acc(bins, {0, 0, 0, 0});
    std::vector<int> cnt(bins, 0);
    for (const auto& r : t.rows) {
      if (r[bd] != 0 || r[rho] > 4) continue;
      const int b = std::min(bins - 1, int(r[rho] / 0.25));
      acc[b][0] += r[c1], acc[b][1] += r[c2], acc[b][2] += r[t1], acc[b][3] += r[t2];
      ++cnt[b];
    }
    double worst = 0;
    int used = 0;
    for (int b = 0; b < bins; ++b) {
      if (!cnt[b]) continue;
      ++used;
      worst = std::max({worst, std::abs(acc[b][0] - acc[b][2]) / cnt[b], std::abs(acc[b][1] - acc[b][3]) / cnt[b]});
    }
    d = fmt("max |binned mean cosine - expectation| = %.4f over %.0f bins of width 0.25", worst, double(used));
    return used == bins && worst <= 0.15;
  });

  criterion(4, "cone guarantees", [](std::string& d) {
    bool ok = true;
    std::string s;
    double prev = -INFINITY;
    for (double st : {0.001, 0.005, 0.01}) {
      const auto r = verify_chordal_guarantee(1000, 100, st, 20000, 50, derive_seed(4, {"chordal", std::size_t(st * 1e6)}));
      s += fmt("chordal %.4g: viol %.3f margin %.5f; ", st, r.violation_fraction, r.mean_margin);
      ok = ok && r.violation_fraction <= 0.01 && r.mean_margin > prev;
      prev = r.mean_margin;
    }
    prev = -INFINITY;
    for (double st : {0.0005, 0.002}) {
      const auto r = verify_tangential_guarantee(1000, 100, 5, st, 5000, 50, derive_seed(4, {"tangential", std::size_t(st * 1e6)}));
      s += fmt("tangential %.4g: viol %.3f margin %.5f; ", st, r.violation_fraction, r.mean_margin);
      ok = ok && r.violation_fraction <= 0.01 && r.mean_margin > prev;
      prev = r.mean_margin;
    }
    d = s;
    return ok;
  });

  criterion(5, "subspace typicality", [](std::string& d) {
    std::vector<double> v;
    for (std::size_t s = 0; s < 200; ++s)
      v.push_back(subspace_distortion(sample_projector(1000, 160, derive_seed(5, {"A", s})),
                                      SubspaceBasis::random(1000, 10, derive_seed(5, {"U", s}))));
    std::nth_element(v.begin(), v.begin() + 100, v.end());
    const double hi = v[100];
    const double lo = *std::max_element(v.begin(), v.begin() + 100);
    const double med = 0.5 * (lo + hi);
    d = fmt("median distortion %.4f vs 0.25", med);
    return std::abs(med - 0.25) <= 0.25 * 0.25;
  });

  criterion(6, "empirical M*", [](std::string& d) {
    harness::json cfg{{"command", "mstar"}, {"master_seed", 6}, {"out_dir", (scratch / "mstar").string()}};
    const auto res = harness::run(harness::parse_config(cfg));
    const auto& s = res.summary;
    const double bound = s.at("m_star_bound").get<double>();
    if (!s.at("achieved").get<bool>()) {
      d = "target not reached on the M grid";
      return false;
    }
    const double m = s.at("m_star_emp").get<double>();
    d = fmt("m_star_emp %.2f (scaling law %.1f, bound %.0f, %.0f points)", m, s.at("scaling_law").get<double>(), bound,
            s.at("points").get<double>());
    return m >= 60 && m <= 160 && m <= bound;
  });

  criterion(7, "theory ordering", [](std::string& d) {
    const double lnV = kLogV1, N = 1000;
    bool ok = true;
    std::string s;
    for (double K : {1.0, 2.0}) {
      const double mn = m_star_bound(0.2, 0.05, K, N, lnV * K);
      const double nv = nv_underestimate(0.2, 0.05, K, lnV * K);
      const double bw = bw_underestimate(0.2, 0.05, K, N, lnV * K);
      s += fmt("K=%.0f new %.0f nv %.0f bw %.0f; ", K, mn, nv, bw);
      ok = ok && mn < nv && nv < bw && bw / mn > 100 && nv / mn >= 3 && nv / mn <= 30;
    }
    d = s;
    return ok;
  });

  criterion(8, "property suites", [](std::string& d) {
    std::size_t weyl = 0;
    double ortho = 0;
    for (std::size_t s = 0; s < 1000; ++s) {
      const auto A = sample_projector(1000, 50, derive_seed(8, {"A", s}));
      ortho = std::max(ortho, A.orthonormality_error());
      weyl += weyl_gap(A, SubspaceBasis::random(1000, 5, derive_seed(8, {"U", s})),
                       SubspaceBasis::random(1000, 5, derive_seed(8, {"U2", s})))
                  .violations;
    }
    const auto audit = self_averaging_audit(sample_manifold(FigureParams::defaults(FigureKind::fig4).spec, 8));
    const bool audit_ok = audit.mean >= 0.97 && audit.mean <= 1.03 && audit.rel_sd >= 0.5 * audit.expected_rel_sd &&
                          audit.rel_sd <= 2 * audit.expected_rel_sd;
    bool replay_ok = true;
    for (const char* tag : {"fig4", "fig5", "mstar"})
      replay_ok = replay_ok && harness::replay((scratch / tag / "manifest.json").string(), (scratch / (std::string(tag) + "_replay")).string()).identical;
    double worst_inv = 0;
    for (double eps : {0.1, 0.2, 0.3, 0.5})
      for (double delta : {0.01, 0.05, 0.2})
        for (double K : {1.0, 2.0, 5.0})
          for (double N : {1e3, 1e5, 1e8})
            for (double lnV : {0.0, 1.0, 5.0}) {
              const double m = m_star_bound(eps, delta, K, N, lnV);
              worst_inv = std::max(worst_inv, delta_total(eps, m, K, N, lnV).value / delta);
            }
    d = fmt("weyl violations %.0f; orthonormality %.2e; audit mean %.4f rel_sd/expected %.3f", double(weyl), ortho,
            audit.mean, audit.rel_sd / audit.expected_rel_sd);
    d += std::string("; replays ") + (replay_ok ? "identical" : "DIFFER");
    d += fmt("; max delta_total(m_bar)/delta %.12f", worst_inv);
    return weyl == 0 && ortho <= 1e-10 && audit_ok && replay_ok && worst_inv <= 1 + 1e-9;
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
