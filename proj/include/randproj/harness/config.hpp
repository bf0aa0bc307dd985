// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "randproj/errors.hpp"
#include "randproj/experiments.hpp"
#include "randproj/manifold_model.hpp"
#include "randproj/seed.hpp"

namespace randproj::harness {

using nlohmann::json;

enum class Command { sample, verify_cones, bounds, figure, mstar };

inline const char* command_name(Command c) {
  switch (c) {
    case Command::sample: return "sample";
    case Command::verify_cones: return "verify-cones";
    case Command::bounds: return "bounds";
    case Command::figure: return "figure";
    case Command::mstar: return "mstar";
  }
  return "?";
}

inline Command parse_command(const std::string& s) {
  for (Command c : {Command::sample, Command::verify_cones, Command::bounds, Command::figure, Command::mstar})
    if (s == command_name(c)) return c;
  throw ConfigError("harness", "unknown command '" + s + "'");
}

inline const char* section_name(Command c) {
  switch (c) {
    case Command::sample: return "sample";
    case Command::verify_cones: return "verify_cones";
    case Command::bounds: return "bounds";
    case Command::figure: return "figure";
    case Command::mstar: return "mstar";
  }
  return "?";
}

struct SampleConfig {
  ManifoldSpec spec;
  bool dump = true;
  bool frames = false;
};

struct BoundsConfig {
  std::vector<double> eps{0.2}, delta{0.05}, K{1}, N{1000}, lnV{kLogV1}, M;
};

struct ChordalVerifyConfig {
  std::vector<double> sin_theta{0.001, 0.005, 0.01};
  std::size_t n_boundary = 20000;
  std::size_t n_trials = 50;
};

struct TangentialVerifyConfig {
  std::size_t K = 5;
  std::vector<double> sin_theta{0.0005, 0.002};
  std::size_t n_boundary = 5000;
  std::size_t n_trials = 50;
};

struct VerifyConfig {
  std::size_t N = 1000;
  std::size_t M = 100;
  AngleMode mode = AngleMode::approx;
  std::optional<ChordalVerifyConfig> chordal = ChordalVerifyConfig{};
  std::optional<TangentialVerifyConfig> tangential = TangentialVerifyConfig{};
};

struct FigureConfig {
  FigureKind kind = FigureKind::fig4;
  FigureParams params = FigureParams::defaults(FigureKind::fig4);
};

struct MStarConfig {
  std::size_t K = 1;
  std::size_t N = 1000;
  double lnV = kLogV1;
  double ell = 1.0;
  double lambda = 1.0;
  double points_per_lambda = 16;
  double eps = 0.2;
  double delta = 0.05;
  std::vector<std::size_t> M_grid = geometric_grid(4, 200, 24);
  std::size_t n_proj = 100;
  bool include_tangents = false;
};

struct RunConfig {
  Command command = Command::bounds;
  Seed master_seed = 0;
  unsigned threads = 1;
  std::string out_dir = "out";
  std::string format = "csv";
  SampleConfig sample;
  BoundsConfig bounds;
  VerifyConfig verify;
  FigureConfig figure;
  MStarConfig mstar;
  json echo;  // the validated input, with flag overrides applied
};

namespace detail {

inline void only_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("harness", where + " must be an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!ok.count(it.key())) throw ConfigError("harness", "unknown key '" + it.key() + "' in " + where);
}

template <class T>
T get_as(const json& j, const std::string& where) {
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, unsigned> || std::is_same_v<T, std::uint64_t>) {
      if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<long long>() >= 0))
        throw ConfigError("harness", where + " must be a nonnegative integer");
    } else if constexpr (std::is_same_v<T, double>) {
      if (!j.is_number()) throw ConfigError("harness", where + " must be a number");
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!j.is_boolean()) throw ConfigError("harness", where + " must be a boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!j.is_string()) throw ConfigError("harness", where + " must be a string");
    }
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("harness", where + ": " + e.what());
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key)) out = get_as<T>(j.at(key), where + "." + key);
}

template <class T>
void read_list(const json& j, const char* key, std::vector<T>& out, const std::string& where) {
  if (!j.contains(key)) return;
  const json& a = j.at(key);
  const std::string w = where + "." + key;
  out.clear();
  if (a.is_array()) {
    for (std::size_t i = 0; i < a.size(); ++i) out.push_back(get_as<T>(a[i], w + "[" + std::to_string(i) + "]"));
  } else {
    out.push_back(get_as<T>(a, w));
  }
}

inline AngleMode read_mode(const json& j, const std::string& where) {
  const auto s = get_as<std::string>(j, where);
  if (s == "approx") return AngleMode::approx;
  if (s == "exact") return AngleMode::exact;
  throw ConfigError("harness", where + " must be 'approx' or 'exact'");
}

inline ManifoldSpec read_spec(const json& j, const std::string& where, ManifoldSpec s) {
  only_keys(j, where, {"K", "N", "ell", "lambda", "L", "grid"});
  read(j, "K", s.K, where);
  read(j, "N", s.N, where);
  read(j, "ell", s.ell, where);
  read_list(j, "lambda", s.lambda, where);
  read_list(j, "L", s.L, where);
  read_list(j, "grid", s.grid, where);
  try {
    s.validate();
  } catch (const Error& e) {
    throw ConfigError("harness", where + ": " + e.what());
  }
  return s;
}

template <class T>
void require_nonempty(const std::vector<T>& v, const std::string& where) {
  if (v.empty()) throw ConfigError("harness", where + " must not be empty");
}

inline void check_grid(const std::vector<std::size_t>& g, const std::string& where) {
  if (g.size() < 2) throw ConfigError("harness", where + " needs at least two values");
  for (std::size_t i = 1; i < g.size(); ++i)
    if (g[i] <= g[i - 1]) throw ConfigError("harness", where + " must be strictly increasing");
  if (g.front() < 1) throw ConfigError("harness", where + " values must be >= 1");
}

}  // namespace detail

/// Validates a JSON config; `command_override` (from the CLI subcommand) must
/// agree with the file's "command" when both are present.
inline RunConfig parse_config(const json& in, std::optional<Command> command_override = std::nullopt) {
  using namespace detail;
  only_keys(in, "config", {"command", "master_seed", "threads", "out_dir", "format", "sample", "bounds",
                           "verify_cones", "figure", "mstar"});
  RunConfig c;
  if (in.contains("command")) c.command = parse_command(get_as<std::string>(in.at("command"), "command"));
  if (command_override) {
    if (in.contains("command") && c.command != *command_override)
      throw ConfigError("harness", "config command does not match subcommand");
    c.command = *command_override;
  } else if (!in.contains("command")) {
    throw ConfigError("harness", "config must name a command");
  }
  read(in, "master_seed", c.master_seed, "config");
  read(in, "threads", c.threads, "config");
  if (c.threads < 1) throw ConfigError("harness", "threads must be >= 1");
  read(in, "out_dir", c.out_dir, "config");
  read(in, "format", c.format, "config");
  if (c.format != "csv" && c.format != "json") throw ConfigError("harness", "format must be csv or json");
  for (Command other : {Command::sample, Command::verify_cones, Command::bounds, Command::figure, Command::mstar})
    if (other != c.command && in.contains(section_name(other)))
      throw ConfigError("harness", std::string("section '") + section_name(other) + "' does not apply to command " +
                                       command_name(c.command));

  const json empty = json::object();
  const std::string sec = section_name(c.command);
  const json& j = in.contains(sec) ? in.at(sec) : empty;
  switch (c.command) {
    case Command::sample: {
      only_keys(j, sec, {"spec", "dump", "frames"});
      ManifoldSpec def = FigureParams::defaults(FigureKind::fig4).spec;
      c.sample.spec = j.contains("spec") ? read_spec(j.at("spec"), sec + ".spec", def) : def;
      read(j, "dump", c.sample.dump, sec);
      read(j, "frames", c.sample.frames, sec);
      break;
    }
    case Command::bounds: {
      only_keys(j, sec, {"eps", "delta", "K", "N", "lnV", "M"});
      auto& b = c.bounds;
      read_list(j, "eps", b.eps, sec);
      read_list(j, "delta", b.delta, sec);
      read_list(j, "K", b.K, sec);
      read_list(j, "N", b.N, sec);
      read_list(j, "lnV", b.lnV, sec);
      read_list(j, "M", b.M, sec);
      for (auto* v : {&b.eps, &b.delta, &b.K, &b.N, &b.lnV}) require_nonempty(*v, sec);
      for (double e : b.eps) if (!(e > 0 && e < 1)) throw ConfigError("harness", "bounds.eps must lie in (0, 1)");
      for (double d : b.delta) if (!(d > 0 && d < 1)) throw ConfigError("harness", "bounds.delta must lie in (0, 1)");
      for (double k : b.K) if (!(k >= 1)) throw ConfigError("harness", "bounds.K must be >= 1");
      for (double n : b.N) if (!(n >= 1)) throw ConfigError("harness", "bounds.N must be >= 1");
      for (double l : b.lnV) if (!(l >= 0)) throw ConfigError("harness", "bounds.lnV must be >= 0");
      for (double m : b.M) if (!(m > 0)) throw ConfigError("harness", "bounds.M must be positive");
      break;
    }
    case Command::verify_cones: {
      only_keys(j, sec, {"N", "M", "mode", "chordal", "tangential"});
      auto& v = c.verify;
      read(j, "N", v.N, sec);
      read(j, "M", v.M, sec);
      if (j.contains("mode")) v.mode = read_mode(j.at("mode"), sec + ".mode");
      if (!(v.M >= 1 && v.M <= v.N)) throw ConfigError("harness", "verify_cones needs 1 <= M <= N");
      if (j.contains("chordal")) {
        if (j.at("chordal").is_null()) {
          v.chordal.reset();
        } else {
          const json& cj = j.at("chordal");
          const std::string w = sec + ".chordal";
          only_keys(cj, w, {"sin_theta", "n_boundary", "n_trials"});
          read_list(cj, "sin_theta", v.chordal->sin_theta, w);
          read(cj, "n_boundary", v.chordal->n_boundary, w);
          read(cj, "n_trials", v.chordal->n_trials, w);
        }
      }
      if (j.contains("tangential")) {
        if (j.at("tangential").is_null()) {
          v.tangential.reset();
        } else {
          const json& tj = j.at("tangential");
          const std::string w = sec + ".tangential";
          only_keys(tj, w, {"K", "sin_theta", "n_boundary", "n_trials"});
          read(tj, "K", v.tangential->K, w);
          read_list(tj, "sin_theta", v.tangential->sin_theta, w);
          read(tj, "n_boundary", v.tangential->n_boundary, w);
          read(tj, "n_trials", v.tangential->n_trials, w);
          if (!(v.tangential->K >= 1 && v.tangential->K <= v.M && 2 * v.tangential->K <= v.N))
            throw ConfigError("harness", "tangential K must satisfy K <= M and 2K <= N");
        }
      }
      for (auto* lst : {v.chordal ? &v.chordal->sin_theta : nullptr, v.tangential ? &v.tangential->sin_theta : nullptr})
        if (lst)
          for (double s : *lst)
            if (!(s >= 0 && s <= 1)) throw ConfigError("harness", "sin_theta values must lie in [0, 1]");
      break;
    }
    case Command::figure: {
      only_keys(j, sec, {"kind", "spec", "Ks", "lnV_per_K", "Ns", "N", "eps", "delta", "experiment", "M_grid",
                         "n_proj", "points_per_lambda", "include_tangents"});
      auto& f = c.figure;
      if (j.contains("kind")) {
        try {
          f.kind = parse_figure_kind(get_as<std::string>(j.at("kind"), sec + ".kind"));
        } catch (const InvalidArgument& e) {
          throw ConfigError("harness", e.what());
        }
      }
      f.params = FigureParams::defaults(f.kind);
      auto& p = f.params;
      if (j.contains("spec")) {
        if (f.kind != FigureKind::fig4 && f.kind != FigureKind::fig5)
          throw ConfigError("harness", "figure.spec applies only to fig4 and fig5");
        p.spec = read_spec(j.at("spec"), sec + ".spec", p.spec);
      }
      read_list(j, "Ks", p.Ks, sec);
      read_list(j, "lnV_per_K", p.lnV_per_K, sec);
      read_list(j, "Ns", p.Ns, sec);
      read(j, "N", p.N, sec);
      read(j, "eps", p.eps, sec);
      read(j, "delta", p.delta, sec);
      read(j, "experiment", p.experiment, sec);
      read_list(j, "M_grid", p.M_grid, sec);
      read(j, "n_proj", p.n_proj, sec);
      read(j, "points_per_lambda", p.points_per_lambda, sec);
      read(j, "include_tangents", p.include_tangents, sec);
      check_grid(p.M_grid, sec + ".M_grid");
      if (!(p.eps > 0 && p.eps < 1) || !(p.delta > 0 && p.delta < 1))
        throw ConfigError("harness", "figure eps and delta must lie in (0, 1)");
      if (p.experiment && p.n_proj < 20) throw ConfigError("harness", "figure.n_proj must be >= 20");
      if (f.kind == FigureKind::fig4 && p.spec.K != 1) throw ConfigError("harness", "fig4 needs K = 1");
      break;
    }
    case Command::mstar: {
      only_keys(j, sec, {"K", "N", "lnV", "ell", "lambda", "points_per_lambda", "eps", "delta", "M_grid", "n_proj",
                         "include_tangents"});
      auto& m = c.mstar;
      read(j, "K", m.K, sec);
      read(j, "N", m.N, sec);
      read(j, "lnV", m.lnV, sec);
      read(j, "ell", m.ell, sec);
      read(j, "lambda", m.lambda, sec);
      read(j, "points_per_lambda", m.points_per_lambda, sec);
      read(j, "eps", m.eps, sec);
      read(j, "delta", m.delta, sec);
      read_list(j, "M_grid", m.M_grid, sec);
      read(j, "n_proj", m.n_proj, sec);
      read(j, "include_tangents", m.include_tangents, sec);
      check_grid(m.M_grid, sec + ".M_grid");
      if (m.M_grid.back() > m.N) throw ConfigError("harness", "mstar.M_grid exceeds N");
      if (m.n_proj < 20) throw ConfigError("harness", "mstar.n_proj must be >= 20");
      if (!(m.eps > 0 && m.eps < 1) || !(m.delta > 0 && m.delta < 1))
        throw ConfigError("harness", "mstar eps and delta must lie in (0, 1)");
      if (m.K < 1 || m.N < 1 || !(m.lnV >= 0)) throw ConfigError("harness", "mstar needs K, N >= 1 and lnV >= 0");
      break;
    }
  }
  c.figure.params.threads = c.threads;
  c.echo = in;
  c.echo["command"] = command_name(c.command);
  return c;
}

inline json load_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("harness", "cannot open config " + path);
  try {
    return json::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("harness", std::string("config parse error: ") + e.what());
  }
}

/// Applies CLI flag overrides to the raw config before validation.
struct Overrides {
  std::optional<Seed> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;

  void apply(json& j) const {
    if (seed) j["master_seed"] = *seed;
    if (threads) j["threads"] = *threads;
    if (out_dir) j["out_dir"] = *out_dir;
    if (format) j["format"] = *format;
  }
};

}  // namespace randproj::harness
