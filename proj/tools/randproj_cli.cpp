// SPDX-License-Identifier: Apache-2.0
// Command-line front end: sample, verify-cones, bounds, figure, mstar, replay.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"
#include "randproj/randproj.hpp"

namespace {

using nlohmann::json;
using namespace randproj;

int report(const std::string& code, const std::string& module, const std::string& message, const json& params) {
  json rec;
  rec["code"] = code;
  rec["module"] = module;
  rec["message"] = message;
  rec["parameters"] = params;
  std::cerr << rec.dump() << std::endl;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random projections of Gaussian random manifolds"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  std::optional<std::string> format;

  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "master seed override");
    sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--out-dir", out_dir, "output directory");
    sub->add_option("--format", format, "table format")->check(CLI::IsMember({"csv", "json"}));
  };
  const std::pair<const char*, const char*> subs[] = {
      {"sample", "sample a manifold on a grid; audit, binary dump, tangent metric"},
      {"verify-cones", "Monte Carlo check of the chordal and tangential cone guarantees"},
      {"bounds", "theoretical bounds over a grid of (eps, delta, K, N, lnV[, M])"},
      {"figure", "plot data: fig4, fig5 (geometry) or fig6a, fig6b (M* curves)"},
      {"mstar", "empirical number of projections for one manifold"}};
  for (const auto& [name, help] : subs) add_common(app.add_subcommand(name, help));

  auto* rep = app.add_subcommand("replay", "re-run a manifest and diff its artifacts");
  std::string manifest_path, scratch;
  rep->add_option("--manifest", manifest_path, "manifest.json of a previous run")->required();
  rep->add_option("--scratch", scratch, "directory for the replayed artifacts");
  rep->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  json params = json::object();
  try {
    if (rep->parsed()) {
      if (scratch.empty())
        scratch = (std::filesystem::path(manifest_path).parent_path() / "replay").string();
      const auto r = harness::replay(manifest_path, scratch, threads);
      json out;
      out["identical"] = r.identical;
      out["mismatched"] = r.mismatched;
      std::cout << out.dump() << std::endl;
      return r.identical ? 0 : 1;
    }
    const CLI::App* sub = app.get_subcommands().front();
    const harness::Command cmd = harness::parse_command(sub->get_name());
    json cfg = config_path.empty() ? json::object() : harness::load_json_file(config_path);
    params["config"] = config_path;
    harness::Overrides{seed, threads, out_dir, format}.apply(cfg);
    const harness::RunConfig c = harness::parse_config(cfg, cmd);
    const auto r = harness::run(c);
    json out;
    out["out_dir"] = c.out_dir;
    out["files"] = r.files;
    out["summary"] = r.summary;
    std::cout << out.dump() << std::endl;
    return 0;
  } catch (const Error& e) {
    return report(e.code(), e.module(), e.what(), params);
  } catch (const std::exception& e) {
    return report("internal", "harness", e.what(), params);
  }
}
