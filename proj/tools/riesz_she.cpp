// riesz-she <kind> --config PATH [--out DIR] [--seed N] [--replicas N] [--workers N]

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "rshe/config.hpp"
#include "rshe/errors.hpp"
#include "rshe/harness.hpp"

int main(int argc, char** argv) {
  using namespace rshe;
  CLI::App app{"Monte Carlo lab for the stochastic heat equation with Riesz-correlated noise"};
  std::string kind_text;
  std::string config_path;
  std::string outdir = "results";
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> replicas;
  unsigned workers = 0;

  app.add_option("kind", kind_text,
                 "noise-validate | variance-limit | clt | fclt | tightness | decay | lemma31 | constants")
      ->required();
  app.add_option("--config", config_path, "experiment config file")->required();
  app.add_option("--out", outdir, "output directory");
  app.add_option("--seed", seed, "override the config seed");
  app.add_option("--replicas", replicas, "override n_replicas");
  app.add_option("--workers", workers, "worker threads (default: all cores)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitStatus::config_error);
  }

  const auto kind = parse_kind(kind_text);
  if (!kind) {
    std::cerr << "error: unknown kind '" << kind_text << "'\n";
    return static_cast<int>(ExitStatus::config_error);
  }

  ExperimentConfig config;
  try {
    config = load_config(config_path, ConfigOverrides{kind, seed, replicas});
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitStatus::config_error);
  }

  ResultSet results;
  try {
    results = run_experiment(config, RunOptions{workers});
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return static_cast<int>(ExitStatus::config_error);
  }

  try {
    emit_results(results, outdir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitStatus::config_error);
  }

  for (const StatsReport& r : results.reports) {
    std::printf("%-4s %-28s %-24s estimate=%.6g target=%.6g tol=%.3g\n", r.pass ? "ok" : "FAIL", r.metric.c_str(),
                r.params.c_str(), r.estimate, r.target, r.tolerance);
  }
  if (!results.message.empty()) std::cerr << results.message << "\n";
  std::fprintf(stderr, "%s: %zu reports, %.1f s, output in %s\n", to_string(config.kind).c_str(),
               results.reports.size(), results.wall_seconds, outdir.c_str());
  return static_cast<int>(results.status);
}
