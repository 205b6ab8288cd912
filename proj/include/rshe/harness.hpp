#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "rshe/clt_stats.hpp"
#include "rshe/config.hpp"
#include "rshe/observables.hpp"

namespace rshe {

enum class ExitStatus : int { pass = 0, statistical_failure = 1, degenerate = 2, instability = 3, config_error = 4 };

/// One G_R(t) value.
struct SampleRow {
  std::uint32_t replica_id = 0;
  double radius = 0.0;
  double time = 0.0;
  double value = 0.0;
};

/// Extra plot-ready table, emitted as `<name>.csv`.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

struct ResultSet {
  ExperimentConfig config;
  ExitStatus status = ExitStatus::pass;
  std::string message;
  std::vector<SampleRow> samples;
  std::vector<StatsReport> reports;
  std::vector<ConstantRow> constants;
  std::map<std::string, Table> tables;
  /// Not serialized.
  double wall_seconds = 0.0;

  bool all_pass() const;
};

struct RunOptions {
  unsigned workers = 0;  // 0: hardware concurrency
};

unsigned resolve_workers(unsigned requested);

/// Calls job(i) for i in [0, count) on `workers` threads.  Indices are
/// handed out in increasing order; after a failure no new index starts and
/// the exception of the lowest failing index is rethrown.
void parallel_for(std::uint32_t count, unsigned workers, const std::function<void(std::uint32_t)>& job);

/// Runs every replica of `simulator` and returns the trajectories in replica order.
std::vector<Trajectory> run_replicas(const Simulator& simulator, std::uint64_t seed, std::uint32_t count,
                                     unsigned workers);

/// Dispatches on config.kind.  Statistical, degenerate and instability
/// outcomes are reported through ResultSet::status; ConfigError propagates.
ResultSet run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Writes samples.csv, reports.csv, reports.json, constants.csv, any extra
/// tables and manifest.json.  Returns the files written, manifest last.
std::vector<std::filesystem::path> emit_results(const ResultSet& results, const std::filesystem::path& outdir);

}  // namespace rshe
