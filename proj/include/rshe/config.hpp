#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rshe/lattice.hpp"
#include "rshe/region.hpp"
#include "rshe/she_engine.hpp"

namespace rshe {

enum class ExperimentKind { noise_validate, variance_limit, clt, fclt, tightness, decay, lemma31, constants };

std::string to_string(ExperimentKind kind);
std::optional<ExperimentKind> parse_kind(std::string_view text);

struct SigmaConfig {
  std::string kind = "linear";  // linear | affine | sine-affine | clipped-linear
  double a = 1.0;
  double b = 0.0;
  double c = 0.0;
  double cap = std::numeric_limits<double>::infinity();
  std::optional<double> lipschitz;

  Nonlinearity build() const;
  bool operator==(const SigmaConfig&) const = default;
};

struct InitConfig {
  std::string kind = "constant";  // constant | cosine | file
  double value = 1.0;
  double lower = 0.5;
  double upper = 2.0;
  double period = 2.5;  // cosine: u0 = mid + half-range * cos(2 pi x_0 / period)
  std::string path;

  InitialCondition build(const Lattice& lattice) const;
  bool operator==(const InitConfig&) const = default;
};

/// Everything one experiment needs, fully validated and with defaults applied.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::clt;
  RieszSpec spec;
  int n = 512;
  double half_extent = 20.0;
  SigmaConfig sigma;
  InitConfig init;
  double horizon = 0.25;
  double dt = 0.0;
  std::vector<double> record_times;
  RegionKind region_kind = RegionKind::ball;
  Point center{};
  std::vector<double> radii;
  std::uint32_t n_replicas = 4000;
  std::uint64_t seed = 0;
  std::vector<int> lags;        // noise-validate, cells along axis 0
  std::vector<int> decay_lags;  // decay, cells along axis 0
  int moment_p = 2;
  std::uint32_t eta_replicas = 400;
  std::uint32_t eta_points = 11;
  std::uint64_t mc_samples = 1'000'000;
  std::vector<double> lemma_y;
  std::uint32_t lemma_points = 61;

  Lattice lattice() const { return Lattice(spec.d, n, half_extent); }
  double collar() const;

  /// Canonical `key = value` text; loading it reproduces this config.
  std::string echo() const;
  /// FNV-1a of echo().
  std::uint64_t hash() const;

  bool operator==(const ExperimentConfig&) const = default;
};

/// Command-line values that take precedence over the file.
struct ConfigOverrides {
  std::optional<ExperimentKind> kind;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint32_t> replicas;
};

/// Flat `key = value` lines, `[lattice]`, `[sigma]`, `[init]` sections,
/// `#` comments, comma-separated lists.  Throws ConfigError naming the key
/// and offending values.
ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides = {});
ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {});

/// Increment lags 4 dt 2^k, in steps, up to min(0.1, T).
std::vector<long> tightness_lag_steps(const ExperimentConfig& config);

/// Largest step <= h^2/4 that divides T and every record time.
double default_time_step(double h, double horizon, const std::vector<double>& times);

}  // namespace rshe
