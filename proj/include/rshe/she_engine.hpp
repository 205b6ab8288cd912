#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rshe/lattice.hpp"
#include "rshe/region.hpp"
#include "rshe/riesz_noise.hpp"
#include "rshe/spectral_plan.hpp"

namespace rshe {

enum class NonlinearityKind { linear, affine, sine_affine, clipped_linear };

/// Lipschitz diffusion coefficient sigma.
///
///   linear          sigma(x) = x
///   affine          sigma(x) = a x + b
///   sine_affine     sigma(x) = a sin(x) + b x + c
///   clipped_linear  sigma(x) = a min(max(x, 0), cap)
class Nonlinearity {
 public:
  static Nonlinearity linear();
  static Nonlinearity affine(double a, double b);
  static Nonlinearity sine_affine(double a, double b, double c);
  static Nonlinearity clipped_linear(double a = 1.0, double cap = std::numeric_limits<double>::infinity());

  /// Replace the declared Lipschitz bound; throws std::invalid_argument if
  /// a 10^4-point slope scan over [-10, 10] exceeds it.
  Nonlinearity with_lipschitz(double bound) const;

  double operator()(double v) const;

  NonlinearityKind kind() const { return kind_; }
  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }
  double lipschitz() const { return lipschitz_; }
  double at_one() const { return at_one_; }
  /// sigma(1) == 0: for u0 = 1 the solution never leaves 1.
  bool degenerate() const { return at_one_ == 0.0; }
  bool nondecreasing() const;

  bool operator==(const Nonlinearity&) const = default;

 private:
  Nonlinearity(NonlinearityKind kind, double a, double b, double c, double lipschitz);
  void validate() const;

  NonlinearityKind kind_ = NonlinearityKind::linear;
  double a_ = 1.0;
  double b_ = 0.0;
  double c_ = 0.0;
  double lipschitz_ = 1.0;
  double at_one_ = 1.0;
};

/// u(0, .): a constant, or a tabulated field with declared bounds
/// 0 < lower <= u0 <= upper.
class InitialCondition {
 public:
  static InitialCondition constant(double value);
  static InitialCondition bounded(SpatialField table, double lower, double upper);

  bool is_constant() const { return !table_.has_value(); }
  double lower() const { return lower_; }
  double upper() const { return upper_; }
  const std::optional<SpatialField>& table() const { return table_; }

  /// Field on `lattice`; a table must already live on that lattice.
  SpatialField on(const Lattice& lattice) const;

 private:
  double lower_ = 1.0;
  double upper_ = 1.0;
  std::optional<SpatialField> table_;
};

/// Periodic heat flow: multiplies by exp(-|xi|^2 tau / 2) in frequency space.
class HeatSemigroup {
 public:
  HeatSemigroup(std::shared_ptr<const SpectralPlan> plan, double tau);

  double tau() const { return tau_; }
  /// In place.  Constant fields are returned untouched, exactly.
  void apply(SpatialField& field, SpectralWorkspace& work) const;

 private:
  std::shared_ptr<const SpectralPlan> plan_;
  double tau_;
  std::vector<double> multiplier_;
};

SpatialField heat_semigroup(const SpatialField& field, double tau);

/// Deterministic heat flow of u0: E u(t, .) on the lattice.
SpatialField mean_field(const InitialCondition& init, const Lattice& lattice, double t);

struct FieldState {
  SpatialField field;
  double time = 0.0;
  long step_index = 0;
};

/// Exponential Euler step u <- S_dt[u + sigma(u) dW].
class Stepper {
 public:
  Stepper(std::shared_ptr<const SpectralPlan> plan, Nonlinearity sigma, double dt);

  double dt() const { return dt_; }
  /// Throws InstabilityError (replica -1) on non-finite output.
  void advance(FieldState& state, const SpatialField& slice, SpectralWorkspace& work) const;

 private:
  Nonlinearity sigma_;
  double dt_;
  HeatSemigroup semigroup_;
};

FieldState step(const FieldState& state, const SpatialField& slice, const Nonlinearity& sigma, double dt);

/// Step grid, observation times and regions shared by every replica.
struct SimulationPlan {
  double horizon = 0.0;
  double dt = 0.0;
  std::vector<double> record_times;
  std::vector<Region> regions;
  bool store_fields = false;
  /// Also keep region averages after every step (for increment statistics).
  bool average_every_step = false;
};

struct Trajectory {
  std::uint32_t replica_id = 0;
  std::vector<double> record_times;
  std::vector<long> record_steps;
  /// averages[time][region]
  std::vector<std::vector<double>> averages;
  /// fields[time], present only when stored.
  std::vector<SpatialField> fields;
  /// step_averages[step][region], steps 0..n_steps, when requested.
  std::vector<std::vector<double>> step_averages;

  double average(std::size_t time_index, std::size_t region_index) const {
    return averages.at(time_index).at(region_index);
  }
};

/// Index of `t` on the grid k * dt; throws if t is not a grid point.
long snap_to_grid(double t, double dt);

/// Runs replicas of the mild-form scheme.  Immutable after construction,
/// so one instance serves all worker threads.
class Simulator {
 public:
  Simulator(const SpectralCovariance& noise, Nonlinearity sigma, InitialCondition init, SimulationPlan plan);

  Trajectory run(std::uint64_t seed, std::uint32_t replica) const;

  const SimulationPlan& plan() const { return plan_; }
  long n_steps() const { return n_steps_; }
  const std::vector<long>& record_steps() const { return record_steps_; }
  const SpatialField& initial_field() const { return initial_; }
  /// E u at each record time.
  const std::vector<SpatialField>& mean_fields() const { return record_means_; }
  const std::vector<RegionMask>& masks() const { return masks_; }

 private:
  const SpectralCovariance& noise_;
  Nonlinearity sigma_;
  InitialCondition init_;
  SimulationPlan plan_;
  long n_steps_ = 0;
  std::vector<long> record_steps_;
  std::vector<RegionMask> masks_;
  SpatialField initial_;
  std::vector<SpatialField> record_means_;
  std::vector<SpatialField> step_means_;
  bool constant_mean_ = false;
  std::unique_ptr<Stepper> stepper_;
};

Trajectory simulate(const SpectralCovariance& noise, const Nonlinearity& sigma, const InitialCondition& init,
                    double horizon, double dt, const std::vector<double>& record_times,
                    const std::vector<Region>& regions, std::uint64_t seed, std::uint32_t replica);

/// Flat binary snapshot: "RSHE1", then d, n (uint64), h, time (float64),
/// then n^d float64 values; all little-endian, row-major cells.
void write_snapshot(const std::filesystem::path& path, const SpatialField& field, double time);
std::pair<SpatialField, double> read_snapshot(const std::filesystem::path& path);

}  // namespace rshe
