#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "rshe/lattice.hpp"
#include "rshe/random_stream.hpp"
#include "rshe/spectral_plan.hpp"

namespace rshe {

/// A Monte Carlo or closed-form value with its standard error (0 if exact).
struct Estimate {
  double value = 0.0;
  double stderr = 0.0;
};

enum class PairDomain { ball, cube };

/// |x|^{-beta}, Euclidean norm over the first spec.d components.
double riesz_kernel(std::span<const double> x, const RieszSpec& spec);

/// Double integral of |x - y|^{-beta} over A x A, A a ball of radius
/// `size` or a cube of half-width `size` centered anywhere.
///
/// Pairs are drawn as (X, X + r theta) with X uniform in A, theta uniform on
/// the sphere and r with density proportional to r^{d-1-beta} on
/// [0, diam A].  The kernel singularity is absorbed into the proposal, so
/// the estimator is a bounded indicator and has finite variance for every
/// beta < d.
Estimate riesz_pair_integral_mc(PairDomain domain, double size, const RieszSpec& spec,
                                std::uint64_t samples, std::uint64_t seed);

/// Cell-averaged self-interaction (1/h^{2d}) int int_{cell^2} |x-y|^{-beta}.
/// Closed form in d = 1, Monte Carlo otherwise.
Estimate cell_self_energy(double h, const RieszSpec& spec, std::uint64_t samples = 1u << 22);

/// Diagonalized periodic cell covariance of the Riesz noise, for unit time
/// step.  Immutable once built and safe to share between threads.
class SpectralCovariance {
 public:
  const Lattice& lattice() const { return plan_->lattice(); }
  const RieszSpec& spec() const { return spec_; }
  const SpectralPlan& plan() const { return *plan_; }
  std::shared_ptr<const SpectralPlan> shared_plan() const { return plan_; }

  /// r[k]: covariance between cell 0 and cell k (full lattice, row-major).
  const std::vector<double>& first_row() const { return first_row_; }
  /// Clamped eigenvalues, one per full-lattice frequency.
  const std::vector<double>& eigenvalues() const { return eigenvalues_; }
  double clamped_mass() const { return clamped_mass_; }
  /// Largest |imaginary part| seen in the transform of the first row.
  double max_imag() const { return max_imag_; }
  Estimate self_energy() const { return self_energy_; }

  /// sqrt(eigenvalue) / n^d laid out on the half spectrum.
  const std::vector<double>& coloring() const { return coloring_; }

 private:
  friend SpectralCovariance build_embedding(const Lattice&, const RieszSpec&);

  RieszSpec spec_;
  std::shared_ptr<const SpectralPlan> plan_;
  std::vector<double> first_row_;
  std::vector<double> eigenvalues_;
  std::vector<double> coloring_;
  double clamped_mass_ = 0.0;
  double max_imag_ = 0.0;
  Estimate self_energy_;
};

inline constexpr double kMaxClampedMass = 0.01;

/// Throws std::domain_error when the clamped eigenvalue mass reaches 1%.
SpectralCovariance build_embedding(const Lattice& lattice, const RieszSpec& spec);

/// Centered Gaussian slice with covariance dt * r[i - j].
void sample_slice(const SpectralCovariance& cov, double dt, RandomStream& stream,
                  SpectralWorkspace& work, SpatialField& out);
SpatialField sample_slice(const SpectralCovariance& cov, double dt, RandomStream& stream);

struct LagCovariance {
  MultiIndex lag{};
  double distance = 0.0;
  double empirical = 0.0;
  double theoretical = 0.0;
  double ratio = 0.0;
  double stderr = 0.0;  // of `empirical`, across slices
  bool flagged = false;  // ratio outside [0.9, 1.1]
};

struct CovarianceReport {
  std::size_t n_slices = 0;
  double dt = 0.0;
  std::vector<LagCovariance> lags;

  bool all_within_band() const;
};

/// Empirical lag covariance of centered slices, averaged over all cells,
/// against dt times the kernel (dt times the self energy at lag 0).
CovarianceReport covariance_diagnostic(std::span<const SpatialField> slices, std::span<const MultiIndex> lags,
                                       const RieszSpec& spec, double dt);

}  // namespace rshe
