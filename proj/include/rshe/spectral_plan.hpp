#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <vector>

#include "rshe/lattice.hpp"

namespace rshe {

using Complex = std::complex<double>;

/// Real-to-complex FFT pair over a lattice (FFTW, unnormalized).
///
/// Plans are made with FFTW_ESTIMATE so the arithmetic, and therefore every
/// output bit, is independent of timing.  Execution is thread-safe; each
/// caller supplies its own buffers.
class SpectralPlan {
 public:
  explicit SpectralPlan(const Lattice& lattice);
  ~SpectralPlan();
  SpectralPlan(const SpectralPlan&) = delete;
  SpectralPlan& operator=(const SpectralPlan&) = delete;

  const Lattice& lattice() const { return lattice_; }
  std::size_t real_size() const { return lattice_.size(); }
  /// n^{d-1} (n/2 + 1): the non-redundant half spectrum.
  std::size_t complex_size() const { return complex_size_; }

  /// |xi|^2 for each half-spectrum slot, xi = pi m / L per axis.
  const std::vector<double>& wavenumber_sq() const { return wavenumber_sq_; }
  /// Flat full-lattice frequency index matching a half-spectrum slot.
  std::size_t full_index(std::size_t half_index) const { return full_index_[half_index]; }

  void forward(const double* in, Complex* out) const;
  /// Destroys `in`.
  void backward(Complex* in, double* out) const;

 private:
  Lattice lattice_;
  std::size_t complex_size_ = 0;
  std::vector<double> wavenumber_sq_;
  std::vector<std::size_t> full_index_;
  void* forward_ = nullptr;
  void* backward_ = nullptr;
};

/// Per-thread scratch for one plan.
struct SpectralWorkspace {
  std::vector<double> real;
  std::vector<Complex> spectrum;

  SpectralWorkspace() = default;
  explicit SpectralWorkspace(const SpectralPlan& plan)
      : real(plan.real_size()), spectrum(plan.complex_size()) {}
};

/// Full complex DFT of a real lattice sequence (all n^d frequencies).
std::vector<Complex> full_dft(const Lattice& lattice, const std::vector<double>& values);

std::shared_ptr<const SpectralPlan> make_plan(const Lattice& lattice);

}  // namespace rshe
