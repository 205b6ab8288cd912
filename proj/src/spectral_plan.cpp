#include "rshe/spectral_plan.hpp"

#include <fftw3.h>

#include <mutex>
#include <numbers>

namespace rshe {

namespace {

// The FFTW planner is not reentrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<int> dims_of(const Lattice& lat) {
  return std::vector<int>(static_cast<std::size_t>(lat.dim()), lat.points_per_axis());
}

}  // namespace

SpectralPlan::SpectralPlan(const Lattice& lattice) : lattice_(lattice) {
  const int d = lattice.dim();
  const int n = lattice.points_per_axis();
  const int half = n / 2 + 1;
  complex_size_ = lattice.size() / n * half;

  wavenumber_sq_.resize(complex_size_);
  full_index_.resize(complex_size_);
  const double unit = std::numbers::pi / lattice.half_extent();
  for (std::size_t c = 0; c < complex_size_; ++c) {
    std::size_t rest = c;
    MultiIndex idx{};
    idx[d - 1] = static_cast<int>(rest % half);
    rest /= half;
    for (int a = d - 2; a >= 0; --a) {
      idx[a] = static_cast<int>(rest % n);
      rest /= n;
    }
    double k2 = 0.0;
    for (int a = 0; a < d; ++a) {
      const double xi = unit * lattice.min_image(idx[a]);
      k2 += xi * xi;
    }
    wavenumber_sq_[c] = k2;
    full_index_[c] = lattice.flatten(idx);
  }

  std::vector<double> real(lattice.size());
  std::vector<Complex> spec(complex_size_);
  const auto dims = dims_of(lattice);
  std::lock_guard lock(planner_mutex());
  forward_ = fftw_plan_dft_r2c(d, dims.data(), real.data(), reinterpret_cast<fftw_complex*>(spec.data()),
                               FFTW_ESTIMATE | FFTW_UNALIGNED);
  backward_ = fftw_plan_dft_c2r(d, dims.data(), reinterpret_cast<fftw_complex*>(spec.data()), real.data(),
                                FFTW_ESTIMATE | FFTW_UNALIGNED);
}

SpectralPlan::~SpectralPlan() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

void SpectralPlan::forward(const double* in, Complex* out) const {
  fftw_execute_dft_r2c(static_cast<fftw_plan>(forward_), const_cast<double*>(in),
                       reinterpret_cast<fftw_complex*>(out));
}

void SpectralPlan::backward(Complex* in, double* out) const {
  fftw_execute_dft_c2r(static_cast<fftw_plan>(backward_), reinterpret_cast<fftw_complex*>(in), out);
}

std::vector<Complex> full_dft(const Lattice& lattice, const std::vector<double>& values) {
  std::vector<Complex> in(values.begin(), values.end());
  std::vector<Complex> out(values.size());
  const auto dims = dims_of(lattice);
  fftw_plan plan;
  {
    std::lock_guard lock(planner_mutex());
    plan = fftw_plan_dft(lattice.dim(), dims.data(), reinterpret_cast<fftw_complex*>(in.data()),
                         reinterpret_cast<fftw_complex*>(out.data()), FFTW_FORWARD, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
  }
  return out;
}

std::shared_ptr<const SpectralPlan> make_plan(const Lattice& lattice) {
  return std::make_shared<const SpectralPlan>(lattice);
}

}  // namespace rshe
