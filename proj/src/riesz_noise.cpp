#include "rshe/riesz_noise.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace rshe {

namespace {

constexpr std::uint64_t kSelfEnergySeed = 0x5e1fe7e7a11ULL;

double unit_sphere_area(int d) {
  switch (d) {
    case 1: return 2.0;
    case 2: return 2.0 * std::numbers::pi;
    case 3: return 4.0 * std::numbers::pi;
  }
  throw std::invalid_argument("unsupported dimension");
}

double ball_volume(int d, double r) {
  switch (d) {
    case 1: return 2.0 * r;
    case 2: return std::numbers::pi * r * r;
    case 3: return 4.0 / 3.0 * std::numbers::pi * r * r * r;
  }
  throw std::invalid_argument("unsupported dimension");
}

Point uniform_direction(int d, RandomStream& rng) {
  Point u{};
  if (d == 1) {
    u[0] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    return u;
  }
  double norm = 0.0;
  do {
    norm = 0.0;
    for (int a = 0; a < d; ++a) {
      u[a] = rng.normal();
      norm += u[a] * u[a];
    }
  } while (norm == 0.0);
  norm = std::sqrt(norm);
  for (int a = 0; a < d; ++a) u[a] /= norm;
  return u;
}

}  // namespace

double riesz_kernel(std::span<const double> x, const RieszSpec& spec) {
  double r2 = 0.0;
  for (int a = 0; a < spec.d && a < static_cast<int>(x.size()); ++a) r2 += x[a] * x[a];
  if (r2 == 0.0) throw std::domain_error("singular point; use cell_self_energy");
  return std::pow(r2, -0.5 * spec.beta);
}

Estimate riesz_pair_integral_mc(PairDomain domain, double size, const RieszSpec& spec,
                                std::uint64_t samples, std::uint64_t seed) {
  if (!(spec.beta < spec.d)) throw std::domain_error("pair integral diverges for beta >= d");
  if (!(size > 0.0)) throw std::invalid_argument("domain size must be positive");
  if (samples == 0) throw std::invalid_argument("need at least one sample");
  const int d = spec.d;
  const double beta = spec.beta;

  const double volume = domain == PairDomain::ball ? ball_volume(d, size) : std::pow(2.0 * size, d);
  const double diameter = domain == PairDomain::ball ? 2.0 * size : 2.0 * size * std::sqrt(double(d));
  const double exponent = d - beta;
  const double proposal_mass = unit_sphere_area(d) * std::pow(diameter, exponent) / exponent;

  auto inside = [&](const Point& p) {
    if (domain == PairDomain::ball) {
      double r2 = 0.0;
      for (int a = 0; a < d; ++a) r2 += p[a] * p[a];
      return r2 <= size * size;
    }
    for (int a = 0; a < d; ++a) {
      if (std::abs(p[a]) > size) return false;
    }
    return true;
  };

  RandomStream rng(seed, 0, 0, StreamPurpose::quadrature);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < samples; ++i) {
    Point x{};
    do {
      for (int a = 0; a < d; ++a) x[a] = size * (2.0 * rng.uniform() - 1.0);
    } while (!inside(x));
    const Point dir = uniform_direction(d, rng);
    const double r = diameter * std::pow(rng.uniform(), 1.0 / exponent);
    Point y{};
    for (int a = 0; a < d; ++a) y[a] = x[a] + r * dir[a];
    if (inside(y)) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(samples);
  const double scale = volume * proposal_mass;
  return {scale * p, scale * std::sqrt(p * (1.0 - p) / static_cast<double>(samples))};
}

Estimate cell_self_energy(double h, const RieszSpec& spec, std::uint64_t samples) {
  if (!(h > 0.0)) throw std::invalid_argument("cell size must be positive");
  if (!(spec.beta < spec.d)) throw std::domain_error("cell self energy diverges for beta >= d");
  const double beta = spec.beta;
  if (spec.d == 1) {
    return {2.0 * std::pow(h, -beta) / ((1.0 - beta) * (2.0 - beta)), 0.0};
  }
  // Unit cell, then rescale: the double integral is homogeneous of degree 2d - beta.
  const Estimate unit = riesz_pair_integral_mc(PairDomain::cube, 0.5, spec, samples, kSelfEnergySeed);
  const double scale = std::pow(h, -beta);
  return {unit.value * scale, unit.stderr * scale};
}

SpectralCovariance build_embedding(const Lattice& lattice, const RieszSpec& spec) {
  spec.validate();
  if (spec.d != lattice.dim()) throw std::invalid_argument("lattice and noise dimension differ");

  SpectralCovariance cov;
  cov.spec_ = spec;
  cov.plan_ = make_plan(lattice);
  cov.self_energy_ = cell_self_energy(lattice.spacing(), spec);

  const std::size_t size = lattice.size();
  cov.first_row_.resize(size);
  cov.first_row_[0] = cov.self_energy_.value;
  for (std::size_t k = 1; k < size; ++k) {
    const double rho = lattice.min_image_distance(k);
    cov.first_row_[k] = std::pow(rho, -spec.beta);
  }

  const std::vector<Complex> spectrum = full_dft(lattice, cov.first_row_);
  cov.eigenvalues_.resize(size);
  double negative = 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k < size; ++k) {
    const double lambda = spectrum[k].real();
    cov.max_imag_ = std::max(cov.max_imag_, std::abs(spectrum[k].imag()));
    total += std::abs(lambda);
    if (lambda < 0.0) {
      negative += -lambda;
      cov.eigenvalues_[k] = 0.0;
    } else {
      cov.eigenvalues_[k] = lambda;
    }
  }
  cov.clamped_mass_ = total > 0.0 ? negative / total : 0.0;
  if (cov.clamped_mass_ >= kMaxClampedMass) {
    throw std::domain_error("embedding not approximately nonnegative; refine lattice (clamped mass " +
                            std::to_string(cov.clamped_mass_) + ")");
  }

  const SpectralPlan& plan = *cov.plan_;
  cov.coloring_.resize(plan.complex_size());
  const double inv_n = 1.0 / static_cast<double>(size);
  for (std::size_t c = 0; c < plan.complex_size(); ++c) {
    cov.coloring_[c] = std::sqrt(cov.eigenvalues_[plan.full_index(c)]) * inv_n;
  }
  return cov;
}

void sample_slice(const SpectralCovariance& cov, double dt, RandomStream& stream, SpectralWorkspace& work,
                  SpatialField& out) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
  const SpectralPlan& plan = cov.plan();
  if (out.lattice.size() != plan.real_size()) out = SpatialField(plan.lattice());

  // C^{1/2} applied to white noise: the output covariance is exactly the circulant.
  stream.fill_normal(work.real);
  plan.forward(work.real.data(), work.spectrum.data());
  const double amplitude = std::sqrt(dt);
  const auto& coloring = cov.coloring();
  for (std::size_t c = 0; c < work.spectrum.size(); ++c) work.spectrum[c] *= amplitude * coloring[c];
  plan.backward(work.spectrum.data(), out.values.data());
}

SpatialField sample_slice(const SpectralCovariance& cov, double dt, RandomStream& stream) {
  SpectralWorkspace work(cov.plan());
  SpatialField out(cov.lattice());
  sample_slice(cov, dt, stream, work, out);
  return out;
}

bool CovarianceReport::all_within_band() const {
  for (const auto& l : lags) {
    if (l.flagged) return false;
  }
  return true;
}

CovarianceReport covariance_diagnostic(std::span<const SpatialField> slices, std::span<const MultiIndex> lags,
                                       const RieszSpec& spec, double dt) {
  if (lags.empty()) throw std::invalid_argument("covariance_diagnostic: empty lag list");
  if (slices.size() < 100) throw std::invalid_argument("covariance_diagnostic: need at least 100 slices");
  const Lattice& lat = slices.front().lattice;
  const std::size_t cells = lat.size();
  const double n_slices = static_cast<double>(slices.size());

  CovarianceReport report;
  report.n_slices = slices.size();
  report.dt = dt;
  const Estimate self = cell_self_energy(lat.spacing(), spec);

  for (const MultiIndex& lag : lags) {
    LagCovariance row;
    row.lag = lag;
    std::size_t lag_flat = 0;
    {
      MultiIndex wrapped{};
      for (int a = 0; a < lat.dim(); ++a) {
        const int n = lat.points_per_axis();
        wrapped[a] = ((lag[a] % n) + n) % n;
      }
      lag_flat = lat.flatten(wrapped);
    }
    row.distance = lat.min_image_distance(lag_flat);
    row.theoretical = dt * (lag_flat == 0 ? self.value : std::pow(row.distance, -spec.beta));

    std::vector<std::size_t> partner(cells);
    for (std::size_t i = 0; i < cells; ++i) partner[i] = lat.shifted(i, lag);

    double sum = 0.0;
    double sum_sq = 0.0;
    for (const SpatialField& s : slices) {
      double acc = 0.0;
      for (std::size_t i = 0; i < cells; ++i) acc += s[i] * s[partner[i]];
      acc /= static_cast<double>(cells);
      sum += acc;
      sum_sq += acc * acc;
    }
    row.empirical = sum / n_slices;
    const double var = std::max(0.0, (sum_sq - n_slices * row.empirical * row.empirical) / (n_slices - 1.0));
    row.stderr = std::sqrt(var / n_slices);
    row.ratio = row.empirical / row.theoretical;
    row.flagged = row.ratio < 0.9 || row.ratio > 1.1;
    report.lags.push_back(row);
  }
  return report;
}

}  // namespace rshe
