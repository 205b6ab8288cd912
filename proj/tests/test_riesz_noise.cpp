#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "rshe/riesz_noise.hpp"

using namespace rshe;

namespace {

const RieszSpec kRef{1, 0.5};
const double kUnitSquareBeta1 = 4.0 * std::log(1.0 + std::sqrt(2.0)) - 4.0 / 3.0 * (std::sqrt(2.0) - 1.0);

std::vector<SpatialField> draw(const SpectralCovariance& cov, double dt, int count, std::uint64_t seed) {
  std::vector<SpatialField> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    RandomStream s(seed, static_cast<std::uint32_t>(i), 0, StreamPurpose::test);
    out.push_back(sample_slice(cov, dt, s));
  }
  return out;
}

}  // namespace

TEST_CASE("riesz kernel") {
  const double one[] = {1.0};
  const double two[] = {2.0};
  const double three_four[] = {3.0, 4.0};
  const double zero[] = {0.0, 0.0};
  CHECK(riesz_kernel(one, kRef) == 1.0);
  CHECK(riesz_kernel(two, kRef) == doctest::Approx(0.70710678118654752));
  CHECK(riesz_kernel(three_four, RieszSpec{2, 1.0}) == doctest::Approx(0.2));
  CHECK_THROWS_WITH_AS(riesz_kernel(zero, RieszSpec{2, 1.0}), "singular point; use cell_self_energy",
                       std::domain_error);
}

TEST_CASE("cell self energy") {
  CHECK(cell_self_energy(1.0, kRef).value == doctest::Approx(2.0 / 0.75).epsilon(1e-14));
  CHECK(cell_self_energy(1.0, kRef).stderr == 0.0);
  CHECK(cell_self_energy(0.25, kRef).value == doctest::Approx(16.0 / 3.0).epsilon(1e-14));

  // d = 2, beta = 1, unit cell: the unit-square Coulomb integral.
  const Estimate e = cell_self_energy(1.0, RieszSpec{2, 1.0}, 1u << 22);
  CHECK(e.stderr > 0.0);
  CHECK(std::abs(e.value - kUnitSquareBeta1) < 3.0 * e.stderr);
  CHECK(e.value == doctest::Approx(2.9732).epsilon(0.002));
  // h^{-beta} scaling.
  CHECK(cell_self_energy(0.5, RieszSpec{2, 1.0}, 1u << 22).value == doctest::Approx(2.0 * e.value).epsilon(1e-12));
}

TEST_CASE("pair integral oracles") {
  const RieszSpec s21{2, 1.0};
  const Estimate disk = riesz_pair_integral_mc(PairDomain::ball, 1.0, s21, 4'000'000, 11);
  CHECK(std::abs(disk.value - 16.0 * std::numbers::pi / 3.0) < 3.5 * disk.stderr);
  const Estimate box = riesz_pair_integral_mc(PairDomain::cube, 1.0, s21, 4'000'000, 12);
  CHECK(std::abs(box.value - 8.0 * kUnitSquareBeta1) < 3.5 * box.stderr);
  const Estimate seg = riesz_pair_integral_mc(PairDomain::ball, 1.0, kRef, 2'000'000, 13);
  CHECK(std::abs(seg.value - std::pow(2.0, 2.5) / 0.75) < 3.5 * seg.stderr);
}

TEST_CASE("embedding first row uses minimum-image distances") {
  const SpectralCovariance cov = build_embedding(Lattice(1, 4, 2.0), kRef);
  const auto& r = cov.first_row();
  REQUIRE(r.size() == 4);
  CHECK(r[0] == doctest::Approx(2.0 / 0.75));
  CHECK(r[1] == doctest::Approx(1.0));
  CHECK(r[2] == doctest::Approx(std::pow(2.0, -0.5)));
  CHECK(r[3] == doctest::Approx(1.0));
}

TEST_CASE("embedding spectrum: trace identity, symmetry, clamping") {
  for (const auto& [lat, spec] : {std::pair{Lattice(1, 512, 20.0), kRef}, std::pair{Lattice(2, 32, 4.0), RieszSpec{2, 1.0}},
                                  std::pair{Lattice(3, 8, 2.0), RieszSpec{3, 1.5}}}) {
    const SpectralCovariance cov = build_embedding(lat, spec);
    const auto& ev = cov.eigenvalues();
    double sum = 0.0;
    for (double v : ev) {
      CHECK(v >= 0.0);
      sum += v;
    }
    if (cov.clamped_mass() == 0.0) {
      CHECK(sum / lat.size() == doctest::Approx(cov.first_row()[0]).epsilon(1e-10));
    }
    CHECK(cov.clamped_mass() < kMaxClampedMass);
    CHECK(cov.max_imag() < 1e-9 * cov.first_row()[0] * lat.size());
    const int n = lat.points_per_axis();
    for (std::size_t k = 0; k < lat.size(); ++k) {
      MultiIndex m = lat.unflatten(k);
      for (int a = 0; a < lat.dim(); ++a) m[a] = (n - m[a]) % n;
      CHECK(ev[lat.flatten(m)] == doctest::Approx(ev[k]).epsilon(1e-12));
    }
  }
}

TEST_CASE("sampler moments") {
  // h = 0.25, dt = 0.01: variance dt * 5.3333, lag 4 cells (distance 1) dt * 1.
  const Lattice lat(1, 64, 8.0);
  const SpectralCovariance cov = build_embedding(lat, kRef);
  const double dt = 0.01;
  const auto slices = draw(cov, dt, 10000, 5);

  double mean = 0.0, sq = 0.0;
  for (const auto& s : slices) {
    mean += s[10];
    sq += s[10] * s[10];
  }
  mean /= slices.size();
  sq /= slices.size();
  CHECK(std::abs(mean) < 4.0 * std::sqrt(dt * 16.0 / 3.0 / slices.size()));
  CHECK(sq == doctest::Approx(dt * 16.0 / 3.0).epsilon(0.05));

  const MultiIndex lags[] = {{0, 0, 0}, {4, 0, 0}, {8, 0, 0}};
  const CovarianceReport rep = covariance_diagnostic(slices, lags, kRef, dt);
  CHECK(rep.lags[0].ratio == doctest::Approx(1.0).epsilon(0.05));
  CHECK(rep.lags[1].distance == 1.0);
  CHECK(rep.lags[1].empirical == doctest::Approx(dt).epsilon(0.1));
  CHECK(rep.all_within_band());

  // Same streams give the same report.
  const CovarianceReport again = covariance_diagnostic(draw(cov, dt, 10000, 5), lags, kRef, dt);
  for (std::size_t i = 0; i < rep.lags.size(); ++i) CHECK(again.lags[i].empirical == rep.lags[i].empirical);
}

TEST_CASE("doubling dt doubles covariances") {
  const Lattice lat(1, 128, 10.0);
  const SpectralCovariance cov = build_embedding(lat, kRef);
  const MultiIndex lags[] = {{0, 0, 0}, {3, 0, 0}, {12, 0, 0}};
  const auto a = covariance_diagnostic(draw(cov, 0.01, 4000, 21), lags, kRef, 0.01);
  const auto b = covariance_diagnostic(draw(cov, 0.02, 4000, 22), lags, kRef, 0.02);
  for (std::size_t i = 0; i < 3; ++i) CHECK(b.lags[i].empirical / a.lags[i].empirical == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("d = 2 sampler is isotropic") {
  const RieszSpec spec{2, 1.0};
  const Lattice lat(2, 32, 8.0);
  const SpectralCovariance cov = build_embedding(lat, spec);
  const MultiIndex lags[] = {{5, 0, 0}, {3, 4, 0}, {0, 5, 0}, {4, 3, 0}};
  const auto rep = covariance_diagnostic(draw(cov, 0.01, 2000, 3), lags, spec, 0.01);
  for (std::size_t i = 1; i < 4; ++i) {
    CHECK(rep.lags[i].distance == doctest::Approx(rep.lags[0].distance));
    const double se = std::hypot(rep.lags[i].stderr, rep.lags[0].stderr);
    CHECK(std::abs(rep.lags[i].empirical - rep.lags[0].empirical) < 4.0 * se);
  }
  CHECK(rep.all_within_band());
}

TEST_CASE("diagnostic preconditions") {
  const Lattice lat(1, 16, 2.0);
  const SpectralCovariance cov = build_embedding(lat, kRef);
  const auto few = draw(cov, 0.1, 50, 1);
  const MultiIndex lags[] = {{1, 0, 0}};
  CHECK_THROWS(covariance_diagnostic(few, lags, kRef, 0.1));
  const auto enough = draw(cov, 0.1, 100, 1);
  CHECK_THROWS(covariance_diagnostic(enough, std::span<const MultiIndex>{}, kRef, 0.1));
}
