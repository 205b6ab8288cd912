#pragma once

#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "rshe/lattice.hpp"
#include "rshe/region.hpp"
#include "rshe/riesz_noise.hpp"
#include "rshe/she_engine.hpp"

namespace rshe {

enum class KBetaMethod { closed_form, monte_carlo };

inline constexpr std::uint64_t kDefaultKBetaSamples = 1'000'000;
inline constexpr std::uint64_t kKBetaSeed = 0x6b62657461ULL;

/// Double integral of the Riesz kernel over the unit region squared: the
/// ball gives k_beta, the box its Lambda_1 analogue.
///
/// The closed form exists only in d = 1, where ball and box are both
/// [-1, 1]: 2^{3-beta} / ((1-beta)(2-beta)).
Estimate k_beta(const Region& unit_region, const RieszSpec& spec, KBetaMethod method,
                std::uint64_t samples = kDefaultKBetaSamples, std::uint64_t seed = kKBetaSeed);

/// s -> eta(s) = E sigma(u(s, y)) on a time grid.
struct EtaCurve {
  std::vector<double> times;
  std::vector<double> values;
  std::vector<double> stderr;
};

struct LimitConstants {
  RieszSpec spec;
  Estimate k_beta;
  EtaCurve eta;

  /// eta held at `value` on the grid; the linear / u0 = 1 case has value 1.
  static LimitConstants constant_eta(const RieszSpec& spec, Estimate k, double value, std::vector<double> times);

  /// Trapezoidal int_0^t eta^2, linear in eta^2 past the last grid node below t.
  double integral_eta_sq(double t) const;
};

/// Cells whose centers stay at least `collar` inside the torus on every axis.
std::vector<std::size_t> interior_cells(const Lattice& lattice, double collar);

/// Averages sigma(u) over interior cells and replicas at each stored time.
/// Errors come from replica-level means; needs >= 100 replicas.
EtaCurve estimate_eta(std::span<const Trajectory> trajectories, const Nonlinearity& sigma, double collar);

/// sigma_R^2 ~ k_beta int_0^t eta^2 R^{2d - beta}.
/// Throws DegenerateError when eta vanishes identically.
double predicted_sigma_sq(double t, double radius, const LimitConstants& constants);

/// C_ij = k_beta int_0^{min(t_i, t_j)} eta^2.
Eigen::MatrixXd limit_covariance(std::span<const double> times, const LimitConstants& constants);

struct ConstantRow {
  std::string name;
  int d = 1;
  double beta = 0.0;
  std::string region_kind;
  double value = 0.0;
  double stderr = 0.0;
  std::string method;
};

void write_constants_csv(std::ostream& os, std::span<const ConstantRow> rows);

std::string to_string(RegionKind kind);
std::string to_string(KBetaMethod method);

}  // namespace rshe
