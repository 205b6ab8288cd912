#pragma once

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rshe/lattice.hpp"
#include "rshe/observables.hpp"
#include "rshe/she_engine.hpp"

namespace rshe {

/// One G_R(t) per replica.
struct SampleSet {
  std::vector<double> values;
  double radius = 0.0;
  double time = 0.0;

  std::size_t n_replicas() const { return values.size(); }
};

/// How `pass` is derived from estimate, target and tolerance.
enum class Rule {
  within,  // |estimate - target| <= tolerance
  below,   // estimate < target + tolerance
  above,   // estimate >= target - tolerance
};

struct StatsReport {
  std::string metric;
  std::string params;
  double estimate = 0.0;
  double stderr = 0.0;
  double target = 0.0;
  double tolerance = 0.0;
  Rule rule = Rule::within;
  bool pass = false;
  std::string note;

  static StatsReport make(std::string metric, std::string params, double estimate, double stderr, double target,
                          double tolerance, Rule rule, std::string note = {});
};

std::string to_string(Rule rule);

/// Kolmogorov statistical floors: 1.63/sqrt(N) at 1%, 1.95/sqrt(N) at 0.1%.
double ks_floor_1pct(std::size_t n);
double ks_floor_01pct(std::size_t n);

enum class StandardizeMode { empirical, predicted };

/// G_R / sigma_R.  Values are not re-centered: G_R is centered by
/// construction.  Throws DegenerateError if the variance is below 1e-12.
std::vector<double> standardize(const SampleSet& samples, StandardizeMode mode, double predicted_variance = 0.0);

/// sup |F_n - Phi| over the sorted sample, both one-sided gaps.
double ks_distance(std::span<const double> standardized);

double normal_cdf(double x);

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

/// Least squares of log y on log x.
PowerLawFit log_log_fit(std::span<const std::pair<double, double>> points);

/// log sigma_R against log R; needs >= 3 distinct radii and sigma > 0.
PowerLawFit scaling_fit(std::span<const std::pair<double, double>> radius_sigma);

struct RateFit {
  double exponent = 0.0;
  double stderr = 0.0;
  std::vector<bool> used;
  std::vector<std::string> warnings;
};

/// log KS against log R over points above 1.63/sqrt(N).  Throws
/// std::runtime_error if fewer than two points clear the floor.
RateFit rate_fit(std::span<const std::pair<double, double>> radius_ks, std::size_t n_samples);

/// KS non-increasing in R, allowing one inversion that involves a point
/// under the 1% floor.
StatsReport rate_direction_check(std::span<const std::pair<double, double>> radius_ks, std::size_t n_samples);

struct FunctionalCovReport {
  Eigen::MatrixXd empirical_cov;
  Eigen::MatrixXd limit_cov;
  Eigen::MatrixXd empirical_corr;
  Eigen::MatrixXd limit_corr;
  std::vector<StatsReport> reports;
};

/// samples(r, i) = G_R(t_i) for replica r.  Compares the covariance of
/// R^{beta/2 - d} G_R(t_i) with C_ij (15% relative) and the correlations
/// with the limit correlations (+-0.05).
FunctionalCovReport functional_cov_check(const Eigen::MatrixXd& samples, std::span<const double> times,
                                         double radius, const LimitConstants& constants);

struct IncrementMoments {
  std::vector<double> lags;  // t - s
  std::vector<double> moments;
  std::vector<std::string> warnings;
};

/// p-th absolute increment moments of G_R over all start times on the
/// step grid, pooled over replicas.  `region` indexes step_averages.
IncrementMoments increment_moments(std::span<const Trajectory> trajectories, std::size_t region, double dt,
                                   std::span<const long> lag_steps, int p);

struct IncrementFit {
  IncrementMoments moments;
  PowerLawFit fit;
  StatsReport report;  // slope >= 0.8 * p / 2
};

IncrementFit increment_moment_fit(std::span<const Trajectory> trajectories, std::size_t region, double dt,
                                  std::span<const long> lag_steps, int p);

/// Geometric mean over lags of m2/m1 against (R2/R1)^{p(d - beta/2)}, 20%.
StatsReport increment_r_scaling(const IncrementMoments& m1, double r1, const IncrementMoments& m2, double r2,
                                const RieszSpec& spec, int p);

struct DecayRow {
  int lag_cells = 0;
  double distance = 0.0;
  double psi = 0.0;
  double excess = 0.0;  // |Psi - eta^2|
  double excess_stderr = 0.0;
  double product = 0.0;  // excess * distance^beta
};

struct DecayReport {
  double eta = 0.0;
  std::vector<DecayRow> rows;
  double upper_half_ratio = 0.0;  // max/min product over the upper half of the lag range
  StatsReport report;
};

/// Psi(s, xi) = E sigma(u(s,x)) sigma(u(s,x+xi)) along axis 0 against
/// eta^2, on interior cells.  Lags must lie in [2h, L/4].
DecayReport correlation_decay_check(std::span<const SpatialField> fields, const Nonlinearity& sigma,
                                    std::span<const int> lag_cells, const RieszSpec& spec, double collar);

/// E|y + sqrt(s) Z|^{-beta} with Z standard Gaussian in R^d.
double expected_inverse_power(std::span<const double> y, double s, const RieszSpec& spec);

std::vector<double> log_uniform_grid(double lo, double hi, std::size_t points);

struct Lemma31Row {
  double y_norm = 0.0;
  double max_ratio = 0.0;
  double argmax_s = 0.0;
  double small_s_ratio = 0.0;
  double large_s_ratio = 0.0;
};

/// Ratio E|y + sqrt(s) Z|^{-beta} / |y|^{-beta} over an s grid.
std::vector<Lemma31Row> lemma31_check(const RieszSpec& spec, std::span<const Point> ys, std::span<const double> s_grid);

void write_reports_csv(std::ostream& os, std::span<const StatsReport> reports);

}  // namespace rshe
