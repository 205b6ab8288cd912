#include "rshe/clt_stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "rshe/csv.hpp"
#include "rshe/errors.hpp"

namespace rshe {

StatsReport StatsReport::make(std::string metric, std::string params, double estimate, double stderr,
                              double target, double tolerance, Rule rule, std::string note) {
  StatsReport r{std::move(metric), std::move(params), estimate, stderr, target, tolerance, rule, false,
                std::move(note)};
  switch (rule) {
    case Rule::within: r.pass = std::abs(estimate - target) <= tolerance; break;
    case Rule::below: r.pass = estimate < target + tolerance; break;
    case Rule::above: r.pass = estimate >= target - tolerance; break;
  }
  return r;
}

std::string to_string(Rule rule) {
  switch (rule) {
    case Rule::within: return "within";
    case Rule::below: return "below";
    case Rule::above: return "above";
  }
  return "?";
}

double ks_floor_1pct(std::size_t n) { return 1.63 / std::sqrt(static_cast<double>(n)); }
double ks_floor_01pct(std::size_t n) { return 1.95 / std::sqrt(static_cast<double>(n)); }

std::vector<double> standardize(const SampleSet& samples, StandardizeMode mode, double predicted_variance) {
  const auto& v = samples.values;
  if (v.size() < 2) throw std::invalid_argument("standardize needs at least two samples");
  double variance = predicted_variance;
  if (mode == StandardizeMode::empirical) {
    const double n = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    variance = ss / (n - 1.0);
  }
  if (!(variance >= 1e-12)) throw DegenerateError("degenerate; sigma(1)=0? (variance below 1e-12)");
  const double scale = 1.0 / std::sqrt(variance);
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [&](double x) { return x * scale; });
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double ks_distance(std::span<const double> standardized) {
  if (standardized.size() < 100) throw std::invalid_argument("ks_distance needs at least 100 values");
  std::vector<double> sorted(standardized.begin(), standardized.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = normal_cdf(sorted[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

PowerLawFit log_log_fit(std::span<const std::pair<double, double>> points) {
  if (points.size() < 2) throw std::invalid_argument("need at least two points for a fit");
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : points) {
    if (!(x > 0.0) || !(y > 0.0)) throw std::invalid_argument("log-log fit needs positive values");
    mx += std::log(x);
    my += std::log(y);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& [x, y] : points) {
    sxx += (std::log(x) - mx) * (std::log(x) - mx);
    sxy += (std::log(x) - mx) * (std::log(y) - my);
  }
  if (sxx == 0.0) throw std::invalid_argument("fit abscissae are all equal");
  PowerLawFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  if (points.size() > 2) {
    double ssr = 0.0;
    for (const auto& [x, y] : points) {
      const double r = std::log(y) - fit.intercept - fit.slope * std::log(x);
      ssr += r * r;
    }
    fit.slope_stderr = std::sqrt(ssr / (n - 2.0) / sxx);
  }
  return fit;
}

PowerLawFit scaling_fit(std::span<const std::pair<double, double>> radius_sigma) {
  std::vector<double> radii;
  for (const auto& [r, s] : radius_sigma) {
    if (!(s > 0.0)) throw std::invalid_argument("scaling_fit: non-positive sigma estimate");
    radii.push_back(r);
  }
  std::sort(radii.begin(), radii.end());
  if (std::unique(radii.begin(), radii.end()) - radii.begin() < 3) {
    throw std::invalid_argument("scaling_fit needs at least three distinct radii");
  }
  return log_log_fit(radius_sigma);
}

RateFit rate_fit(std::span<const std::pair<double, double>> radius_ks, std::size_t n_samples) {
  if (radius_ks.size() < 3) throw std::invalid_argument("rate_fit needs at least three radii");
  const double floor = ks_floor_1pct(n_samples);
  RateFit out;
  std::vector<std::pair<double, double>> usable;
  for (const auto& [r, ks] : radius_ks) {
    const bool ok = ks >= floor;
    out.used.push_back(ok);
    if (ok) {
      usable.emplace_back(r, ks);
    } else {
      std::ostringstream w;
      w << "R=" << r << ": KS=" << ks << " below statistical floor " << floor << "; excluded";
      out.warnings.push_back(w.str());
    }
  }
  if (usable.size() < 2) throw std::runtime_error("rate_fit: fewer than two KS values above the statistical floor");
  const PowerLawFit fit = log_log_fit(usable);
  out.exponent = fit.slope;
  out.stderr = fit.slope_stderr;
  return out;
}

StatsReport rate_direction_check(std::span<const std::pair<double, double>> radius_ks, std::size_t n_samples) {
  std::vector<std::pair<double, double>> pts(radius_ks.begin(), radius_ks.end());
  std::sort(pts.begin(), pts.end());
  const double floor = ks_floor_1pct(n_samples);
  int hard = 0;
  int gated = 0;
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (pts[i].second > pts[i - 1].second) {
      if (pts[i].second < floor || pts[i - 1].second < floor) {
        ++gated;
      } else {
        ++hard;
      }
    }
  }
  const bool ok = hard == 0 && gated <= 1;
  std::ostringstream note;
  note << "inversions: " << hard << " above floor, " << gated << " floor-gated";
  StatsReport r = StatsReport::make("ks_monotone", "", ok ? 1.0 : 0.0, 0.0, 1.0, 0.0, Rule::within, note.str());
  return r;
}

FunctionalCovReport functional_cov_check(const Eigen::MatrixXd& samples, std::span<const double> times,
                                         double radius, const LimitConstants& constants) {
  const auto m = static_cast<Eigen::Index>(times.size());
  if (m < 1 || samples.cols() != m) throw std::invalid_argument("functional_cov_check: shape mismatch");
  if (samples.rows() < 100) throw std::invalid_argument("functional_cov_check needs at least 100 replicas");
  const int d = constants.spec.d;
  const double beta = constants.spec.beta;
  const double norm = std::pow(radius, 0.5 * beta - d);

  Eigen::MatrixXd x = samples * norm;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  FunctionalCovReport out;
  out.empirical_cov = (x.transpose() * x) / static_cast<double>(samples.rows() - 1);
  out.limit_cov = limit_covariance(times, constants);

  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(out.empirical_cov(i, i) >= 1e-12)) throw DegenerateError("degenerate; sigma(1)=0? (zero variance)");
  }
  // Singularity is judged on distinct times only; repeated times are perfectly correlated by definition.
  std::vector<Eigen::Index> distinct;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (i == 0 || times[i] != times[i - 1]) distinct.push_back(i);
  }
  if (distinct.size() > 1) {
    Eigen::MatrixXd sub(distinct.size(), distinct.size());
    for (std::size_t a = 0; a < distinct.size(); ++a)
      for (std::size_t b = 0; b < distinct.size(); ++b) sub(a, b) = out.empirical_cov(distinct[a], distinct[b]);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sub);
    if (es.eigenvalues().minCoeff() <= 1e-12 * es.eigenvalues().maxCoeff()) {
      throw std::runtime_error("functional_cov_check: singular empirical covariance");
    }
  }

  auto corr_of = [&](const Eigen::MatrixXd& c, Eigen::Index i, Eigen::Index j) {
    if (times[i] == times[j]) return 1.0;
    return c(i, j) / std::sqrt(c(i, i) * c(j, j));
  };
  out.empirical_corr.resize(m, m);
  out.limit_corr.resize(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      out.empirical_corr(i, j) = corr_of(out.empirical_cov, i, j);
      out.limit_corr(i, j) = corr_of(out.limit_cov, i, j);
    }
  }

  const double n = static_cast<double>(samples.rows());
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i; j < m; ++j) {
      std::ostringstream p;
      p << "R=" << radius << ";t_i=" << times[i] << ";t_j=" << times[j];
      const double target = out.limit_cov(i, j);
      const double est = out.empirical_cov(i, j);
      // Gaussian approximation for the sampling error of a covariance entry.
      const double se = std::sqrt((out.empirical_cov(i, i) * out.empirical_cov(j, j) + est * est) / n);
      out.reports.push_back(StatsReport::make("fclt_cov", p.str(), est, se, target, 0.15 * std::abs(target),
                                              Rule::within));
      if (i != j) {
        const double r = out.empirical_corr(i, j);
        out.reports.push_back(StatsReport::make("fclt_corr", p.str(), r, (1.0 - r * r) / std::sqrt(n),
                                                out.limit_corr(i, j), 0.05, Rule::within));
      }
    }
  }
  return out;
}

IncrementMoments increment_moments(std::span<const Trajectory> trajectories, std::size_t region, double dt,
                                   std::span<const long> lag_steps, int p) {
  if (p != 2 && p != 4) throw std::invalid_argument("increment moments use p in {2, 4}");
  if (trajectories.empty()) throw std::invalid_argument("no trajectories");
  IncrementMoments out;
  for (long lag : lag_steps) {
    if (lag < 0) throw std::invalid_argument("negative lag");
    double acc = 0.0;
    std::size_t count = 0;
    for (const Trajectory& tr : trajectories) {
      const auto& series = tr.step_averages;
      if (series.empty()) throw std::invalid_argument("trajectories carry no per-step averages");
      for (std::size_t s = 0; s + static_cast<std::size_t>(lag) < series.size(); ++s) {
        const double inc = series[s + lag].at(region) - series[s].at(region);
        acc += p == 2 ? inc * inc : inc * inc * inc * inc;
        ++count;
      }
    }
    if (count == 0) throw std::invalid_argument("lag longer than the recorded horizon");
    out.lags.push_back(static_cast<double>(lag) * dt);
    out.moments.push_back(acc / static_cast<double>(count));
  }
  return out;
}

IncrementFit increment_moment_fit(std::span<const Trajectory> trajectories, std::size_t region, double dt,
                                  std::span<const long> lag_steps, int p) {
  if (lag_steps.size() < 4) throw std::invalid_argument("increment_moment_fit needs at least four lags");
  const auto [lo, hi] = std::minmax_element(lag_steps.begin(), lag_steps.end());
  if (*lo <= 0 || *hi < 10 * *lo) throw std::invalid_argument("increment lags must span a decade");

  IncrementFit out;
  out.moments = increment_moments(trajectories, region, dt, lag_steps, p);
  std::vector<std::pair<double, double>> pts;
  for (std::size_t k = 0; k < out.moments.lags.size(); ++k) {
    if (out.moments.moments[k] > 1e-24) {
      pts.emplace_back(out.moments.lags[k], out.moments.moments[k]);
    } else {
      out.moments.warnings.push_back("lag " + csv::format_double(out.moments.lags[k]) +
                                     " at the noise floor; excluded");
    }
  }
  if (pts.size() < 2) throw DegenerateError("degenerate; increments vanish identically");
  out.fit = log_log_fit(pts);
  std::ostringstream params;
  params << "p=" << p << ";region=" << region;
  out.report = StatsReport::make("increment_slope", params.str(), out.fit.slope, out.fit.slope_stderr,
                                 0.8 * p / 2.0, 0.0, Rule::above);
  return out;
}

StatsReport increment_r_scaling(const IncrementMoments& m1, double r1, const IncrementMoments& m2, double r2,
                                const RieszSpec& spec, int p) {
  if (m1.moments.size() != m2.moments.size() || m1.moments.empty()) {
    throw std::invalid_argument("increment moment sets differ in length");
  }
  double log_sum = 0.0;
  for (std::size_t k = 0; k < m1.moments.size(); ++k) {
    if (!(m1.moments[k] > 0.0) || !(m2.moments[k] > 0.0)) throw DegenerateError("degenerate; zero increments");
    log_sum += std::log(m2.moments[k] / m1.moments[k]);
  }
  const double ratio = std::exp(log_sum / static_cast<double>(m1.moments.size()));
  const double target = std::pow(r2 / r1, p * (spec.d - 0.5 * spec.beta));
  std::ostringstream params;
  params << "p=" << p << ";R1=" << r1 << ";R2=" << r2;
  return StatsReport::make("increment_r_scaling", params.str(), ratio, 0.0, target, 0.2 * target, Rule::within);
}

DecayReport correlation_decay_check(std::span<const SpatialField> fields, const Nonlinearity& sigma,
                                    std::span<const int> lag_cells, const RieszSpec& spec, double collar) {
  if (fields.size() < 100) throw std::invalid_argument("correlation_decay_check needs at least 100 replicas");
  if (lag_cells.empty()) throw std::invalid_argument("empty lag list");
  const Lattice& lat = fields.front().lattice;
  const double h = lat.spacing();
  for (int lag : lag_cells) {
    const double dist = lag * h;
    if (dist < 2.0 * h - 1e-12 || dist > lat.half_extent() / 4.0 + 1e-12) {
      throw std::invalid_argument("lag " + std::to_string(lag) + " outside [2h, L/4]");
    }
  }
  const std::vector<std::size_t> window = interior_cells(lat, collar);
  std::vector<char> in_window(lat.size(), 0);
  for (std::size_t i : window) in_window[i] = 1;

  const double n_rep = static_cast<double>(fields.size());
  std::vector<double> sigma_mean(fields.size());
  std::vector<std::vector<double>> sig(fields.size());
  double eta = 0.0;
  for (std::size_t r = 0; r < fields.size(); ++r) {
    sig[r].resize(lat.size());
    for (std::size_t i = 0; i < lat.size(); ++i) sig[r][i] = sigma(fields[r][i]);
    double acc = 0.0;
    for (std::size_t i : window) acc += sig[r][i];
    sigma_mean[r] = acc / static_cast<double>(window.size());
    eta += sigma_mean[r];
  }
  eta /= n_rep;

  DecayReport out;
  out.eta = eta;
  for (int lag : lag_cells) {
    MultiIndex offset{};
    offset[0] = lag;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i : window) {
      const std::size_t j = lat.shifted(i, offset);
      if (in_window[j]) pairs.emplace_back(i, j);
    }
    std::vector<double> z(fields.size());
    double psi = 0.0;
    for (std::size_t r = 0; r < fields.size(); ++r) {
      double acc = 0.0;
      for (const auto& [i, j] : pairs) acc += sig[r][i] * sig[r][j];
      const double a = acc / static_cast<double>(pairs.size());
      psi += a;
      z[r] = a - 2.0 * eta * sigma_mean[r];
    }
    psi /= n_rep;
    const double zmean = std::accumulate(z.begin(), z.end(), 0.0) / n_rep;
    double zss = 0.0;
    for (double v : z) zss += (v - zmean) * (v - zmean);

    DecayRow row;
    row.lag_cells = lag;
    row.distance = lag * h;
    row.psi = psi;
    row.excess = std::abs(psi - eta * eta);
    row.excess_stderr = std::sqrt(zss / (n_rep - 1.0) / n_rep);
    row.product = row.excess * std::pow(row.distance, spec.beta);
    out.rows.push_back(row);
  }

  const auto [dmin, dmax] = std::minmax_element(out.rows.begin(), out.rows.end(),
                                                [](const DecayRow& a, const DecayRow& b) { return a.distance < b.distance; });
  const double mid = 0.5 * (dmin->distance + dmax->distance);
  double pmax = 0.0;
  double pmin = std::numeric_limits<double>::infinity();
  for (const DecayRow& row : out.rows) {
    if (row.distance + 1e-12 < mid) continue;
    pmax = std::max(pmax, row.product);
    pmin = std::min(pmin, row.product);
  }
  std::string note;
  if (pmax == 0.0) {
    out.upper_half_ratio = 1.0;
    note = "excess identically zero";
  } else {
    out.upper_half_ratio = pmin > 0.0 ? pmax / pmin : std::numeric_limits<double>::infinity();
  }
  out.report = StatsReport::make("decay_envelope_ratio", "upper half of lag range", out.upper_half_ratio, 0.0, 5.0,
                                 0.0, Rule::below, note);
  out.report.pass = out.upper_half_ratio <= 5.0;
  return out;
}

double expected_inverse_power(std::span<const double> y, double s, const RieszSpec& spec) {
  const int d = spec.d;
  const double beta = spec.beta;
  double y2 = 0.0;
  for (int a = 0; a < d && a < static_cast<int>(y.size()); ++a) y2 += y[a] * y[a];
  if (y2 == 0.0) throw std::invalid_argument("lemma check needs y != 0");
  if (!(s > 0.0)) throw std::invalid_argument("variance s must be positive");

  // |y + sqrt(s) Z|^2 / s is noncentral chi-square with d degrees of freedom
  // and noncentrality lambda = |y|^2 / s: a Poisson(lambda/2) mixture of
  // central chi-squares with d + 2j degrees of freedom, for which
  // E[X^{-beta/2}] = 2^{-beta/2} Gamma(k/2 - beta/2) / Gamma(k/2).
  const double lambda = y2 / s;
  if (lambda > 1e8) {
    // Second-order Taylor: E f(y + sqrt(s) Z) = f(y) + (s/2) Laplacian f(y) + O(s^2).
    return std::pow(y2, -0.5 * beta) * (1.0 + s * beta * (beta + 2.0 - d) / (2.0 * y2));
  }
  const double half = 0.5 * lambda;
  const double a = 0.5 * d;
  const double hb = 0.5 * beta;
  auto log_term = [&](double j) {
    const double log_pois = half > 0.0 ? -half + j * std::log(half) - std::lgamma(j + 1.0) : (j == 0.0 ? 0.0 : -1e300);
    return log_pois + std::lgamma(a + j - hb) - std::lgamma(a + j);
  };
  const double mode = std::floor(half);
  const double peak = log_term(mode);
  double sum = 0.0;
  for (double j = mode;; j += 1.0) {
    const double t = std::exp(log_term(j) - peak);
    sum += t;
    if (t < 1e-18 * sum) break;
  }
  for (double j = mode - 1.0; j >= 0.0; j -= 1.0) {
    const double t = std::exp(log_term(j) - peak);
    sum += t;
    if (t < 1e-18 * sum) break;
  }
  return std::pow(s, -hb) * std::pow(2.0, -hb) * std::exp(peak) * sum;
}

std::vector<double> log_uniform_grid(double lo, double hi, std::size_t points) {
  if (points < 2 || !(lo > 0.0) || !(hi > lo)) throw std::invalid_argument("bad log grid");
  std::vector<double> g(points);
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (std::size_t i = 0; i < points; ++i) g[i] = std::exp(a + (b - a) * i / static_cast<double>(points - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

std::vector<Lemma31Row> lemma31_check(const RieszSpec& spec, std::span<const Point> ys,
                                      std::span<const double> s_grid) {
  if (s_grid.empty()) throw std::invalid_argument("empty s grid");
  std::vector<Lemma31Row> rows;
  for (const Point& y : ys) {
    double y2 = 0.0;
    for (int a = 0; a < spec.d; ++a) y2 += y[a] * y[a];
    if (y2 == 0.0) throw std::invalid_argument("lemma check needs y != 0");
    const double base = std::pow(y2, -0.5 * spec.beta);
    Lemma31Row row;
    row.y_norm = std::sqrt(y2);
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      const double ratio = expected_inverse_power(std::span<const double>(y.data(), kMaxDim), s_grid[k], spec) / base;
      if (ratio > row.max_ratio) {
        row.max_ratio = ratio;
        row.argmax_s = s_grid[k];
      }
      if (k == 0) row.small_s_ratio = ratio;
      if (k + 1 == s_grid.size()) row.large_s_ratio = ratio;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_reports_csv(std::ostream& os, std::span<const StatsReport> reports) {
  csv::write_row(os, {"metric", "params", "estimate", "stderr", "target", "tolerance", "pass"});
  for (const StatsReport& r : reports) {
    csv::write_row(os, {r.metric, r.params, csv::format_double(r.estimate), csv::format_double(r.stderr),
                        csv::format_double(r.target), csv::format_double(r.tolerance), r.pass ? "true" : "false"});
  }
}

}  // namespace rshe
