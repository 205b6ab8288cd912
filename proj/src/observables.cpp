#include "rshe/observables.hpp"

#include <cmath>
#include <stdexcept>

#include "rshe/csv.hpp"
#include "rshe/errors.hpp"

namespace rshe {

Estimate k_beta(const Region& unit_region, const RieszSpec& spec, KBetaMethod method, std::uint64_t samples,
                std::uint64_t seed) {
  spec.validate();
  if (unit_region.radius != 1.0) throw std::invalid_argument("k_beta expects the unit region (R = 1)");
  if (method == KBetaMethod::closed_form) {
    if (spec.d != 1) throw std::invalid_argument("closed-form k_beta only exists for d = 1");
    const double b = spec.beta;
    return {std::pow(2.0, 3.0 - b) / ((1.0 - b) * (2.0 - b)), 0.0};
  }
  const PairDomain domain = unit_region.kind == RegionKind::ball ? PairDomain::ball : PairDomain::cube;
  return riesz_pair_integral_mc(domain, 1.0, spec, samples, seed);
}

LimitConstants LimitConstants::constant_eta(const RieszSpec& spec, Estimate k, double value,
                                            std::vector<double> times) {
  LimitConstants c;
  c.spec = spec;
  c.k_beta = k;
  c.eta.values.assign(times.size(), value);
  c.eta.stderr.assign(times.size(), 0.0);
  c.eta.times = std::move(times);
  return c;
}

double LimitConstants::integral_eta_sq(double t) const {
  const auto& ts = eta.times;
  const auto& v = eta.values;
  if (ts.empty() || ts.size() != v.size()) throw std::invalid_argument("eta curve is empty or malformed");
  if (ts.front() != 0.0) throw std::invalid_argument("eta must be tabulated from s = 0");
  if (t < 0.0) throw std::invalid_argument("negative time");
  if (t > ts.back() * (1.0 + 1e-12)) throw std::invalid_argument("eta not tabulated up to t");
  double acc = 0.0;
  for (std::size_t i = 1; i < ts.size() && ts[i - 1] < t; ++i) {
    const double a = ts[i - 1];
    const double b = std::min(ts[i], t);
    const double fa = v[i - 1] * v[i - 1];
    double fb = v[i] * v[i];
    if (b < ts[i]) fb = fa + (fb - fa) * (b - a) / (ts[i] - a);
    acc += 0.5 * (b - a) * (fa + fb);
  }
  return acc;
}

std::vector<std::size_t> interior_cells(const Lattice& lattice, double collar) {
  std::vector<std::size_t> cells;
  const double limit = lattice.half_extent() - collar;
  for (std::size_t i = 0; i < lattice.size(); ++i) {
    const Point x = lattice.center(i);
    bool in = true;
    for (int a = 0; a < lattice.dim() && in; ++a) in = std::abs(x[a]) <= limit;
    if (in) cells.push_back(i);
  }
  if (cells.empty()) throw std::invalid_argument("interior window is empty");
  return cells;
}

EtaCurve estimate_eta(std::span<const Trajectory> trajectories, const Nonlinearity& sigma, double collar) {
  if (trajectories.size() < 100) throw std::invalid_argument("estimate_eta needs at least 100 replicas");
  const Trajectory& first = trajectories.front();
  if (first.fields.size() != first.record_times.size() || first.fields.empty()) {
    throw std::invalid_argument("estimate_eta: trajectories carry no stored fields");
  }
  const std::vector<std::size_t> window = interior_cells(first.fields.front().lattice, collar);
  const std::size_t n_times = first.record_times.size();
  const double n_rep = static_cast<double>(trajectories.size());

  // Sums are taken relative to a reference value so that a field constant
  // in space and across replicas gives its value exactly.
  std::vector<double> ref(n_times);
  for (std::size_t k = 0; k < n_times; ++k) ref[k] = sigma(first.fields[k][window.front()]);

  EtaCurve curve;
  curve.times = first.record_times;
  curve.values.assign(n_times, 0.0);
  curve.stderr.assign(n_times, 0.0);
  std::vector<double> sum_sq(n_times, 0.0);
  for (const Trajectory& tr : trajectories) {
    if (tr.fields.size() != n_times) throw std::invalid_argument("estimate_eta: missing stored fields");
    for (std::size_t k = 0; k < n_times; ++k) {
      double acc = 0.0;
      for (std::size_t i : window) acc += sigma(tr.fields[k][i]) - ref[k];
      const double m = acc / static_cast<double>(window.size());
      curve.values[k] += m;
      sum_sq[k] += m * m;
    }
  }
  for (std::size_t k = 0; k < n_times; ++k) {
    const double shift = curve.values[k] / n_rep;
    curve.values[k] = ref[k] + shift;
    const double var = std::max(0.0, (sum_sq[k] - n_rep * shift * shift) / (n_rep - 1.0));
    curve.stderr[k] = std::sqrt(var / n_rep);
  }
  return curve;
}

namespace {

void require_nondegenerate(const LimitConstants& c) {
  for (double v : c.eta.values) {
    if (v != 0.0) return;
  }
  throw DegenerateError("degenerate sigma(1)=0 regime; no CLT normalization exists");
}

}  // namespace

double predicted_sigma_sq(double t, double radius, const LimitConstants& constants) {
  require_nondegenerate(constants);
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be positive");
  const int d = constants.spec.d;
  const double beta = constants.spec.beta;
  return constants.k_beta.value * constants.integral_eta_sq(t) * std::pow(radius, 2.0 * d - beta);
}

Eigen::MatrixXd limit_covariance(std::span<const double> times, const LimitConstants& constants) {
  const auto m = static_cast<Eigen::Index>(times.size());
  Eigen::MatrixXd c(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = constants.k_beta.value * constants.integral_eta_sq(std::min(times[i], times[j]));
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

std::string to_string(RegionKind kind) { return kind == RegionKind::ball ? "ball" : "box"; }

std::string to_string(KBetaMethod method) {
  return method == KBetaMethod::closed_form ? "closed-form" : "monte-carlo";
}

void write_constants_csv(std::ostream& os, std::span<const ConstantRow> rows) {
  csv::write_row(os, {"name", "d", "beta", "region_kind", "value", "stderr", "method"});
  for (const ConstantRow& r : rows) {
    csv::write_row(os, {r.name, std::to_string(r.d), csv::format_double(r.beta), r.region_kind,
                        csv::format_double(r.value), csv::format_double(r.stderr), r.method});
  }
}

}  // namespace rshe
