#include "rshe/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include <fftw3.h>
#include <Eigen/Core>
#include <boost/version.hpp>
#include "json.hpp"

#include "rshe/csv.hpp"
#include "rshe/errors.hpp"
#include "rshe/riesz_noise.hpp"

namespace rshe {

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kDistanceNote =
    "Kolmogorov distance is reported in place of total variation; TV is not estimable from the sample sizes used";

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string rt_params(double r, double t) { return "R=" + num(r) + ";t=" + num(t); }

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void guard_memory(double bytes, const std::string& what) {
  constexpr double kLimit = 4.0 * 1024 * 1024 * 1024;
  if (bytes > kLimit) {
    throw ConfigError(what + " would need " + num(bytes / (1024.0 * 1024 * 1024)) + " GiB; reduce replicas or n");
  }
}

Region region_of(const ExperimentConfig& cfg, double radius) { return Region{cfg.region_kind, radius, cfg.center}; }

/// Simulation context shared by every simulating kind.
struct Setup {
  Lattice lattice;
  SpectralCovariance noise;
  Nonlinearity sigma;
  InitialCondition init;
  std::vector<Region> regions;
};

Setup make_setup(const ExperimentConfig& cfg) {
  const Lattice lat = cfg.lattice();
  SpectralCovariance noise = [&] {
    try {
      return build_embedding(lat, cfg.spec);
    } catch (const std::domain_error& e) {
      throw ConfigError(std::string("lattice.n=") + std::to_string(cfg.n) + ": " + e.what());
    }
  }();
  std::vector<Region> regions;
  for (double r : cfg.radii) regions.push_back(region_of(cfg, r));
  return Setup{lat, std::move(noise), cfg.sigma.build(), cfg.init.build(lat), std::move(regions)};
}

Estimate unit_k_beta(const ExperimentConfig& cfg) {
  const Region unit{cfg.region_kind, 1.0, {}};
  const KBetaMethod method = cfg.spec.d == 1 ? KBetaMethod::closed_form : KBetaMethod::monte_carlo;
  return k_beta(unit, cfg.spec, method, cfg.mc_samples);
}

/// k_beta and eta.  For affine sigma and constant u0, E sigma(u) = sigma(E u)
/// = sigma(u0) exactly; otherwise eta is estimated on a replica subset.
LimitConstants limit_constants(const ExperimentConfig& cfg, const Setup& setup, unsigned workers, ResultSet& out) {
  const Estimate k = unit_k_beta(cfg);
  const NonlinearityKind kind = setup.sigma.kind();
  const bool affine = kind == NonlinearityKind::linear || kind == NonlinearityKind::affine;
  LimitConstants constants;
  if (affine && setup.init.is_constant()) {
    const double value = setup.sigma(setup.init.lower());
    constants = LimitConstants::constant_eta(cfg.spec, k, value, {0.0, std::max(cfg.horizon, cfg.dt)});
  } else {
    const long n_steps = std::lround(cfg.horizon / cfg.dt);
    std::vector<double> times;
    long last = -1;
    for (std::uint32_t i = 0; i < cfg.eta_points; ++i) {
      const long s = std::lround(static_cast<double>(n_steps) * i / (cfg.eta_points - 1));
      if (s != last) times.push_back(static_cast<double>(s) * cfg.dt);
      last = s;
    }
    guard_memory(8.0 * cfg.eta_replicas * times.size() * setup.lattice.size(), "eta estimation");
    SimulationPlan plan{cfg.horizon, cfg.dt, times, setup.regions, true, false};
    const Simulator sim(setup.noise, setup.sigma, setup.init, plan);
    const auto trajectories = run_replicas(sim, cfg.seed, cfg.eta_replicas, workers);
    constants.spec = cfg.spec;
    constants.k_beta = k;
    constants.eta = estimate_eta(trajectories, setup.sigma, cfg.collar());
  }
  Table eta{{"s", "eta", "stderr"}, {}};
  for (std::size_t i = 0; i < constants.eta.times.size(); ++i) {
    eta.rows.push_back({csv::format_double(constants.eta.times[i]), csv::format_double(constants.eta.values[i]),
                        csv::format_double(constants.eta.stderr[i])});
  }
  out.tables["eta"] = std::move(eta);
  out.constants.push_back(ConstantRow{"k_beta", cfg.spec.d, cfg.spec.beta, to_string(cfg.region_kind), k.value,
                                      k.stderr,
                                      to_string(cfg.spec.d == 1 ? KBetaMethod::closed_form : KBetaMethod::monte_carlo)});
  return constants;
}

std::vector<Trajectory> simulate_all(const ExperimentConfig& cfg, const Setup& setup, SimulationPlan plan,
                                     unsigned workers, ResultSet& out) {
  const Simulator sim(setup.noise, setup.sigma, setup.init, std::move(plan));
  auto trajectories = run_replicas(sim, cfg.seed, cfg.n_replicas, workers);
  for (const Trajectory& tr : trajectories) {
    for (std::size_t r = 0; r < setup.regions.size(); ++r) {
      for (std::size_t t = 0; t < tr.record_times.size(); ++t) {
        out.samples.push_back(SampleRow{tr.replica_id, setup.regions[r].radius, tr.record_times[t], tr.average(t, r)});
      }
    }
  }
  return trajectories;
}

SampleSet sample_set(const std::vector<Trajectory>& trajectories, std::size_t region, std::size_t time,
                     double radius) {
  SampleSet s;
  s.radius = radius;
  s.time = trajectories.front().record_times.at(time);
  s.values.reserve(trajectories.size());
  for (const Trajectory& tr : trajectories) s.values.push_back(tr.average(time, region));
  return s;
}

struct Moment {
  double value = 0.0;
  double stderr = 0.0;
};

/// E G^2 with its standard error; G_R is centered by construction.
Moment second_moment(const std::vector<double>& values) {
  const double n = static_cast<double>(values.size());
  double m = 0.0;
  for (double v : values) m += v * v;
  m /= n;
  double ss = 0.0;
  for (double v : values) ss += (v * v - m) * (v * v - m);
  return {m, std::sqrt(ss / (n - 1.0) / n)};
}

// ---------------------------------------------------------------------------

void run_constants(const ExperimentConfig& cfg, ResultSet& out) {
  const RieszSpec& spec = cfg.spec;
  for (RegionKind kind : {RegionKind::ball, RegionKind::box}) {
    const Region unit{kind, 1.0, {}};
    const Estimate mc = k_beta(unit, spec, KBetaMethod::monte_carlo, cfg.mc_samples);
    const std::string name = "k_beta";
    if (spec.d == 1) {
      const Estimate exact = k_beta(unit, spec, KBetaMethod::closed_form);
      out.constants.push_back(ConstantRow{name, spec.d, spec.beta, to_string(kind), exact.value, exact.stderr,
                                          to_string(KBetaMethod::closed_form)});
      out.reports.push_back(StatsReport::make("k_beta_mc_agreement", "region=" + to_string(kind), mc.value,
                                              mc.stderr, exact.value, 3.0 * mc.stderr, Rule::within));
    } else {
      out.reports.push_back(StatsReport::make("k_beta_mc_relative_stderr", "region=" + to_string(kind),
                                              mc.stderr / mc.value, 0.0, 0.0, 0.01, Rule::below));
    }
    out.constants.push_back(ConstantRow{name, spec.d, spec.beta, to_string(kind), mc.value, mc.stderr,
                                        to_string(KBetaMethod::monte_carlo)});
  }
  const double h = 2.0 * cfg.half_extent / cfg.n;
  const Estimate self = cell_self_energy(h, spec);
  out.constants.push_back(ConstantRow{"cell_self_energy", spec.d, spec.beta, "cell", self.value, self.stderr,
                                      to_string(spec.d == 1 ? KBetaMethod::closed_form : KBetaMethod::monte_carlo)});
}

void run_lemma31(const ExperimentConfig& cfg, ResultSet& out) {
  const RieszSpec& spec = cfg.spec;
  std::vector<Point> ys;
  for (double y : cfg.lemma_y) {
    Point p{};
    p[0] = y;
    ys.push_back(p);
  }
  const auto coarse = log_uniform_grid(1e-3, 1e3, cfg.lemma_points);
  const auto fine = log_uniform_grid(1e-3, 1e3, 2 * cfg.lemma_points - 1);
  const auto rows_c = lemma31_check(spec, ys, coarse);
  const auto rows_f = lemma31_check(spec, ys, fine);

  Table table{{"y", "s", "ratio"}, {}};
  for (std::size_t i = 0; i < ys.size(); ++i) {
    const std::string params = "y=" + num(cfg.lemma_y[i]);
    const Lemma31Row& c = rows_c[i];
    const Lemma31Row& f = rows_f[i];
    out.reports.push_back(StatsReport::make("lemma31_max_ratio", params + ";s_argmax=" + num(f.argmax_s), f.max_ratio,
                                            0.0, std::numeric_limits<double>::infinity(), 0.0, Rule::below,
                                            "finite supremum over the s grid"));
    out.reports.push_back(StatsReport::make("lemma31_refinement", params,
                                            std::abs(c.max_ratio - f.max_ratio) / f.max_ratio, 0.0, 0.0, 0.02,
                                            Rule::below));
    out.reports.push_back(StatsReport::make("lemma31_small_s", params + ";s=1e-3", f.small_s_ratio, 0.0, 1.0, 0.01,
                                            Rule::within));
    out.reports.push_back(StatsReport::make("lemma31_large_s", params + ";s=1e3", f.large_s_ratio, 0.0, 1.0, 0.0,
                                            Rule::below, "ratio decays toward 0 as s grows"));
    const double base = std::pow(cfg.lemma_y[i], -spec.beta);
    for (double s : fine) {
      const double v = expected_inverse_power(std::span<const double>(ys[i].data(), spec.d), s, spec);
      table.rows.push_back({csv::format_double(cfg.lemma_y[i]), csv::format_double(s), csv::format_double(v / base)});
    }
  }
  out.tables["lemma31"] = std::move(table);
}

void run_noise_validate(const ExperimentConfig& cfg, unsigned workers, ResultSet& out) {
  const Lattice lat = cfg.lattice();
  guard_memory(8.0 * cfg.n_replicas * lat.size(), "noise validation");
  const SpectralCovariance noise = [&] {
    try {
      return build_embedding(lat, cfg.spec);
    } catch (const std::domain_error& e) {
      throw ConfigError(std::string("lattice.n=") + std::to_string(cfg.n) + ": " + e.what());
    }
  }();
  std::vector<SpatialField> slices(cfg.n_replicas, SpatialField(lat));
  parallel_for(cfg.n_replicas, workers, [&](std::uint32_t i) {
    RandomStream stream(cfg.seed, i, 0, StreamPurpose::diagnostic);
    SpectralWorkspace work(noise.plan());
    sample_slice(noise, cfg.dt, stream, work, slices[i]);
  });
  std::vector<MultiIndex> lags;
  for (int k : cfg.lags) lags.push_back(MultiIndex{k, 0, 0});
  const CovarianceReport rep = covariance_diagnostic(slices, lags, cfg.spec, cfg.dt);

  out.reports.push_back(StatsReport::make("embedding_clamped_mass", "n=" + std::to_string(cfg.n),
                                          noise.clamped_mass(), 0.0, 0.0, kMaxClampedMass, Rule::below));
  Table table{{"lag", "distance", "empirical", "theoretical", "ratio", "stderr"}, {}};
  for (const LagCovariance& l : rep.lags) {
    out.reports.push_back(StatsReport::make("noise_cov_ratio", "lag=" + std::to_string(l.lag[0]) + ";rho=" + num(l.distance),
                                            l.ratio, l.stderr / l.theoretical, 1.0, 0.1, Rule::within));
    table.rows.push_back({std::to_string(l.lag[0]), csv::format_double(l.distance), csv::format_double(l.empirical),
                          csv::format_double(l.theoretical), csv::format_double(l.ratio),
                          csv::format_double(l.stderr)});
  }
  out.tables["covariance"] = std::move(table);
}

void run_variance_limit(const ExperimentConfig& cfg, const Setup& setup, unsigned workers, ResultSet& out) {
  SimulationPlan plan{cfg.horizon, cfg.dt, cfg.record_times, setup.regions, false, false};
  const auto trajectories = simulate_all(cfg, setup, plan, workers, out);
  const LimitConstants constants = limit_constants(cfg, setup, workers, out);
  const std::size_t ti = cfg.record_times.size() - 1;
  const double t = cfg.record_times[ti];
  const double d = cfg.spec.d;

  Table table{{"R", "t", "variance", "stderr", "normalized", "target", "relative_error"}, {}};
  std::vector<double> rel;
  double target = 0.0;
  for (std::size_t r = 0; r < setup.regions.size(); ++r) {
    const double radius = setup.regions[r].radius;
    const SampleSet s = sample_set(trajectories, r, ti, radius);
    const Moment m = second_moment(s.values);
    if (!(m.value >= 1e-12)) throw DegenerateError("variance of G_R vanishes");
    const double scale = std::pow(radius, cfg.spec.beta - 2.0 * d);
    target = predicted_sigma_sq(t, radius, constants) * scale;
    const double normalized = m.value * scale;
    rel.push_back(std::abs(normalized - target) / target);
    table.rows.push_back({csv::format_double(radius), csv::format_double(t), csv::format_double(m.value),
                          csv::format_double(m.stderr), csv::format_double(normalized), csv::format_double(target),
                          csv::format_double(rel.back())});
    if (r + 1 == setup.regions.size()) {
      out.reports.push_back(StatsReport::make("variance_limit", rt_params(radius, t), normalized, m.stderr * scale,
                                              target, 0.15 * target, Rule::within));
    }
  }
  if (rel.size() >= 2) {
    out.reports.push_back(StatsReport::make(
        "variance_convergence", "R=" + num(cfg.radii.back()) + ";vs_R=" + num(cfg.radii.front()), rel.back(), 0.0,
        rel.front(), 0.0, Rule::below, "relative error at the largest radius below that at the smallest"));
  }
  out.tables["variance"] = std::move(table);
}

void run_clt(const ExperimentConfig& cfg, const Setup& setup, unsigned workers, ResultSet& out) {
  SimulationPlan plan{cfg.horizon, cfg.dt, cfg.record_times, setup.regions, false, false};
  const auto trajectories = simulate_all(cfg, setup, plan, workers, out);
  const std::size_t ti = cfg.record_times.size() - 1;
  const double t = cfg.record_times[ti];

  std::vector<SampleSet> sets;
  for (std::size_t r = 0; r < setup.regions.size(); ++r) {
    sets.push_back(sample_set(trajectories, r, ti, setup.regions[r].radius));
  }
  // Degeneracy is detected on the samples before any constant is needed.
  std::vector<std::vector<double>> standardized;
  for (const SampleSet& s : sets) standardized.push_back(standardize(s, StandardizeMode::empirical));

  const LimitConstants constants = limit_constants(cfg, setup, workers, out);
  const std::size_t n = trajectories.size();
  Table table{{"R", "t", "ks", "floor_1pct", "floor_01pct", "sigma_hat", "sigma_predicted"}, {}};
  std::vector<std::pair<double, double>> radius_sigma, radius_ks;
  for (std::size_t r = 0; r < sets.size(); ++r) {
    const double radius = sets[r].radius;
    const double ks = ks_distance(standardized[r]);
    const double sigma_hat = std::sqrt(second_moment(sets[r].values).value);
    const double sigma_pred = std::sqrt(predicted_sigma_sq(t, radius, constants));
    radius_sigma.emplace_back(radius, sigma_hat);
    radius_ks.emplace_back(radius, ks);
    table.rows.push_back({csv::format_double(radius), csv::format_double(t), csv::format_double(ks),
                          csv::format_double(ks_floor_1pct(n)), csv::format_double(ks_floor_01pct(n)),
                          csv::format_double(sigma_hat), csv::format_double(sigma_pred)});
    if (r + 1 == sets.size()) {
      out.reports.push_back(StatsReport::make("ks_distance", rt_params(radius, t), ks, 0.0, 0.0, 0.05, Rule::below,
                                              kDistanceNote));
      out.reports.push_back(StatsReport::make("sigma_ratio", rt_params(radius, t), sigma_hat / sigma_pred, 0.0, 1.0,
                                              0.15, Rule::within, "empirical over predicted normalization"));
    }
  }
  out.tables["ks"] = std::move(table);

  const PowerLawFit fit = scaling_fit(radius_sigma);
  out.reports.push_back(StatsReport::make("scaling_slope", "t=" + num(t), fit.slope, fit.slope_stderr,
                                          cfg.spec.d - cfg.spec.beta / 2.0, 0.05, Rule::within));
  out.reports.push_back(rate_direction_check(radius_ks, n));
  try {
    const RateFit rate = rate_fit(radius_ks, n);
    std::string note;
    for (const auto& w : rate.warnings) note += (note.empty() ? "" : "; ") + w;
    out.reports.push_back(
        StatsReport::make("rate_exponent", "t=" + num(t), rate.exponent, rate.stderr, 0.0, 0.0, Rule::below, note));
  } catch (const std::runtime_error& e) {
    out.message += std::string(out.message.empty() ? "" : "; ") + e.what();
  }
}

void run_fclt(const ExperimentConfig& cfg, const Setup& setup, unsigned workers, ResultSet& out) {
  SimulationPlan plan{cfg.horizon, cfg.dt, cfg.record_times, setup.regions, false, false};
  const auto trajectories = simulate_all(cfg, setup, plan, workers, out);
  const std::size_t region = setup.regions.size() - 1;
  const double radius = setup.regions[region].radius;
  const auto m = static_cast<Eigen::Index>(cfg.record_times.size());
  Eigen::MatrixXd samples(static_cast<Eigen::Index>(trajectories.size()), m);
  for (std::size_t r = 0; r < trajectories.size(); ++r) {
    for (Eigen::Index i = 0; i < m; ++i) samples(static_cast<Eigen::Index>(r), i) = trajectories[r].average(i, region);
  }
  for (Eigen::Index i = 0; i < m; ++i) {
    (void)standardize(sample_set(trajectories, region, static_cast<std::size_t>(i), radius), StandardizeMode::empirical);
  }
  const LimitConstants constants = limit_constants(cfg, setup, workers, out);
  const FunctionalCovReport rep = functional_cov_check(samples, cfg.record_times, radius, constants);
  out.reports.insert(out.reports.end(), rep.reports.begin(), rep.reports.end());
  Table table{{"t_i", "t_j", "empirical_cov", "limit_cov", "empirical_corr", "limit_corr"}, {}};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      table.rows.push_back({csv::format_double(cfg.record_times[i]), csv::format_double(cfg.record_times[j]),
                            csv::format_double(rep.empirical_cov(i, j)), csv::format_double(rep.limit_cov(i, j)),
                            csv::format_double(rep.empirical_corr(i, j)), csv::format_double(rep.limit_corr(i, j))});
    }
  }
  out.tables["fclt"] = std::move(table);
}

void run_tightness(const ExperimentConfig& cfg, const Setup& setup, unsigned workers, ResultSet& out) {
  SimulationPlan plan{cfg.horizon, cfg.dt, cfg.record_times, setup.regions, false, true};
  const auto trajectories = simulate_all(cfg, setup, plan, workers, out);
  const std::vector<long> lags = tightness_lag_steps(cfg);
  const std::size_t hi = setup.regions.size() - 1;
  const std::size_t lo = hi - 1;

  const IncrementFit fit = increment_moment_fit(trajectories, hi, cfg.dt, lags, cfg.moment_p);
  StatsReport slope = fit.report;
  slope.params = "R=" + num(setup.regions[hi].radius) + ";p=" + std::to_string(cfg.moment_p);
  out.reports.push_back(slope);
  const IncrementMoments m_lo = increment_moments(trajectories, lo, cfg.dt, lags, cfg.moment_p);
  out.reports.push_back(increment_r_scaling(m_lo, setup.regions[lo].radius, fit.moments, setup.regions[hi].radius,
                                            cfg.spec, cfg.moment_p));

  Table table{{"R", "lag", "moment"}, {}};
  for (const auto& [idx, m] : {std::pair{lo, &m_lo}, std::pair{hi, &fit.moments}}) {
    for (std::size_t k = 0; k < m->lags.size(); ++k) {
      table.rows.push_back({csv::format_double(setup.regions[idx].radius), csv::format_double(m->lags[k]),
                            csv::format_double(m->moments[k])});
    }
  }
  out.tables["increments"] = std::move(table);
}

void run_decay(const ExperimentConfig& cfg, const Setup& setup, unsigned workers, ResultSet& out) {
  guard_memory(8.0 * cfg.n_replicas * cfg.record_times.size() * setup.lattice.size(), "decay fields");
  SimulationPlan plan{cfg.horizon, cfg.dt, cfg.record_times, setup.regions, true, false};
  auto trajectories = simulate_all(cfg, setup, plan, workers, out);
  std::vector<SpatialField> fields;
  fields.reserve(trajectories.size());
  for (Trajectory& tr : trajectories) fields.push_back(std::move(tr.fields.back()));
  trajectories.clear();
  const DecayReport rep = correlation_decay_check(fields, setup.sigma, cfg.decay_lags, cfg.spec, cfg.collar());
  out.reports.push_back(rep.report);
  Table table{{"lag", "distance", "psi", "excess", "excess_stderr", "product"}, {}};
  for (const DecayRow& row : rep.rows) {
    table.rows.push_back({std::to_string(row.lag_cells), csv::format_double(row.distance), csv::format_double(row.psi),
                          csv::format_double(row.excess), csv::format_double(row.excess_stderr),
                          csv::format_double(row.product)});
  }
  out.tables["decay"] = std::move(table);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

nlohmann::json report_json(const StatsReport& r) {
  auto number = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) return v;
    return csv::format_double(v);
  };
  return {{"metric", r.metric},        {"params", r.params},       {"estimate", number(r.estimate)},
          {"stderr", number(r.stderr)}, {"target", number(r.target)}, {"tolerance", number(r.tolerance)},
          {"rule", to_string(r.rule)},  {"pass", r.pass},             {"note", r.note}};
}

std::string status_name(ExitStatus s) {
  switch (s) {
    case ExitStatus::pass: return "pass";
    case ExitStatus::statistical_failure: return "statistical_failure";
    case ExitStatus::degenerate: return "degenerate";
    case ExitStatus::instability: return "instability";
    case ExitStatus::config_error: return "config_error";
  }
  return "?";
}

}  // namespace

bool ResultSet::all_pass() const {
  return std::all_of(reports.begin(), reports.end(), [](const StatsReport& r) { return r.pass; });
}

unsigned resolve_workers(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::uint32_t count, unsigned workers, const std::function<void(std::uint32_t)>& job) {
  workers = std::min<unsigned>(resolve_workers(workers), std::max<std::uint32_t>(count, 1));
  std::atomic<std::uint32_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex mu;
  std::uint32_t first_failure = count;
  std::exception_ptr error;

  auto worker = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::uint32_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        job(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (i < first_failure) {
          first_failure = i;
          error = std::current_exception();
        }
        failed.store(true);
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
}

std::vector<Trajectory> run_replicas(const Simulator& simulator, std::uint64_t seed, std::uint32_t count,
                                     unsigned workers) {
  std::vector<Trajectory> out(count);
  parallel_for(count, workers, [&](std::uint32_t i) { out[i] = simulator.run(seed, i); });
  return out;
}

ResultSet run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const auto started = std::chrono::steady_clock::now();
  const unsigned workers = resolve_workers(options.workers);
  ResultSet out;
  out.config = config;
  try {
    if (config.kind == ExperimentKind::constants) {
      run_constants(config, out);
    } else if (config.kind == ExperimentKind::lemma31) {
      run_lemma31(config, out);
    } else if (config.kind == ExperimentKind::noise_validate) {
      run_noise_validate(config, workers, out);
    } else {
      const Setup setup = make_setup(config);
      switch (config.kind) {
        case ExperimentKind::variance_limit: run_variance_limit(config, setup, workers, out); break;
        case ExperimentKind::clt: run_clt(config, setup, workers, out); break;
        case ExperimentKind::fclt: run_fclt(config, setup, workers, out); break;
        case ExperimentKind::tightness: run_tightness(config, setup, workers, out); break;
        case ExperimentKind::decay: run_decay(config, setup, workers, out); break;
        default: break;
      }
    }
    out.status = out.all_pass() ? ExitStatus::pass : ExitStatus::statistical_failure;
  } catch (const DegenerateError& e) {
    out.status = ExitStatus::degenerate;
    out.message = "degenerate: sigma(1)=0";
  } catch (const InstabilityError& e) {
    out.status = ExitStatus::instability;
    out.message = std::string("instability at replica ") + std::to_string(e.replica()) + ", step " +
                  std::to_string(e.step()) + ": " + e.what();
  }
  out.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

std::vector<std::filesystem::path> emit_results(const ResultSet& results, const std::filesystem::path& outdir) {
  std::error_code ec;
  std::filesystem::create_directories(outdir, ec);
  if (ec) throw std::runtime_error("cannot create " + outdir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> files;
  auto emit = [&](const std::string& name, const std::string& text) {
    const auto path = outdir / name;
    write_text(path, text);
    files.push_back(path);
  };

  {
    std::ostringstream os;
    csv::write_row(os, {"replica_id", "R", "t", "G_R"});
    for (const SampleRow& s : results.samples) {
      csv::write_row(os, {std::to_string(s.replica_id), csv::format_double(s.radius), csv::format_double(s.time),
                          csv::format_double(s.value)});
    }
    emit("samples.csv", os.str());
  }
  {
    std::ostringstream os;
    write_reports_csv(os, results.reports);
    emit("reports.csv", os.str());
  }
  const ExperimentConfig& cfg = results.config;
  const std::string hash = hex64(cfg.hash());
  {
    nlohmann::json j;
    j["provenance"] = {{"kind", to_string(cfg.kind)},
                       {"seed", cfg.seed},
                       {"config_hash", hash},
                       {"n_replicas", cfg.n_replicas},
                       {"distance", kDistanceNote}};
    j["status"] = status_name(results.status);
    j["message"] = results.message;
    j["reports"] = nlohmann::json::array();
    for (const StatsReport& r : results.reports) j["reports"].push_back(report_json(r));
    emit("reports.json", j.dump(2) + "\n");
  }
  {
    std::ostringstream os;
    write_constants_csv(os, results.constants);
    emit("constants.csv", os.str());
  }
  for (const auto& [name, table] : results.tables) {
    std::ostringstream os;
    csv::write_row(os, table.header);
    for (const auto& row : table.rows) csv::write_row(os, row);
    emit(name + ".csv", os.str());
  }

  nlohmann::json m;
  m["config"] = cfg.echo();
  m["config_hash"] = hash;
  m["seed"] = cfg.seed;
  m["kind"] = to_string(cfg.kind);
  m["status"] = status_name(results.status);
  m["exit_code"] = static_cast<int>(results.status);
  m["versions"] = {{"riesz-she", kVersion},
                   {"fftw", std::string(fftw_version)},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"boost", std::string(BOOST_LIB_VERSION)}};
  m["files"] = nlohmann::json::array();
  for (const auto& f : files) m["files"].push_back(f.filename().string());
  const auto manifest = outdir / "manifest.json";
  write_text(manifest, m.dump(2) + "\n");
  files.push_back(manifest);
  return files;
}

}  // namespace rshe
