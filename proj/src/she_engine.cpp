#include "rshe/she_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "rshe/errors.hpp"

namespace rshe {

// ---------------------------------------------------------------- sigma

Nonlinearity::Nonlinearity(NonlinearityKind kind, double a, double b, double c, double lipschitz)
    : kind_(kind), a_(a), b_(b), c_(c), lipschitz_(lipschitz) {
  at_one_ = (*this)(1.0);
  validate();
}

Nonlinearity Nonlinearity::linear() { return {NonlinearityKind::linear, 1.0, 0.0, 0.0, 1.0}; }

Nonlinearity Nonlinearity::affine(double a, double b) { return {NonlinearityKind::affine, a, b, 0.0, std::abs(a)}; }

Nonlinearity Nonlinearity::sine_affine(double a, double b, double c) {
  return {NonlinearityKind::sine_affine, a, b, c, std::abs(a) + std::abs(b)};
}

Nonlinearity Nonlinearity::clipped_linear(double a, double cap) {
  if (!(cap > 0.0)) throw std::invalid_argument("clipped-linear cap must be positive");
  return {NonlinearityKind::clipped_linear, a, cap, 0.0, std::abs(a)};
}

Nonlinearity Nonlinearity::with_lipschitz(double bound) const {
  Nonlinearity copy = *this;
  copy.lipschitz_ = bound;
  copy.validate();
  return copy;
}

double Nonlinearity::operator()(double v) const {
  switch (kind_) {
    case NonlinearityKind::linear: return v;
    case NonlinearityKind::affine: return a_ * v + b_;
    case NonlinearityKind::sine_affine: return a_ * std::sin(v) + b_ * v + c_;
    case NonlinearityKind::clipped_linear: return a_ * std::min(std::max(v, 0.0), b_);
  }
  return 0.0;
}

bool Nonlinearity::nondecreasing() const {
  switch (kind_) {
    case NonlinearityKind::linear: return true;
    case NonlinearityKind::affine: return a_ >= 0.0;
    case NonlinearityKind::sine_affine: return b_ >= std::abs(a_);
    case NonlinearityKind::clipped_linear: return a_ >= 0.0;
  }
  return false;
}

void Nonlinearity::validate() const {
  if (!(lipschitz_ >= 0.0) || !std::isfinite(lipschitz_)) {
    throw std::invalid_argument("Lipschitz bound must be finite and nonnegative");
  }
  constexpr int kPoints = 10000;
  const double lo = -10.0;
  const double step = 20.0 / (kPoints - 1);
  double prev = (*this)(lo);
  double max_slope = 0.0;
  for (int i = 1; i < kPoints; ++i) {
    const double cur = (*this)(lo + i * step);
    max_slope = std::max(max_slope, std::abs(cur - prev) / step);
    prev = cur;
  }
  if (max_slope > lipschitz_ * (1.0 + 1e-6)) {
    std::ostringstream msg;
    msg << "declared Lipschitz bound " << lipschitz_ << " is below the observed slope " << max_slope;
    throw std::invalid_argument(msg.str());
  }
}

// ---------------------------------------------------------------- u0

InitialCondition InitialCondition::constant(double value) {
  if (!std::isfinite(value)) throw std::invalid_argument("initial constant must be finite");
  InitialCondition ic;
  ic.lower_ = ic.upper_ = value;
  return ic;
}

InitialCondition InitialCondition::bounded(SpatialField table, double lower, double upper) {
  if (!(lower > 0.0) || !(lower <= upper)) {
    throw std::invalid_argument("initial bounds need 0 < c1 <= c2");
  }
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!(table[i] >= lower && table[i] <= upper)) {
      std::ostringstream msg;
      msg << "initial value " << table[i] << " at cell " << i << " outside [" << lower << ", " << upper << "]";
      throw std::invalid_argument(msg.str());
    }
  }
  InitialCondition ic;
  ic.lower_ = lower;
  ic.upper_ = upper;
  ic.table_ = std::move(table);
  return ic;
}

SpatialField InitialCondition::on(const Lattice& lattice) const {
  if (!table_) return SpatialField(lattice, lower_);
  if (!(table_->lattice == lattice)) throw std::invalid_argument("initial table lives on a different lattice");
  return *table_;
}

// ---------------------------------------------------------------- heat flow

HeatSemigroup::HeatSemigroup(std::shared_ptr<const SpectralPlan> plan, double tau)
    : plan_(std::move(plan)), tau_(tau) {
  if (!(tau >= 0.0)) throw std::invalid_argument("heat semigroup time must be nonnegative");
  const auto& k2 = plan_->wavenumber_sq();
  const double inv_n = 1.0 / static_cast<double>(plan_->real_size());
  multiplier_.resize(k2.size());
  for (std::size_t c = 0; c < k2.size(); ++c) multiplier_[c] = std::exp(-0.5 * tau * k2[c]) * inv_n;
}

void HeatSemigroup::apply(SpatialField& field, SpectralWorkspace& work) const {
  if (tau_ == 0.0) return;
  const auto& v = field.values;
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return;
  plan_->forward(field.values.data(), work.spectrum.data());
  for (std::size_t c = 0; c < multiplier_.size(); ++c) work.spectrum[c] *= multiplier_[c];
  plan_->backward(work.spectrum.data(), field.values.data());
}

SpatialField heat_semigroup(const SpatialField& field, double tau) {
  auto plan = make_plan(field.lattice);
  HeatSemigroup s(plan, tau);
  SpectralWorkspace work(*plan);
  SpatialField out = field;
  s.apply(out, work);
  return out;
}

SpatialField mean_field(const InitialCondition& init, const Lattice& lattice, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("mean_field time must be nonnegative");
  SpatialField u0 = init.on(lattice);
  if (init.is_constant() || t == 0.0) return u0;
  return heat_semigroup(u0, t);
}

// ---------------------------------------------------------------- stepping

Stepper::Stepper(std::shared_ptr<const SpectralPlan> plan, Nonlinearity sigma, double dt)
    : sigma_(std::move(sigma)), dt_(dt), semigroup_(std::move(plan), dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("time step must be positive");
}

void Stepper::advance(FieldState& state, const SpatialField& slice, SpectralWorkspace& work) const {
  auto& u = state.field.values;
  if (slice.size() != u.size()) throw std::invalid_argument("noise slice and field sizes differ");
  for (std::size_t i = 0; i < u.size(); ++i) u[i] += sigma_(u[i]) * slice[i];
  semigroup_.apply(state.field, work);
  for (double x : u) {
    if (!std::isfinite(x)) {
      throw InstabilityError("blow-up/instability; reduce dt or amplitude", -1, state.step_index);
    }
  }
  ++state.step_index;
  state.time = static_cast<double>(state.step_index) * dt_;
}

FieldState step(const FieldState& state, const SpatialField& slice, const Nonlinearity& sigma, double dt) {
  auto plan = make_plan(state.field.lattice);
  Stepper stepper(plan, sigma, dt);
  SpectralWorkspace work(*plan);
  FieldState next = state;
  stepper.advance(next, slice, work);
  return next;
}

// ---------------------------------------------------------------- replicas

long snap_to_grid(double t, double dt) {
  const double k = std::round(t / dt);
  if (std::abs(k * dt - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "time " << t << " is not a multiple of dt=" << dt;
    throw std::invalid_argument(msg.str());
  }
  return static_cast<long>(k);
}

Simulator::Simulator(const SpectralCovariance& noise, Nonlinearity sigma, InitialCondition init, SimulationPlan plan)
    : noise_(noise), sigma_(std::move(sigma)), init_(std::move(init)), plan_(std::move(plan)) {
  const Lattice& lat = noise.lattice();
  if (!(plan_.dt > 0.0)) throw std::invalid_argument("time step must be positive");
  if (!(plan_.horizon >= 0.0)) throw std::invalid_argument("horizon must be nonnegative");
  n_steps_ = snap_to_grid(plan_.horizon, plan_.dt);

  const double collar = 6.0 * std::sqrt(plan_.horizon);
  for (const Region& r : plan_.regions) {
    const double need = r.reach(lat.dim()) + collar;
    if (lat.half_extent() < need) {
      std::ostringstream msg;
      msg << "L=" << lat.half_extent() << " < R_max+6*sqrt(T)=" << need;
      throw std::invalid_argument(msg.str());
    }
    masks_.emplace_back(lat, r);
  }
  for (double t : plan_.record_times) {
    if (t > plan_.horizon * (1.0 + 1e-12)) throw std::invalid_argument("record time beyond horizon");
    record_steps_.push_back(snap_to_grid(t, plan_.dt));
  }
  if (!std::is_sorted(record_steps_.begin(), record_steps_.end())) {
    throw std::invalid_argument("record times must be sorted");
  }

  initial_ = init_.on(lat);
  constant_mean_ = init_.is_constant();
  for (long s : record_steps_) record_means_.push_back(mean_field(init_, lat, s * plan_.dt));
  if (plan_.average_every_step && !constant_mean_) {
    for (long s = 0; s <= n_steps_; ++s) step_means_.push_back(mean_field(init_, lat, s * plan_.dt));
  }
  stepper_ = std::make_unique<Stepper>(noise.shared_plan(), sigma_, plan_.dt);
}

Trajectory Simulator::run(std::uint64_t seed, std::uint32_t replica) const {
  Trajectory traj;
  traj.replica_id = replica;
  traj.record_times.reserve(record_steps_.size());
  for (long s : record_steps_) traj.record_times.push_back(static_cast<double>(s) * plan_.dt);
  traj.record_steps = record_steps_;

  SpectralWorkspace work(noise_.plan());
  FieldState state{initial_, 0.0, 0};
  SpatialField slice(noise_.lattice());

  auto averages_now = [&](const SpatialField& mean) {
    std::vector<double> row;
    row.reserve(masks_.size());
    for (const auto& m : masks_) row.push_back(m.integrate(state.field.values, mean.values));
    return row;
  };
  auto step_mean = [&](long s) -> const SpatialField& { return constant_mean_ ? initial_ : step_means_[s]; };

  std::size_t next_record = 0;
  auto record = [&]() {
    while (next_record < record_steps_.size() && record_steps_[next_record] == state.step_index) {
      traj.averages.push_back(averages_now(record_means_[next_record]));
      if (plan_.store_fields) traj.fields.push_back(state.field);
      ++next_record;
    }
    if (plan_.average_every_step) traj.step_averages.push_back(averages_now(step_mean(state.step_index)));
  };

  record();
  for (long s = 0; s < n_steps_; ++s) {
    RandomStream stream(seed, replica, static_cast<std::uint32_t>(s), StreamPurpose::noise);
    sample_slice(noise_, plan_.dt, stream, work, slice);
    try {
      stepper_->advance(state, slice, work);
    } catch (const InstabilityError& e) {
      throw InstabilityError(e.what(), static_cast<long>(replica), s);
    }
    record();
  }
  return traj;
}

Trajectory simulate(const SpectralCovariance& noise, const Nonlinearity& sigma, const InitialCondition& init,
                    double horizon, double dt, const std::vector<double>& record_times,
                    const std::vector<Region>& regions, std::uint64_t seed, std::uint32_t replica) {
  SimulationPlan plan{horizon, dt, record_times, regions, false, false};
  Simulator sim(noise, sigma, init, std::move(plan));
  return sim.run(seed, replica);
}

// ---------------------------------------------------------------- snapshots

namespace {

constexpr char kMagic[5] = {'R', 'S', 'H', 'E', '1'};

void put_u64(std::ostream& os, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char bytes[8];
  is.read(reinterpret_cast<char*>(bytes), 8);
  if (!is) throw std::runtime_error("snapshot truncated");
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = (v << 8) | bytes[i];
  return v;
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }
double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace

void write_snapshot(const std::filesystem::path& path, const SpatialField& field, double time) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open snapshot for writing: " + path.string());
  os.write(kMagic, sizeof kMagic);
  put_u64(os, static_cast<std::uint64_t>(field.lattice.dim()));
  put_u64(os, static_cast<std::uint64_t>(field.lattice.points_per_axis()));
  put_f64(os, field.lattice.spacing());
  put_f64(os, time);
  for (double v : field.values) put_f64(os, v);
  if (!os) throw std::runtime_error("failed writing snapshot: " + path.string());
}

std::pair<SpatialField, double> read_snapshot(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open snapshot: " + path.string());
  char magic[5];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw std::runtime_error("not an RSHE1 snapshot: " + path.string());
  }
  const auto d = static_cast<int>(get_u64(is));
  const auto n = static_cast<int>(get_u64(is));
  const double h = get_f64(is);
  const double time = get_f64(is);
  SpatialField field(Lattice(d, n, 0.5 * n * h));
  for (double& v : field.values) v = get_f64(is);
  return {std::move(field), time};
}

}  // namespace rshe
