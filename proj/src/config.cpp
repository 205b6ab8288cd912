#include "rshe/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <sstream>

#include "rshe/csv.hpp"
#include "rshe/errors.hpp"

namespace rshe {

namespace {

constexpr ExperimentKind kAllKinds[] = {
    ExperimentKind::noise_validate, ExperimentKind::variance_limit, ExperimentKind::clt,
    ExperimentKind::fclt,           ExperimentKind::tightness,      ExperimentKind::decay,
    ExperimentKind::lemma31,        ExperimentKind::constants,
};

bool simulates(ExperimentKind k) {
  return k == ExperimentKind::variance_limit || k == ExperimentKind::clt || k == ExperimentKind::fclt ||
         k == ExperimentKind::tightness || k == ExperimentKind::decay;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) { return csv::format_double(v); }

/// Key/value store that remembers which keys were consumed.
class KeyValues {
 public:
  void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::optional<std::string> take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    std::string v = it->second;
    values_.erase(it);
    return v;
  }

  void reject_leftovers() const {
    if (!values_.empty()) throw ConfigError("unknown key '" + values_.begin()->first + "'");
  }

 private:
  std::map<std::string, std::string> values_;
};

double to_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size()) throw ConfigError(key + "=" + t + ": not a number");
  return v;
}

long long to_integer(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (res.ec != std::errc{} || res.ptr != t.data() + t.size()) throw ConfigError(key + "=" + t + ": not an integer");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::string t = trim(text);
  if (!t.empty() && t.front() == '[' && t.back() == ']') t = t.substr(1, t.size() - 2);
  std::vector<std::string> out;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::vector<double> to_doubles(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(key, item));
  return out;
}

std::vector<int> to_ints(const std::string& key, const std::string& text) {
  std::vector<int> out;
  for (const auto& item : split_list(text)) out.push_back(static_cast<int>(to_integer(key, item)));
  return out;
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

/// Integer numerators over a common power-of-ten denominator, if one exists.
std::optional<std::pair<std::vector<long long>, long long>> as_decimal_fractions(const std::vector<double>& xs) {
  long long denom = 1;
  for (int digits = 0; digits <= 9; ++digits, denom *= 10) {
    std::vector<long long> nums;
    bool ok = true;
    for (double x : xs) {
      const double scaled = x * static_cast<double>(denom);
      const double r = std::round(scaled);
      if (std::abs(scaled - r) > 1e-9 * std::max(1.0, std::abs(scaled))) {
        ok = false;
        break;
      }
      nums.push_back(static_cast<long long>(r));
    }
    if (ok) return std::make_pair(nums, denom);
  }
  return std::nullopt;
}

bool is_multiple(double t, double dt) {
  const double k = std::round(t / dt);
  return std::abs(k * dt - t) <= 1e-9 * std::max(1.0, std::abs(t));
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::noise_validate: return "noise-validate";
    case ExperimentKind::variance_limit: return "variance-limit";
    case ExperimentKind::clt: return "clt";
    case ExperimentKind::fclt: return "fclt";
    case ExperimentKind::tightness: return "tightness";
    case ExperimentKind::decay: return "decay";
    case ExperimentKind::lemma31: return "lemma31";
    case ExperimentKind::constants: return "constants";
  }
  return "?";
}

std::optional<ExperimentKind> parse_kind(std::string_view text) {
  for (ExperimentKind k : kAllKinds) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

Nonlinearity SigmaConfig::build() const {
  Nonlinearity s = Nonlinearity::linear();
  if (kind == "linear") {
    s = Nonlinearity::linear();
  } else if (kind == "affine") {
    s = Nonlinearity::affine(a, b);
  } else if (kind == "sine-affine") {
    s = Nonlinearity::sine_affine(a, b, c);
  } else if (kind == "clipped-linear") {
    s = Nonlinearity::clipped_linear(a, cap);
  } else {
    throw ConfigError("sigma.kind=" + kind + ": expected linear, affine, sine-affine or clipped-linear");
  }
  return lipschitz ? s.with_lipschitz(*lipschitz) : s;
}

InitialCondition InitConfig::build(const Lattice& lattice) const {
  if (kind == "constant") return InitialCondition::constant(value);
  if (kind == "cosine") {
    if (!(period > 0.0)) throw ConfigError("init.period=" + fmt(period) + ": must be positive");
    SpatialField table(lattice);
    const double mid = 0.5 * (lower + upper);
    const double amp = 0.5 * (upper - lower);
    for (std::size_t i = 0; i < table.size(); ++i) {
      table[i] = mid + amp * std::cos(2.0 * std::numbers::pi * lattice.center(i)[0] / period);
      table[i] = std::clamp(table[i], lower, upper);
    }
    return InitialCondition::bounded(std::move(table), lower, upper);
  }
  if (kind == "file") {
    auto [field, time] = read_snapshot(path);
    (void)time;
    if (!(field.lattice == lattice)) throw ConfigError("init.path=" + path + ": snapshot lattice differs from config");
    return InitialCondition::bounded(std::move(field), lower, upper);
  }
  throw ConfigError("init.kind=" + kind + ": expected constant, cosine or file");
}

double ExperimentConfig::collar() const { return 6.0 * std::sqrt(horizon); }

std::string ExperimentConfig::echo() const {
  std::ostringstream os;
  os << "kind = " << to_string(kind) << "\n";
  os << "d = " << spec.d << "\n";
  os << "beta = " << fmt(spec.beta) << "\n";
  os << "T = " << fmt(horizon) << "\n";
  os << "dt = " << fmt(dt) << "\n";
  os << "record_times = " << join(record_times) << "\n";
  os << "region = " << (region_kind == RegionKind::ball ? "ball" : "box") << "\n";
  os << "center = " << join(std::vector<double>(center.begin(), center.begin() + spec.d)) << "\n";
  os << "R_list = " << join(radii) << "\n";
  os << "n_replicas = " << n_replicas << "\n";
  os << "seed = " << seed << "\n";
  os << "lags = " << join(lags) << "\n";
  os << "decay_lags = " << join(decay_lags) << "\n";
  os << "moment_p = " << moment_p << "\n";
  os << "eta_replicas = " << eta_replicas << "\n";
  os << "eta_points = " << eta_points << "\n";
  os << "mc_samples = " << mc_samples << "\n";
  os << "lemma_y = " << join(lemma_y) << "\n";
  os << "lemma_points = " << lemma_points << "\n";
  os << "\n[lattice]\n";
  os << "n = " << n << "\n";
  os << "L = " << fmt(half_extent) << "\n";
  os << "\n[sigma]\n";
  os << "kind = " << sigma.kind << "\n";
  os << "a = " << fmt(sigma.a) << "\n";
  os << "b = " << fmt(sigma.b) << "\n";
  os << "c = " << fmt(sigma.c) << "\n";
  os << "cap = " << fmt(sigma.cap) << "\n";
  if (sigma.lipschitz) os << "lipschitz = " << fmt(*sigma.lipschitz) << "\n";
  os << "\n[init]\n";
  os << "kind = " << init.kind << "\n";
  os << "value = " << fmt(init.value) << "\n";
  os << "lower = " << fmt(init.lower) << "\n";
  os << "upper = " << fmt(init.upper) << "\n";
  os << "period = " << fmt(init.period) << "\n";
  if (!init.path.empty()) os << "path = " << init.path << "\n";
  return os.str();
}

std::uint64_t ExperimentConfig::hash() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : echo()) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<long> tightness_lag_steps(const ExperimentConfig& config) {
  std::vector<long> out;
  if (!(config.dt > 0.0)) return out;
  const long cap = static_cast<long>(std::floor(std::min(0.1, config.horizon) / config.dt * (1.0 + 1e-9)));
  for (long k = 4; k <= cap; k *= 2) out.push_back(k);
  return out;
}

double default_time_step(double h, double horizon, const std::vector<double>& times) {
  const double cap = 0.25 * h * h;
  std::vector<double> all = times;
  all.push_back(horizon);
  all.erase(std::remove(all.begin(), all.end(), 0.0), all.end());
  if (all.empty()) return cap;
  const auto fractions = as_decimal_fractions(all);
  if (!fractions) {
    throw ConfigError("record_times/T have no common decimal step; set dt explicitly");
  }
  long long g = 0;
  for (long long v : fractions->first) g = std::gcd(g, v);
  const double quantum = static_cast<double>(g) / static_cast<double>(fractions->second);
  return quantum / std::ceil(quantum / cap * (1.0 - 1e-12));
}

ExperimentConfig parse_config(std::string_view text, const ConfigOverrides& overrides) {
  KeyValues kv;
  {
    std::string section;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']') throw ConfigError("line " + std::to_string(line_no) + ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        if (section != "lattice" && section != "sigma" && section != "init") {
          throw ConfigError("unknown section [" + section + "]");
        }
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
      std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (section.empty()) {
        if (key == "n" || key == "L") key = "lattice." + key;
        else if (key == "sigma" || key == "init") key += ".kind";
      } else {
        key = section + "." + key;
      }
      if (kv.has(key)) throw ConfigError("duplicate key '" + key + "'");
      kv.set(key, value);
    }
  }

  ExperimentConfig cfg;
  auto num = [&](const std::string& key) -> std::optional<double> {
    auto v = kv.take(key);
    return v ? std::optional(to_double(key, *v)) : std::nullopt;
  };
  auto integer = [&](const std::string& key) -> std::optional<long long> {
    auto v = kv.take(key);
    return v ? std::optional(to_integer(key, *v)) : std::nullopt;
  };
  auto require = [](const std::string& key, auto opt) {
    if (!opt) throw ConfigError("missing required key '" + key + "'");
    return *opt;
  };

  if (auto k = kv.take("kind")) {
    auto parsed = parse_kind(trim(*k));
    if (!parsed) throw ConfigError("kind=" + *k + ": unknown experiment kind");
    cfg.kind = *parsed;
  }
  if (overrides.kind) cfg.kind = *overrides.kind;

  const long long d = require("d", integer("d"));
  const double beta = require("beta", num("beta"));
  if (d < 1 || d > kMaxDim) throw ConfigError("d=" + std::to_string(d) + ": must be 1, 2 or 3");
  const double beta_cap = std::min<double>(static_cast<double>(d), 2.0);
  if (!(beta > 0.0) || !(beta < beta_cap)) {
    throw ConfigError("beta=" + fmt(beta) + ": beta must be < min(d,2)=" + fmt(beta_cap) + " and > 0");
  }
  cfg.spec = RieszSpec{static_cast<int>(d), beta};

  cfg.n = static_cast<int>(require("lattice.n", integer("lattice.n")));
  if (!is_power_of_two(cfg.n) || cfg.n < 4) {
    throw ConfigError("lattice.n=" + std::to_string(cfg.n) + ": must be a power of two >= 4");
  }
  cfg.half_extent = require("lattice.L", num("lattice.L"));
  if (!(cfg.half_extent > 0.0)) throw ConfigError("lattice.L=" + fmt(cfg.half_extent) + ": must be positive");
  const double h = 2.0 * cfg.half_extent / cfg.n;

  cfg.horizon = num("T").value_or(0.25);
  if (!(cfg.horizon >= 0.0)) throw ConfigError("T=" + fmt(cfg.horizon) + ": must be nonnegative");

  if (auto v = kv.take("record_times")) cfg.record_times = to_doubles("record_times", *v);
  if (cfg.record_times.empty()) cfg.record_times = {cfg.horizon};
  std::sort(cfg.record_times.begin(), cfg.record_times.end());
  cfg.record_times.erase(std::unique(cfg.record_times.begin(), cfg.record_times.end()), cfg.record_times.end());
  for (double t : cfg.record_times) {
    if (t < 0.0 || t > cfg.horizon * (1.0 + 1e-12)) {
      throw ConfigError("record_times entry " + fmt(t) + " outside [0, T=" + fmt(cfg.horizon) + "]");
    }
  }

  if (auto dt = num("dt")) {
    cfg.dt = *dt;
    if (!(cfg.dt > 0.0)) throw ConfigError("dt=" + fmt(cfg.dt) + ": must be positive");
    if (!is_multiple(cfg.horizon, cfg.dt)) {
      throw ConfigError("dt=" + fmt(cfg.dt) + " does not divide T=" + fmt(cfg.horizon));
    }
    for (double t : cfg.record_times) {
      if (!is_multiple(t, cfg.dt)) throw ConfigError("record time " + fmt(t) + " is not a multiple of dt=" + fmt(cfg.dt));
    }
  } else {
    cfg.dt = default_time_step(h, cfg.horizon, cfg.record_times);
  }

  if (auto r = kv.take("region")) {
    const std::string k = trim(*r);
    if (k == "ball") cfg.region_kind = RegionKind::ball;
    else if (k == "box") cfg.region_kind = RegionKind::box;
    else throw ConfigError("region=" + k + ": expected ball or box");
  }
  if (auto c = kv.take("center")) {
    const auto comps = to_doubles("center", *c);
    if (comps.size() != static_cast<std::size_t>(d)) {
      throw ConfigError("center has " + std::to_string(comps.size()) + " components, d=" + std::to_string(d));
    }
    std::copy(comps.begin(), comps.end(), cfg.center.begin());
  }
  if (auto r = kv.take("R_list")) cfg.radii = to_doubles("R_list", *r);
  std::sort(cfg.radii.begin(), cfg.radii.end());
  for (double r : cfg.radii) {
    if (!(r > 0.0)) throw ConfigError("R_list entry " + fmt(r) + ": must be positive");
  }

  cfg.n_replicas = static_cast<std::uint32_t>(integer("n_replicas").value_or(4000));
  if (overrides.replicas) cfg.n_replicas = *overrides.replicas;
  if (auto s = kv.take("seed")) cfg.seed = static_cast<std::uint64_t>(std::stoull(trim(*s)));
  if (overrides.seed) cfg.seed = *overrides.seed;

  if (auto v = kv.take("lags")) cfg.lags = to_ints("lags", *v);
  if (auto v = kv.take("decay_lags")) cfg.decay_lags = to_ints("decay_lags", *v);
  cfg.moment_p = static_cast<int>(integer("moment_p").value_or(2));
  cfg.eta_replicas = static_cast<std::uint32_t>(integer("eta_replicas").value_or(400));
  cfg.eta_points = static_cast<std::uint32_t>(integer("eta_points").value_or(11));
  cfg.mc_samples = static_cast<std::uint64_t>(integer("mc_samples").value_or(1'000'000));
  if (auto v = kv.take("lemma_y")) cfg.lemma_y = to_doubles("lemma_y", *v);
  cfg.lemma_points = static_cast<std::uint32_t>(integer("lemma_points").value_or(61));

  if (auto v = kv.take("sigma.kind")) cfg.sigma.kind = trim(*v);
  if (auto v = num("sigma.a")) cfg.sigma.a = *v;
  if (auto v = num("sigma.b")) cfg.sigma.b = *v;
  if (auto v = num("sigma.c")) cfg.sigma.c = *v;
  if (auto v = num("sigma.cap")) cfg.sigma.cap = *v;
  if (auto v = num("sigma.lipschitz")) cfg.sigma.lipschitz = *v;

  if (auto v = kv.take("init.kind")) cfg.init.kind = trim(*v);
  if (auto v = num("init.value")) cfg.init.value = *v;
  if (auto v = num("init.lower")) cfg.init.lower = *v;
  if (auto v = num("init.upper")) cfg.init.upper = *v;
  if (auto v = num("init.period")) cfg.init.period = *v;
  if (auto v = kv.take("init.path")) cfg.init.path = trim(*v);

  kv.reject_leftovers();

  // Cross-key invariants.
  try {
    (void)cfg.sigma.build();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("sigma: ") + e.what());
  }
  try {
    (void)cfg.init.build(cfg.lattice());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("init: ") + e.what());
  } catch (const std::runtime_error& e) {
    throw ConfigError(std::string("init: ") + e.what());
  }

  const bool sim = simulates(cfg.kind);
  if (sim) {
    if (cfg.radii.empty()) throw ConfigError("R_list is required for kind " + to_string(cfg.kind));
    double reach = 0.0;
    for (int a = 0; a < d; ++a) reach = std::max(reach, std::abs(cfg.center[a]));
    const double need = cfg.radii.back() + reach + cfg.collar();
    if (cfg.half_extent < need) {
      throw ConfigError("L=" + fmt(cfg.half_extent) + " < R_max+6√T=" + fmt(need));
    }
    if (cfg.n_replicas < 100) {
      throw ConfigError("n_replicas=" + std::to_string(cfg.n_replicas) + " < 100 needed for statistics");
    }
    cfg.eta_replicas = std::min(cfg.eta_replicas, cfg.n_replicas);
    if (cfg.eta_replicas < 100) throw ConfigError("eta_replicas=" + std::to_string(cfg.eta_replicas) + " < 100");
    if (cfg.eta_points < 2) throw ConfigError("eta_points=" + std::to_string(cfg.eta_points) + " < 2");
  }
  if (cfg.kind == ExperimentKind::noise_validate && cfg.n_replicas < 100) {
    throw ConfigError("n_replicas=" + std::to_string(cfg.n_replicas) + " < 100 slices");
  }
  if (cfg.kind == ExperimentKind::fclt && cfg.record_times.size() < 2) {
    throw ConfigError("fclt needs at least two record_times, got " + std::to_string(cfg.record_times.size()));
  }
  if (cfg.kind == ExperimentKind::clt && cfg.radii.size() < 3) {
    throw ConfigError("clt needs at least three radii in R_list, got " + std::to_string(cfg.radii.size()));
  }
  if (cfg.kind == ExperimentKind::tightness && cfg.radii.size() < 2) {
    throw ConfigError("tightness needs at least two radii in R_list");
  }
  if (cfg.kind == ExperimentKind::tightness) {
    const auto steps = tightness_lag_steps(cfg);
    if (steps.size() < 4 || steps.back() < 10 * steps.front()) {
      throw ConfigError("tightness lags 4dt*2^k up to min(0.1,T)=" + fmt(std::min(0.1, cfg.horizon)) +
                        " do not span a decade with dt=" + fmt(cfg.dt));
    }
  }
  if (cfg.moment_p != 2 && cfg.moment_p != 4) {
    throw ConfigError("moment_p=" + std::to_string(cfg.moment_p) + ": must be 2 or 4");
  }

  if (cfg.lags.empty()) {
    const int max_lag = std::min(32, cfg.n / 2);
    for (int k = 0; k <= max_lag; ++k) cfg.lags.push_back(k);
  }
  for (int k : cfg.lags) {
    if (k < 0 || k > cfg.n / 2) throw ConfigError("lags entry " + std::to_string(k) + " outside [0, n/2]");
  }
  const int max_decay = static_cast<int>(std::floor(cfg.half_extent / 4.0 / h + 1e-9));
  if (cfg.decay_lags.empty() && max_decay >= 2) {
    const int count = 10;
    for (int i = 0; i < count; ++i) {
      const int k = 2 + static_cast<int>(std::lround(static_cast<double>(max_decay - 2) * i / (count - 1)));
      if (cfg.decay_lags.empty() || k != cfg.decay_lags.back()) cfg.decay_lags.push_back(k);
    }
  }
  for (int k : cfg.decay_lags) {
    if (k < 2 || k > max_decay) {
      throw ConfigError("decay_lags entry " + std::to_string(k) + " outside [2, L/(4h)=" + std::to_string(max_decay) + "]");
    }
  }
  if (cfg.lemma_y.empty()) cfg.lemma_y = {0.5, 1.0, 2.0};
  for (double y : cfg.lemma_y) {
    if (!(y > 0.0)) throw ConfigError("lemma_y entry " + fmt(y) + ": must be positive");
  }
  if (cfg.lemma_points < 3) throw ConfigError("lemma_points=" + std::to_string(cfg.lemma_points) + " < 3");
  if (cfg.mc_samples < 1000) throw ConfigError("mc_samples=" + std::to_string(cfg.mc_samples) + " < 1000");
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const ConfigOverrides& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), overrides);
}

}  // namespace rshe
