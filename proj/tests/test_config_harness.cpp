#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "rshe/config.hpp"
#include "rshe/errors.hpp"
#include "rshe/harness.hpp"

using namespace rshe;

namespace {

const char* kMinimal = R"(
d = 1
beta = 0.5
n = 512
L = 20
sigma = linear
T = 0.25
R_list = [4, 8, 16]
n_replicas = 4000
seed = 42
)";

const char* kSmall = R"(
kind = clt
d = 1
beta = 0.5
T = 0.1
R_list = 1, 2, 4
n_replicas = 100
seed = 5

[lattice]
n = 128
L = 10
)";

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("rshe_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("minimal config loads with defaults") {
  const ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.kind == ExperimentKind::clt);
  CHECK(c.spec == RieszSpec{1, 0.5});
  CHECK(c.n == 512);
  CHECK(c.half_extent == 20.0);
  CHECK(c.radii == std::vector<double>{4, 8, 16});
  CHECK(c.record_times == std::vector<double>{0.25});
  const double h = 0.078125;
  CHECK(c.dt <= h * h / 4);
  CHECK(c.dt > 0.9 * h * h / 4);
  CHECK(snap_to_grid(0.25, c.dt) == 164);
  CHECK(c.collar() == 3.0);
  CHECK(c.sigma.build() == Nonlinearity::linear());
}

TEST_CASE("default time step divides every record time") {
  const double h = 0.078125;
  const double dt = default_time_step(h, 0.25, {0.1, 0.2});
  CHECK(dt == doctest::Approx(0.05 / 33));
  for (double t : {0.1, 0.2, 0.25}) CHECK(std::abs(t / dt - std::round(t / dt)) < 1e-9);
  CHECK(default_time_step(1.0, 1.0, {1.0}) == 0.25);
}

TEST_CASE("config errors name the key and the values") {
  const std::string base = kMinimal;
  CHECK(error_of(base + "beta = 1.5\n").find("duplicate") != std::string::npos);

  std::string b = base;
  b.replace(b.find("beta = 0.5"), 10, "beta = 1.5");
  CHECK(error_of(b).find("beta must be < min(d,2)=1") != std::string::npos);

  std::string m = base;
  m.replace(m.find("L = 20"), 6, "L = 17");
  CHECK(error_of(m).find("L=17 < R_max+6√T=19") != std::string::npos);

  std::string n = base;
  n.replace(n.find("n = 512"), 7, "n = 500");
  CHECK(error_of(n).find("lattice.n=500") != std::string::npos);

  CHECK(error_of(base + "colour = blue\n").find("unknown key 'colour'") != std::string::npos);
  CHECK(error_of(base + "dt = 0.003\n").find("dt=0.0030000000000000001 does not divide T=0.25") != std::string::npos);
  CHECK(error_of(base + "record_times = 0.1, 0.3\n").find("outside [0, T=0.25]") != std::string::npos);
  CHECK(error_of(base + "kind = fclt\n").find("fclt needs at least two record_times") != std::string::npos);
  CHECK(error_of(base + "kind = sideways\n").find("unknown experiment kind") != std::string::npos);
  CHECK(error_of(base + "[sigma]\nlipschitz = 0.5\n").find("sigma") != std::string::npos);
  CHECK(error_of(base + "n_replicas = 50\n").find("duplicate") != std::string::npos);
  std::string few = base;
  few.replace(few.find("n_replicas = 4000"), 17, "n_replicas = 50");
  CHECK(error_of(few).find("n_replicas=50 < 100") != std::string::npos);
  CHECK_NOTHROW(parse_config(few, ConfigOverrides{ExperimentKind::lemma31, {}, {}}));
  CHECK_THROWS_AS(load_config("/nonexistent/rshe.conf"), ConfigError);
}

TEST_CASE("echo round trip") {
  for (const char* text : {kMinimal, kSmall}) {
    const ExperimentConfig a = parse_config(text);
    const ExperimentConfig b = parse_config(a.echo());
    CHECK(a == b);
    CHECK(a.echo() == b.echo());
    CHECK(a.hash() == b.hash());
  }
  const ExperimentConfig f = load_config(std::string(RSHE_CONFIG_DIR) + "/comparison.conf");
  CHECK(parse_config(f.echo()) == f);
  CHECK(f.init.kind == "cosine");

  const ExperimentConfig o = parse_config(kMinimal, ConfigOverrides{ExperimentKind::constants, 7, 123});
  CHECK(o.kind == ExperimentKind::constants);
  CHECK(o.seed == 7);
  CHECK(o.n_replicas == 123);
  CHECK(o.hash() != parse_config(kMinimal).hash());
}

TEST_CASE("parallel_for reports the lowest failing index") {
  std::atomic<int> ran{0};
  parallel_for(100, 4, [&](std::uint32_t) { ++ran; });
  CHECK(ran == 100);
  for (unsigned workers : {1u, 3u, 8u}) {
    try {
      parallel_for(200, workers, [](std::uint32_t i) {
        if (i == 37 || i == 150) throw std::runtime_error(std::to_string(i));
      });
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()) == "37");
    }
  }
}

TEST_CASE("constants run") {
  ExperimentConfig c = parse_config(kMinimal, ConfigOverrides{ExperimentKind::constants, {}, {}});
  const ResultSet rs = run_experiment(c);
  CHECK(rs.status == ExitStatus::pass);
  REQUIRE(!rs.constants.empty());
  CHECK(rs.constants[0].name == "k_beta");
  CHECK(rs.constants[0].method == "closed-form");
  CHECK(rs.constants[0].value == doctest::Approx(7.54247).epsilon(1e-6));
  CHECK(rs.constants[0].stderr == 0.0);
}

TEST_CASE("clt run: rows, determinism across workers, emit") {
  const ExperimentConfig c = parse_config(kSmall);
  const ResultSet a = run_experiment(c, RunOptions{1});
  const ResultSet b = run_experiment(c, RunOptions{5});
  CHECK(a.samples.size() == 100 * 3 * 1);
  CHECK(a.status != ExitStatus::degenerate);

  const auto da = scratch("emit_a"), db = scratch("emit_b");
  const auto files_a = emit_results(a, da);
  const auto files_b = emit_results(b, db);
  REQUIRE(files_a.size() == files_b.size());
  for (std::size_t i = 0; i < files_a.size(); ++i) {
    CHECK(files_a[i].filename() == files_b[i].filename());
    CHECK(slurp(files_a[i]) == slurp(files_b[i]));
  }
  CHECK(files_a.back().filename() == "manifest.json");

  // Re-emitting gives the same bytes.
  const std::string before = slurp(da / "reports.csv");
  emit_results(a, da);
  CHECK(slurp(da / "reports.csv") == before);

  std::ifstream samples(da / "samples.csv", std::ios::binary);
  std::string header;
  std::getline(samples, header);
  CHECK(header == "replica_id,R,t,G_R\r");
  std::size_t rows = 0;
  for (std::string line; std::getline(samples, line);) ++rows;
  CHECK(rows == 300);
  std::filesystem::remove_all(da);
  std::filesystem::remove_all(db);
}

TEST_CASE("empty result set emits headers") {
  ResultSet empty;
  empty.config = parse_config(kSmall);
  const auto dir = scratch("emit_empty");
  const auto files = emit_results(empty, dir);
  CHECK(slurp(dir / "samples.csv") == "replica_id,R,t,G_R\r\n");
  CHECK(slurp(dir / "reports.csv") == "metric,params,estimate,stderr,target,tolerance,pass\r\n");
  CHECK(slurp(dir / "constants.csv") == "name,d,beta,region_kind,value,stderr,method\r\n");
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(std::filesystem::exists(dir / "reports.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("degenerate sigma gives a distinct status") {
  ExperimentConfig c = parse_config(std::string(kSmall) + "[sigma]\nkind = affine\na = 1\nb = -1\n");
  const ResultSet rs = run_experiment(c);
  CHECK(rs.status == ExitStatus::degenerate);
  CHECK(rs.message == "degenerate: sigma(1)=0");
  for (const SampleRow& s : rs.samples) CHECK(s.value == 0.0);
}

TEST_CASE("instability is reported with replica and step") {
  ExperimentConfig c = parse_config(std::string(kSmall) + "[sigma]\nkind = affine\na = 1e200\nb = 0\n");
  const ResultSet rs = run_experiment(c, RunOptions{3});
  CHECK(rs.status == ExitStatus::instability);
  CHECK(rs.message.find("instability at replica 0, step") == 0);
}
