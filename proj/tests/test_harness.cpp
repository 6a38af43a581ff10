#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "foliatrace/config.hpp"
#include "foliatrace/harness.hpp"

#include <fstream>
#include <sstream>

using namespace foliatrace;

namespace {

const std::string kConfigDir = FOLIATRACE_CONFIG_DIR;

ExperimentConfig small_product() {
  ExperimentConfig c = load_config(kConfigDir + "/product.yaml");
  c.spectral.cutoff = 800.0;
  c.spectral.probe.s_max = 300.0;
  c.spectral.scan.frequency = 300.0;
  c.geometry.t_max = 2.0;
  c.decay.times = 3;
  c.decay.ladder.s_max = 300.0;
  return c;
}

std::string config_error(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto pos = text.find(from);
  REQUIRE(pos != std::string::npos);
  return text.replace(pos, from.size(), to);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("foliatrace_test_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config round trip") {
  for (const char* name : {"product", "drift", "kronecker", "t3"}) {
    const ExperimentConfig c = load_config(kConfigDir + "/" + name + ".yaml");
    CHECK(c.name == name);
    const ExperimentConfig back = parse_config(serialize_config(c));
    CHECK(back == c);
    CHECK(serialize_config(back) == serialize_config(c));
  }
}

TEST_CASE("config errors name the offending key") {
  const std::string text = serialize_config(load_config(kConfigDir + "/product.yaml"));
  CHECK(config_error(replace(text, "cutoff:", "cutof:")).find("unknown key 'spectral.cutof'") != std::string::npos);
  CHECK(config_error(replace(text, "  n: 2\n", "")).find("missing required key 'model.n'") != std::string::npos);
  CHECK(config_error(replace(text, "t_max: 3", "t_max: three")).find("geometry.t_max") != std::string::npos);
  CHECK(config_error(replace(text, "version: 1", "version: 2")).find("version 2") != std::string::npos);
  CHECK(config_error("[1, 2]").find("mapping") != std::string::npos);
  CHECK(config_error("a: [").find("YAML") != std::string::npos);
  CHECK_THROWS_AS(load_config(kConfigDir + "/missing.yaml"), ConfigError);
}

TEST_CASE("config validation") {
  ExperimentConfig c = load_config(kConfigDir + "/product.yaml");
  CHECK(validate_config(c).empty());
  auto rejects = [&](auto mutate) {
    ExperimentConfig bad = c;
    mutate(bad);
    CHECK_THROWS_AS(validate_config(bad), ConfigError);
  };
  rejects([](ExperimentConfig& b) { b.spectral.cutoff = 1.0; });
  rejects([](ExperimentConfig& b) { b.spectral.scan.step_fraction = 0.3; });
  rejects([](ExperimentConfig& b) { b.spectral.probe.count = 3; });
  rejects([](ExperimentConfig& b) { b.spectral.probe.s_min = 500; });
  rejects([](ExperimentConfig& b) { b.tolerances.decay_slope = 1.0; });
  rejects([](ExperimentConfig& b) { b.model.drift = {0}; });
  rejects([](ExperimentConfig& b) { b.kernel[0].support_radius = 0.0; });
  rejects([](ExperimentConfig& b) { b.spectral.conic_cutoff = {1.0}; });
  ExperimentConfig low = c;
  low.spectral.cutoff = 400.0;
  CHECK_FALSE(validate_config(low).empty());
}

TEST_CASE("empty kernel gives an empty comparison") {
  ExperimentConfig c = small_product();
  c.kernel.clear();
  const ComparisonReport r = run_experiment(c);
  CHECK(r.all_pass);
  CHECK(r.periods.empty());
  CHECK(r.prediction.components.empty());
  CHECK(r.warnings.size() == 1);
}

TEST_CASE("stage errors name the failing stage") {
  ExperimentConfig c = small_product();
  c.model.metric = {{1, 0}, {0, -1}};
  try {
    run_experiment(c);
    FAIL("no exception");
  } catch (const StageError& e) {
    CHECK(e.stage() == "model");
    CHECK(std::string(e.what()).rfind("model: ", 0) == 0);
  }
  c = small_product();
  c.spectral.cutoff = 0.5;
  try {
    run_experiment(c);
    FAIL("no exception");
  } catch (const StageError& e) {
    CHECK(e.stage() == "config");
  }
}

TEST_CASE("product comparison passes and is deterministic") {
  const ExperimentConfig c = small_product();
  const ComparisonReport a = run_experiment(c);
  CHECK(a.all_pass);
  CHECK(a.maslov_ok);
  CHECK(a.decay_ok);
  CHECK(a.spurious.empty());
  REQUIRE(a.periods.size() == 2);
  for (const PeriodRow& row : a.periods) {
    CHECK(row.pass());
    CHECK(row.components == 2);
    CHECK(row.ratio == doctest::Approx(1.0).epsilon(1e-2));
  }
  CHECK(a.decay.size() == 3);

  std::ostringstream ra, rb;
  write_report(ra, a);
  write_report(rb, run_experiment(c));
  CHECK(ra.str() == rb.str());
}

TEST_CASE("emit_outputs writes every file and refuses to overwrite") {
  const ComparisonReport r = run_experiment(small_product());
  const auto dir = fresh_dir("emit");
  const auto paths = emit_outputs(r, dir, false);
  CHECK(paths.size() == 6);
  for (const char* f : {"report.txt", "periods.csv", "maslov.csv", "scan.csv", "probe.csv", "decay.csv"})
    CHECK(std::filesystem::exists(dir / f));

  CHECK(lines(slurp(dir / "periods.csv")) == r.prediction.components.size() + 1);
  CHECK(lines(slurp(dir / "maslov.csv")) == r.prediction.maslov.size() + 1);
  CHECK(lines(slurp(dir / "scan.csv")) == r.scan.t.size() + 1);
  CHECK(lines(slurp(dir / "decay.csv")) == r.decay.size() + 1);
  std::size_t probe_rows = 1;
  for (const auto& p : r.probes) probe_rows += p.s_ladder.size();
  CHECK(lines(slurp(dir / "probe.csv")) == probe_rows);
  CHECK(slurp(dir / "scan.csv").rfind("t,|amp|\n", 0) == 0);
  CHECK(slurp(dir / "probe.csv").rfind("t0,s,Re(amp),Im(amp),tail_bound\n", 0) == 0);
  CHECK(slurp(dir / "decay.csv").rfind("t,slope,pass\n", 0) == 0);

  const std::string before = slurp(dir / "report.txt");
  try {
    emit_outputs(r, dir, false);
    FAIL("no exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(dir.string()) != std::string::npos);
  }
  CHECK(slurp(dir / "report.txt") == before);
  CHECK_NOTHROW(emit_outputs(r, dir, true));
  std::filesystem::remove_all(dir);
}
