#include "sgldc/experiments.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

using namespace sgldc;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sgldc_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string field_of(const std::string& json) {
  try {
    parse_config(json);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<none>";
}

}  // namespace

TEST_CASE("command names") {
  CHECK(parse_command("couple") == CommandKind::couple);
  CHECK(parse_command("verify-assumptions") == CommandKind::verify);
  CHECK(to_string(CommandKind::tails) == "tails");
  CHECK_THROWS_AS(parse_command("sample"), ConfigError);
}

TEST_CASE("config parsing fills defaults and reads every section") {
  const auto cfg = parse_config(R"({
    "seed": 7, "threads": 2,
    "target": {"name": "bump", "dimension": 2, "beta": 2.0, "a": 3.0},
    "schedule": {"eta": 0.01, "steps": 50},
    "batch": {"size": 1, "replacement": true},
    "coupling": {"mode": "synchronous", "substeps": 2},
    "ensemble": {"n": 10, "record_every": 5},
    "initial": {"x": {"center": [1, 0], "spread": 0.5}, "coupled": true},
    "couple": {"marginals_step": 40}
  })");
  CHECK(cfg.seed == 7);
  CHECK(cfg.threads == 2);
  CHECK(cfg.target.name == "bump");
  CHECK(cfg.target.a == 3.0);
  CHECK(*cfg.schedule.eta == 0.01);
  CHECK(cfg.schedule.steps == 50);
  REQUIRE(cfg.batch);
  CHECK(cfg.batch->replacement);
  CHECK(cfg.coupling.mode == CouplingMode::synchronous);
  CHECK(cfg.coupling.substeps == 2);
  CHECK(cfg.n == 10);
  CHECK(cfg.init_x.center.size() == 2);
  CHECK(cfg.init_x.spread == 0.5);
  CHECK(cfg.coupled_start);
  CHECK(*cfg.couple.marginals_step == 40);
  CHECK(cfg.blocks == 20);

  const auto again = parse_config(config_to_json(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("config errors name the offending field") {
  CHECK(field_of(R"({"target": {"name": "gaussian"}})") == "target.beta");
  CHECK(field_of(R"({"target": {"name": "gaussian", "beta": 1, "colour": 3}})") == "target.colour");
  CHECK(field_of(R"({"target": {"name": "gaussian", "beta": 1}, "shedule": {}})") == "shedule");
  CHECK(field_of(R"({"target": {"name": "gaussian", "beta": -1}})") == "target.beta");
  CHECK(field_of(R"({"target": {"name": "banana", "beta": 1}})") == "target.name");
  CHECK(field_of(R"({"target": {"name": "gaussian", "beta": 1}, "schedule": {"eta": 0.1, "step_sizes": [0.1]}})") ==
        "schedule");
  CHECK(field_of(R"({"target": {"name": "gaussian", "beta": 1}, "batch": {"size": 0}})") == "batch.size");
  CHECK(field_of("{not json") == "");
  CHECK(field_of(R"({"target": {"name": "gaussian", "beta": 1}})") == "<none>");
}

TEST_CASE("missing beta in the shipped example") {
  try {
    load_config(fs::path(SGLDC_TEST_DATA) / "missing_beta.json");
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(e.field() == "target.beta");
    CHECK(std::string(e.what()).find("target.beta") != std::string::npos);
  }
}

TEST_CASE("models and schedules from specs") {
  TargetSpec t;
  t.name = "rotational";
  t.dimension = 2;
  t.beta = 1.0;
  const auto m = build_model(t);
  CHECK(m->kind() == FieldKind::drift);
  CHECK(m->dimension() == 2);

  auto cfg = parse_config(R"({"target": {"name": "gaussian", "beta": 1}, "schedule": {"step_sizes": [0.1, 0.2]}})");
  const auto s = build_schedule(cfg, *build_model(cfg.target));
  CHECK(s.size() == 2);
  CHECK(s.time(2) == doctest::Approx(0.3));
}

TEST_CASE("verdict CSV layout") {
  std::ostringstream out;
  write_verdicts(out, {{"rate", 0.5, 0.01, 0.25, true, ">= reference"},
                       {"p", 0.2, 0.0, std::nullopt, false, ">= 0.01"}});
  const std::string s = out.str();
  CHECK(s.rfind(std::string(kVerdictHeader) + "\n", 0) == 0);
  CHECK(s.find("rate,0.5,0.01,0.25,pass,>= reference\n") != std::string::npos);
  CHECK(s.find("p,0.2,0,,fail,>= 0.01\n") != std::string::npos);
}

TEST_CASE("constants command on the gaussian example") {
  auto cfg = load_config(fs::path(SGLDC_TEST_DATA) / "gaussian_constants.json");
  cfg.output_dir = scratch("constants").string();
  const auto res = run_command(CommandKind::constants, cfg);
  CHECK(res.passed());
  const fs::path dir(cfg.output_dir);
  for (const char* f : {"constants.csv", "restrictions.csv", "verdicts.csv", "metadata.json"})
    CHECK(fs::exists(dir / f));
  const std::string c = slurp(dir / "constants.csv");
  // beta = 2 puts R = 2 exactly at the edge, so c' is infinite and no step is certified.
  CHECK(c.find("R,2\n") != std::string::npos);
  CHECK(c.find("feasible,false\n") != std::string::npos);
  CHECK(slurp(dir / "verdicts.csv").rfind(kVerdictHeader, 0) == 0);
}

TEST_CASE("same seed gives identical output files") {
  const std::string text = R"({
    "seed": 5,
    "target": {"name": "bump", "dimension": 2, "beta": 2.0},
    "schedule": {"eta": 0.02, "steps": 100},
    "ensemble": {"n": 50, "record_every": 10},
    "initial": {"x": {"center": [2, 0]}, "y": {"center": [-2, 0]}}
  })";
  auto a = parse_config(text), b = parse_config(text);
  a.output_dir = scratch("det_a").string();
  b.output_dir = scratch("det_b").string();
  b.threads = 3;
  run_command(CommandKind::couple, a);
  run_command(CommandKind::couple, b);
  for (const char* f : {"coupling.csv", "merge_times.csv", "verdicts.csv"})
    CHECK(slurp(fs::path(a.output_dir) / f) == slurp(fs::path(b.output_dir) / f));
}

TEST_CASE("simulate writes moments and flags divergence") {
  auto cfg = parse_config(R"({
    "seed": 3,
    "target": {"name": "quadratic", "dimension": 1, "beta": 1.0, "stiffness": 10.0},
    "schedule": {"eta": 0.5, "steps": 200},
    "ensemble": {"n": 20, "record_every": 10},
    "initial": {"x": {"center": [1.0]}}
  })");
  cfg.output_dir = scratch("diverge").string();
  const auto res = run_command(CommandKind::simulate, cfg);
  CHECK_FALSE(res.passed());
  CHECK(res.verdicts.front().statistic == "divergence_fraction");
  CHECK(res.verdicts.front().estimate == 1.0);
  CHECK(fs::exists(fs::path(cfg.output_dir) / "moments.csv"));
}
