#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sadmm/experiment.hpp"

using namespace sadmm;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("sadmm-unit-" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("minimal config fills defaults") {
  const ExperimentConfig cfg = parse_config(R"({"preset": "lasso-split"})");
  const ExperimentConfig def;
  CHECK(cfg.preset.name == "lasso-split");
  CHECK(cfg.preset.dim == def.preset.dim);
  CHECK(cfg.solver.variant == Variant::stochastic);
  CHECK(cfg.solver.schedule.kind == ScheduleKind::convex);
  CHECK(cfg.solver.beta == 1.0);
  CHECK(cfg.solver.rho == 1.0);
  CHECK(cfg.replications == 1);
  CHECK(cfg.fit_points == 20);
  CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("config errors name the field") {
  CHECK_THROWS_WITH_AS(parse_config(R"({"preset": "lasso-split", "solver": {"beta": "big"}})"),
                       doctest::Contains("config.solver.beta"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"preset": {"name": "lasso-split", "dim": 2.5}})"),
                       doctest::Contains("config.preset.dim"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"preset": "lasso-split", "solver": {"betta": 1}})"),
                       doctest::Contains("config.solver.betta: unknown field"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config(R"({"preset": "lasso-split", "solver": {"schedule": "fast"}})"),
                       doctest::Contains("config.solver.schedule"), ConfigError);
  CHECK_THROWS_AS(parse_config("{ not json"), ConfigError);

  ExperimentConfig sc = parse_config(R"({"preset": "lasso-split", "solver": {"schedule": "strongly-convex"}})");
  CHECK_THROWS_WITH_AS(validate_config(sc), doctest::Contains("mu > 0"), ConfigError);
  ExperimentConfig small = parse_config(R"({"preset": "lasso-split", "solver": {"t_max": 5}})");
  CHECK_THROWS_WITH_AS(validate_config(small), doctest::Contains("t_max"), ConfigError);
  ExperimentConfig zero = parse_config(R"({"preset": "lasso-split", "replications": 0})");
  CHECK_THROWS_AS(validate_config(zero), ConfigError);
  ExperimentConfig gauss = parse_config(
      R"({"preset": {"name": "scalar-quadratic", "oracle": "additive-gaussian"}, "high_prob": {"omega": [1]}})");
  CHECK_THROWS_WITH_AS(validate_config(gauss), doctest::Contains("unbounded"), ConfigError);
}

TEST_CASE("recording grid covers display, fit and final points") {
  ExperimentConfig cfg;
  cfg.solver.t_max = 10000;
  cfg.t_grid.points = 10;
  cfg.omegas = {1.0};
  cfg.high_prob_t = 777;
  const auto grid = recording_grid(cfg);
  CHECK(grid.front() == 1);
  CHECK(grid.back() == 10000);
  CHECK(std::is_sorted(grid.begin(), grid.end()));
  CHECK(std::find(grid.begin(), grid.end(), 100) != grid.end());
  CHECK(std::find(grid.begin(), grid.end(), 777) != grid.end());
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.0, 1.0, -2.5, 1e-300, 0.1, 123456.789, 1.0 / 3.0}) {
    CHECK(std::stod(format_double(v)) == v);
  }
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
}

TEST_CASE("presets are reproducible and carry consistent constants") {
  for (const std::string& name : preset_names()) {
    PresetParams p;
    p.name = name;
    p.dim = 6;
    p.samples = 30;
    if (name == "scalar-quadratic") p.oracle = OracleKind::additive_uniform;
    const Preset a = make_preset(p), b = make_preset(p);
    CHECK(a.spec->A() == b.spec->A());
    CHECK(a.spec->b() == b.spec->b());
    const Vector x = Vector::Constant(a.spec->d1(), 0.3);
    CHECK(a.spec->theta1().value(x) == b.spec->theta1().value(x));
    CHECK(fingerprint(p) == fingerprint(p));

    const auto& c = a.spec->constants();
    if (auto q = a.spec->theta1().quadratic_form()) {
      const double top = q->hessian.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
      REQUIRE(c.L);
      CHECK(*c.L == doctest::Approx(top).epsilon(1e-12));
    }
    const AssumptionReport r = validate_assumptions(a.spec->theta1(), a.spec->X(), c, 1000, 9);
    CHECK(r.max_norm <= c.M);
    CHECK_FALSE(r.M_violated);
  }
  PresetParams p;
  PresetParams q = p;
  q.seed = 2;
  CHECK(fingerprint(p) != fingerprint(q));
  CHECK(make_preset(p).spec->theta1().value(Vector::Ones(p.dim)) != make_preset(q).spec->theta1().value(Vector::Ones(p.dim)));
  p.name = "no-such-preset";
  CHECK_THROWS_AS(make_preset(p), ConfigError);
}

TEST_CASE("reference cache round trip") {
  ReferenceSolution ref;
  ref.point.x = Vector::LinSpaced(4, -1.0, 1.0 / 3.0);
  ref.point.y = Vector::Constant(4, 0.1);
  ref.point.theta_star = 1.0 / 7.0;
  ref.lambda_star = Vector::Constant(4, -2.0 / 3.0);
  ref.method = ReferenceMethod::long_deterministic_admm;
  ref.certified_tolerance = 1e-10;
  ref.iterations = 123;
  const std::string text = serialize_reference(ref, "fp-1");
  const auto back = parse_reference(text, "fp-1");
  REQUIRE(back);
  CHECK(back->point.x == ref.point.x);
  CHECK(back->point.y == ref.point.y);
  CHECK(back->point.theta_star == ref.point.theta_star);
  CHECK(*back->lambda_star == *ref.lambda_star);
  CHECK(back->iterations == 123);
  CHECK_FALSE(parse_reference(text, "fp-2"));

  std::string corrupt = text;
  const auto pos = corrupt.find("0.1");
  REQUIRE(pos != std::string::npos);
  corrupt[pos + 2] = '2';
  CHECK_THROWS_AS(parse_reference(corrupt, "fp-1"), Error);
}

TEST_CASE("small experiment writes its outputs") {
  const auto dir = scratch("run");
  ExperimentConfig cfg = parse_config(R"({
    // comments are allowed
    "preset": {"name": "lasso-split", "dim": 5, "samples": 20},
    "solver": {"t_max": 200, "check_invariants": true},
    "replications": 3,
    "workers": 2,
    "t_grid": {"points": 8}
  })");
  cfg.output_dir = dir;
  std::ostringstream log;
  CHECK(run_experiment(cfg, log) == 0);
  for (const char* f : {"trajectory_rep0000.csv", "trajectory_rep0002.csv", "aggregate.csv", "report.json",
                        "invariants.log", "reference.txt"}) {
    CHECK(std::filesystem::exists(dir / f));
  }
  const std::string traj = slurp(dir / "trajectory_rep0000.csv");
  CHECK(traj.substr(0, traj.find('\n')) == kTrajectoryHeader);
  CHECK(slurp(dir / "invariants.log").empty());

  const std::string first = slurp(dir / "aggregate.csv");
  const std::string report = slurp(dir / "report.json");
  cfg.workers = 1;
  CHECK(run_experiment(cfg, log) == 0);
  CHECK(slurp(dir / "aggregate.csv") == first);
  CHECK(slurp(dir / "report.json") == report);
  CHECK(log.str().find("(cached)") != std::string::npos);
}

TEST_CASE("failed checks set the exit code") {
  const auto dir = scratch("fail");
  ExperimentConfig cfg = parse_config(R"({
    "preset": {"name": "lasso-split", "dim": 5, "samples": 20},
    "solver": {"t_max": 100},
    "replications": 2,
    "fit": {"window": [10, 100], "expect_slope": [-5.0, -4.0]}
  })");
  cfg.output_dir = dir;
  std::ostringstream log;
  CHECK(run_experiment(cfg, log) == 1);
  CHECK(slurp(dir / "report.json").find("\"pass\": false") != std::string::npos);

  cfg.output_dir = "/proc/no-such-dir/out";
  CHECK(run_experiment(cfg, log) == 2);
}
