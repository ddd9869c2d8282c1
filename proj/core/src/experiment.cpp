#include "sadmm/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace sadmm {

using nlohmann::json;

std::string to_string(BoundKind kind) {
  switch (kind) {
    case BoundKind::none:
      return "none";
    case BoundKind::automatic:
      return "auto";
    case BoundKind::convex:
      return "convex";
    case BoundKind::strongly_convex:
      return "strongly-convex";
    case BoundKind::smooth:
      return "smooth";
    case BoundKind::deterministic:
      return "deterministic";
  }
  return "unknown";
}

BoundKind parse_bound_kind(const std::string& text) {
  if (text == "none") return BoundKind::none;
  if (text == "auto") return BoundKind::automatic;
  if (text == "convex") return BoundKind::convex;
  if (text == "strongly-convex") return BoundKind::strongly_convex;
  if (text == "smooth") return BoundKind::smooth;
  if (text == "deterministic") return BoundKind::deterministic;
  throw ConfigError("unknown bound '" + text +
                    "' (expected none, auto, convex, strongly-convex, smooth, deterministic)");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

// ---------------------------------------------------------------------------
// Config reading with field paths in every message
// ---------------------------------------------------------------------------

class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError(path + ": " + what);
  }

  std::string at(const std::string& key) const { return path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(at(key), "expected a number");
      out = v->get<double>();
    }
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer() && !v->is_number_unsigned()) fail(at(key), "expected an integer");
      if constexpr (std::is_unsigned_v<Int>) {
        if (v->is_number_integer() && v->get<long long>() < 0) fail(at(key), "must be nonnegative");
      }
      out = v->get<Int>();
    }
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(at(key), "expected true or false");
      out = v->get<bool>();
    }
  }

  std::optional<std::string> string(const std::string& key) {
    if (const json* v = find(key)) {
      if (!v->is_string()) fail(at(key), "expected a string");
      return v->get<std::string>();
    }
    return std::nullopt;
  }

  std::optional<std::pair<double, double>> pair(const std::string& key) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
        fail(at(key), "expected [lo, hi]");
      }
      return std::make_pair((*v)[0].get<double>(), (*v)[1].get<double>());
    }
    return std::nullopt;
  }

  std::optional<Vector> vector(const std::string& key) {
    if (const json* v = find(key)) {
      if (!v->is_array()) fail(at(key), "expected an array of numbers");
      Vector out(static_cast<Index>(v->size()));
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_number()) fail(at(key) + "[" + std::to_string(i) + "]", "expected a number");
        out[static_cast<Index>(i)] = (*v)[i].get<double>();
      }
      return out;
    }
    return std::nullopt;
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <class Parse>
auto parse_enum(const std::string& path, const std::string& text, Parse parse) {
  try {
    return parse(text);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void read_preset(const json& j, PresetParams& p) {
  if (j.is_string()) {
    p.name = j.get<std::string>();
    return;
  }
  Fields f(j, "config.preset");
  if (auto v = f.string("name")) p.name = *v;
  f.integer("dim", p.dim);
  f.integer("samples", p.samples);
  f.number("condition", p.condition);
  f.number("noise", p.noise);
  f.number("lambda_reg", p.lambda_reg);
  f.number("mu", p.mu);
  f.number("radius", p.radius);
  f.integer("seed", p.seed);
  if (auto v = f.string("oracle")) p.oracle = parse_enum(f.at("oracle"), *v, parse_oracle_kind);
  f.number("sigma", p.sigma);
  f.integer("minibatch", p.minibatch);
  f.integer("edges", p.edges);
  f.finish();
}

void read_solver(const json& j, SolverConfig& s) {
  Fields f(j, "config.solver");
  if (auto v = f.string("variant")) s.variant = parse_enum(f.at("variant"), *v, parse_variant);
  f.number("beta", s.beta);
  if (auto v = f.string("schedule")) s.schedule.kind = parse_enum(f.at("schedule"), *v, parse_schedule);
  f.number("eta", s.schedule.eta);
  if (const json* lin = f.find("linearized")) {
    Fields l(*lin, f.at("linearized"));
    if (const json* r = l.find("r")) {
      if (!r->is_number()) Fields::fail(l.at("r"), "expected a number");
      s.linearized_r = r->get<double>();
    }
    if (const json* g = l.find("G")) {
      if (!g->is_array() || g->empty()) Fields::fail(l.at("G"), "expected a square array of rows");
      const std::size_t n = g->size();
      Matrix G(static_cast<Index>(n), static_cast<Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        const json& row = (*g)[i];
        if (!row.is_array() || row.size() != n) {
          Fields::fail(l.at("G") + "[" + std::to_string(i) + "]", "expected a row of length " + std::to_string(n));
        }
        for (std::size_t k = 0; k < n; ++k) {
          if (!row[k].is_number()) {
            Fields::fail(l.at("G") + "[" + std::to_string(i) + "][" + std::to_string(k) + "]", "expected a number");
          }
          G(static_cast<Index>(i), static_cast<Index>(k)) = row[k].get<double>();
        }
      }
      s.linearized_G = std::move(G);
    }
    l.finish();
  }
  f.integer("t_max", s.t_max);
  f.number("rho", s.rho);
  if (auto v = f.string("averaging")) s.averaging = parse_enum(f.at("averaging"), *v, parse_averaging);
  f.boolean("check_invariants", s.check_invariants);
  f.integer("probe_count", s.probe_count);
  f.integer("y_probe_count", s.y_probe_count);
  if (auto v = f.string("y_update")) {
    if (*v == "automatic") s.y_update = YUpdateMode::automatic;
    else if (*v == "prox") s.y_update = YUpdateMode::prox;
    else if (*v == "inner") s.y_update = YUpdateMode::inner;
    else Fields::fail(f.at("y_update"), "expected automatic, prox or inner");
  }
  if (const json* inner = f.find("inner")) {
    Fields in(*inner, f.at("inner"));
    in.number("tolerance", s.inner.tolerance);
    in.integer("max_iterations", s.inner.max_iterations);
    in.finish();
  }
  if (auto v = f.vector("x0")) s.x0 = *v;
  if (auto v = f.vector("y0")) s.y0 = *v;
  f.finish();
}

// ---------------------------------------------------------------------------

BoundKind resolve_bound(BoundKind kind, const SolverConfig& s) {
  if (kind != BoundKind::automatic) return kind;
  if (s.variant == Variant::deterministic) return BoundKind::deterministic;
  if (s.variant == Variant::linearized) return BoundKind::none;
  switch (s.schedule.kind) {
    case ScheduleKind::convex:
      return BoundKind::convex;
    case ScheduleKind::strongly_convex:
      return BoundKind::strongly_convex;
    case ScheduleKind::smooth:
      return BoundKind::smooth;
    case ScheduleKind::constant:
      return BoundKind::none;
  }
  return BoundKind::none;
}

double bound_value(BoundKind kind, double t, const BoundInputs& in) {
  switch (kind) {
    case BoundKind::convex:
      return convex_bound(t, in);
    case BoundKind::strongly_convex:
      return strongly_convex_bound(t, in);
    case BoundKind::smooth:
      return smooth_bound(t, in);
    case BoundKind::deterministic:
      return deterministic_bound(t, in);
    default:
      return std::numeric_limits<double>::infinity();
  }
}

std::pair<double, double> fit_window_of(const ExperimentConfig& cfg) {
  return cfg.fit_window ? *cfg.fit_window : default_fit_window(cfg.solver.t_max);
}

std::size_t high_prob_t_of(const ExperimentConfig& cfg) {
  return cfg.high_prob_t ? *cfg.high_prob_t : cfg.solver.t_max;
}

double err_at(const TrajectoryRow& row, Averaging av) {
  return av == Averaging::eq10_aligned ? row.eq10.value : row.eq2.value;
}

ExpectationCurve curve_over(const std::vector<RunResult>& runs, const std::vector<std::size_t>& grid,
                            const RowSelector& select) {
  if (runs.size() >= 2) {
    std::vector<Trajectory> trs;
    trs.reserve(runs.size());
    for (const auto& r : runs) trs.push_back(r.trajectory);
    return estimate_expectation(trs, grid, select);
  }
  ExpectationCurve out;
  out.t = grid;
  for (std::size_t t : grid) {
    const TrajectoryRow* row = runs.front().trajectory.at(t);
    if (!row) throw DimensionError("t = " + std::to_string(t) + " not recorded");
    out.mean.push_back(select(*row));
    out.stddev.push_back(0.0);
    out.stderr_.push_back(0.0);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

std::optional<std::string> read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json number_json(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

}  // namespace

// ---------------------------------------------------------------------------

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  Fields f(j, "config");
  if (const json* p = f.find("preset")) read_preset(*p, cfg.preset);
  else Fields::fail("config.preset", "required field is missing");
  if (const json* s = f.find("solver")) read_solver(*s, cfg.solver);
  f.integer("replications", cfg.replications);
  f.integer("seed", cfg.seed);
  f.integer("workers", cfg.workers);
  if (const json* o = f.find("output")) {
    Fields of(*o, "config.output");
    if (auto d = of.string("dir")) cfg.output_dir = *d;
    of.finish();
  }
  if (auto r = f.string("record")) {
    if (*r == "all") cfg.record_all = true;
    else if (*r == "grid") cfg.record_all = false;
    else Fields::fail("config.record", "expected all or grid");
  }
  if (const json* g = f.find("t_grid")) {
    Fields gf(*g, "config.t_grid");
    gf.integer("lo", cfg.t_grid.lo);
    std::size_t hi = 0;
    if (gf.find("hi")) {
      gf.integer("hi", hi);
      cfg.t_grid.hi = hi;
    }
    gf.integer("points", cfg.t_grid.points);
    gf.finish();
  }
  if (const json* fit = f.find("fit")) {
    Fields ff(*fit, "config.fit");
    cfg.fit_window = ff.pair("window");
    ff.integer("points", cfg.fit_points);
    cfg.expect_slope = ff.pair("expect_slope");
    ff.finish();
  }
  if (auto b = f.string("bound")) cfg.bound = parse_enum("config.bound", *b, parse_bound_kind);
  if (const json* hp = f.find("high_prob")) {
    Fields hf(*hp, "config.high_prob");
    std::size_t t = 0;
    if (hf.find("t")) {
      hf.integer("t", t);
      cfg.high_prob_t = t;
    }
    if (const json* om = hf.find("omega")) {
      if (!om->is_array()) Fields::fail("config.high_prob.omega", "expected an array of numbers");
      for (std::size_t i = 0; i < om->size(); ++i) {
        if (!(*om)[i].is_number()) {
          Fields::fail("config.high_prob.omega[" + std::to_string(i) + "]", "expected a number");
        }
        cfg.omegas.push_back((*om)[i].get<double>());
      }
    }
    hf.finish();
  }
  f.boolean("reference_cache", cfg.use_reference_cache);
  f.finish();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  auto text = read_text(path);
  if (!text) throw ConfigError("config: cannot read " + path.string());
  return parse_config(*text);
}

void validate_config(const ExperimentConfig& cfg) {
  if (cfg.replications < 1) throw ConfigError("config.replications: must be >= 1");
  if (cfg.solver.t_max < 10) throw ConfigError("config.solver.t_max: must be >= 10");
  if (cfg.workers < 0) throw ConfigError("config.workers: must be >= 0");
  if (cfg.t_grid.lo < 1) throw ConfigError("config.t_grid.lo: must be >= 1");
  if (cfg.t_grid.points < 2) throw ConfigError("config.t_grid.points: must be >= 2");
  if (cfg.t_grid.hi && (*cfg.t_grid.hi > cfg.solver.t_max || *cfg.t_grid.hi < cfg.t_grid.lo)) {
    throw ConfigError("config.t_grid.hi: must lie in [t_grid.lo, t_max]");
  }
  const auto window = fit_window_of(cfg);
  if (!(window.first >= 1.0 && window.first < window.second &&
        window.second <= static_cast<double>(cfg.solver.t_max))) {
    throw ConfigError("config.fit.window: need 1 <= lo < hi <= t_max");
  }
  if (cfg.fit_points < 5) throw ConfigError("config.fit.points: must be >= 5");
  if (cfg.expect_slope && !(cfg.expect_slope->first <= cfg.expect_slope->second)) {
    throw ConfigError("config.fit.expect_slope: need lo <= hi");
  }
  for (double om : cfg.omegas) {
    if (!(om > 0.0)) throw ConfigError("config.high_prob.omega: values must be positive");
  }
  if (high_prob_t_of(cfg) < 1 || high_prob_t_of(cfg) > cfg.solver.t_max) {
    throw ConfigError("config.high_prob.t: must lie in [1, t_max]");
  }

  const Preset preset = make_preset(cfg.preset);
  try {
    validate(cfg.solver, *preset.spec);
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config.") + e.what());
  }
  if (!cfg.omegas.empty()) {
    if (!preset.spec->theta1().bounded_noise()) {
      throw ConfigError("config.high_prob: the oracle noise is unbounded; use a bounded-noise oracle");
    }
    if (cfg.solver.variant != Variant::stochastic || cfg.solver.schedule.kind != ScheduleKind::convex) {
      throw ConfigError("config.high_prob: needs the stochastic variant with the convex schedule");
    }
  }
  const BoundKind bound = resolve_bound(cfg.bound, cfg.solver);
  if (bound == BoundKind::strongly_convex && !(preset.spec->constants().mu > 0.0)) {
    throw ConfigError("config.bound: the strongly-convex bound needs mu > 0");
  }
  if (bound == BoundKind::smooth && !preset.spec->constants().L) {
    throw ConfigError("config.bound: the smooth bound needs L");
  }
}

std::vector<std::size_t> recording_grid(const ExperimentConfig& cfg) {
  const std::size_t t_max = cfg.solver.t_max;
  std::set<std::size_t> all;
  const std::size_t hi = cfg.t_grid.hi.value_or(t_max);
  for (std::size_t t : geometric_grid(std::min(cfg.t_grid.lo, hi), hi, cfg.t_grid.points)) all.insert(t);
  const auto window = fit_window_of(cfg);
  const auto lo_fit = static_cast<std::size_t>(std::ceil(window.first));
  const auto hi_fit = static_cast<std::size_t>(std::floor(window.second));
  if (lo_fit >= 1 && lo_fit < hi_fit) {
    for (std::size_t t : geometric_grid(lo_fit, hi_fit, cfg.fit_points)) all.insert(t);
  }
  if (!cfg.omegas.empty()) all.insert(high_prob_t_of(cfg));
  all.insert(t_max);
  return {all.begin(), all.end()};
}

bool ExperimentResult::pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckOutcome& c) { return c.pass; });
}

ExperimentResult run_replications(const ExperimentConfig& cfg, std::ostream* log) {
  validate_config(cfg);
  ExperimentResult result;
  result.preset = make_preset(cfg.preset);
  const ProblemSpec& spec = *result.preset.spec;
  if (log) *log << "preset: " << result.preset.description << "\n";

  const std::string fp = fingerprint(cfg.preset);
  std::optional<ReferenceSolution> cached;
  if (cfg.use_reference_cache) {
    if (auto text = read_text(cfg.output_dir / "reference.txt")) cached = parse_reference(*text, fp);
  }
  result.reference = cached ? *cached : compute_reference(spec);
  if (log) {
    *log << "reference: " << to_string(result.reference.method) << (cached ? " (cached)" : "")
         << ", theta* = " << format_double(result.reference.point.theta_star) << "\n";
  }

  result.grid = recording_grid(cfg);
  result.averaging = effective_averaging(cfg.solver);
  const Vector y0 = cfg.solver.y0 ? *cfg.solver.y0 : Vector::Zero(spec.d2());
  result.dyb = dyb(spec, y0, result.reference.point.y);

  const std::size_t R = cfg.replications;
  result.runs.resize(R);
  std::size_t workers = cfg.workers > 0 ? static_cast<std::size_t>(cfg.workers)
                                        : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, R);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < R; r = next++) {
      SolverConfig sc = cfg.solver;
      if (!cfg.record_all) sc.record_at = result.grid;
      sc.probe_seed = cfg.seed;
      sc.probe_stream = r;
      try {
        if (sc.variant == Variant::stochastic) {
          StochasticOracle oracle(spec.theta1_ptr(), cfg.seed, r);
          result.runs[r] = run(spec, sc, &oracle, result.reference.point);
        } else {
          result.runs[r] = run(spec, sc, nullptr, result.reference.point);
        }
      } catch (const std::exception& e) {
        result.runs[r].error = e.what();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Checks.
  std::size_t failed = 0;
  std::string first_error;
  for (std::size_t r = 0; r < R; ++r) {
    if (result.runs[r].error) {
      if (failed++ == 0) first_error = "replication " + std::to_string(r) + ": " + *result.runs[r].error;
    }
  }
  result.checks.push_back({"replications", failed == 0,
                           failed == 0 ? std::to_string(R) + " completed"
                                       : std::to_string(failed) + " failed; " + first_error});
  if (cfg.solver.check_invariants) {
    std::size_t violations = 0;
    for (const auto& r : result.runs) violations += r.trajectory.violations.size();
    result.checks.push_back({"invariants", violations == 0, std::to_string(violations) + " violations"});
  }
  if (failed > 0) return result;

  const auto select = [av = result.averaging](const TrajectoryRow& row) { return err_at(row, av); };
  result.err = curve_over(result.runs, result.grid, select);

  const auto window = fit_window_of(cfg);
  // Only the geometric fit grid enters the regression, not the display points.
  std::vector<double> t_fit, v_fit;
  {
    const auto lo = static_cast<std::size_t>(std::ceil(window.first));
    const auto hi = static_cast<std::size_t>(std::floor(window.second));
    const auto fit_grid = lo < hi ? geometric_grid(lo, hi, cfg.fit_points) : std::vector<std::size_t>{};
    const std::set<std::size_t> wanted(fit_grid.begin(), fit_grid.end());
    for (std::size_t j = 0; j < result.grid.size(); ++j) {
      if (wanted.count(result.grid[j])) {
        t_fit.push_back(static_cast<double>(result.grid[j]));
        v_fit.push_back(result.err.mean[j]);
      }
    }
  }
  try {
    result.fit = fit_rate(t_fit, v_fit, window);
  } catch (const ConfigError& e) {
    if (cfg.expect_slope) result.checks.push_back({"slope", false, e.what()});
  }
  if (cfg.expect_slope && result.fit) {
    const bool ok = result.fit->slope >= cfg.expect_slope->first && result.fit->slope <= cfg.expect_slope->second;
    std::ostringstream os;
    os << "slope " << format_double(result.fit->slope) << " over [" << format_double(window.first) << ", "
       << format_double(window.second) << "], band [" << format_double(cfg.expect_slope->first) << ", "
       << format_double(cfg.expect_slope->second) << "]";
    result.checks.push_back({"slope", ok, os.str()});
  }

  const BoundKind bound = resolve_bound(cfg.bound, cfg.solver);
  if (bound != BoundKind::none) {
    const BoundInputs in = bound_inputs(spec, cfg.solver, result.dyb);
    std::size_t worst_t = 0;
    double worst_margin = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < result.grid.size(); ++j) {
      const double t = static_cast<double>(result.grid[j]);
      const double margin = bound_value(bound, t, in) + 3.0 * result.err.stderr_[j] - result.err.mean[j];
      if (margin < worst_margin) {
        worst_margin = margin;
        worst_t = result.grid[j];
      }
    }
    std::ostringstream os;
    os << "tightest at t = " << worst_t << ", bound + 3 stderr - mean = " << format_double(worst_margin);
    result.checks.push_back({"bound:" + to_string(bound), worst_margin >= 0.0, os.str()});
  }

  if (!cfg.omegas.empty()) {
    const std::size_t t = high_prob_t_of(cfg);
    std::vector<double> values;
    for (const auto& r : result.runs) values.push_back(err_at(*r.trajectory.at(t), result.averaging));
    for (double om : cfg.omegas) {
      HighProbResult hp = high_prob_check(values, static_cast<double>(t), om, spec, cfg.solver, result.dyb);
      std::ostringstream os;
      os << "t = " << t << ", exceed fraction " << format_double(hp.exceed_fraction) << " <= "
         << format_double(hp.bound) << " + " << format_double(hp.slack) << " (threshold "
         << format_double(hp.threshold) << ")";
      result.checks.push_back({"high_prob:omega=" + format_double(om), hp.pass, os.str()});
      result.high_prob.push_back(hp);
    }
  }
  return result;
}

void write_outputs(const ExperimentConfig& cfg, const ExperimentResult& result) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.output_dir);

  for (std::size_t r = 0; r < result.runs.size(); ++r) {
    std::ostringstream os;
    os << kTrajectoryHeader << "\n";
    for (const auto& row : result.runs[r].trajectory.rows) {
      os << row.k << ',' << format_double(row.eta) << ',' << format_double(row.eq2.gap) << ','
         << format_double(row.eq2.feasibility) << ',' << format_double(row.eq2.value) << ','
         << format_double(row.eq10.gap) << ',' << format_double(row.eq10.feasibility) << ','
         << format_double(row.eq10.value) << ',' << format_double(row.step_ms) << "\n";
    }
    std::ostringstream name;
    name << "trajectory_rep" << std::setw(4) << std::setfill('0') << r << ".csv";
    write_text(cfg.output_dir / name.str(), os.str());
  }

  // Aggregate over the grid points every replication reached.
  {
    std::vector<std::size_t> grid;
    for (std::size_t t : result.grid) {
      bool everywhere = true;
      for (const auto& r : result.runs) everywhere = everywhere && r.trajectory.at(t) != nullptr;
      if (everywhere) grid.push_back(t);
    }
    struct Column {
      const char* name;
      RowSelector select;
    };
    const std::vector<Column> columns = {
        {"obj_gap_eq2", [](const TrajectoryRow& r) { return r.eq2.gap; }},
        {"feas_eq2", [](const TrajectoryRow& r) { return r.eq2.feasibility; }},
        {"err_rho_eq2", [](const TrajectoryRow& r) { return r.eq2.value; }},
        {"obj_gap_eq10", [](const TrajectoryRow& r) { return r.eq10.gap; }},
        {"feas_eq10", [](const TrajectoryRow& r) { return r.eq10.feasibility; }},
        {"err_rho_eq10", [](const TrajectoryRow& r) { return r.eq10.value; }},
    };
    std::ostringstream os;
    os << "t,eta";
    for (const auto& c : columns) os << ",mean_" << c.name << ",stderr_" << c.name;
    os << "\n";
    if (!grid.empty() && !result.runs.empty()) {
      std::vector<ExpectationCurve> curves;
      for (const auto& c : columns) curves.push_back(curve_over(result.runs, grid, c.select));
      for (std::size_t j = 0; j < grid.size(); ++j) {
        os << grid[j] << ',' << format_double(result.runs.front().trajectory.at(grid[j])->eta);
        for (const auto& c : curves) os << ',' << format_double(c.mean[j]) << ',' << format_double(c.stderr_[j]);
        os << "\n";
      }
    }
    write_text(cfg.output_dir / "aggregate.csv", os.str());
  }

  {
    std::ostringstream os;
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      const RunResult& run_r = result.runs[r];
      for (const auto& v : run_r.trajectory.violations) {
        os << "rep=" << r << " k=" << v.k << " check=" << v.check << " value=" << format_double(v.value)
           << " tol=" << format_double(v.tolerance) << "\n";
      }
      if (run_r.error) os << "rep=" << r << " error=" << *run_r.error << "\n";
    }
    write_text(cfg.output_dir / "invariants.log", os.str());
  }

  write_text(cfg.output_dir / "reference.txt", serialize_reference(result.reference, fingerprint(cfg.preset)));

  json report;
  report["preset"] = cfg.preset.name;
  report["description"] = result.preset.description;
  report["variant"] = to_string(cfg.solver.variant);
  report["schedule"] = to_string(cfg.solver.schedule.kind);
  report["beta"] = cfg.solver.beta;
  report["rho"] = cfg.solver.rho;
  report["t_max"] = cfg.solver.t_max;
  report["replications"] = cfg.replications;
  report["seed"] = cfg.seed;
  report["averaging"] = to_string(result.averaging);
  const ProblemConstants& c = result.preset.spec->constants();
  report["constants"] = {{"M", c.M},
                         {"sigma", c.sigma},
                         {"mu", c.mu},
                         {"L", c.L ? json(*c.L) : json(nullptr)},
                         {"D_X", result.preset.spec->diameter_x()},
                         {"D_yB", result.dyb}};
  report["reference"] = {{"method", to_string(result.reference.method)},
                         {"theta_star", result.reference.point.theta_star},
                         {"certified_tolerance", result.reference.certified_tolerance}};
  if (result.fit) {
    report["fit"] = {{"slope", result.fit->slope},
                     {"intercept", result.fit->intercept},
                     {"r_squared", result.fit->r_squared},
                     {"window", {result.fit->window.first, result.fit->window.second}},
                     {"n_points", result.fit->n_points}};
  } else {
    report["fit"] = nullptr;
  }
  json checks = json::array();
  for (const auto& ch : result.checks) {
    checks.push_back({{"name", ch.name}, {"pass", ch.pass}, {"detail", ch.detail}});
  }
  report["checks"] = checks;
  json hp = json::array();
  for (const auto& h : result.high_prob) {
    hp.push_back({{"threshold", number_json(h.threshold)},
                  {"exceed_fraction", h.exceed_fraction},
                  {"bound", h.bound},
                  {"slack", h.slack},
                  {"pass", h.pass}});
  }
  report["high_prob"] = hp;
  bool partial = false;
  for (const auto& r : result.runs) partial = partial || r.error.has_value();
  report["partial"] = partial;
  report["pass"] = result.pass();
  write_text(cfg.output_dir / "report.json", report.dump(2) + "\n");
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  try {
    validate_config(cfg);
    std::error_code ec;
    fs::create_directories(cfg.output_dir, ec);
    const fs::path probe = cfg.output_dir / ".write-test";
    {
      std::ofstream out(probe);
      if (ec || !out) {
        log << "error: output directory " << cfg.output_dir.string() << " is not writable\n";
        return 2;
      }
    }
    fs::remove(probe, ec);

    const ExperimentResult result = run_replications(cfg, &log);
    write_outputs(cfg, result);
    for (const auto& ch : result.checks) {
      log << (ch.pass ? "PASS " : "FAIL ") << ch.name << ": " << ch.detail << "\n";
    }
    if (result.fit) {
      log << "fit: slope " << format_double(result.fit->slope) << ", r^2 " << format_double(result.fit->r_squared)
          << "\n";
    }
    log << "wrote " << cfg.output_dir.string() << "\n";
    return result.pass() ? 0 : 1;
  } catch (const ConfigError& e) {
    log << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string serialize_reference(const ReferenceSolution& ref, const std::string& fp) {
  auto vec = [](std::ostream& os, const char* name, const Vector& v) {
    os << name << ' ' << v.size();
    for (Index i = 0; i < v.size(); ++i) os << ' ' << format_double(v[i]);
    os << "\n";
  };
  std::ostringstream os;
  os << "sadmm-reference 1\n";
  os << "fingerprint " << fp << "\n";
  os << "method " << to_string(ref.method) << "\n";
  os << "theta_star " << format_double(ref.point.theta_star) << "\n";
  os << "certified_tolerance " << format_double(ref.certified_tolerance) << "\n";
  os << "kkt_residual " << format_double(ref.kkt_residual) << "\n";
  os << "iterations " << ref.iterations << "\n";
  vec(os, "x", ref.point.x);
  vec(os, "y", ref.point.y);
  vec(os, "lambda", ref.lambda_star ? *ref.lambda_star : Vector());
  const std::string body = os.str();
  std::ostringstream sum;
  sum << std::hex << std::setw(16) << std::setfill('0') << fnv1a(body);
  return body + "checksum " + sum.str() + "\n";
}

std::optional<ReferenceSolution> parse_reference(const std::string& text, const std::string& fp) {
  const auto pos = text.rfind("checksum ");
  if (pos == std::string::npos) throw Error("reference cache: missing checksum");
  const std::string body = text.substr(0, pos);
  std::ostringstream sum;
  sum << std::hex << std::setw(16) << std::setfill('0') << fnv1a(body);
  std::string stored = text.substr(pos + 9);
  while (!stored.empty() && (stored.back() == '\n' || stored.back() == '\r')) stored.pop_back();
  if (stored != sum.str()) throw Error("reference cache: checksum mismatch");

  auto parse_double = [](const std::string& s) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      throw Error("reference cache: bad number '" + s + "'");
    }
    return v;
  };

  ReferenceSolution ref;
  std::istringstream in(body);
  std::string line;
  bool fp_ok = false;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    std::string rest;
    std::getline(ls, rest);
    if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
    if (key == "fingerprint") {
      fp_ok = rest == fp;
      if (!fp_ok) return std::nullopt;
    } else if (key == "method") {
      if (rest == "kkt-direct") ref.method = ReferenceMethod::kkt_direct;
      else if (rest == "long-deterministic-admm") ref.method = ReferenceMethod::long_deterministic_admm;
      else if (rest == "grid-search") ref.method = ReferenceMethod::grid_search;
      else throw Error("reference cache: unknown method " + rest);
    } else if (key == "theta_star") {
      ref.point.theta_star = parse_double(rest);
    } else if (key == "certified_tolerance") {
      ref.certified_tolerance = parse_double(rest);
    } else if (key == "kkt_residual") {
      ref.kkt_residual = parse_double(rest);
    } else if (key == "iterations") {
      ref.iterations = static_cast<std::size_t>(parse_double(rest));
    } else if (key == "x" || key == "y" || key == "lambda") {
      std::istringstream vs(rest);
      std::size_t n = 0;
      vs >> n;
      Vector v(static_cast<Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        std::string tok;
        if (!(vs >> tok)) throw Error("reference cache: short vector " + key);
        v[static_cast<Index>(i)] = parse_double(tok);
      }
      if (key == "x") ref.point.x = v;
      else if (key == "y") ref.point.y = v;
      else if (n > 0) ref.lambda_star = v;
    }
  }
  if (!fp_ok) return std::nullopt;
  return ref;
}

}  // namespace sadmm
