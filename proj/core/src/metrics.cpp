#include "sadmm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sadmm {

std::string to_string(ReferenceMethod method) {
  switch (method) {
    case ReferenceMethod::kkt_direct:
      return "kkt-direct";
    case ReferenceMethod::long_deterministic_admm:
      return "long-deterministic-admm";
    case ReferenceMethod::grid_search:
      return "grid-search";
  }
  return "unknown";
}

namespace {

// Hessian weight of theta2 when it is quadratic (0 for the indicator).
std::optional<double> theta2_curvature(const Regularizer& reg) {
  if (const auto* q = std::get_if<SquaredL2>(&reg)) return q->weight;
  if (std::holds_alternative<IndicatorOnly>(reg)) return 0.0;
  return std::nullopt;
}

}  // namespace

std::optional<ReferenceSolution> kkt_reference(const ProblemSpec& spec) {
  const auto quad = spec.theta1().quadratic_form();
  const auto w2 = theta2_curvature(spec.theta2());
  if (!quad || !w2) return std::nullopt;

  // Stationarity of theta1(x) + theta2(y) - lambda'(Ax + By - b):
  //   [H   0   -A'] [x]   [-g]
  //   [0   wI  -B'] [y] = [ 0]
  //   [A   B    0 ] [l]   [ b]
  const Index d1 = spec.d1();
  const Index d2 = spec.d2();
  const Index m = spec.m();
  const Index n = d1 + d2 + m;
  Matrix K = Matrix::Zero(n, n);
  K.block(0, 0, d1, d1) = quad->hessian;
  K.block(0, d1 + d2, d1, m) = -spec.A().transpose();
  K.block(d1, d1, d2, d2) = *w2 * Matrix::Identity(d2, d2);
  K.block(d1, d1 + d2, d2, m) = -spec.B().transpose();
  K.block(d1 + d2, 0, m, d1) = spec.A();
  K.block(d1 + d2, d1, m, d2) = spec.B();
  Vector rhs = Vector::Zero(n);
  rhs.head(d1) = -quad->linear;
  rhs.tail(m) = spec.b();

  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) return std::nullopt;
  const Vector sol = lu.solve(rhs);
  const double residual = (K * sol - rhs).norm() / std::max(1.0, rhs.norm());
  if (!(residual <= 1e-10)) return std::nullopt;

  ReferenceSolution out;
  out.point.x = sol.head(d1);
  out.point.y = sol.segment(d1, d2);
  out.lambda_star = sol.tail(m);
  if (!contains(spec.X(), out.point.x, 1e-12) || !contains(spec.Y(), out.point.y, 1e-12)) {
    return std::nullopt;
  }
  out.point.theta_star = spec.objective(out.point.x, out.point.y);
  out.method = ReferenceMethod::kkt_direct;
  out.kkt_residual = residual;
  out.certified_tolerance = std::max(spec.residual(out.point.x, out.point.y).norm(), 1e-12);
  return out;
}

ReferenceSolution admm_reference(const ProblemSpec& spec, const ReferenceOptions& options) {
  SolverConfig cfg;
  cfg.variant = Variant::deterministic;
  cfg.beta = options.beta;
  cfg.inner = options.inner;
  cfg.t_max = options.max_iterations;
  AdmmSolver solver(spec, cfg);
  const Matrix AtB = spec.A().transpose() * spec.B();

  IterateState state = solver.initial_state();
  double primal = std::numeric_limits<double>::infinity();
  double dual = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < options.max_iterations; ++k) {
    IterateState next = solver.step_deterministic(state);
    primal = spec.residual(next.x, next.y).norm();
    dual = options.beta * (AtB * (next.y - state.y)).norm();
    state = std::move(next);
    if (primal <= options.tolerance && dual <= options.tolerance) {
      ReferenceSolution out;
      out.point.x = state.x;
      out.point.y = state.y;
      out.point.theta_star = spec.objective(state.x, state.y);
      out.lambda_star = state.lambda;
      out.method = ReferenceMethod::long_deterministic_admm;
      out.certified_tolerance = options.tolerance;
      out.iterations = state.k;
      return out;
    }
  }
  std::ostringstream os;
  os << "reference: deterministic ADMM used its budget of " << options.max_iterations
     << " steps; primal residual " << primal << ", dual residual " << dual;
  throw Error(os.str());
}

ReferenceSolution compute_reference(const ProblemSpec& spec, const ReferenceOptions& options) {
  if (!spec.theta1().has_exact_expectation()) {
    throw ConfigError("reference: theta1 has no exact expectation; supply the reference objective value");
  }
  if (options.allow_kkt) {
    if (auto kkt = kkt_reference(spec)) return *kkt;
  }
  return admm_reference(spec, options);
}

ReferenceSolution grid_search_reference(const ProblemSpec& spec, const GridSearchOptions& options) {
  const Index d1 = spec.d1();
  if (d1 < 1 || d1 > 2) throw ConfigError("grid search: needs d1 in {1, 2}");
  if (spec.B().rows() != spec.B().cols()) throw ConfigError("grid search: B must be square");
  Eigen::FullPivLU<Matrix> Blu(spec.B());
  if (!Blu.isInvertible()) throw ConfigError("grid search: B must be invertible");
  if (options.points_per_axis < 3) throw ConfigError("grid search: need at least 3 points per axis");

  auto y_of = [&](const Vector& x) -> Vector { return Blu.solve(spec.b() - spec.A() * x); };
  auto f = [&](const Vector& x) {
    if (!contains(spec.X(), x)) return std::numeric_limits<double>::infinity();
    const Vector y = y_of(x);
    if (!contains(spec.Y(), y)) return std::numeric_limits<double>::infinity();
    return spec.objective(x, y);
  };

  Vector center = options.center.size() == d1 ? options.center : Vector::Zero(d1);
  double half = options.half_width;
  const int n = options.points_per_axis;
  Vector best = center;
  double best_val = f(center);
  double h = 2.0 * half / (n - 1);
  for (;;) {
    h = 2.0 * half / (n - 1);
    Vector x(d1);
    const int n2 = d1 == 2 ? n : 1;
    for (int i = 0; i < n; ++i) {
      x[0] = center[0] - half + i * h;
      for (int j = 0; j < n2; ++j) {
        if (d1 == 2) x[1] = center[1] - half + j * h;
        const double v = f(x);
        if (v < best_val) {
          best_val = v;
          best = x;
        }
      }
    }
    if (h <= options.resolution) break;
    center = best;
    half = 2.0 * h;
  }
  if (!std::isfinite(best_val)) throw Error("grid search: no feasible grid point");

  ReferenceSolution out;
  out.point.x = best;
  out.point.y = y_of(best);
  out.point.theta_star = best_val;
  out.method = ReferenceMethod::grid_search;
  out.certified_tolerance = std::max(spec.residual(out.point.x, out.point.y).norm(), h);
  return out;
}

double dyb(const ProblemSpec& spec, const Vector& y0, const Vector& y_star) {
  return (spec.B() * (y0 - y_star)).norm();
}

// ---------------------------------------------------------------------------

RowSelector select_err_rho(Averaging averaging) {
  if (averaging == Averaging::eq10_aligned) {
    return [](const TrajectoryRow& r) { return r.eq10.value; };
  }
  return [](const TrajectoryRow& r) { return r.eq2.value; };
}

ExpectationCurve estimate_expectation(const std::vector<std::vector<double>>& curves,
                                      const std::vector<std::size_t>& t_grid) {
  if (curves.size() < 2) throw ConfigError("estimate_expectation: needs at least 2 trajectories");
  for (const auto& c : curves) {
    if (c.size() != t_grid.size()) throw DimensionError("estimate_expectation: curve length mismatch");
  }
  const double R = static_cast<double>(curves.size());
  ExpectationCurve out;
  out.t = t_grid;
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    double mean = 0.0;
    for (const auto& c : curves) mean += c[j];
    mean /= R;
    double ss = 0.0;
    for (const auto& c : curves) ss += (c[j] - mean) * (c[j] - mean);
    const double sd = std::sqrt(ss / (R - 1.0));
    out.mean.push_back(mean);
    out.stddev.push_back(sd);
    out.stderr_.push_back(sd / std::sqrt(R));
  }
  return out;
}

ExpectationCurve estimate_expectation(const std::vector<Trajectory>& trajectories,
                                      const std::vector<std::size_t>& t_grid,
                                      const RowSelector& select) {
  if (trajectories.size() < 2) {
    throw ConfigError("estimate_expectation: needs at least 2 trajectories");
  }
  auto last_k = [](const Trajectory& tr) { return tr.rows.empty() ? std::size_t{0} : tr.rows.back().k; };
  const std::size_t t_max = last_k(trajectories.front());
  std::vector<std::vector<double>> curves;
  curves.reserve(trajectories.size());
  for (const auto& tr : trajectories) {
    if (last_k(tr) != t_max) {
      throw DimensionError("estimate_expectation: trajectories have different lengths");
    }
    std::vector<double> c;
    c.reserve(t_grid.size());
    for (std::size_t t : t_grid) {
      const TrajectoryRow* row = tr.at(t);
      if (!row) throw DimensionError("estimate_expectation: t = " + std::to_string(t) + " not recorded");
      c.push_back(select(*row));
    }
    curves.push_back(std::move(c));
  }
  return estimate_expectation(curves, t_grid);
}

RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& values,
                 std::pair<double, double> window) {
  if (t.size() != values.size()) throw DimensionError("fit_rate: t and values differ in length");
  if (!(window.first < window.second)) throw ConfigError("fit_rate: window must satisfy lo < hi");
  std::vector<double> lx;
  std::vector<double> ly;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < window.first || t[i] > window.second) continue;
    if (!(values[i] > 0.0) || !std::isfinite(values[i])) {
      std::ostringstream os;
      os << "fit_rate: value " << values[i] << " at t = " << t[i]
         << " is not positive; the curve has converged below noise, use a smaller window";
      throw ConfigError(os.str());
    }
    lx.push_back(std::log(t[i]));
    ly.push_back(std::log(values[i]));
  }
  const std::size_t n = lx.size();
  if (n < 5) throw ConfigError("fit_rate: fewer than 5 points in the window");

  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0;
  double sxy = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  if (!(sxx > 0.0)) throw ConfigError("fit_rate: all t in the window coincide");
  RateFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.window = window;
  fit.n_points = static_cast<int>(n);
  return fit;
}

std::vector<std::size_t> geometric_grid(std::size_t lo, std::size_t hi, int n) {
  if (lo < 1 || hi < lo) throw ConfigError("geometric_grid: need 1 <= lo <= hi");
  if (n < 2) throw ConfigError("geometric_grid: need at least 2 points");
  std::vector<std::size_t> out;
  const double ratio = static_cast<double>(hi) / static_cast<double>(lo);
  for (int i = 0; i < n; ++i) {
    const double v = static_cast<double>(lo) * std::pow(ratio, static_cast<double>(i) / (n - 1));
    std::size_t k = static_cast<std::size_t>(std::llround(v));
    k = std::clamp(k, lo, hi);
    if (out.empty() || out.back() != k) out.push_back(k);
  }
  out.back() = hi;
  return out;
}

std::pair<double, double> default_fit_window(std::size_t t_max) {
  return {std::max(1.0, static_cast<double>(t_max) / 100.0), static_cast<double>(t_max)};
}

// ---------------------------------------------------------------------------

BoundInputs bound_inputs(const ProblemSpec& spec, const SolverConfig& cfg, double dyb_value) {
  const ProblemConstants& c = spec.constants();
  BoundInputs in;
  in.D_X = spec.diameter_x();
  in.M = c.M;
  in.sigma = c.sigma;
  in.mu = c.mu;
  in.L = c.L.value_or(0.0);
  in.beta = cfg.beta;
  in.rho = cfg.rho;
  in.dyb = dyb_value;
  return in;
}

double m1(double t, const BoundInputs& in) { return std::sqrt(2.0) * in.D_X * in.M / std::sqrt(t); }

double m2(double t, const BoundInputs& in) {
  return (in.beta * in.dyb * in.dyb + in.rho * in.rho / in.beta) / (2.0 * t);
}

double convex_bound(double t, const BoundInputs& in) { return m1(t, in) + m2(t, in); }

double strongly_convex_bound(double t, const BoundInputs& in) {
  return in.M * in.M * std::log(t) / (in.mu * t) + in.mu * in.D_X * in.D_X / (2.0 * t) + m2(t, in);
}

double smooth_bound(double t, const BoundInputs& in) {
  return std::sqrt(2.0) * in.D_X * in.sigma / std::sqrt(t) + in.L * in.D_X * in.D_X / (2.0 * t) +
         m2(t, in);
}

double deterministic_bound(double t, const BoundInputs& in) { return m2(t, in); }

HighProbResult high_prob_check(const std::vector<double>& values, double t, double omega,
                               const ProblemSpec& spec, const SolverConfig& cfg, double dyb_value) {
  if (!spec.theta1().bounded_noise()) {
    throw ConfigError(
        "high_prob_check: the oracle noise is unbounded, so the exponential-moment assumption "
        "cannot be certified");
  }
  if (cfg.variant != Variant::stochastic || cfg.schedule.kind != ScheduleKind::convex) {
    throw ConfigError("high_prob_check: needs stochastic ADMM with the convex schedule");
  }
  if (!(omega > 0.0)) throw ConfigError("high_prob_check: Omega must be positive");
  if (values.empty()) throw ConfigError("high_prob_check: no replications");

  const BoundInputs in = bound_inputs(spec, cfg, dyb_value);
  HighProbResult out;
  out.threshold = (1.0 + 0.5 * omega + 2.0 * std::sqrt(2.0 * omega)) * m1(t, in) + m2(t, in);
  std::size_t exceed = 0;
  for (double v : values) {
    if (v > out.threshold) ++exceed;
  }
  out.replications = values.size();
  out.exceed_fraction = static_cast<double>(exceed) / static_cast<double>(values.size());
  out.bound = 2.0 * std::exp(-omega);
  out.slack = 1.96 * std::sqrt(0.25 / static_cast<double>(values.size()));
  out.pass = out.exceed_fraction <= out.bound + out.slack;
  return out;
}

}  // namespace sadmm
