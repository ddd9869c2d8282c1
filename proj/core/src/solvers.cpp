#include "sadmm/solvers.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace sadmm {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double max_eigenvalue(const Matrix& S) {
  if (S.size() == 0) return 0.0;
  Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

double nan_max(double a, double b) {
  if (std::isnan(a)) return b;
  if (std::isnan(b)) return a;
  return std::max(a, b);
}

void merge_worst(InvariantResiduals& worst, const InvariantResiduals& r) {
  worst.dual_identity = nan_max(worst.dual_identity, r.dual_identity);
  worst.y_optimality = nan_max(worst.y_optimality, r.y_optimality);
  worst.x_optimality = nan_max(worst.x_optimality, r.x_optimality);
  worst.three_points = nan_max(worst.three_points, r.three_points);
  worst.lemma1 = nan_max(worst.lemma1, r.lemma1);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::deterministic:
      return "deterministic";
    case Variant::linearized:
      return "linearized";
    case Variant::stochastic:
      return "stochastic";
  }
  return "unknown";
}

std::string to_string(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::convex:
      return "convex";
    case ScheduleKind::strongly_convex:
      return "strongly-convex";
    case ScheduleKind::smooth:
      return "smooth";
    case ScheduleKind::constant:
      return "constant";
  }
  return "unknown";
}

std::string to_string(Averaging a) {
  return a == Averaging::eq2_shifted ? "eq2-shifted" : "eq10-aligned";
}

Variant parse_variant(const std::string& text) {
  if (text == "deterministic") return Variant::deterministic;
  if (text == "linearized") return Variant::linearized;
  if (text == "stochastic") return Variant::stochastic;
  throw ConfigError("unknown variant '" + text +
                    "' (expected deterministic, linearized, stochastic)");
}

ScheduleKind parse_schedule(const std::string& text) {
  if (text == "convex") return ScheduleKind::convex;
  if (text == "strongly-convex") return ScheduleKind::strongly_convex;
  if (text == "smooth") return ScheduleKind::smooth;
  if (text == "constant") return ScheduleKind::constant;
  throw ConfigError("unknown schedule '" + text +
                    "' (expected convex, strongly-convex, smooth, constant)");
}

Averaging parse_averaging(const std::string& text) {
  if (text == "eq2-shifted") return Averaging::eq2_shifted;
  if (text == "eq10-aligned") return Averaging::eq10_aligned;
  throw ConfigError("unknown averaging '" + text + "' (expected eq2-shifted, eq10-aligned)");
}

Averaging effective_averaging(const SolverConfig& cfg) {
  if (cfg.averaging) return *cfg.averaging;
  return cfg.schedule.kind == ScheduleKind::smooth ? Averaging::eq10_aligned
                                                   : Averaging::eq2_shifted;
}

double step_size(const Schedule& schedule, const ProblemSpec& spec, std::size_t index) {
  if (index < 1) throw ConfigError("step_size: index must be >= 1");
  const double k = static_cast<double>(index);
  const ProblemConstants& c = spec.constants();
  switch (schedule.kind) {
    case ScheduleKind::convex:
      return spec.diameter_x() / (c.M * std::sqrt(2.0 * k));
    case ScheduleKind::strongly_convex:
      if (!(c.mu > 0.0)) throw ConfigError("strongly-convex schedule requires mu > 0");
      return 1.0 / (k * c.mu);
    case ScheduleKind::smooth:
      if (!c.L) throw ConfigError("smooth schedule requires a Lipschitz constant L");
      return 1.0 / (*c.L + c.sigma * std::sqrt(2.0 * k) / spec.diameter_x());
    case ScheduleKind::constant:
      return schedule.eta;
  }
  return kNaN;
}

void validate(const SolverConfig& cfg, const ProblemSpec& spec) {
  if (!(cfg.beta > 0.0)) throw ConfigError("solver.beta: must be positive");
  if (!(cfg.rho > 0.0)) throw ConfigError("solver.rho: must be positive");
  if (cfg.probe_count < 0 || cfg.y_probe_count < 0) {
    throw ConfigError("solver.probe_count: must be nonnegative");
  }
  if (cfg.x0 && cfg.x0->size() != spec.d1()) throw DimensionError("solver.x0: wrong dimension");
  if (cfg.y0 && cfg.y0->size() != spec.d2()) throw DimensionError("solver.y0: wrong dimension");

  if (cfg.variant == Variant::stochastic) {
    const ProblemConstants& c = spec.constants();
    switch (cfg.schedule.kind) {
      case ScheduleKind::strongly_convex:
        if (!(c.mu > 0.0)) {
          throw ConfigError(
              "solver.schedule: strongly-convex schedule eta_k = 1/(k mu) requires mu > 0");
        }
        break;
      case ScheduleKind::smooth:
        if (!c.L) {
          throw ConfigError("solver.schedule: smooth schedule requires L (Lipschitz smoothness)");
        }
        break;
      case ScheduleKind::constant:
        if (!(cfg.schedule.eta > 0.0)) throw ConfigError("solver.eta: must be positive");
        break;
      case ScheduleKind::convex:
        break;
    }
  }

  if (cfg.variant == Variant::linearized) {
    if (cfg.linearized_G.has_value() == cfg.linearized_r.has_value()) {
      throw ConfigError("solver.linearized: give exactly one of G or r");
    }
    if (cfg.linearized_G) {
      const Matrix& G = *cfg.linearized_G;
      if (G.rows() != spec.d1() || G.cols() != spec.d1()) {
        throw DimensionError("solver.linearized.G: must be d1 x d1");
      }
      if ((G - G.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, G.cwiseAbs().maxCoeff())) {
        throw ConfigError("solver.linearized.G: must be symmetric");
      }
      if (G.size() > 0) {
        Eigen::SelfAdjointEigenSolver<Matrix> eig(G, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-10) {
          throw ConfigError("solver.linearized.G: must be positive semidefinite");
        }
      }
    } else {
      const double need = cfg.beta * max_eigenvalue(spec.A().transpose() * spec.A());
      if (*cfg.linearized_r < need * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "solver.linearized.r: r = " << *cfg.linearized_r << " < beta ||A'A|| = " << need
           << " makes G = rI - beta A'A indefinite";
        throw ConfigError(os.str());
      }
    }
  }
}

// ---------------------------------------------------------------------------

AdmmSolver::AdmmSolver(const ProblemSpec& spec, SolverConfig cfg)
    : spec_(&spec),
      cfg_(std::move(cfg)),
      AtA_(spec.A().transpose() * spec.A()),
      x_solver_(spec, cfg_.inner),
      y_solver_(spec, cfg_.y_update, cfg_.inner) {
  validate(cfg_, spec);
  if (cfg_.variant == Variant::linearized && cfg_.linearized_G) G_ = *cfg_.linearized_G;
}

IterateState AdmmSolver::initial_state() const {
  const Vector x0 = cfg_.x0 ? *cfg_.x0 : Vector::Zero(spec_->d1());
  const Vector y0 = cfg_.y0 ? *cfg_.y0 : Vector::Zero(spec_->d2());
  return IterateState::initial(x0, y0, spec_->m());
}

Vector AdmmSolver::y_update(const Vector& x_next, const IterateState& state) {
  return y_solver_.solve(x_next, state.lambda, state.y, cfg_.beta);
}

IterateState AdmmSolver::finish(const IterateState& state, Vector x_next) {
  Vector y_next = y_update(x_next, state);
  Vector lambda_next = state.lambda - cfg_.beta * spec_->residual(x_next, y_next);
  IterateState next = state;
  next.advance(std::move(x_next), std::move(y_next), std::move(lambda_next));
  return next;
}

// argmin_{x in X} theta1(x) + (beta/2)||Ax - v||^2 [+ 0.5||x - x_k||_G^2],
// v = b + lambda_k/beta - B y_k.
Vector AdmmSolver::exact_x_update(const IterateState& state, const Matrix* G) {
  const double beta = cfg_.beta;
  const Vector v = spec_->b() + state.lambda / beta - spec_->B() * state.y;
  Vector q = beta * (spec_->A().transpose() * v);
  if (G) q.noalias() += *G * state.x;

  const auto& theta1 = spec_->theta1();
  if (auto quad = theta1.quadratic_form()) {
    if (!exact_sub_) {
      Matrix P = quad->hessian + beta * AtA_;
      if (G) P += *G;
      exact_sub_.emplace(std::move(P), spec_->X(), cfg_.inner);
    }
    return exact_sub_->solve(q - quad->linear, 0.0);
  }

  Matrix curvature = beta * AtA_;
  if (G) curvature += *G;
  const double r = curvature.size() > 0 ? curvature(0, 0) : 0.0;
  Matrix diff = curvature;
  diff.diagonal().array() -= r;
  if (!(r > 0.0) || diff.cwiseAbs().maxCoeff() > 1e-14 * std::max(1.0, r)) {
    throw Error("x-update: no closed form for theta1 (" + theta1.name() +
                ") with a non-isotropic quadratic term; use the linearized or stochastic variant");
  }
  return prox_over_set(theta1, q / r, r, spec_->X());
}

IterateState AdmmSolver::step_deterministic(const IterateState& state) {
  return finish(state, exact_x_update(state, nullptr));
}

IterateState AdmmSolver::step_linearized(const IterateState& state) {
  if (cfg_.linearized_r) {
    const double r = *cfg_.linearized_r;
    const double beta = cfg_.beta;
    const Vector inner = spec_->residual(state.x, state.y) - state.lambda / beta;
    const Vector center = state.x - (beta / r) * (spec_->A().transpose() * inner);
    return finish(state, prox_over_set(spec_->theta1(), center, r, spec_->X()));
  }
  if (!G_) throw ConfigError("linearized step: no G configured");
  return finish(state, exact_x_update(state, &*G_));
}

IterateState AdmmSolver::step_stochastic(const IterateState& state, StochasticOracle& oracle,
                                         StepRecord* record) {
  const double eta = step_size(cfg_.schedule, *spec_, state.k + 1);
  NoiseSample ns = oracle.sample_subgradient(state.x);
  Vector x_next = x_solver_.solve(ns.g, state, cfg_.beta, eta);
  if (record) {
    record->eta = eta;
    record->g = std::move(ns.g);
    record->delta = std::move(ns.delta);
  }
  return finish(state, std::move(x_next));
}

IterateState AdmmSolver::step(const IterateState& state, StochasticOracle* oracle,
                              StepRecord* record) {
  switch (cfg_.variant) {
    case Variant::deterministic:
      return step_deterministic(state);
    case Variant::linearized:
      return step_linearized(state);
    case Variant::stochastic:
      if (!oracle) throw ConfigError("stochastic variant needs an oracle");
      return step_stochastic(state, *oracle, record);
  }
  throw ConfigError("unknown variant");
}

IterateState step_deterministic(const IterateState& state, const ProblemSpec& spec,
                                const SolverConfig& cfg) {
  AdmmSolver solver(spec, cfg);
  return solver.step_deterministic(state);
}

IterateState step_linearized(const IterateState& state, const ProblemSpec& spec,
                             const SolverConfig& cfg) {
  AdmmSolver solver(spec, cfg);
  return solver.step_linearized(state);
}

IterateState step_stochastic(const IterateState& state, const ProblemSpec& spec,
                             const SolverConfig& cfg, StochasticOracle& oracle,
                             StepRecord* record) {
  AdmmSolver solver(spec, cfg);
  return solver.step_stochastic(state, oracle, record);
}

// ---------------------------------------------------------------------------

Lemma1Terms lemma1_terms(const IterateState& prev, const IterateState& next,
                         const StackedW& probe, const Vector& g, const Vector& delta, double eta,
                         const ProblemSpec& spec, double beta) {
  const auto& theta1 = spec.theta1();
  const Regularizer& theta2 = spec.theta2();

  const double f_xk = theta1.value(prev.x);
  const double f_y1 = evaluate(theta2, next.y);
  const double f_u = theta1.value(probe.x) + evaluate(theta2, probe.y);
  const StackedW w1 = next.w();
  const double coupling = (w1 - probe).dot(eval_F(w1, spec));

  const double t_grad = 0.5 * eta * g.squaredNorm();
  const double t_x = ((prev.x - probe.x).squaredNorm() - (next.x - probe.x).squaredNorm()) / (2.0 * eta);
  const Vector ax_b = spec.A() * probe.x - spec.b();
  const double t_y = 0.5 * beta *
                     ((ax_b + spec.B() * prev.y).squaredNorm() - (ax_b + spec.B() * next.y).squaredNorm());
  const double t_noise = delta.dot(probe.x - prev.x);
  const double t_lambda = ((probe.lambda - prev.lambda).squaredNorm() -
                           (probe.lambda - next.lambda).squaredNorm()) / (2.0 * beta);

  Lemma1Terms out;
  out.lhs = f_xk + f_y1 - f_u + coupling;
  out.rhs = t_grad + t_x + t_y + t_noise + t_lambda;
  out.scale = std::abs(f_xk) + std::abs(f_y1) + std::abs(f_u) + std::abs(coupling) +
              std::abs(t_grad) + std::abs(t_x) + std::abs(t_y) + std::abs(t_noise) +
              std::abs(t_lambda);
  return out;
}

double lemma1_check(const IterateState& prev, const IterateState& next, const StackedW& probe,
                    const Vector& g, const Vector& delta, const ProblemSpec& spec,
                    const SolverConfig& cfg) {
  const double eta = step_size(cfg.schedule, spec, prev.k + 1);
  return lemma1_terms(prev, next, probe, g, delta, eta, spec, cfg.beta).residual();
}

double dual_identity_residual(const IterateState& prev, const IterateState& next,
                              const ProblemSpec& spec, double beta) {
  return (next.lambda - prev.lambda + beta * spec.residual(next.x, next.y)).norm();
}

double y_optimality_residual(const IterateState& next, const Vector& y_probe,
                             const ProblemSpec& spec) {
  const Regularizer& theta2 = spec.theta2();
  return evaluate(theta2, next.y) - evaluate(theta2, y_probe) -
         (next.y - y_probe).dot(spec.B().transpose() * next.lambda);
}

InvariantChecker::InvariantChecker(const ProblemSpec& spec, const SolverConfig& cfg,
                                   InvariantTolerances tolerances)
    : spec_(&spec), cfg_(&cfg), tol_(tolerances), gradient_helper_(spec) {}

InvariantResiduals InvariantChecker::check(const IterateState& prev, const IterateState& next,
                                           const StepRecord& record,
                                           std::vector<InvariantViolation>* violations) {
  const ProblemSpec& spec = *spec_;
  const SolverConfig& cfg = *cfg_;
  const double beta = cfg.beta;
  InvariantResiduals out;
  auto flag = [&](const char* name, double value, double tol) {
    if (violations && value > tol) violations->push_back({next.k, name, value, tol});
  };

  {
    const double r = dual_identity_residual(prev, next, spec, beta);
    const double scale = prev.lambda.norm() + next.lambda.norm() +
                         beta * spec.residual(next.x, next.y).norm();
    out.dual_identity = r == 0.0 ? 0.0 : r / std::max(scale, std::numeric_limits<double>::min());
    flag("dual_identity", out.dual_identity, tol_.dual_identity);
  }

  CounterRng rng(cfg.probe_seed ^ streams::kProbes, cfg.probe_stream, next.k);
  auto x_probe = [&]() {
    const double scale = std::min(0.5 * diameter(spec.X()), std::max(1.0, next.x.norm()));
    return sample_point(spec.X(), spec.d1(), rng, next.x, scale);
  };
  auto y_probe = [&]() {
    return sample_point(spec.Y(), spec.d2(), rng, next.y, std::max(1.0, next.y.norm()));
  };

  out.y_optimality = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < cfg.y_probe_count; ++i) {
    out.y_optimality = std::max(out.y_optimality, y_optimality_residual(next, y_probe(), spec));
  }
  if (cfg.y_probe_count == 0) out.y_optimality = kNaN;
  flag("y_optimality", out.y_optimality, tol_.y_optimality);

  // Gradient of the smooth part of the x-subproblem at x_{k+1}, the Bregman
  // weight s, and the full VI gradient (smooth part + s (x_{k+1} - x_k)).
  std::optional<Vector> smooth_grad;
  double s = 0.0;
  std::optional<Vector> vi_grad;
  const auto quad = spec.theta1().quadratic_form();
  if (cfg.variant == Variant::stochastic && record.g.size() == spec.d1()) {
    smooth_grad = gradient_helper_.smooth_gradient(next.x, record.g, prev, beta);
    s = 1.0 / record.eta;
    vi_grad = *smooth_grad + s * (next.x - prev.x);
  } else if (quad && cfg.variant == Variant::deterministic) {
    smooth_grad = quad->gradient(next.x) + gradient_helper_.smooth_gradient(next.x, Vector::Zero(spec.d1()), prev, beta);
    vi_grad = smooth_grad;
  } else if (quad && cfg.variant == Variant::linearized && cfg.linearized_r) {
    // l(x) = theta1(x) + beta <x, A'(Ax_k + By_k - b - lambda_k/beta)>, s = r.
    const Vector inner = spec.residual(prev.x, prev.y) - prev.lambda / beta;
    smooth_grad = quad->gradient(next.x) + beta * (spec.A().transpose() * inner);
    s = *cfg.linearized_r;
    vi_grad = *smooth_grad + s * (next.x - prev.x);
  } else if (quad && cfg.variant == Variant::linearized && cfg.linearized_G) {
    vi_grad = quad->gradient(next.x) +
              gradient_helper_.smooth_gradient(next.x, Vector::Zero(spec.d1()), prev, beta) +
              *cfg.linearized_G * (next.x - prev.x);
  }

  if (vi_grad && cfg.probe_count > 0) {
    double worst_vi = -std::numeric_limits<double>::infinity();
    double worst_tp = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.probe_count; ++i) {
      const Vector p = x_probe();
      worst_vi = std::max(worst_vi, -vi_grad->dot(p - next.x));
      if (smooth_grad) worst_tp = std::max(worst_tp, three_points_residual(next.x, prev.x, p, *smooth_grad, s));
    }
    out.x_optimality = worst_vi;
    flag("x_optimality", worst_vi, tol_.x_optimality);
    if (smooth_grad) {
      out.three_points = worst_tp;
      flag("three_points", worst_tp, tol_.three_points);
    }
  }

  if (cfg.variant == Variant::stochastic && record.delta && cfg.probe_count > 0) {
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < cfg.probe_count; ++i) {
      StackedW probe;
      probe.x = x_probe();
      probe.y = y_probe();
      Vector z(spec.m());
      std::normal_distribution<double> normal;
      for (Index j = 0; j < z.size(); ++j) z[j] = normal(rng);
      probe.lambda = next.lambda + std::max(1.0, next.lambda.norm()) * z;
      const Lemma1Terms t = lemma1_terms(prev, next, probe, record.g, *record.delta, record.eta, spec, beta);
      worst = std::max(worst, t.residual() / std::max(1.0, t.scale));
    }
    out.lemma1 = worst;
    flag("lemma1", worst, tol_.lemma1);
  }
  return out;
}

// ---------------------------------------------------------------------------

const TrajectoryRow* Trajectory::at(std::size_t k) const {
  auto it = std::lower_bound(rows.begin(), rows.end(), k,
                             [](const TrajectoryRow& r, std::size_t key) { return r.k < key; });
  if (it == rows.end() || it->k != k) return nullptr;
  return &*it;
}

RunResult run(const ProblemSpec& spec, const SolverConfig& cfg, StochasticOracle* oracle,
              const std::optional<ReferencePoint>& reference) {
  RunResult result;
  validate(cfg, spec);
  if (cfg.variant == Variant::stochastic && !oracle) {
    throw ConfigError("run: the stochastic variant needs an oracle");
  }
  AdmmSolver solver(spec, cfg);
  std::optional<InvariantChecker> checker;
  if (cfg.check_invariants) checker.emplace(spec, solver.config());
  result.trajectory.invariants_checked = cfg.check_invariants;

  std::vector<bool> wanted;
  if (!cfg.record_at.empty()) {
    wanted.assign(cfg.t_max + 1, false);
    for (std::size_t k : cfg.record_at) {
      if (k >= 1 && k <= cfg.t_max) wanted[k] = true;
    }
  }

  IterateState state = solver.initial_state();
  try {
    for (std::size_t it = 0; it < cfg.t_max; ++it) {
      StepRecord record;
      const auto start = std::chrono::steady_clock::now();
      IterateState next = solver.step(state, oracle, &record);
      const auto stop = std::chrono::steady_clock::now();

      InvariantResiduals inv;
      if (checker) {
        inv = checker->check(state, next, record, &result.trajectory.violations);
        merge_worst(result.trajectory.worst, inv);
      }
      state = std::move(next);

      if (!wanted.empty() && !wanted[state.k]) continue;
      TrajectoryRow row;
      row.k = state.k;
      row.eta = record.eta;
      row.step_ms = std::chrono::duration<double, std::milli>(stop - start).count();
      row.invariants = inv;
      if (reference) {
        row.eq2 = err_rho(state.avg_x_shifted, state.avg_y, spec, *reference, cfg.rho);
        row.eq10 = err_rho(state.avg_x_aligned, state.avg_y, spec, *reference, cfg.rho);
      } else {
        row.eq2 = {kNaN, spec.residual(state.avg_x_shifted, state.avg_y).norm(), kNaN};
        row.eq10 = {kNaN, spec.residual(state.avg_x_aligned, state.avg_y).norm(), kNaN};
      }
      result.trajectory.rows.push_back(row);
    }
  } catch (const Error& e) {
    std::ostringstream os;
    os << "iteration " << state.k + 1 << ": " << e.what();
    result.error = os.str();
  }
  result.final_state = std::move(state);
  return result;
}

}  // namespace sadmm
