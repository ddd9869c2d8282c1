#include "sadmm/prox.hpp"

#include <cmath>
#include <sstream>

namespace sadmm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Minimizes f(x) + (c/2)||x - v||^2 over ||x|| <= R given the whole-space
// map prox(v, c). The ball multiplier nu turns the problem into
// prox(c v / (c + nu), c + nu), whose norm is nonincreasing in nu.
template <class ProxFn>
Vector ball_constrained_prox(ProxFn&& prox, const Vector& v, double c, double radius) {
  Vector x = prox(v, c);
  if (x.norm() <= radius) return x;
  double lo = 0.0;
  double hi = c;
  Vector x_hi = prox(c * v / (c + hi), c + hi);
  for (int i = 0; i < 200 && x_hi.norm() > radius; ++i) {
    lo = hi;
    hi *= 2.0;
    x_hi = prox(c * v / (c + hi), c + hi);
  }
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    Vector x_mid = prox(c * v / (c + mid), c + mid);
    if (x_mid.norm() > radius) {
      lo = mid;
    } else {
      hi = mid;
      x_hi = std::move(x_mid);
    }
  }
  // x_hi is feasible up to the final bracket; remove the last ulp of excess.
  const double n = x_hi.norm();
  if (n > radius) x_hi *= radius / n;
  return x_hi;
}

Vector separable_prox(const Vector& z, double c, const Regularizer& reg) {
  return std::visit(Overloaded{
                        [&](const L1Norm& r) -> Vector {
                          const double t = r.weight / c;
                          return z.array().sign() * (z.array().abs() - t).max(0.0);
                        },
                        [&](const SquaredL2& r) -> Vector { return (c / (c + r.weight)) * z; },
                        [&](const HingeSum& r) -> Vector {
                          const double shift = r.weight / c;
                          Vector y(z.size());
                          for (Index i = 0; i < z.size(); ++i) {
                            if (z[i] > 1.0) {
                              y[i] = z[i];
                            } else if (z[i] + shift < 1.0) {
                              y[i] = z[i] + shift;
                            } else {
                              y[i] = 1.0;
                            }
                          }
                          return y;
                        },
                        [&](const IndicatorOnly&) -> Vector { return z; },
                    },
                    reg);
}

}  // namespace

Vector project(const Vector& z, const FeasibleSet& set) {
  return std::visit(Overloaded{
                        [&](const WholeSpace&) -> Vector { return z; },
                        [&](const Ball& s) -> Vector {
                          const double n = z.norm();
                          if (n <= s.radius) return z;
                          Vector p = z * (s.radius / n);
                          // Rounding can leave the norm a few ulps above R; pull it
                          // inside so projecting again is a no-op.
                          while (p.norm() > s.radius) p *= 1.0 - std::numeric_limits<double>::epsilon();
                          return p;
                        },
                        [&](const Box& s) -> Vector {
                          return z.cwiseMax(s.lower).cwiseMin(s.upper);
                        },
                    },
                    set);
}

Vector prox_theta2(const Vector& z, double c, const Regularizer& reg, const FeasibleSet& Y) {
  if (!(c > 0.0)) throw ConfigError("prox_theta2: c must be positive");
  if (std::holds_alternative<WholeSpace>(Y)) return separable_prox(z, c, reg);
  if (std::holds_alternative<Box>(Y)) return project(separable_prox(z, c, reg), Y);
  // Ball: the l1, squared-l2 and indicator maps commute with radial scaling,
  // so projecting the unconstrained answer is exact; hinge needs the search.
  const double radius = std::get<Ball>(Y).radius;
  if (!std::holds_alternative<HingeSum>(reg)) return project(separable_prox(z, c, reg), Y);
  return ball_constrained_prox(
      [&](const Vector& v, double cc) { return separable_prox(v, cc, reg); }, z, c, radius);
}

Vector prox_over_set(const ConvexObjective& f, const Vector& v, double c, const FeasibleSet& X) {
  auto whole = [&](const Vector& p, double cc) -> Vector {
    auto out = f.prox(p, cc);
    if (!out) {
      throw Error("x-update: theta1 (" + f.name() +
                  ") has no closed-form proximal map; use the linearized or stochastic variant");
    }
    return *out;
  };
  return std::visit(Overloaded{
                        [&](const WholeSpace&) -> Vector { return whole(v, c); },
                        [&](const Ball& s) -> Vector {
                          return ball_constrained_prox(whole, v, c, s.radius);
                        },
                        [&](const Box&) -> Vector {
                          if (!f.separable()) {
                            throw Error("x-update: box-constrained prox needs a separable theta1 (" +
                                        f.name() + ")");
                          }
                          return project(whole(v, c), X);
                        },
                    },
                    X);
}

// ---------------------------------------------------------------------------

QuadraticSubproblem::QuadraticSubproblem(Matrix P, FeasibleSet X, InnerSolverOptions options)
    : P_(std::move(P)), X_(std::move(X)), options_(options) {
  if (P_.rows() != P_.cols()) throw DimensionError("QuadraticSubproblem: P must be square");
  const Index n = P_.rows();
  const double a = n > 0 ? P_(0, 0) : 0.0;
  Matrix diff = P_;
  diff.diagonal().array() -= a;
  const double scale = std::max(1.0, P_.cwiseAbs().maxCoeff());
  isotropic_ = n == 0 || diff.cwiseAbs().maxCoeff() <= 1e-14 * scale;
  iso_scale_ = a;
  if (!isotropic_) {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(P_, Eigen::EigenvaluesOnly);
    p_max_eig_ = eig.eigenvalues().maxCoeff();
  }
}

void QuadraticSubproblem::refactor(double shift) {
  if (cached_shift_ &&
      std::abs(*cached_shift_ - shift) <= 1e-12 * std::max(std::abs(shift), 1e-300)) {
    return;
  }
  Matrix Q = P_;
  Q.diagonal().array() += shift;
  factor_.compute(Q);
  cached_shift_ = shift;
  ++factorizations_;
}

Vector QuadraticSubproblem::solve(const Vector& q, double shift) {
  last_inner_iterations_ = 0;
  if (isotropic_) {
    const double curvature = iso_scale_ + shift;
    if (!(curvature > 0.0)) throw Error("QuadraticSubproblem: curvature must be positive");
    return project(q / curvature, X_);
  }
  refactor(shift);
  Vector x = factor_.solve(q);
  if (contains(X_, x)) return x;

  // Projected gradient from the projection of the unconstrained minimizer.
  const double lipschitz = p_max_eig_ + shift;
  x = project(x, X_);
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= options_.max_iterations; ++it) {
    Vector grad = P_ * x + shift * x - q;
    Vector next = project(x - grad / lipschitz, X_);
    residual = lipschitz * (next - x).norm();
    x = std::move(next);
    last_inner_iterations_ = it;
    if (residual <= options_.tolerance) return x;
  }
  std::ostringstream os;
  os << "x-subproblem: projected gradient stopped after " << options_.max_iterations
     << " iterations with residual " << residual;
  throw InnerSolverError(os.str(), residual);
}

// ---------------------------------------------------------------------------

XSubproblemSolver::XSubproblemSolver(const ProblemSpec& spec, InnerSolverOptions options)
    : spec_(&spec), options_(options), AtA_(spec.A().transpose() * spec.A()) {}

Vector XSubproblemSolver::solve(const Vector& g, const IterateState& state, double beta,
                                double eta) {
  if (!(eta > 0.0)) throw ConfigError("x-subproblem: eta must be positive");
  if (!(beta >= 0.0)) throw ConfigError("x-subproblem: beta must be nonnegative");
  if (!beta_ || *beta_ != beta) {
    sub_.emplace(beta * AtA_, spec_->X(), options_);
    beta_ = beta;
  }
  const Vector target = spec_->b() + state.lambda / (beta > 0.0 ? beta : 1.0) - spec_->B() * state.y;
  Vector q = state.x / eta - g;
  if (beta > 0.0) q.noalias() += beta * (spec_->A().transpose() * target);
  return sub_->solve(q, 1.0 / eta);
}

Vector XSubproblemSolver::smooth_gradient(const Vector& x, const Vector& g,
                                          const IterateState& state, double beta) const {
  if (beta == 0.0) return g;
  const Vector inner = spec_->A() * x + spec_->B() * state.y - spec_->b() - state.lambda / beta;
  return g + beta * (spec_->A().transpose() * inner);
}

Vector solve_x_subproblem(const Vector& g, const IterateState& state, const ProblemSpec& spec,
                          double beta, double eta) {
  XSubproblemSolver solver(spec);
  return solver.solve(g, state, beta, eta);
}

double three_points_residual(const Vector& x_star, const Vector& u, const Vector& probe_x,
                             const Vector& g_at_xstar, double s) {
  const double lhs = g_at_xstar.dot(x_star - probe_x);
  const double rhs =
      0.5 * s * ((probe_x - u).squaredNorm() - (probe_x - x_star).squaredNorm() -
                 (x_star - u).squaredNorm());
  return lhs - rhs;
}

bool three_points_check(const Vector& x_star, const Vector& u, const Vector& probe_x,
                        const Vector& g_at_xstar, double s, double tol) {
  return three_points_residual(x_star, u, probe_x, g_at_xstar, s) <= tol;
}

// ---------------------------------------------------------------------------

std::optional<double> scaled_identity(const Matrix& B) {
  if (B.rows() != B.cols() || B.rows() == 0) return std::nullopt;
  const double s = B(0, 0);
  if (s == 0.0) return std::nullopt;
  Matrix diff = B;
  diff.diagonal().array() -= s;
  if (diff.cwiseAbs().maxCoeff() != 0.0) return std::nullopt;
  return s;
}

YSubproblemSolver::YSubproblemSolver(const ProblemSpec& spec, YUpdateMode mode,
                                     InnerSolverOptions options)
    : spec_(&spec), options_(options) {
  const auto s = scaled_identity(spec.B());
  if (mode == YUpdateMode::prox && !s) {
    throw ConfigError(
        "y-update: closed-form prox needs B to be a scaled identity; use the inner y-solver mode");
  }
  if (mode != YUpdateMode::inner && s) {
    scale_ = s;
  } else {
    const Matrix BtB = spec.B().transpose() * spec.B();
    Eigen::SelfAdjointEigenSolver<Matrix> eig(BtB, Eigen::EigenvaluesOnly);
    btb_max_eig_ = eig.eigenvalues().maxCoeff();
    if (!(btb_max_eig_ > 0.0)) throw ConfigError("y-update: B must be nonzero");
  }
}

Vector YSubproblemSolver::solve(const Vector& x_next, const Vector& lambda, const Vector& y_start,
                                double beta) {
  if (!(beta > 0.0)) throw ConfigError("y-update: beta must be positive");
  const Vector target = spec_->b() + lambda / beta - spec_->A() * x_next;
  if (scale_) {
    const double s = *scale_;
    return prox_theta2(target / s, beta * s * s, spec_->theta2(), spec_->Y());
  }
  // Proximal gradient on theta2(y) + (beta/2)||By - target||^2.
  const double lipschitz = beta * btb_max_eig_;
  Vector y = project(y_start, spec_->Y());
  double residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < options_.max_iterations; ++it) {
    const Vector grad = beta * (spec_->B().transpose() * (spec_->B() * y - target));
    Vector next = prox_theta2(y - grad / lipschitz, lipschitz, spec_->theta2(), spec_->Y());
    residual = lipschitz * (next - y).norm();
    y = std::move(next);
    if (residual <= options_.tolerance) return y;
  }
  std::ostringstream os;
  os << "y-subproblem: inner solver stopped after " << options_.max_iterations
     << " iterations with residual " << residual;
  throw InnerSolverError(os.str(), residual);
}

}  // namespace sadmm
