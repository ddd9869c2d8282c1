#include "sadmm/types.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace sadmm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string dims_message(const char* what, Index got, Index expected) {
  std::ostringstream os;
  os << what << ": dimension " << got << " does not match expected " << expected;
  return os.str();
}

}  // namespace

double evaluate(const Regularizer& reg, const Vector& y) {
  return std::visit(Overloaded{
                        [&](const L1Norm& r) { return r.weight * y.lpNorm<1>(); },
                        [&](const SquaredL2& r) { return 0.5 * r.weight * y.squaredNorm(); },
                        [&](const HingeSum& r) {
                          return r.weight * (1.0 - y.array()).max(0.0).sum();
                        },
                        [](const IndicatorOnly&) { return 0.0; },
                    },
                    reg);
}

std::string name(const Regularizer& reg) {
  return std::visit(Overloaded{
                        [](const L1Norm&) { return std::string("l1"); },
                        [](const SquaredL2&) { return std::string("squared-l2"); },
                        [](const HingeSum&) { return std::string("hinge-sum"); },
                        [](const IndicatorOnly&) { return std::string("indicator"); },
                    },
                    reg);
}

double diameter(const FeasibleSet& set) {
  return std::visit(Overloaded{
                        [](const WholeSpace& s) { return s.declared_diameter; },
                        [](const Ball& s) { return 2.0 * s.radius; },
                        [](const Box& s) { return (s.upper - s.lower).norm(); },
                    },
                    set);
}

bool contains(const FeasibleSet& set, const Vector& x, double tol) {
  return std::visit(Overloaded{
                        [](const WholeSpace&) { return true; },
                        [&](const Ball& s) { return x.norm() <= s.radius + tol; },
                        [&](const Box& s) {
                          return (x.array() >= s.lower.array() - tol).all() &&
                                 (x.array() <= s.upper.array() + tol).all();
                        },
                    },
                    set);
}

std::string describe(const FeasibleSet& set) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const WholeSpace& s) { os << "whole-space(D=" << s.declared_diameter << ")"; },
                 [&](const Ball& s) { os << "ball(R=" << s.radius << ")"; },
                 [&](const Box& s) { os << "box(dim=" << s.lower.size() << ")"; },
             },
             set);
  return os.str();
}

void check_set_dimension(const FeasibleSet& set, Index dim, const char* what) {
  if (const auto* box = std::get_if<Box>(&set)) {
    if (box->lower.size() != dim || box->upper.size() != dim) {
      throw DimensionError(dims_message(what, box->lower.size(), dim));
    }
    if ((box->lower.array() > box->upper.array()).any()) {
      throw ConfigError(std::string(what) + ": box lower bound exceeds upper bound");
    }
  }
  if (const auto* ball = std::get_if<Ball>(&set)) {
    if (!(ball->radius > 0.0) || !std::isfinite(ball->radius)) {
      throw ConfigError(std::string(what) + ": ball radius must be positive and finite");
    }
  }
}

Vector sample_point(const FeasibleSet& set, Index dim, CounterRng& rng, const Vector& center,
                    double scale) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform;
  return std::visit(Overloaded{
                        [&](const WholeSpace&) -> Vector {
                          Vector z(dim);
                          for (Index i = 0; i < dim; ++i) z[i] = normal(rng);
                          return center + scale * z;
                        },
                        [&](const Ball& s) -> Vector {
                          Vector z(dim);
                          for (Index i = 0; i < dim; ++i) z[i] = normal(rng);
                          const double n = z.norm();
                          if (n == 0.0) return Vector::Zero(dim);
                          const double r = s.radius * std::pow(uniform(rng), 1.0 / double(dim));
                          return z * (r / n);
                        },
                        [&](const Box& s) -> Vector {
                          Vector z(dim);
                          for (Index i = 0; i < dim; ++i) {
                            z[i] = s.lower[i] + (s.upper[i] - s.lower[i]) * uniform(rng);
                          }
                          return z;
                        },
                    },
                    set);
}

ProblemSpec::ProblemSpec(std::shared_ptr<const StochasticModel> theta1, Regularizer theta2,
                         Matrix A, Matrix B, Vector b, FeasibleSet X, FeasibleSet Y,
                         ProblemConstants constants)
    : theta1_(std::move(theta1)),
      theta2_(std::move(theta2)),
      A_(std::move(A)),
      B_(std::move(B)),
      b_(std::move(b)),
      X_(std::move(X)),
      Y_(std::move(Y)),
      constants_(constants) {
  if (!theta1_) throw ConfigError("ProblemSpec: theta1 handle is null");
  if (A_.rows() != b_.size()) throw DimensionError(dims_message("rows(A)", A_.rows(), b_.size()));
  if (B_.rows() != b_.size()) throw DimensionError(dims_message("rows(B)", B_.rows(), b_.size()));
  if (theta1_->dim() != A_.cols()) {
    throw DimensionError(dims_message("theta1 dimension", theta1_->dim(), A_.cols()));
  }
  check_set_dimension(X_, d1(), "X");
  check_set_dimension(Y_, d2(), "Y");

  const double dx = diameter_x();
  if (!(dx > 0.0) || !std::isfinite(dx)) {
    throw ConfigError("ProblemSpec: D_X must be positive and finite (declare a diameter for whole-space X)");
  }
  if (!(constants_.M > 0.0)) throw ConfigError("ProblemSpec: M must be positive");
  if (constants_.sigma < 0.0) throw ConfigError("ProblemSpec: sigma must be nonnegative");
  if (constants_.mu < 0.0) throw ConfigError("ProblemSpec: mu must be nonnegative");
  if (constants_.L && !(*constants_.L > 0.0)) throw ConfigError("ProblemSpec: L must be positive");
}

Vector ProblemSpec::residual(const Vector& x, const Vector& y) const {
  return A_ * x + B_ * y - b_;
}

double ProblemSpec::objective(const Vector& x, const Vector& y) const {
  if (!theta1_->has_exact_expectation()) {
    throw Error("objective: theta1 has no exact expectation; supply a reference objective value");
  }
  return theta1_->value(x) + evaluate(theta2_, y);
}

Vector StackedW::flatten() const {
  Vector out(size());
  out << x, y, lambda;
  return out;
}

double StackedW::dot(const StackedW& other) const {
  return x.dot(other.x) + y.dot(other.y) + lambda.dot(other.lambda);
}

StackedW StackedW::operator-(const StackedW& other) const {
  return {x - other.x, y - other.y, lambda - other.lambda};
}

StackedW stack(const Vector& x, const Vector& y, const Vector& lambda) { return {x, y, lambda}; }

StackedW stack(const Vector& x, const Vector& y, const Vector& lambda, const ProblemSpec& spec) {
  if (x.size() != spec.d1()) throw DimensionError(dims_message("stack: x", x.size(), spec.d1()));
  if (y.size() != spec.d2()) throw DimensionError(dims_message("stack: y", y.size(), spec.d2()));
  if (lambda.size() != spec.m()) {
    throw DimensionError(dims_message("stack: lambda", lambda.size(), spec.m()));
  }
  return {x, y, lambda};
}

StackedW unstack(const Vector& flat, Index d1, Index d2, Index m) {
  if (flat.size() != d1 + d2 + m) {
    throw DimensionError(dims_message("unstack", flat.size(), d1 + d2 + m));
  }
  return {flat.head(d1), flat.segment(d1, d2), flat.tail(m)};
}

StackedW eval_F(const StackedW& w, const ProblemSpec& spec) {
  stack(w.x, w.y, w.lambda, spec);  // dimension check
  return {-(spec.A().transpose() * w.lambda), -(spec.B().transpose() * w.lambda),
          spec.residual(w.x, w.y)};
}

IterateState IterateState::initial(const Vector& x0, const Vector& y0, Index m) {
  IterateState s;
  s.x = x0;
  s.y = y0;
  s.lambda = Vector::Zero(m);
  s.k = 0;
  s.avg_x_shifted = Vector::Zero(x0.size());
  s.avg_x_aligned = Vector::Zero(x0.size());
  s.avg_y = Vector::Zero(y0.size());
  s.avg_lambda = Vector::Zero(m);
  return s;
}

void IterateState::advance(Vector x_next, Vector y_next, Vector lambda_next) {
  const double w = 1.0 / static_cast<double>(k + 1);
  avg_x_shifted += w * (x - avg_x_shifted);
  avg_x_aligned += w * (x_next - avg_x_aligned);
  avg_y += w * (y_next - avg_y);
  avg_lambda += w * (lambda_next - avg_lambda);
  x = std::move(x_next);
  y = std::move(y_next);
  lambda = std::move(lambda_next);
  ++k;
}

ErrRho err_rho(const Vector& x_bar, const Vector& y_bar, const ProblemSpec& spec,
               const ReferencePoint& reference, double rho) {
  if (!(rho > 0.0)) throw ConfigError("err_rho: rho must be positive");
  ErrRho e;
  e.gap = spec.objective(x_bar, y_bar) - reference.theta_star;
  e.feasibility = spec.residual(x_bar, y_bar).norm();
  e.value = e.gap + rho * e.feasibility;
  return e;
}

ErrRho err_rho(const Vector& x_bar, const Vector& y_bar, const ProblemSpec& spec,
               const Vector& x_star, const Vector& y_star, double rho) {
  ReferencePoint ref{x_star, y_star, spec.objective(x_star, y_star)};
  return err_rho(x_bar, y_bar, spec, ref, rho);
}

}  // namespace sadmm
