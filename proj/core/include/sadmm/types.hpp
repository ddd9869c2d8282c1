#pragma once

#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "sadmm/regularizer.hpp"
#include "sadmm/rng.hpp"

namespace sadmm {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Feasible sets
// ---------------------------------------------------------------------------

/// R^d. `declared_diameter` stands in for D_X inside stepsize formulas only.
struct WholeSpace {
  double declared_diameter = std::numeric_limits<double>::infinity();
};

/// Origin-centered Euclidean ball.
struct Ball {
  double radius = 1.0;
};

/// Axis-aligned box lower <= x <= upper.
struct Box {
  Vector lower;
  Vector upper;
};

using FeasibleSet = std::variant<WholeSpace, Ball, Box>;

/// sup ||a - b|| over the set: 2R for a ball, the diagonal length for a box,
/// the declared value for the whole space.
double diameter(const FeasibleSet& set);
bool contains(const FeasibleSet& set, const Vector& x, double tol = 0.0);
std::string describe(const FeasibleSet& set);
void check_set_dimension(const FeasibleSet& set, Index dim, const char* what);

/// Draws a point of the set. Bounded sets are sampled uniformly; the whole
/// space is sampled as an isotropic Gaussian of std `scale` around `center`.
Vector sample_point(const FeasibleSet& set, Index dim, CounterRng& rng,
                    const Vector& center, double scale);

// ---------------------------------------------------------------------------
// theta1 handles
// ---------------------------------------------------------------------------

/// f(x) = 0.5 x'Hx + g'x + c.
struct QuadraticForm {
  Matrix hessian;
  Vector linear;
  double constant = 0.0;

  double value(const Vector& x) const {
    return 0.5 * x.dot(hessian * x) + linear.dot(x) + constant;
  }
  Vector gradient(const Vector& x) const { return hessian * x + linear; }
};

/// Deterministic convex function with exact value and subgradient.
class ConvexObjective {
 public:
  virtual ~ConvexObjective() = default;

  virtual Index dim() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector subgradient(const Vector& x) const = 0;

  /// Present when the function is exactly a quadratic.
  virtual std::optional<QuadraticForm> quadratic_form() const { return std::nullopt; }

  /// argmin_x f(x) + (c/2)||x - v||^2 over R^d, when computable exactly.
  virtual std::optional<Vector> prox(const Vector& /*v*/, double /*c*/) const {
    return std::nullopt;
  }

  /// f(x) = sum_i f_i(x_i); lets box-constrained prox reduce to a clamp.
  virtual bool separable() const { return false; }

  virtual std::string name() const = 0;
};

/// One oracle draw: theta1(x, xi) and theta1'(x, xi).
struct SubgradientSample {
  double value = 0.0;
  Vector subgradient;
};

/// Stochastic convex function theta1(x, xi) whose exact expectation is
/// exposed through the ConvexObjective interface.
class StochasticModel : public ConvexObjective {
 public:
  /// Draws xi from `rng` and evaluates the sampled value and subgradient.
  virtual SubgradientSample sample(const Vector& x, CounterRng& rng) const = 0;

  /// True when ||theta1'(x, xi)|| is bounded almost surely on the feasible
  /// set, which certifies the exponential-moment assumption.
  virtual bool bounded_noise() const = 0;

  /// False for models whose expectation is only known by simulation.
  virtual bool has_exact_expectation() const { return true; }
};

/// Realized oracle output; `delta` = g - theta1'(x) when the exact
/// subgradient is available.
struct NoiseSample {
  Vector g;
  double value = 0.0;
  std::optional<Vector> delta;
};

// ---------------------------------------------------------------------------
// Problem specification
// ---------------------------------------------------------------------------

/// Structural constants used by the stepsize schedules and rate bounds.
struct ProblemConstants {
  double M = 1.0;                      ///< E||theta1'(x, xi)||^2 <= M^2
  double sigma = 0.0;                  ///< E||theta1'(x, xi) - theta1'(x)||^2 <= sigma^2
  double mu = 0.0;                     ///< strong convexity modulus of theta1
  std::optional<double> L;             ///< gradient Lipschitz constant, if smooth
  std::optional<double> dyb_hint;      ///< optional ||B(y0 - y*)||
};

/// min E theta1(x, xi) + theta2(y)  s.t.  Ax + By = b, x in X, y in Y.
///
/// Immutable after construction; safe to share across replications.
class ProblemSpec {
 public:
  ProblemSpec(std::shared_ptr<const StochasticModel> theta1, Regularizer theta2, Matrix A,
              Matrix B, Vector b, FeasibleSet X, FeasibleSet Y, ProblemConstants constants);

  const StochasticModel& theta1() const { return *theta1_; }
  const std::shared_ptr<const StochasticModel>& theta1_ptr() const { return theta1_; }
  const Regularizer& theta2() const { return theta2_; }
  const Matrix& A() const { return A_; }
  const Matrix& B() const { return B_; }
  const Vector& b() const { return b_; }
  const FeasibleSet& X() const { return X_; }
  const FeasibleSet& Y() const { return Y_; }
  const ProblemConstants& constants() const { return constants_; }

  Index d1() const { return A_.cols(); }
  Index d2() const { return B_.cols(); }
  Index m() const { return b_.size(); }

  /// D_X, taken from the set descriptor.
  double diameter_x() const { return diameter(X_); }

  /// Ax + By - b.
  Vector residual(const Vector& x, const Vector& y) const;

  /// theta(u) = theta1(x) + theta2(y) with the exact expectation of theta1.
  double objective(const Vector& x, const Vector& y) const;

 private:
  std::shared_ptr<const StochasticModel> theta1_;
  Regularizer theta2_;
  Matrix A_;
  Matrix B_;
  Vector b_;
  FeasibleSet X_;
  FeasibleSet Y_;
  ProblemConstants constants_;
};

// ---------------------------------------------------------------------------
// Stacked vectors and the monotone operator F
// ---------------------------------------------------------------------------

/// w = (x, y, lambda).
struct StackedW {
  Vector x;
  Vector y;
  Vector lambda;

  Index size() const { return x.size() + y.size() + lambda.size(); }
  Vector flatten() const;
  double dot(const StackedW& other) const;
  StackedW operator-(const StackedW& other) const;
};

StackedW stack(const Vector& x, const Vector& y, const Vector& lambda, const ProblemSpec& spec);
StackedW stack(const Vector& x, const Vector& y, const Vector& lambda);
StackedW unstack(const Vector& flat, Index d1, Index d2, Index m);

/// F(w) = (-A'lambda, -B'lambda, Ax + By - b).
StackedW eval_F(const StackedW& w, const ProblemSpec& spec);

// ---------------------------------------------------------------------------
// Iterates and ergodic averages
// ---------------------------------------------------------------------------

/// (x_k, y_k, lambda_k) with running means for both averaging conventions:
/// the shifted form averages x over 0..k-1 and y, lambda over 1..k; the
/// aligned form averages x over 1..k.
struct IterateState {
  Vector x;
  Vector y;
  Vector lambda;
  std::size_t k = 0;

  Vector avg_x_shifted;
  Vector avg_x_aligned;
  Vector avg_y;
  Vector avg_lambda;

  /// Starts at (x0, y0, 0) with empty averages.
  static IterateState initial(const Vector& x0, const Vector& y0, Index m);

  /// Folds x_k (the outgoing iterate) and the new (x, y, lambda) into the
  /// averages and advances k.
  void advance(Vector x_next, Vector y_next, Vector lambda_next);

  StackedW w() const { return {x, y, lambda}; }
};

// ---------------------------------------------------------------------------
// Optimality measure
// ---------------------------------------------------------------------------

/// Reference optimum u* and theta(u*).
struct ReferencePoint {
  Vector x;
  Vector y;
  double theta_star = 0.0;
};

/// Err_rho(u) = [theta(u) - theta(u*)] + rho ||Ax + By - b||, with both parts.
struct ErrRho {
  double gap = 0.0;
  double feasibility = 0.0;
  double value = 0.0;
};

ErrRho err_rho(const Vector& x_bar, const Vector& y_bar, const ProblemSpec& spec,
               const ReferencePoint& reference, double rho);

/// Computes theta(u*) from the exact expectation; throws when the spec lacks it.
ErrRho err_rho(const Vector& x_bar, const Vector& y_bar, const ProblemSpec& spec,
               const Vector& x_star, const Vector& y_star, double rho);

}  // namespace sadmm
