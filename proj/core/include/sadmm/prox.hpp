#pragma once

#include <optional>

#include "sadmm/types.hpp"

namespace sadmm {

/// Euclidean projection onto a ball, box, or the whole space.
Vector project(const Vector& z, const FeasibleSet& set);

/// argmin_{y in Y} theta2(y) + (c/2)||y - z||^2 for a catalog entry.
///
/// Soft-thresholding for l1, shrinkage for squared-l2, the piecewise hinge
/// map (ties go to the kink y = 1) and plain projection for the indicator.
Vector prox_theta2(const Vector& z, double c, const Regularizer& reg,
                   const FeasibleSet& Y = WholeSpace{});

/// argmin_{x in X} f(x) + (c/2)||x - v||^2 using f's whole-space prox.
/// Balls are handled by a search on the multiplier of ||x|| <= R; boxes
/// need a separable f.
Vector prox_over_set(const ConvexObjective& f, const Vector& v, double c, const FeasibleSet& X);

struct InnerSolverOptions {
  double tolerance = 1e-10;  ///< on the projected-gradient norm
  int max_iterations = 10000;
};

/// Inner loop failure; carries the last projected-gradient norm.
class InnerSolverError : public Error {
 public:
  InnerSolverError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// argmin_{x in X} 0.5 x'(P + shift I)x - q'x for a fixed PSD matrix P.
///
/// When P is a multiple of the identity the answer is the projection of the
/// unconstrained minimizer. Otherwise the unconstrained minimizer comes from
/// a Cholesky factor cached per shift; if it leaves X, projected gradient
/// iterations from its projection run to the declared tolerance.
class QuadraticSubproblem {
 public:
  QuadraticSubproblem(Matrix P, FeasibleSet X, InnerSolverOptions options = {});

  Vector solve(const Vector& q, double shift);

  bool isotropic() const { return isotropic_; }
  const Matrix& P() const { return P_; }
  int last_inner_iterations() const { return last_inner_iterations_; }
  int factorizations() const { return factorizations_; }

 private:
  void refactor(double shift);

  Matrix P_;
  FeasibleSet X_;
  InnerSolverOptions options_;
  bool isotropic_ = false;
  double iso_scale_ = 0.0;
  double p_max_eig_ = 0.0;
  std::optional<double> cached_shift_;
  Eigen::LDLT<Matrix> factor_;
  int last_inner_iterations_ = 0;
  int factorizations_ = 0;
};

/// The linearized x-update of stochastic ADMM:
///
///   argmin_{x in X} <g, x> + (beta/2)||Ax + By_k - b - lambda_k/beta||^2
///                   + ||x - x_k||^2 / (2 eta).
///
/// A'A is cached; the factorization of (beta A'A + I/eta) is refreshed only
/// when eta moves.
class XSubproblemSolver {
 public:
  explicit XSubproblemSolver(const ProblemSpec& spec, InnerSolverOptions options = {});

  Vector solve(const Vector& g, const IterateState& state, double beta, double eta);

  /// Gradient at x of the smooth part <g, x> + (beta/2)||Ax + By_k - b - lambda_k/beta||^2.
  Vector smooth_gradient(const Vector& x, const Vector& g, const IterateState& state,
                         double beta) const;

  const QuadraticSubproblem& subproblem() const { return *sub_; }

 private:
  const ProblemSpec* spec_;
  InnerSolverOptions options_;
  Matrix AtA_;
  std::optional<double> beta_;
  std::optional<QuadraticSubproblem> sub_;
};

/// One-shot convenience wrapper around XSubproblemSolver.
Vector solve_x_subproblem(const Vector& g, const IterateState& state, const ProblemSpec& spec,
                          double beta, double eta);

/// <g(x*), x* - x> - s [D(x, u) - D(x, x*) - D(x*, u)] with D(a, b) = ||a - b||^2 / 2.
/// Nonpositive (up to roundoff) when x* minimizes l(x) + s D(x, u) over X.
double three_points_residual(const Vector& x_star, const Vector& u, const Vector& probe_x,
                             const Vector& g_at_xstar, double s);

bool three_points_check(const Vector& x_star, const Vector& u, const Vector& probe_x,
                        const Vector& g_at_xstar, double s, double tol = 1e-9);

/// How the y-update is carried out.
enum class YUpdateMode {
  automatic,  ///< prox when B is a scaled identity, inner solver otherwise
  prox,       ///< closed-form prox; requires B = s I
  inner,      ///< proximal-gradient inner loop for general B
};

/// The y-update argmin_{y in Y} theta2(y) + (beta/2)||Ax_{k+1} + By - b - lambda_k/beta||^2.
class YSubproblemSolver {
 public:
  YSubproblemSolver(const ProblemSpec& spec, YUpdateMode mode, InnerSolverOptions options = {});

  Vector solve(const Vector& x_next, const Vector& lambda, const Vector& y_start, double beta);

  bool uses_prox() const { return scale_.has_value(); }

 private:
  const ProblemSpec* spec_;
  InnerSolverOptions options_;
  std::optional<double> scale_;  // s when B = s I
  double btb_max_eig_ = 0.0;
};

/// s when B is exactly s times the identity.
std::optional<double> scaled_identity(const Matrix& B);

}  // namespace sadmm
