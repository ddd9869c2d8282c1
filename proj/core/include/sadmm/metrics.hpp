#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sadmm/solvers.hpp"
#include "sadmm/types.hpp"

namespace sadmm {

// ---------------------------------------------------------------------------
// Reference optimum
// ---------------------------------------------------------------------------

enum class ReferenceMethod { kkt_direct, long_deterministic_admm, grid_search };

std::string to_string(ReferenceMethod method);

struct ReferenceSolution {
  ReferencePoint point;
  std::optional<Vector> lambda_star;
  ReferenceMethod method = ReferenceMethod::kkt_direct;
  double certified_tolerance = 0.0;  ///< bound on ||Ax* + By* - b||
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  std::size_t iterations = 0;  ///< ADMM steps, 0 for the direct solve
};

struct ReferenceOptions {
  double tolerance = 1e-10;
  std::size_t max_iterations = 1'000'000;
  double beta = 1.0;  ///< penalty of the long deterministic run
  bool allow_kkt = true;
  InnerSolverOptions inner{1e-13, 100000};
};

/// KKT solve when theta1 and theta2 are quadratic and the solution lies in
/// X and Y; otherwise a long deterministic ADMM run.
ReferenceSolution compute_reference(const ProblemSpec& spec, const ReferenceOptions& options = {});

/// Direct solve of the KKT system; nullopt when theta1 or theta2 is not
/// quadratic, the system is singular, or the solution leaves X or Y.
std::optional<ReferenceSolution> kkt_reference(const ProblemSpec& spec);

/// Deterministic ADMM until the primal residual and beta||A'B(y_{k+1} - y_k)||
/// both fall below the tolerance. Throws when the budget runs out.
ReferenceSolution admm_reference(const ProblemSpec& spec, const ReferenceOptions& options = {});

struct GridSearchOptions {
  Vector center;             ///< defaults to 0
  double half_width = 4.0;
  int points_per_axis = 41;  ///< odd, so the center is on the grid
  double resolution = 1e-4;  ///< stop once the grid spacing is this fine
};

/// Brute-force minimization over x for d1 <= 2 with square invertible B,
/// eliminating y = B^{-1}(b - Ax). Coarse-to-fine around the incumbent.
ReferenceSolution grid_search_reference(const ProblemSpec& spec, const GridSearchOptions& options = {});

/// ||B(y0 - y*)||.
double dyb(const ProblemSpec& spec, const Vector& y0, const Vector& y_star);

// ---------------------------------------------------------------------------
// Replication statistics and rate fits
// ---------------------------------------------------------------------------

/// Pointwise mean, sample standard deviation and standard error.
struct ExpectationCurve {
  std::vector<std::size_t> t;
  std::vector<double> mean;
  std::vector<double> stddev;
  std::vector<double> stderr_;
};

using RowSelector = std::function<double(const TrajectoryRow&)>;

/// Err_rho under the given averaging.
RowSelector select_err_rho(Averaging averaging);

ExpectationCurve estimate_expectation(const std::vector<Trajectory>& trajectories,
                                      const std::vector<std::size_t>& t_grid,
                                      const RowSelector& select);

/// Same over raw curves: curves[r][j] is replication r at t_grid[j].
ExpectationCurve estimate_expectation(const std::vector<std::vector<double>>& curves,
                                      const std::vector<std::size_t>& t_grid);

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::pair<double, double> window{0.0, 0.0};
  int n_points = 0;
};

/// OLS of log(value) on log(t) over the points with t in [window.first, window.second].
RateFit fit_rate(const std::vector<double>& t, const std::vector<double>& values,
                 std::pair<double, double> window);

/// n geometrically spaced integers in [lo, hi], deduplicated, endpoints included.
std::vector<std::size_t> geometric_grid(std::size_t lo, std::size_t hi, int n);

/// [t_max / 100, t_max].
std::pair<double, double> default_fit_window(std::size_t t_max);

// ---------------------------------------------------------------------------
// Rate bounds
// ---------------------------------------------------------------------------

/// Constants entering the bounds; dyb = ||B(y0 - y*)||.
struct BoundInputs {
  double D_X = 0.0;
  double M = 0.0;
  double sigma = 0.0;
  double mu = 0.0;
  double L = 0.0;
  double beta = 1.0;
  double rho = 1.0;
  double dyb = 0.0;
};

BoundInputs bound_inputs(const ProblemSpec& spec, const SolverConfig& cfg, double dyb);

double m1(double t, const BoundInputs& in);  ///< sqrt(2) D_X M / sqrt(t)
double m2(double t, const BoundInputs& in);  ///< (beta dyb^2 + rho^2/beta) / (2t)
double convex_bound(double t, const BoundInputs& in);
double strongly_convex_bound(double t, const BoundInputs& in);
double smooth_bound(double t, const BoundInputs& in);
double deterministic_bound(double t, const BoundInputs& in);

struct HighProbResult {
  double threshold = 0.0;  ///< (1 + Omega/2 + 2 sqrt(2 Omega)) M1(t) + M2(t)
  double exceed_fraction = 0.0;
  double bound = 0.0;      ///< 2 exp(-Omega)
  double slack = 0.0;      ///< 1.96 sqrt(0.25 / R)
  std::size_t replications = 0;
  bool pass = false;
};

/// `values` holds Err_rho(u_t) of each replication at one t.
HighProbResult high_prob_check(const std::vector<double>& values, double t, double omega,
                               const ProblemSpec& spec, const SolverConfig& cfg, double dyb);

}  // namespace sadmm
