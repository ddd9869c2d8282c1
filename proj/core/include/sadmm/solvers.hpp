#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sadmm/oracle.hpp"
#include "sadmm/prox.hpp"
#include "sadmm/types.hpp"

namespace sadmm {

enum class Variant { deterministic, linearized, stochastic };

enum class ScheduleKind {
  convex,           ///< eta_k = D_X / (M sqrt(2k))
  strongly_convex,  ///< eta_k = 1 / (k mu)
  smooth,           ///< eta_k = 1 / (L + sigma sqrt(2k) / D_X)
  constant,         ///< eta_k = eta
};

struct Schedule {
  ScheduleKind kind = ScheduleKind::convex;
  double eta = 1.0;  ///< used by `constant` only
};

/// Which ergodic average Err_rho is reported against by default.
enum class Averaging {
  eq2_shifted,   ///< x over 0..t-1, y over 1..t
  eq10_aligned,  ///< x and y over 1..t
};

std::string to_string(Variant v);
std::string to_string(ScheduleKind k);
std::string to_string(Averaging a);
Variant parse_variant(const std::string& text);
ScheduleKind parse_schedule(const std::string& text);
Averaging parse_averaging(const std::string& text);

struct SolverConfig {
  Variant variant = Variant::stochastic;
  double beta = 1.0;
  Schedule schedule;

  /// Linearized variant: either an explicit PSD G or a scalar r giving
  /// G = r I - beta A'A.
  std::optional<Matrix> linearized_G;
  std::optional<double> linearized_r;

  std::size_t t_max = 1000;
  double rho = 1.0;
  std::optional<Averaging> averaging;  ///< unset: shifted, aligned for `smooth`

  bool check_invariants = false;
  int probe_count = 5;     ///< probe points per step for the x and one-step checks
  int y_probe_count = 20;  ///< y-optimality probes per step

  YUpdateMode y_update = YUpdateMode::automatic;
  InnerSolverOptions inner;

  std::optional<Vector> x0;  ///< defaults to 0
  std::optional<Vector> y0;  ///< defaults to 0

  /// Iterations to record; empty records every iteration.
  std::vector<std::size_t> record_at;
  std::uint64_t probe_seed = 0;
  std::uint64_t probe_stream = 0;
};

Averaging effective_averaging(const SolverConfig& cfg);

/// eta_index for index >= 1; step k -> k+1 uses index k+1.
double step_size(const Schedule& schedule, const ProblemSpec& spec, std::size_t index);

/// Throws ConfigError when the schedule needs a constant the spec lacks,
/// or the linearized G is not PSD.
void validate(const SolverConfig& cfg, const ProblemSpec& spec);

/// Quantities of one step that the invariant checks need.
struct StepRecord {
  double eta = std::numeric_limits<double>::quiet_NaN();
  Vector g;                      ///< sampled subgradient (stochastic)
  std::optional<Vector> delta;   ///< g - theta1'(x_k)
};

/// The three ADMM loops over one problem, with the factorization caches of
/// their subproblems. Confined to one run.
class AdmmSolver {
 public:
  AdmmSolver(const ProblemSpec& spec, SolverConfig cfg);

  IterateState initial_state() const;

  /// Exact x-minimization, then the y-update and the multiplier step.
  IterateState step_deterministic(const IterateState& state);

  /// x-update with the extra 0.5||x - x_k||_G^2 term.
  IterateState step_linearized(const IterateState& state);

  /// Sampled subgradient in place of theta1 plus ||x - x_k||^2 / (2 eta_{k+1}).
  IterateState step_stochastic(const IterateState& state, StochasticOracle& oracle,
                               StepRecord* record = nullptr);

  /// Dispatches on cfg.variant.
  IterateState step(const IterateState& state, StochasticOracle* oracle,
                    StepRecord* record = nullptr);

  const ProblemSpec& spec() const { return *spec_; }
  const SolverConfig& config() const { return cfg_; }

 private:
  Vector y_update(const Vector& x_next, const IterateState& state);
  IterateState finish(const IterateState& state, Vector x_next);
  Vector exact_x_update(const IterateState& state, const Matrix* G);

  const ProblemSpec* spec_;
  SolverConfig cfg_;
  Matrix AtA_;
  XSubproblemSolver x_solver_;
  YSubproblemSolver y_solver_;
  std::optional<QuadraticSubproblem> exact_sub_;
  std::optional<Matrix> G_;
};

IterateState step_deterministic(const IterateState& state, const ProblemSpec& spec,
                                const SolverConfig& cfg);
IterateState step_linearized(const IterateState& state, const ProblemSpec& spec,
                             const SolverConfig& cfg);
IterateState step_stochastic(const IterateState& state, const ProblemSpec& spec,
                             const SolverConfig& cfg, StochasticOracle& oracle,
                             StepRecord* record = nullptr);

// ---------------------------------------------------------------------------
// Per-iteration invariants
// ---------------------------------------------------------------------------

/// Both sides of the per-step variational bound of stochastic ADMM at a
/// probe w = (x, y, lambda):
///
///   theta1(x_k) + theta2(y_{k+1}) - theta(u) + (w_{k+1} - w)'F(w_{k+1})
///     <= eta ||g||^2 / 2 + (||x_k - x||^2 - ||x_{k+1} - x||^2) / (2 eta)
///        + (beta/2)(||Ax + By_k - b||^2 - ||Ax + By_{k+1} - b||^2)
///        + <delta, x - x_k> + (||lambda - lambda_k||^2 - ||lambda - lambda_{k+1}||^2) / (2 beta)
///
/// `scale` is the sum of absolute values of all terms.
struct Lemma1Terms {
  double lhs = 0.0;
  double rhs = 0.0;
  double scale = 0.0;
  double residual() const { return lhs - rhs; }
};

Lemma1Terms lemma1_terms(const IterateState& prev, const IterateState& next,
                         const StackedW& probe, const Vector& g, const Vector& delta, double eta,
                         const ProblemSpec& spec, double beta);

/// Signed LHS - RHS; eta is taken from the schedule at index prev.k + 1.
double lemma1_check(const IterateState& prev, const IterateState& next, const StackedW& probe,
                    const Vector& g, const Vector& delta, const ProblemSpec& spec,
                    const SolverConfig& cfg);

/// ||lambda_{k+1} - lambda_k + beta(Ax_{k+1} + By_{k+1} - b)||.
double dual_identity_residual(const IterateState& prev, const IterateState& next,
                              const ProblemSpec& spec, double beta);

/// theta2(y_{k+1}) - theta2(y') + <y_{k+1} - y', -B'lambda_{k+1}>; <= 0 at a solution.
double y_optimality_residual(const IterateState& next, const Vector& y_probe,
                             const ProblemSpec& spec);

struct InvariantTolerances {
  double dual_identity = 16.0 * std::numeric_limits<double>::epsilon();  ///< relative
  double y_optimality = 1e-9;
  double x_optimality = 1e-8;  ///< variational inequality >= -tol
  double three_points = 1e-9;
  double lemma1 = 1e-9;  ///< relative to Lemma1Terms::scale (floored at 1)
};

/// Worst residual of each check at one step; NaN when not applicable.
struct InvariantResiduals {
  double dual_identity = std::numeric_limits<double>::quiet_NaN();
  double y_optimality = std::numeric_limits<double>::quiet_NaN();
  double x_optimality = std::numeric_limits<double>::quiet_NaN();
  double three_points = std::numeric_limits<double>::quiet_NaN();
  double lemma1 = std::numeric_limits<double>::quiet_NaN();
};

struct InvariantViolation {
  std::size_t k = 0;
  std::string check;
  double value = 0.0;
  double tolerance = 0.0;
};

/// Evaluates every applicable invariant for the step prev -> next using
/// random probes from a stream separate from the oracle's.
class InvariantChecker {
 public:
  InvariantChecker(const ProblemSpec& spec, const SolverConfig& cfg,
                   InvariantTolerances tolerances = {});

  InvariantResiduals check(const IterateState& prev, const IterateState& next,
                           const StepRecord& record, std::vector<InvariantViolation>* violations);

 private:
  const ProblemSpec* spec_;
  const SolverConfig* cfg_;
  InvariantTolerances tol_;
  XSubproblemSolver gradient_helper_;
};

// ---------------------------------------------------------------------------
// Driver
// ---------------------------------------------------------------------------

struct TrajectoryRow {
  std::size_t k = 0;
  double eta = std::numeric_limits<double>::quiet_NaN();
  ErrRho eq2;   ///< shifted averages
  ErrRho eq10;  ///< aligned averages
  double step_ms = 0.0;
  InvariantResiduals invariants;
};

struct Trajectory {
  std::vector<TrajectoryRow> rows;
  std::vector<InvariantViolation> violations;
  bool invariants_checked = false;
  InvariantResiduals worst;  ///< max over all checked steps

  /// Row recorded at iteration k, if any.
  const TrajectoryRow* at(std::size_t k) const;
};

struct RunResult {
  Trajectory trajectory;
  IterateState final_state;
  std::optional<std::string> error;  ///< set when the run stopped early
};

/// Runs cfg.t_max steps. Gap and Err_rho columns are NaN without a
/// reference; feasibility is always reported. Errors stop the run and are
/// returned alongside the trajectory recorded so far.
RunResult run(const ProblemSpec& spec, const SolverConfig& cfg, StochasticOracle* oracle = nullptr,
              const std::optional<ReferencePoint>& reference = std::nullopt);

}  // namespace sadmm
