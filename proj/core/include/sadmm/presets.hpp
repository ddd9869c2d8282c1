#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "sadmm/oracle.hpp"
#include "sadmm/types.hpp"

namespace sadmm {

/// How theta1 is sampled.
enum class OracleKind {
  finite_sum,         ///< uniform sample index (or minibatch) of the data
  additive_gaussian,  ///< exact gradient + N(0, sigma^2/d I)
  additive_uniform,   ///< exact gradient + bounded uniform noise
  exact,              ///< exact gradient, sigma = 0
};

std::string to_string(OracleKind kind);
OracleKind parse_oracle_kind(const std::string& text);

/// Synthetic generator parameters. Defaults are our own choices.
struct PresetParams {
  std::string name = "lasso-split";
  int dim = 20;             ///< d1 (and d2 for the split presets)
  int samples = 200;        ///< n
  double condition = 100.0; ///< spread of the empirical Hessian spectrum
  double noise = 0.1;       ///< label noise std of the generated targets
  double lambda_reg = 0.1;
  double mu = 0.1;          ///< strongly-convex-lasso ridge
  double radius = 2.0;      ///< X is the ball of this radius
  std::uint64_t seed = 1;   ///< data seed
  OracleKind oracle = OracleKind::finite_sum;
  double sigma = 1.0;       ///< additive noise level
  int minibatch = 1;
  int edges = 0;            ///< fused-lasso-graph: 0 gives a chain, else that many random edges
};

struct Preset {
  PresetParams params;
  std::shared_ptr<const ProblemSpec> spec;
  std::string description;
};

std::vector<std::string> preset_names();

/// Builds the problem and its certified constants. Same params, same bytes.
Preset make_preset(const PresetParams& params);

/// Stable text rendering of the params, used to key cached references.
std::string fingerprint(const PresetParams& params);

/// Least-squares rows with the empirical Hessian spectrum log-spaced over
/// [1/condition, 1] and a sparse planted solution.
struct RegressionData {
  Matrix a;  ///< n x d, one sample per row
  Vector target;
  Vector x_true;
};

RegressionData make_regression_data(int dim, int samples, double condition, double noise,
                                    std::uint64_t seed);

}  // namespace sadmm
