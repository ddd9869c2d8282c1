#pragma once

#include <string>
#include <variant>

#include <Eigen/Dense>

namespace sadmm {

// Catalog of deterministic terms theta2 with closed-form proximal maps.

/// weight * ||y||_1
struct L1Norm {
  double weight = 1.0;
};

/// (weight / 2) * ||y||^2
struct SquaredL2 {
  double weight = 1.0;
};

/// weight * sum_i max(0, 1 - y_i)
struct HingeSum {
  double weight = 1.0;
};

/// theta2 = 0; only the feasible set Y acts on y.
struct IndicatorOnly {};

using Regularizer = std::variant<L1Norm, SquaredL2, HingeSum, IndicatorOnly>;

double evaluate(const Regularizer& reg, const Eigen::VectorXd& y);
std::string name(const Regularizer& reg);

}  // namespace sadmm
