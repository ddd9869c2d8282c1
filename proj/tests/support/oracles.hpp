#pragma once

// Brute-force reference computations used to check the library. Nothing
// here calls into sadmm's solvers.

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include <Eigen/Dense>

#include "sadmm/oracle.hpp"
#include "sadmm/types.hpp"

namespace oracles {

// Coarse-to-fine grid search of a convex 1-D function on [lo, hi].
inline double grid_argmin_1d(const std::function<double(double)>& f, double lo, double hi,
                             double resolution = 1e-10) {
  double best = lo;
  double best_val = std::numeric_limits<double>::infinity();
  for (;;) {
    const int n = 201;
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double x = lo + i * h;
      const double v = f(x);
      if (v < best_val) {
        best_val = v;
        best = x;
      }
    }
    if (h <= resolution) return best;
    lo = best - 2 * h;
    hi = best + 2 * h;
  }
}

inline std::array<double, 2> grid_argmin_2d(const std::function<double(double, double)>& f,
                                            std::array<double, 2> lo, std::array<double, 2> hi,
                                            double resolution = 1e-6) {
  std::array<double, 2> best{lo[0], lo[1]};
  double best_val = std::numeric_limits<double>::infinity();
  for (;;) {
    const int n = 81;
    const double h0 = (hi[0] - lo[0]) / (n - 1);
    const double h1 = (hi[1] - lo[1]) / (n - 1);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double a = lo[0] + i * h0;
        const double b = lo[1] + j * h1;
        const double v = f(a, b);
        if (v < best_val) {
          best_val = v;
          best = {a, b};
        }
      }
    }
    if (std::max(h0, h1) <= resolution) return best;
    lo = {best[0] - 2 * h0, best[1] - 2 * h1};
    hi = {best[0] + 2 * h0, best[1] + 2 * h1};
  }
}

// Plain loops, no Eigen expression templates.
inline std::vector<double> matvec(const Eigen::MatrixXd& A, const std::vector<double>& x) {
  std::vector<double> out(static_cast<std::size_t>(A.rows()), 0.0);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) out[i] += A(i, j) * x[static_cast<std::size_t>(j)];
  }
  return out;
}

inline std::vector<double> matvec_t(const Eigen::MatrixXd& A, const std::vector<double>& x) {
  std::vector<double> out(static_cast<std::size_t>(A.cols()), 0.0);
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) out[j] += A(i, j) * x[static_cast<std::size_t>(i)];
  }
  return out;
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

// Scaled accumulation, independent of Eigen's norm.
inline double norm2(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc = std::hypot(acc, x);
  return acc;
}

// theta1 = 0.5 x'Hx + g'x with an exact-gradient oracle.
inline std::shared_ptr<const sadmm::StochasticModel> exact_quadratic(const Eigen::MatrixXd& H,
                                                                     const Eigen::VectorXd& g,
                                                                     double constant = 0.0) {
  auto base = std::make_shared<sadmm::QuadraticObjective>(sadmm::QuadraticForm{H, g, constant});
  return std::make_shared<sadmm::AdditiveNoiseModel>(base, sadmm::NoiseKind::none, 0.0);
}

// The 1-D instance: theta1 = x^2/2, theta2 = y^2/2, x - y = 0.
inline sadmm::ProblemSpec scalar_instance(sadmm::FeasibleSet X = sadmm::Ball{10.0}) {
  sadmm::ProblemConstants c;
  c.M = 10.0;
  c.L = 1.0;
  c.mu = 1.0;
  return sadmm::ProblemSpec(exact_quadratic(Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1)),
                            sadmm::SquaredL2{1.0}, Eigen::MatrixXd::Identity(1, 1),
                            -Eigen::MatrixXd::Identity(1, 1), Eigen::VectorXd::Zero(1), X,
                            sadmm::WholeSpace{}, c);
}

}  // namespace oracles
