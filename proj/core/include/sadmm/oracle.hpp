#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "sadmm/types.hpp"

namespace sadmm {

// ---------------------------------------------------------------------------
// Deterministic base functions
// ---------------------------------------------------------------------------

/// 0.5 x'Hx + g'x + c
class QuadraticObjective final : public ConvexObjective {
 public:
  explicit QuadraticObjective(QuadraticForm form);

  Index dim() const override { return form_.linear.size(); }
  double value(const Vector& x) const override { return form_.value(x); }
  Vector subgradient(const Vector& x) const override { return form_.gradient(x); }
  std::optional<QuadraticForm> quadratic_form() const override { return form_; }
  std::optional<Vector> prox(const Vector& v, double c) const override;
  bool separable() const override;
  std::string name() const override { return "quadratic"; }

 private:
  QuadraticForm form_;
};

/// weight * ||x||_1
class L1Objective final : public ConvexObjective {
 public:
  L1Objective(Index dim, double weight) : dim_(dim), weight_(weight) {}

  Index dim() const override { return dim_; }
  double value(const Vector& x) const override { return weight_ * x.lpNorm<1>(); }
  Vector subgradient(const Vector& x) const override;
  std::optional<Vector> prox(const Vector& v, double c) const override;
  bool separable() const override { return true; }
  std::string name() const override { return "l1"; }

 private:
  Index dim_;
  double weight_;
};

// ---------------------------------------------------------------------------
// Oracle models
// ---------------------------------------------------------------------------

/// 0.5 (a'x - target)^2
struct LeastSquaresTerm {
  Vector a;
  double target = 0.0;
};

/// max(0, 1 - label * a'x)
struct HingeTerm {
  Vector a;
  double label = 1.0;
};

using SumComponent = std::variant<LeastSquaresTerm, HingeTerm>;

/// theta1(x) = (1/n) sum_i [f_i(x) + (ridge/2)||x||^2]; xi draws `minibatch`
/// indices uniformly with replacement.
class FiniteSumModel final : public StochasticModel {
 public:
  FiniteSumModel(std::vector<SumComponent> components, double ridge = 0.0, int minibatch = 1);

  Index dim() const override { return dim_; }
  double value(const Vector& x) const override;
  Vector subgradient(const Vector& x) const override;
  std::optional<QuadraticForm> quadratic_form() const override { return quadratic_; }
  std::optional<Vector> prox(const Vector& v, double c) const override;
  std::string name() const override { return "finite-sum"; }

  SubgradientSample sample(const Vector& x, CounterRng& rng) const override;
  bool bounded_noise() const override { return true; }

  std::size_t size() const { return components_.size(); }
  const std::vector<SumComponent>& components() const { return components_; }
  double ridge() const { return ridge_; }
  int minibatch() const { return minibatch_; }

  /// Value and subgradient of the i-th component (ridge included).
  SubgradientSample component(std::size_t i, const Vector& x) const;

 private:
  std::optional<Vector> hinge_prox(const Vector& v, double c) const;

  std::vector<SumComponent> components_;
  double ridge_;
  int minibatch_;
  Index dim_;
  bool all_least_squares_ = true;
  bool all_hinge_ = true;
  std::optional<QuadraticForm> quadratic_;
};

enum class NoiseKind {
  none,      ///< exact subgradient
  gaussian,  ///< N(0, sigma^2/d I)
  uniform,   ///< iid uniform coordinates with E||noise||^2 = sigma^2
};

/// theta1'(x, xi) = base'(x) + noise, noise independent across calls.
class AdditiveNoiseModel final : public StochasticModel {
 public:
  AdditiveNoiseModel(std::shared_ptr<const ConvexObjective> base, NoiseKind kind, double sigma);

  Index dim() const override { return base_->dim(); }
  double value(const Vector& x) const override { return base_->value(x); }
  Vector subgradient(const Vector& x) const override { return base_->subgradient(x); }
  std::optional<QuadraticForm> quadratic_form() const override { return base_->quadratic_form(); }
  std::optional<Vector> prox(const Vector& v, double c) const override { return base_->prox(v, c); }
  bool separable() const override { return base_->separable(); }
  std::string name() const override;

  SubgradientSample sample(const Vector& x, CounterRng& rng) const override;
  bool bounded_noise() const override { return kind_ != NoiseKind::gaussian; }

  NoiseKind kind() const { return kind_; }
  double sigma() const { return sigma_; }
  const ConvexObjective& base() const { return *base_; }

 private:
  std::shared_ptr<const ConvexObjective> base_;
  NoiseKind kind_;
  double sigma_;
};

NoiseKind parse_noise_kind(const std::string& text);
std::string to_string(NoiseKind kind);

// ---------------------------------------------------------------------------
// Oracle
// ---------------------------------------------------------------------------

/// Seeded first-order oracle for one replication. Draw number c of stream r
/// under seed s is a pure function of (s, r, c), so clones replay exactly.
class StochasticOracle {
 public:
  StochasticOracle(std::shared_ptr<const StochasticModel> model, std::uint64_t seed,
                   std::uint64_t stream);

  /// g = theta1'(x, xi) and, when available, delta = g - theta1'(x).
  NoiseSample sample_subgradient(const Vector& x);

  const StochasticModel& model() const { return *model_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }
  std::uint64_t calls() const { return calls_; }

 private:
  std::shared_ptr<const StochasticModel> model_;
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t calls_ = 0;
};

/// Monte Carlo estimate with a normal-approximation 95% half-width.
struct MomentEstimate {
  double mean = 0.0;
  double radius = 0.0;
};

struct AssumptionReport {
  std::size_t n_samples = 0;
  std::size_t n_points = 0;
  MomentEstimate second_moment;  ///< sup over sampled x of E||g||^2
  MomentEstimate variance;       ///< sup over sampled x of E||g - theta1'(x)||^2
  double max_norm = 0.0;         ///< largest ||g|| observed
  double declared_M2 = 0.0;
  double declared_sigma2 = 0.0;
  bool M_violated = false;      ///< estimate exceeds M^2 beyond its confidence radius
  bool sigma_violated = false;  ///< estimate exceeds sigma^2 beyond its confidence radius
};

/// Empirical check of the second-moment and variance bounds at `n_points`
/// points of X (the first is the set's center).
AssumptionReport validate_assumptions(const StochasticModel& model, const FeasibleSet& X,
                                      const ProblemConstants& declared, std::size_t n_samples,
                                      std::uint64_t seed, std::size_t n_points = 10);

}  // namespace sadmm
